//! End-to-end flows: dataset synthesis, training, inference and
//! post-processing.

pub mod dataset;
pub mod filters;
pub mod infer;
pub mod train;

pub use dataset::{
    prepare_ground_truth, preprocess_corpus, training_planes, DatasetArchive, ManifestEntry, PatchColor,
    PreprocessConfig,
};
pub use filters::{bilateral_filter, nlm_denoise, sharpen, DenoiseParams};
pub use infer::{enhance, post_process, upscale, PostProcessMode};
pub use train::{
    checkpoint_path, evaluate_loss, images_to_tensor, loss_curve_csv, resume, split_pairs, tensor_to_image, train,
    train_step_pairs, train_with, EpochRecord, Split, TrainConfig, TrainOutcome, LOSS_CURVE_FILE, LOSS_CURVE_HEADER,
};
