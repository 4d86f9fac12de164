//! Mini-batch training over a [`DatasetArchive`] with per-epoch checkpoints
//! and a CSV loss curve.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::DatasetArchive;
use crate::error::{Error, Result};
use crate::interp::ScaleMethod;
use crate::nn::{mse_loss, train_step, Checkpoint, Network, Optimizer, OptimizerKind, Preset, Tensor, TrainingState};
use crate::raster::{PatchPair, RasterImage};

pub const LOSS_CURVE_FILE: &str = "loss_curve.csv";
pub const LOSS_CURVE_HEADER: &str = "epoch,train_mse,val_mse";

// Keeps the split independent of the weight-init and shuffle streams.
const SPLIT_SALT: u64 = 0x5eed_5917;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Degradation the archive was built with; recorded in checkpoints.
    pub degradation: ScaleMethod,
    pub preset: Preset,
    pub optimizer: OptimizerKind,
    pub leaky_slope: f32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            lr: 0.003,
            batch_size: 32,
            seed: 0,
            degradation: ScaleMethod::Bilinear,
            preset: Preset::MSrcnn,
            optimizer: OptimizerKind::adam(),
            leaky_slope: 0.3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Packs images into a `[n, c, h, w]` tensor.
pub fn images_to_tensor(images: &[&RasterImage]) -> Result<Tensor<f32>> {
    let first = images.first().ok_or(Error::EmptyBatch)?;
    let (w, h, c) = (first.width(), first.height(), first.channels());
    let mut data = Vec::with_capacity(images.len() * w * h * c);
    for img in images {
        if img.dims() != (w, h) || img.channels() != c {
            return Err(Error::DimensionMismatch("batch images differ in shape".into()));
        }
        for ch in 0..c {
            data.extend(img.data().iter().skip(ch).step_by(c));
        }
    }
    Tensor::new([images.len(), c, h, w], data)
}

/// Unpacks one batch item, clamping into `[0, 1]`.
pub fn tensor_to_image(t: &Tensor<f32>, n: usize) -> Result<RasterImage> {
    let [_, c, h, w] = t.shape();
    let plane = t.sample(n);
    let data = (0..w * h * c).map(|i| plane[(i % c) * w * h + i / c]).collect();
    RasterImage::from_clamped(w, h, c, data)
}

fn batch_tensors(pairs: &[&PatchPair]) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let lr: Vec<_> = pairs.iter().map(|p| &p.lr).collect();
    let hr: Vec<_> = pairs.iter().map(|p| &p.hr).collect();
    Ok((images_to_tensor(&lr)?, images_to_tensor(&hr)?))
}

/// One optimizer step on a batch of patch pairs. Returns the batch loss
/// before the update, on the `[0, 1]` scale.
pub fn train_step_pairs(
    net: &mut Network<f32>,
    batch: &[&PatchPair],
    optimizer: &mut Optimizer<f32>,
    lr: f64,
) -> Result<f32> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let (x, y) = batch_tensors(batch)?;
    train_step(net, &x, &y, optimizer, lr)
}

/// Mean loss over `pairs`, evaluated in batches.
pub fn evaluate_loss(net: &Network<f32>, pairs: &[&PatchPair], batch_size: usize) -> Result<f64> {
    let mut total = 0.0;
    for chunk in pairs.chunks(batch_size.max(1)) {
        let (x, y) = batch_tensors(chunk)?;
        let (loss, _) = mse_loss(&net.forward(&x)?, &y)?;
        total += loss as f64 * chunk.len() as f64;
    }
    Ok(total / pairs.len() as f64)
}

/// Image-level train/validation/test split in the proportions 8:1:1.
///
/// Whole source images are assigned to a split so overlapping patches never
/// straddle two splits. With fewer than ten images the validation and test
/// splits may be empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_pairs(archive: &DatasetArchive, seed: u64) -> Split {
    let n_img = archive.manifest.len();
    let mut order: Vec<usize> = (0..n_img).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT));
    let n_hold = n_img / 10;
    let mut role = vec![0u8; n_img];
    for &i in &order[..n_hold] {
        role[i] = 1;
    }
    for &i in &order[n_hold..2 * n_hold] {
        role[i] = 2;
    }
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (pair, src) in archive.pair_sources().into_iter().enumerate() {
        match role[src] {
            0 => split.train.push(pair),
            1 => split.val.push(pair),
            _ => split.test.push(pair),
        }
    }
    split
}

/// One row of the loss curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f32,
    /// NaN when the validation split is empty.
    pub val_mse: f32,
}

pub fn loss_curve_csv(records: &[EpochRecord]) -> String {
    let mut out = String::from(LOSS_CURVE_HEADER);
    out.push('\n');
    for r in records {
        writeln!(out, "{},{},{}", r.epoch, r.train_mse, r.val_mse).expect("String write");
    }
    out
}

pub fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(format!("epoch_{epoch:03}.ckpt"))
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub curve: Vec<EpochRecord>,
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add((epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Trains a fresh network.
pub fn train(archive: &DatasetArchive, cfg: &TrainConfig, checkpoint_dir: &Path) -> Result<TrainOutcome> {
    train_with(archive, cfg, checkpoint_dir, None, |_| {})
}

/// Continues training from a checkpoint written by [`train`]. With the same
/// archive and configuration the result is bit-identical to an
/// uninterrupted run.
pub fn resume(
    archive: &DatasetArchive,
    cfg: &TrainConfig,
    checkpoint_dir: &Path,
    ckpt: &Checkpoint,
) -> Result<TrainOutcome> {
    train_with(archive, cfg, checkpoint_dir, Some(ckpt), |_| {})
}

/// Shared driver behind [`train`] and [`resume`]; `on_epoch` sees each new
/// loss-curve row as soon as its checkpoint is on disk.
pub fn train_with(
    archive: &DatasetArchive,
    cfg: &TrainConfig,
    dir: &Path,
    from: Option<&Checkpoint>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if archive.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (mut net, mut optimizer, mut curve) = match from {
        None => {
            let spec = cfg.preset.spec(archive.channels).with_leaky_slope(cfg.leaky_slope);
            (Network::new(spec, cfg.seed)?, Optimizer::new(cfg.optimizer), Vec::new())
        }
        Some(ckpt) => {
            let state = ckpt
                .training
                .as_ref()
                .ok_or_else(|| Error::Inconsistent("checkpoint carries no training state".into()))?;
            let curve: Vec<EpochRecord> = ckpt
                .loss_history
                .iter()
                .zip(state.val_history.iter().chain(std::iter::repeat(&f32::NAN)))
                .enumerate()
                .map(|(i, (&t, &v))| EpochRecord {
                    epoch: i + 1,
                    train_mse: t,
                    val_mse: v,
                })
                .collect();
            (ckpt.network()?, state.optimizer.clone(), curve)
        }
    };
    if archive.channels != net.input_channels() {
        return Err(Error::ChannelMismatch {
            expected: net.input_channels(),
            actual: archive.channels,
        });
    }
    fs::create_dir_all(dir)?;
    let split = split_pairs(archive, cfg.seed);
    let train_ids = if split.train.is_empty() {
        &split.val
    } else {
        &split.train
    };
    let val: Vec<&PatchPair> = split.val.iter().map(|&i| &archive.pairs[i]).collect();

    let mut checkpoint = match from {
        Some(ckpt) => ckpt.clone(),
        None => Checkpoint::from_network(&net, 0, Vec::new()),
    };
    for epoch in curve.len() + 1..=cfg.epochs {
        let mut order = train_ids.clone();
        order.shuffle(&mut epoch_rng(cfg.seed, epoch));
        let mut sum = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&PatchPair> = chunk.iter().map(|&i| &archive.pairs[i]).collect();
            let loss = train_step_pairs(&mut net, &batch, &mut optimizer, cfg.lr)?;
            sum += loss as f64 * batch.len() as f64;
        }
        let train_mse = (sum / order.len() as f64) as f32;
        let val_mse = if val.is_empty() {
            f32::NAN
        } else {
            evaluate_loss(&net, &val, cfg.batch_size)? as f32
        };
        log::info!(
            "epoch {epoch}/{}: train mse {train_mse:.6}, val mse {val_mse:.6}",
            cfg.epochs
        );
        curve.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
        });

        checkpoint = Checkpoint::from_network(&net, epoch as u32, curve.iter().map(|r| r.train_mse).collect());
        checkpoint.training = Some(TrainingState {
            lr: cfg.lr,
            batch_size: cfg.batch_size as u32,
            epochs: cfg.epochs as u32,
            seed: cfg.seed,
            degradation: cfg.degradation,
            val_history: curve.iter().map(|r| r.val_mse).collect(),
            optimizer: optimizer.clone(),
        });
        checkpoint.save(checkpoint_path(dir, epoch))?;
        fs::write(dir.join(LOSS_CURVE_FILE), loss_curve_csv(&curve))?;
        on_epoch(curve.last().expect("just pushed"));
    }
    Ok(TrainOutcome { checkpoint, curve })
}
