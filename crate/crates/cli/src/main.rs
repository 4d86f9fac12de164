use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;

use sr_forge_core::eval::{evaluate_methods, EvalConfig, EvalMethod};
use sr_forge_core::nn::Preset;
use sr_forge_core::pipeline::{
    post_process, preprocess_corpus, train_with, upscale, DatasetArchive, PatchColor, PostProcessMode,
    PreprocessConfig, TrainConfig, LOSS_CURVE_FILE,
};
use sr_forge_core::raster::{load_image, save_image};
use sr_forge_core::{Checkpoint, DenoiseParams, Error, Network, RasterImage, ScaleMethod};

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(
    name = "sr-forge",
    version,
    about = "Train and run SRCNN-style super-resolution networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a training archive from a directory of images
    Preprocess(PreprocessArgs),
    /// Train a network on an archive, writing a checkpoint per epoch
    Train(TrainArgs),
    /// Enhance or enlarge one image with a trained checkpoint
    Upscale(UpscaleArgs),
    /// Compare interpolation and trained networks on reference images
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Degradation {
    Bilinear,
    Bicubic,
}

impl From<Degradation> for ScaleMethod {
    fn from(d: Degradation) -> Self {
        match d {
            Degradation::Bilinear => ScaleMethod::Bilinear,
            Degradation::Bicubic => ScaleMethod::Bicubic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Srcnn,
    Msrcnn,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    EnhanceOnly,
    EnlargeEnhance,
    DoubleEnhance,
    DoubleEnlarge,
}

#[derive(Clone, Copy, ValueEnum)]
enum DenoiseArg {
    None,
    Bilateral,
    Nlm,
}

impl From<DenoiseArg> for DenoiseParams {
    fn from(d: DenoiseArg) -> Self {
        match d {
            DenoiseArg::None => DenoiseParams::None,
            DenoiseArg::Bilateral => DenoiseParams::default_bilateral(),
            DenoiseArg::Nlm => DenoiseParams::default_nlm(),
        }
    }
}

#[derive(Args)]
struct PreprocessArgs {
    /// Directory of source images (PNG, JPEG, PPM/PGM)
    input: PathBuf,
    /// Archive to write
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "bilinear")]
    degradation: Degradation,
    /// Denoising applied to the ground truth
    #[arg(long, value_enum, default_value = "bilateral")]
    denoise: DenoiseArg,
    /// Skip unsharp masking of the ground truth
    #[arg(long)]
    no_sharpen: bool,
    /// Denoise before sharpening
    #[arg(long)]
    denoise_first: bool,
    #[arg(long, default_value_t = 32)]
    patch_size: usize,
    #[arg(long, default_value_t = 16)]
    stride: usize,
    /// Store RGB patches instead of the luma plane
    #[arg(long)]
    rgb: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Archive written by `preprocess`
    archive: PathBuf,
    /// Directory for checkpoints and the loss curve
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "msrcnn")]
    preset: PresetArg,
    /// Total epochs [default: 50, or the checkpoint's target when resuming]
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 0.003)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Continue from a checkpoint; its recorded settings take precedence
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct UpscaleArgs {
    /// Image to process
    input: PathBuf,
    /// Output image (PNG or PPM/PGM)
    output: PathBuf,
    /// Trained checkpoint
    #[arg(short, long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "enlarge-enhance")]
    mode: ModeArg,
    /// Enlargement factor for enlarge-enhance
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..=4))]
    factor: Option<u32>,
    #[arg(long, value_enum, default_value = "bilateral")]
    denoise: DenoiseArg,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of reference images
    references: PathBuf,
    /// SRCNN checkpoint trained on bilinear degradation
    #[arg(long)]
    srcnn_bilinear: Option<PathBuf>,
    /// SRCNN checkpoint trained on bicubic degradation
    #[arg(long)]
    srcnn_bicubic: Option<PathBuf>,
    /// m-SRCNN checkpoint trained on bilinear degradation
    #[arg(long)]
    msrcnn_bilinear: Option<PathBuf>,
    /// m-SRCNN checkpoint trained on bicubic degradation
    #[arg(long)]
    msrcnn_bicubic: Option<PathBuf>,
    /// Factors to report; repeat for several (default 2, 3 and 4)
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..=4))]
    factor: Vec<u32>,
    /// Score RGB instead of the Y plane
    #[arg(long)]
    rgb_metrics: bool,
    /// Also write the report as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    let result = match cli.command {
        Command::Preprocess(a) => preprocess(a),
        Command::Train(a) => train(a),
        Command::Upscale(a) => upscale_cmd(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() {
                EXIT_IO
            } else if e.is_data() {
                EXIT_DATA
            } else {
                EXIT_USAGE
            })
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SR_FORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("SR_FORGE_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

/// Regular files in `dir`, sorted by name.
fn list_files(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    if !dir.is_dir() {
        return Err(Error::NotFound(dir.to_path_buf()));
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn preprocess(a: PreprocessArgs) -> CmdResult {
    let mut corpus = Vec::new();
    let files = list_files(&a.input)?;
    for path in &files {
        match load_image(path) {
            Ok(img) => corpus.push((file_name(path), img)),
            Err(e) => warn!("skipping {}: {e}", path.display()),
        }
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus.into());
    }
    let cfg = PreprocessConfig {
        degradation: a.degradation.into(),
        sharpen: !a.no_sharpen,
        denoise: a.denoise.into(),
        denoise_first: a.denoise_first,
        patch_size: a.patch_size,
        stride: a.stride,
        color: if a.rgb { PatchColor::Rgb } else { PatchColor::Luma },
    };
    let archive = preprocess_corpus(&corpus, &cfg)?;
    archive.save(&a.output)?;
    println!(
        "{} pairs from {} of {} files ({}x{} patches, {} channel(s), {} degradation)",
        archive.len(),
        corpus.len(),
        files.len(),
        archive.patch_size,
        archive.patch_size,
        archive.channels,
        cfg.degradation
    );
    for entry in &archive.manifest {
        println!("  {}: {} pairs", entry.file, entry.pairs);
    }
    Ok(())
}

fn train(a: TrainArgs) -> CmdResult {
    let archive = DatasetArchive::load(&a.archive)?;
    let degradation: ScaleMethod = archive
        .manifest
        .first()
        .map(|e| e.degradation.parse())
        .transpose()?
        .unwrap_or(ScaleMethod::Bilinear);
    let resume_from = a.resume.as_ref().map(Checkpoint::load).transpose()?;
    let cfg = match resume_from.as_ref().and_then(|c| c.training.as_ref()) {
        Some(state) => TrainConfig {
            epochs: a.epochs.unwrap_or(state.epochs as usize),
            lr: state.lr,
            batch_size: state.batch_size as usize,
            seed: state.seed,
            degradation: state.degradation,
            optimizer: state.optimizer.kind,
            ..TrainConfig::default()
        },
        None if resume_from.is_some() => {
            return Err(Failure::Core(Error::Inconsistent(
                "checkpoint has no training state to resume from".into(),
            )))
        }
        None => TrainConfig {
            epochs: a.epochs.unwrap_or(50),
            lr: a.lr,
            batch_size: a.batch_size,
            seed: a.seed,
            degradation,
            preset: match a.preset {
                PresetArg::Srcnn => Preset::Srcnn,
                PresetArg::Msrcnn => Preset::MSrcnn,
            },
            ..TrainConfig::default()
        },
    };
    if let Some(c) = &resume_from {
        println!("resuming after epoch {}", c.epoch);
    }
    let outcome = train_with(&archive, &cfg, &a.output, resume_from.as_ref(), |r| {
        println!(
            "epoch {:>3}  train_mse {:.6}  val_mse {:.6}",
            r.epoch, r.train_mse, r.val_mse
        );
    })?;
    println!(
        "wrote {} checkpoints and {} to {}",
        outcome.curve.len(),
        LOSS_CURVE_FILE,
        a.output.display()
    );
    Ok(())
}

fn upscale_cmd(a: UpscaleArgs) -> CmdResult {
    let mode = match a.mode {
        ModeArg::EnhanceOnly => PostProcessMode::EnhanceOnly,
        ModeArg::EnlargeEnhance => PostProcessMode::EnlargeEnhance,
        ModeArg::DoubleEnhance => PostProcessMode::DoubleEnhance,
        ModeArg::DoubleEnlarge => PostProcessMode::DoubleEnlarge,
    };
    if a.factor.is_some() && mode != PostProcessMode::EnlargeEnhance {
        return Err(Failure::Usage(format!(
            "--factor only applies to enlarge-enhance, not {mode}"
        )));
    }
    let net = Checkpoint::load(&a.checkpoint)?.network()?;
    let img = load_image(&a.input)?;
    let denoise: DenoiseParams = a.denoise.into();
    let out = match (mode, a.factor) {
        (PostProcessMode::EnlargeEnhance, Some(k)) => upscale(&img, &net, k, &denoise)?,
        _ => post_process(&img, mode, &net, &denoise)?,
    };
    save_image(&out, &a.output)?;
    println!(
        "{}x{} -> {}x{} ({mode}) written to {}",
        img.width(),
        img.height(),
        out.width(),
        out.height(),
        a.output.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> CmdResult {
    let mut references: Vec<(String, RasterImage)> = Vec::new();
    for path in list_files(&a.references)? {
        references.push((file_name(&path), load_image(&path)?));
    }
    let slots = [
        (&a.srcnn_bilinear, Preset::Srcnn, ScaleMethod::Bilinear),
        (&a.srcnn_bicubic, Preset::Srcnn, ScaleMethod::Bicubic),
        (&a.msrcnn_bilinear, Preset::MSrcnn, ScaleMethod::Bilinear),
        (&a.msrcnn_bicubic, Preset::MSrcnn, ScaleMethod::Bicubic),
    ];
    let mut loaded: Vec<(EvalMethod, Network<f32>)> = Vec::new();
    for (path, preset, trained_on) in slots {
        if let Some(p) = path {
            loaded.push((
                EvalMethod::Model { preset, trained_on },
                Checkpoint::load(p)?.network()?,
            ));
        }
    }
    let models: Vec<(EvalMethod, &Network<f32>)> = loaded.iter().map(|(m, n)| (*m, n)).collect();
    let mut cfg = EvalConfig {
        rgb_metrics: a.rgb_metrics,
        ..EvalConfig::default()
    };
    if !a.factor.is_empty() {
        cfg.factors = a.factor;
    }
    let report = evaluate_methods(&references, &models, &cfg)?;
    print!("{}", report.to_table());
    if let Some(path) = &a.csv {
        fs::write(path, report.to_csv())?;
    }
    Ok(())
}
