//! Comparison of enlargement methods across upscaling factors.
//!
//! Every reference is cropped to a multiple of the factor, shrunk with
//! bilinear interpolation and enlarged back by each method. All methods of a
//! given factor see the same shrunken input.

use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interp::{scale, ScaleFactor, ScaleMethod};
use crate::metrics::{evaluate, SsimParams};
use crate::nn::{Network, Preset};
use crate::pipeline::{upscale, DenoiseParams};
use crate::raster::{rgb_to_ycbcr, RasterImage};

pub const CSV_HEADER: &str = "factor,method,psnr,ssim";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMethod {
    Interp(ScaleMethod),
    /// A network trained on pairs degraded with `trained_on`.
    Model {
        preset: Preset,
        trained_on: ScaleMethod,
    },
}

impl EvalMethod {
    pub const ALL: [Self; 7] = [
        Self::Interp(ScaleMethod::Nearest),
        Self::Interp(ScaleMethod::Bilinear),
        Self::Interp(ScaleMethod::Bicubic),
        Self::Model {
            preset: Preset::Srcnn,
            trained_on: ScaleMethod::Bilinear,
        },
        Self::Model {
            preset: Preset::Srcnn,
            trained_on: ScaleMethod::Bicubic,
        },
        Self::Model {
            preset: Preset::MSrcnn,
            trained_on: ScaleMethod::Bilinear,
        },
        Self::Model {
            preset: Preset::MSrcnn,
            trained_on: ScaleMethod::Bicubic,
        },
    ];

    pub fn label(self) -> String {
        match self {
            Self::Interp(m) => {
                let n = m.name();
                n[..1].to_uppercase() + &n[1..]
            }
            Self::Model { preset, trained_on } => {
                let p = match preset {
                    Preset::Srcnn => "SRCNN",
                    Preset::MSrcnn => "mSRCNN",
                };
                format!("{p}-up-{trained_on}")
            }
        }
    }
}

impl fmt::Display for EvalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub factors: Vec<u32>,
    /// Compare RGB instead of the luma plane.
    pub rgb_metrics: bool,
    pub ssim: SsimParams,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            factors: vec![2, 3, 4],
            rgb_metrics: false,
            ssim: SsimParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub factor: u32,
    pub method: EvalMethod,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub image_count: usize,
    /// Factor-major, methods in [`EvalMethod::ALL`] order; methods without a
    /// model are left out.
    pub rows: Vec<EvalRow>,
}

/// Cuts the right and bottom edges so both dimensions divide by `k`.
pub fn mod_crop(img: &RasterImage, k: usize) -> Result<RasterImage> {
    let (w, h) = (img.width() / k * k, img.height() / k * k);
    if w == 0 || h == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} image is smaller than the factor {k}",
            img.width(),
            img.height()
        )));
    }
    img.crop(0, 0, w, h)
}

fn metric_plane(img: &RasterImage, rgb: bool) -> Result<RasterImage> {
    let rgb_img = img.to_rgb();
    if rgb {
        Ok(rgb_img)
    } else {
        Ok(rgb_to_ycbcr(&rgb_img)?.y)
    }
}

/// Per-image scores, indexed `[factor][method]`.
type ImageScores = Vec<Vec<Option<(f64, f64)>>>;

fn score_image(
    reference: &RasterImage,
    models: &[(EvalMethod, &Network<f32>)],
    cfg: &EvalConfig,
) -> Result<ImageScores> {
    cfg.factors
        .iter()
        .map(|&k| {
            let hr = mod_crop(&reference.to_rgb(), k as usize)?;
            let lr = scale(&hr, ScaleFactor::inverse(k as u64)?, ScaleMethod::Bilinear);
            let target = metric_plane(&hr, cfg.rgb_metrics)?;
            EvalMethod::ALL
                .iter()
                .map(|&method| {
                    let out = match method {
                        EvalMethod::Interp(m) => scale(&lr, ScaleFactor::integer(k as u64)?, m),
                        EvalMethod::Model { .. } => match models.iter().find(|(m, _)| *m == method) {
                            Some((_, net)) => upscale(&lr, net, k, &DenoiseParams::None)?,
                            None => return Ok(None),
                        },
                    };
                    let v = evaluate(&metric_plane(&out, cfg.rgb_metrics)?, &target, &cfg.ssim)?;
                    Ok(Some((v.psnr, v.ssim)))
                })
                .collect()
        })
        .collect()
}

/// Scores every method on every reference and averages per factor.
///
/// References are processed in parallel but reported in name order, so the
/// result depends only on the inputs.
pub fn evaluate_methods(
    references: &[(String, RasterImage)],
    models: &[(EvalMethod, &Network<f32>)],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if references.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    cfg.ssim.validate()?;
    for &k in &cfg.factors {
        if !(2..=4).contains(&k) {
            return Err(Error::InvalidParameter(format!("factor must be 2, 3 or 4, got {k}")));
        }
    }
    let mut order: Vec<&(String, RasterImage)> = references.iter().collect();
    order.sort_by(|a, b| a.0.cmp(&b.0));
    let per_image: Vec<ImageScores> = order
        .par_iter()
        .map(|(_, img)| score_image(img, models, cfg))
        .collect::<Result<_>>()?;

    let n = per_image.len() as f64;
    let mut rows = Vec::new();
    for (fi, &factor) in cfg.factors.iter().enumerate() {
        for (mi, &method) in EvalMethod::ALL.iter().enumerate() {
            if per_image[0][fi][mi].is_none() {
                continue;
            }
            let (mut p, mut s) = (0.0, 0.0);
            for scores in &per_image {
                let (ip, is) = scores[fi][mi].expect("models are shared by all images");
                p += ip;
                s += is;
            }
            rows.push(EvalRow {
                factor,
                method,
                psnr: p / n,
                ssim: s / n,
            });
        }
    }
    Ok(EvalReport {
        image_count: per_image.len(),
        rows,
    })
}

impl EvalReport {
    pub fn get(&self, factor: u32, method: EvalMethod) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.factor == factor && r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            writeln!(out, "{},{},{:.4},{:.4}", r.factor, r.method, r.psnr, r.ssim).expect("String write");
        }
        out
    }

    /// One line per factor, a PSNR/SSIM column pair per method.
    pub fn to_table(&self) -> String {
        let mut methods: Vec<EvalMethod> = Vec::new();
        let mut factors: Vec<u32> = Vec::new();
        for r in &self.rows {
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
            if !factors.contains(&r.factor) {
                factors.push(r.factor);
            }
        }
        let width = methods.iter().map(|m| m.label().len()).max().unwrap_or(0).max(17);
        let mut out = format!("{:<6}", "Scale");
        for m in &methods {
            write!(out, " | {:^width$}", m.label()).expect("String write");
        }
        out.push('\n');
        write!(out, "{:<6}", "").expect("String write");
        for _ in &methods {
            write!(out, " | {:^width$}", format!("{:>8} {:>8}", "PSNR", "SSIM")).expect("String write");
        }
        out.push('\n');
        for &f in &factors {
            write!(out, "{:<6}", format!("{f}x")).expect("String write");
            for &m in &methods {
                let cell = match self.get(f, m) {
                    Some(r) => format!("{:>8.4} {:>8.4}", r.psnr, r.ssim),
                    None => format!("{:>8} {:>8}", "-", "-"),
                };
                write!(out, " | {cell:^width$}").expect("String write");
            }
            out.push('\n');
        }
        writeln!(out, "images: {}", self.image_count).expect("String write");
        out
    }
}
