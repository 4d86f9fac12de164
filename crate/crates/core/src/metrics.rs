//! Fidelity metrics: mean squared error, PSNR and SSIM.
//!
//! MSE and PSNR are reported on the 0–255 scale. SSIM works on the stored
//! `[0, 1]` values with stabilizers scaled to match, which gives the same
//! result as evaluating on 8-bit values with `c1 = (0.01·255)²` and
//! `c2 = (0.03·255)²`.

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Peak sample value on the reporting scale.
pub const PEAK: f64 = 255.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SsimWindow {
    /// One set of statistics over the whole image.
    Global,
    /// Gaussian-weighted statistics at every position where the window fits
    /// inside the image, averaged over positions.
    Gaussian { size: usize, sigma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    pub c1: f64,
    pub c2: f64,
    pub window: SsimWindow,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            c1: 0.01 * 0.01,
            c2: 0.03 * 0.03,
            window: SsimWindow::Gaussian { size: 11, sigma: 1.5 },
        }
    }
}

impl SsimParams {
    pub fn global() -> Self {
        Self {
            window: SsimWindow::Global,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::InvalidParameter("SSIM stabilizers must be positive".into()));
        }
        if let SsimWindow::Gaussian { size, sigma } = self.window {
            if size < 3 || size % 2 == 0 {
                return Err(Error::InvalidParameter(format!(
                    "SSIM window size must be odd and at least 3, got {size}"
                )));
            }
            if sigma.is_nan() || sigma <= 0.0 {
                return Err(Error::InvalidParameter("SSIM sigma must be positive".into()));
            }
        }
        Ok(())
    }
}

/// All three metrics for one image pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricValue {
    pub mse: f64,
    /// `f64::INFINITY` when `mse == 0`.
    pub psnr: f64,
    pub ssim: f64,
}

/// Mean squared difference over all samples on the 0–255 scale.
pub fn mse(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = (x as f64 - y as f64) * PEAK;
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// `20·log10(255 / √mse)`, or `+∞` for identical inputs.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (PEAK / mse.sqrt()).log10()
    }
}

pub fn psnr(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    mse(a, b).map(psnr_from_mse)
}

/// Structural similarity. Multi-channel images report the mean of the
/// per-channel scores.
pub fn ssim(a: &RasterImage, b: &RasterImage, params: &SsimParams) -> Result<f64> {
    a.ensure_same_shape(b)?;
    params.validate()?;
    if let SsimWindow::Gaussian { size, .. } = params.window {
        if size > a.width() || size > a.height() {
            return Err(Error::DimensionMismatch(format!(
                "SSIM window {size} larger than {}x{} image",
                a.width(),
                a.height()
            )));
        }
    }
    let channels = a.channels();
    let mut total = 0.0;
    for c in 0..channels {
        let x: Vec<f64> = a.channel(c).data().iter().map(|&v| v as f64).collect();
        let y: Vec<f64> = b.channel(c).data().iter().map(|&v| v as f64).collect();
        total += match params.window {
            SsimWindow::Global => ssim_global(&x, &y, params),
            SsimWindow::Gaussian { size, sigma } => {
                ssim_windowed(&x, &y, a.width(), a.height(), &gaussian_kernel(size, sigma), params)
            }
        };
    }
    Ok(total / channels as f64)
}

pub fn evaluate(a: &RasterImage, b: &RasterImage, params: &SsimParams) -> Result<MetricValue> {
    let mse = mse(a, b)?;
    Ok(MetricValue {
        mse,
        psnr: psnr_from_mse(mse),
        ssim: ssim(a, b, params)?,
    })
}

#[inline]
fn ssim_formula(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64, p: &SsimParams) -> f64 {
    ((2.0 * mx * my + p.c1) * (2.0 * cxy + p.c2)) / ((mx * mx + my * my + p.c1) * (vx + vy + p.c2))
}

fn ssim_global(x: &[f64], y: &[f64], p: &SsimParams) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
        cxy += (a - mx) * (b - my);
    }
    ssim_formula(mx, my, vx / n, vy / n, cxy / n, p)
}

/// Normalized 1-D Gaussian taps.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable "valid" filtering of `src` (`w × h`) with `k` on both axes.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (ow, oh) = (w - n + 1, h - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&line[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k.iter().enumerate().map(|(j, kv)| kv * rows[(y + j) * ow + x]).sum();
        }
    }
    out
}

fn ssim_windowed(x: &[f64], y: &[f64], w: usize, h: usize, k: &[f64], p: &SsimParams) -> f64 {
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mx = filter_valid(x, w, h, k);
    let my = filter_valid(y, w, h, k);
    let exx = filter_valid(&xx, w, h, k);
    let eyy = filter_valid(&yy, w, h, k);
    let exy = filter_valid(&xy, w, h, k);
    let n = mx.len();
    let mut sum = 0.0;
    for i in 0..n {
        let vx = exx[i] - mx[i] * mx[i];
        let vy = eyy[i] - my[i] * my[i];
        let cxy = exy[i] - mx[i] * my[i];
        sum += ssim_formula(mx[i], my[i], vx, vy, cxy, p);
    }
    sum / n as f64
}
