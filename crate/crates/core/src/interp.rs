//! Nearest-neighbor, bilinear and bicubic resampling.
//!
//! All methods use half-pixel centers: destination sample `d` maps to source
//! coordinate `(d + 0.5) / factor - 0.5`, and taps falling outside the image
//! are clamped to the nearest edge sample. Filtering is separable and
//! accumulates in `f64`; results are clamped into `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{clamp_unit, RasterImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScaleMethod {
    Nearest,
    Bilinear,
    Bicubic,
}

impl ScaleMethod {
    pub const ALL: [ScaleMethod; 3] = [Self::Nearest, Self::Bilinear, Self::Bicubic];

    pub fn name(self) -> &'static str {
        match self {
            Self::Nearest => "nearest",
            Self::Bilinear => "bilinear",
            Self::Bicubic => "bicubic",
        }
    }
}

impl fmt::Display for ScaleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScaleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nearest" => Ok(Self::Nearest),
            "bilinear" => Ok(Self::Bilinear),
            "bicubic" => Ok(Self::Bicubic),
            other => Err(Error::InvalidParameter(format!("unknown scale method {other:?}"))),
        }
    }
}

/// A positive rational scale factor `num / den`, kept in lowest terms.
///
/// Factors are rational so that `1/3` followed by `3` restores the original
/// dimensions exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ScaleFactor {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl ScaleFactor {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be positive, got {num}/{den}"
            )));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    /// `k` (enlargement).
    pub fn integer(k: u64) -> Result<Self> {
        Self::new(k, 1)
    }

    /// `1/k` (reduction).
    pub fn inverse(k: u64) -> Result<Self> {
        Self::new(1, k)
    }

    /// Converts a decimal factor. Values within 0.005 of `1/k` for
    /// `k ∈ 2..=10` snap to `1/k`, so `0.33` means one third. Other values
    /// are rounded to a multiple of 1/1000.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be positive, got {x}"
            )));
        }
        if x < 1.0 {
            for k in 2..=10u64 {
                if (x - 1.0 / k as f64).abs() < 0.005 {
                    return Self::inverse(k);
                }
            }
        }
        let num = (x * 1000.0).round() as u64;
        Self::new(num, 1000)
    }

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn den(self) -> u64 {
        self.den
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn recip(self) -> Self {
        Self {
            num: self.den,
            den: self.num,
        }
    }

    /// Output length for an input length: `max(1, round(len × factor))`,
    /// ties rounding up.
    pub fn apply(self, len: usize) -> usize {
        let len = len as u64;
        (((2 * len * self.num + self.den) / (2 * self.den)) as usize).max(1)
    }
}

impl fmt::Display for ScaleFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Catmull-Rom family cubic with `a = -0.5`.
pub fn cubic_weight(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Source taps contributing to one destination sample.
#[derive(Clone, Debug, Default)]
struct Taps {
    index: [usize; 4],
    weight: [f64; 4],
    len: usize,
}

/// Per-axis tap tables for mapping `src_len` samples onto `dst_len` samples
/// at ratio `num / den`.
fn axis_taps(src_len: usize, dst_len: usize, num: u64, den: u64, method: ScaleMethod) -> Vec<Taps> {
    let last = src_len as isize - 1;
    let clamp = |i: isize| i.clamp(0, last) as usize;
    (0..dst_len)
        .map(|d| {
            let mut t = Taps::default();
            match method {
                ScaleMethod::Nearest => {
                    // floor((d + 0.5) * den / num) in exact integer arithmetic
                    let s = ((2 * d as u64 + 1) * den / (2 * num)) as isize;
                    t.index[0] = clamp(s);
                    t.weight[0] = 1.0;
                    t.len = 1;
                }
                ScaleMethod::Bilinear => {
                    let s = (d as f64 + 0.5) * den as f64 / num as f64 - 0.5;
                    let s0 = s.floor();
                    let frac = s - s0;
                    let s0 = s0 as isize;
                    t.index[0] = clamp(s0);
                    t.index[1] = clamp(s0 + 1);
                    t.weight[0] = 1.0 - frac;
                    t.weight[1] = frac;
                    t.len = 2;
                }
                ScaleMethod::Bicubic => {
                    let s = (d as f64 + 0.5) * den as f64 / num as f64 - 0.5;
                    let s0 = s.floor();
                    let frac = s - s0;
                    let s0 = s0 as isize;
                    for k in 0..4 {
                        t.index[k] = clamp(s0 - 1 + k as isize);
                        t.weight[k] = cubic_weight(frac - (k as f64 - 1.0));
                    }
                    t.len = 4;
                }
            }
            t
        })
        .collect()
}

/// Resamples to `out_w × out_h`, mapping each axis with its own ratio.
fn resample(
    img: &RasterImage,
    out_w: usize,
    out_h: usize,
    (nx, dx): (u64, u64),
    (ny, dy): (u64, u64),
    method: ScaleMethod,
) -> RasterImage {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let xt = axis_taps(w, out_w, nx, dx, method);
    let yt = axis_taps(h, out_h, ny, dy, method);
    let src = img.data();

    let mut horiz = vec![0.0f64; h * out_w * c];
    horiz.par_chunks_mut(out_w * c).enumerate().for_each(|(y, row)| {
        let src_row = &src[y * w * c..(y + 1) * w * c];
        for (x, taps) in xt.iter().enumerate() {
            for ch in 0..c {
                let mut acc = 0.0;
                for k in 0..taps.len {
                    acc += taps.weight[k] * src_row[taps.index[k] * c + ch] as f64;
                }
                row[x * c + ch] = acc;
            }
        }
    });

    let mut out = vec![0.0f32; out_h * out_w * c];
    out.par_chunks_mut(out_w * c)
        .zip(yt.par_iter())
        .for_each(|(row, taps)| {
            for (i, v) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 0..taps.len {
                    acc += taps.weight[k] * horiz[taps.index[k] * out_w * c + i];
                }
                *v = clamp_unit(acc as f32);
            }
        });
    RasterImage::new(out_w, out_h, c, out).expect("resampled image is valid")
}

/// Scales both axes by `factor`.
pub fn scale(img: &RasterImage, factor: ScaleFactor, method: ScaleMethod) -> RasterImage {
    let (w, h) = img.dims();
    let ratio = (factor.num, factor.den);
    resample(img, factor.apply(w), factor.apply(h), ratio, ratio, method)
}

/// Resizes to explicit dimensions; each axis uses the ratio `out / in`.
pub fn resize(img: &RasterImage, width: usize, height: usize, method: ScaleMethod) -> Result<RasterImage> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("target dimensions must be positive".into()));
    }
    let (w, h) = img.dims();
    Ok(resample(
        img,
        width,
        height,
        (width as u64, w as u64),
        (height as u64, h as u64),
        method,
    ))
}

/// Synthesizes a low-resolution counterpart at the original size: scale down
/// by `down`, then back up to the input dimensions with the same method.
pub fn degrade(img: &RasterImage, down: ScaleFactor, method: ScaleMethod) -> Result<RasterImage> {
    if down.num >= down.den {
        return Err(Error::InvalidParameter(format!(
            "degradation factor must be below 1, got {down}"
        )));
    }
    let small = scale(img, down, method);
    resize(&small, img.width(), img.height(), method)
}
