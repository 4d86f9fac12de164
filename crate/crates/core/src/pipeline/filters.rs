//! Sharpening and edge-preserving denoising filters. Borders are handled by
//! clamping coordinates to the nearest edge pixel.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{clamp_unit, RasterImage};

/// 3×3 sharpening kernel: 5 at the center, −1 at the four edge neighbors.
pub fn sharpen(img: &RasterImage) -> RasterImage {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let mut out = vec![0.0f32; w * h * c];
    out.par_chunks_mut(w * c).enumerate().for_each(|(y, row)| {
        let y = y as isize;
        for x in 0..w as isize {
            for ch in 0..c {
                // Exact in f64, so flat regions come back unchanged.
                let at = |dx: isize, dy: isize| img.get_clamped(x + dx, y + dy, ch) as f64;
                let v = 5.0 * at(0, 0) - at(-1, 0) - at(1, 0) - at(0, -1) - at(0, 1);
                row[x as usize * c + ch] = clamp_unit(v as f32);
            }
        }
    });
    RasterImage::new(w, h, c, out).expect("same shape as input")
}

/// Bilateral filter over a `diameter × diameter` square window.
///
/// Each neighbor is weighted by a spatial Gaussian of its offset and a range
/// Gaussian of its Euclidean color distance to the center pixel.
pub fn bilateral_filter(img: &RasterImage, diameter: usize, sigma_color: f64, sigma_space: f64) -> Result<RasterImage> {
    if diameter < 3 || diameter.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "bilateral diameter must be odd and at least 3, got {diameter}"
        )));
    }
    if !(sigma_color > 0.0 && sigma_space > 0.0) {
        return Err(Error::InvalidParameter("bilateral sigmas must be positive".into()));
    }
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let r = (diameter / 2) as isize;
    let spatial: Vec<f64> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dy, dx)))
        .map(|(dy, dx)| (-((dx * dx + dy * dy) as f64) / (2.0 * sigma_space * sigma_space)).exp())
        .collect();
    let range_scale = -1.0 / (2.0 * sigma_color * sigma_color);

    let mut out = vec![0.0f32; w * h * c];
    out.par_chunks_mut(w * c).enumerate().for_each(|(y, row)| {
        let y = y as isize;
        let mut acc = vec![0.0f64; c];
        for x in 0..w as isize {
            acc.fill(0.0);
            let mut norm = 0.0;
            let mut taps = spatial.iter();
            for dy in -r..=r {
                for dx in -r..=r {
                    let ws = taps.next().expect("one weight per tap");
                    let mut dist = 0.0;
                    for ch in 0..c {
                        let d = img.get_clamped(x + dx, y + dy, ch) as f64 - img.get(x as usize, y as usize, ch) as f64;
                        dist += d * d;
                    }
                    let wt = ws * (dist * range_scale).exp();
                    norm += wt;
                    for (ch, a) in acc.iter_mut().enumerate() {
                        *a += wt * img.get_clamped(x + dx, y + dy, ch) as f64;
                    }
                }
            }
            for (ch, a) in acc.iter().enumerate() {
                row[x as usize * c + ch] = clamp_unit((a / norm) as f32);
            }
        }
    });
    RasterImage::new(w, h, c, out)
}

/// Normalized 1-D Gaussian weights for the patch comparison window.
fn template_weights(template_size: usize) -> Vec<f64> {
    let r = (template_size / 2) as f64;
    if r == 0.0 {
        return vec![1.0];
    }
    let sigma = r / 2.0;
    let mut g: Vec<f64> = (0..template_size)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    g
}

/// Non-local means.
///
/// Every pixel `q` inside the `search_size` window around `p` contributes
/// with weight `exp(-d²/h²)`, where `d²` is the Gaussian-weighted mean
/// squared difference between the `template_size` neighborhoods of `p` and
/// `q` (averaged over channels). Only in-image positions are searched.
///
/// Implemented offset by offset: for a fixed displacement the per-pixel
/// squared differences are filtered with the separable template Gaussian,
/// which costs `O(template)` instead of `O(template²)` per comparison.
pub fn nlm_denoise(img: &RasterImage, h: f64, template_size: usize, search_size: usize) -> Result<RasterImage> {
    if template_size.is_multiple_of(2) || search_size.is_multiple_of(2) {
        return Err(Error::InvalidParameter("NLM window sizes must be odd".into()));
    }
    if template_size >= search_size {
        return Err(Error::InvalidParameter(
            "NLM template window must be smaller than the search window".into(),
        ));
    }
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidParameter("NLM strength h must be positive".into()));
    }
    let (w, ht, c) = (img.width(), img.height(), img.channels());
    let tr = template_size / 2;
    let sr = (search_size / 2) as isize;
    let g = template_weights(template_size);
    let inv_h2 = 1.0 / (h * h);
    let inv_c = 1.0 / c as f64;

    // Squared-difference image on a domain extended by the template radius.
    let (ew, eh) = (w + 2 * tr, ht + 2 * tr);
    let mut diff = vec![0.0f64; ew * eh];
    let mut horiz = vec![0.0f64; ht * ew];
    let mut num = vec![0.0f64; w * ht * c];
    let mut den = vec![0.0f64; w * ht];

    for oy in -sr..=sr {
        for ox in -sr..=sr {
            diff.par_chunks_mut(ew).enumerate().for_each(|(ey, row)| {
                let y = ey as isize - tr as isize;
                for (ex, v) in row.iter_mut().enumerate() {
                    let x = ex as isize - tr as isize;
                    let mut s = 0.0;
                    for ch in 0..c {
                        let d = img.get_clamped(x, y, ch) as f64 - img.get_clamped(x + ox, y + oy, ch) as f64;
                        s += d * d;
                    }
                    *v = s * inv_c;
                }
            });
            // Vertical pass collapses the extended rows back to image rows.
            horiz.par_chunks_mut(ew).enumerate().for_each(|(y, row)| {
                for (ex, v) in row.iter_mut().enumerate() {
                    *v = g.iter().enumerate().map(|(j, gw)| gw * diff[(y + j) * ew + ex]).sum();
                }
            });
            num.par_chunks_mut(w * c)
                .zip(den.par_chunks_mut(w))
                .enumerate()
                .for_each(|(y, (nrow, drow))| {
                    let qy = y as isize + oy;
                    if qy < 0 || qy >= ht as isize {
                        return;
                    }
                    for x in 0..w {
                        let qx = x as isize + ox;
                        if qx < 0 || qx >= w as isize {
                            continue;
                        }
                        let d2: f64 = g.iter().enumerate().map(|(i, gw)| gw * horiz[y * ew + x + i]).sum();
                        let wt = (-d2 * inv_h2).exp();
                        drow[x] += wt;
                        for ch in 0..c {
                            nrow[x * c + ch] += wt * img.get(qx as usize, qy as usize, ch) as f64;
                        }
                    }
                });
        }
    }

    let out = num
        .iter()
        .enumerate()
        .map(|(i, n)| clamp_unit((n / den[i / c]) as f32))
        .collect();
    RasterImage::new(w, ht, c, out)
}

/// Optional denoising stage applied to training data or enhanced output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DenoiseParams {
    None,
    Bilateral {
        diameter: usize,
        sigma_color: f64,
        sigma_space: f64,
    },
    NonLocalMeans {
        h: f64,
        template_size: usize,
        search_size: usize,
    },
}

impl DenoiseParams {
    pub fn default_bilateral() -> Self {
        Self::Bilateral {
            diameter: 5,
            sigma_color: 0.1,
            sigma_space: 2.0,
        }
    }

    pub fn default_nlm() -> Self {
        Self::NonLocalMeans {
            h: 0.05,
            template_size: 7,
            search_size: 21,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probe = RasterImage::filled(1, 1, 1, 0.0)?;
        self.apply(&probe).map(|_| ())
    }

    pub fn apply(&self, img: &RasterImage) -> Result<RasterImage> {
        match *self {
            Self::None => Ok(img.clone()),
            Self::Bilateral {
                diameter,
                sigma_color,
                sigma_space,
            } => bilateral_filter(img, diameter, sigma_color, sigma_space),
            Self::NonLocalMeans {
                h,
                template_size,
                search_size,
            } => nlm_denoise(img, h, template_size, search_size),
        }
    }
}

impl fmt::Display for DenoiseParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => write!(f, "none"),
            Self::Bilateral {
                diameter,
                sigma_color,
                sigma_space,
            } => write!(
                f,
                "bilateral(d={diameter}, sigma_color={sigma_color}, sigma_space={sigma_space})"
            ),
            Self::NonLocalMeans {
                h,
                template_size,
                search_size,
            } => write!(f, "nlm(h={h}, template={template_size}, search={search_size})"),
        }
    }
}
