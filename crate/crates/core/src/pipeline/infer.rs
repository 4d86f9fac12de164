//! Inference: pre-upsampling, luma enhancement and the post-processing modes.

use std::fmt;
use std::str::FromStr;

use super::filters::DenoiseParams;
use super::train::{images_to_tensor, tensor_to_image};
use crate::error::{Error, Result};
use crate::interp::{scale, ScaleFactor, ScaleMethod};
use crate::nn::Network;
use crate::raster::{rgb_to_ycbcr, ycbcr_to_rgb, RasterImage, YCbCrImage};

/// Runs the network once at the input's size.
///
/// A single-channel network enhances the luma plane of color input and
/// leaves chroma untouched. A three-channel network sees RGB directly.
pub fn enhance(img: &RasterImage, net: &Network<f32>) -> Result<RasterImage> {
    match (net.input_channels(), img.channels()) {
        (1, 1) => run_plane(img, net),
        (1, 3) => {
            let ycc = rgb_to_ycbcr(img)?;
            let y = run_plane(&ycc.y, net)?;
            ycbcr_to_rgb(&YCbCrImage::new(y, ycc.cb, ycc.cr)?)
        }
        (3, 3) => run_plane(img, net),
        (3, 1) => run_plane(&img.to_rgb(), net),
        (expected, actual) => Err(Error::ChannelMismatch { expected, actual }),
    }
}

fn run_plane(img: &RasterImage, net: &Network<f32>) -> Result<RasterImage> {
    if net.output_channels() != img.channels() {
        return Err(Error::ChannelMismatch {
            expected: img.channels(),
            actual: net.output_channels(),
        });
    }
    let out = net.forward(&images_to_tensor(&[img])?)?;
    tensor_to_image(&out, 0)
}

/// Enlarges by an integer factor: bicubic pre-upsampling, network
/// enhancement, then the optional denoise.
pub fn upscale(img: &RasterImage, net: &Network<f32>, factor: u32, denoise: &DenoiseParams) -> Result<RasterImage> {
    if !(2..=4).contains(&factor) {
        return Err(Error::InvalidParameter(format!(
            "upscale factor must be 2, 3 or 4, got {factor}"
        )));
    }
    let pre = scale(img, ScaleFactor::integer(factor as u64)?, ScaleMethod::Bicubic);
    denoise.apply(&enhance(&pre, net)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PostProcessMode {
    EnhanceOnly,
    EnlargeEnhance,
    DoubleEnhance,
    DoubleEnlarge,
}

impl PostProcessMode {
    pub const ALL: [Self; 4] = [
        Self::EnhanceOnly,
        Self::EnlargeEnhance,
        Self::DoubleEnhance,
        Self::DoubleEnlarge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::EnhanceOnly => "enhance-only",
            Self::EnlargeEnhance => "enlarge-enhance",
            Self::DoubleEnhance => "double-enhance",
            Self::DoubleEnlarge => "double-enlarge",
        }
    }
}

impl fmt::Display for PostProcessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PostProcessMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown post-processing mode '{s}'")))
    }
}

/// Applies one post-processing mode. The double modes are literal
/// compositions of their single counterparts, denoise included.
pub fn post_process(
    img: &RasterImage,
    mode: PostProcessMode,
    net: &Network<f32>,
    denoise: &DenoiseParams,
) -> Result<RasterImage> {
    match mode {
        PostProcessMode::EnhanceOnly => denoise.apply(&enhance(img, net)?),
        PostProcessMode::EnlargeEnhance => upscale(img, net, 2, denoise),
        PostProcessMode::DoubleEnhance => {
            let once = post_process(img, PostProcessMode::EnhanceOnly, net, denoise)?;
            post_process(&once, PostProcessMode::EnhanceOnly, net, denoise)
        }
        PostProcessMode::DoubleEnlarge => upscale(&upscale(img, net, 2, denoise)?, net, 2, denoise),
    }
}
