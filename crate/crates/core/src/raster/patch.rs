use super::RasterImage;
use crate::error::{Error, Result};

/// Co-located low- and high-resolution patches of the same size.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchPair {
    pub lr: RasterImage,
    pub hr: RasterImage,
}

impl PatchPair {
    pub fn new(lr: RasterImage, hr: RasterImage) -> Result<Self> {
        lr.ensure_same_shape(&hr)?;
        Ok(Self { lr, hr })
    }

    pub fn size(&self) -> usize {
        self.lr.width()
    }

    pub fn channels(&self) -> usize {
        self.lr.channels()
    }
}

/// Number of patch positions along one axis.
pub fn patch_count(len: usize, size: usize, stride: usize) -> usize {
    if size > len || stride == 0 {
        0
    } else {
        (len - size) / stride + 1
    }
}

/// Cuts aligned `size × size` patches from an LR/HR pair of identical
/// dimensions, scanning row-major with the given stride. Partial patches at
/// the right and bottom borders are discarded.
pub fn extract_patches(lr: &RasterImage, hr: &RasterImage, size: usize, stride: usize) -> Result<Vec<PatchPair>> {
    lr.ensure_same_shape(hr)?;
    if size == 0 || stride == 0 {
        return Err(Error::InvalidParameter("patch size and stride must be positive".into()));
    }
    let (w, h) = lr.dims();
    if size > w || size > h {
        return Err(Error::DimensionMismatch(format!(
            "patch size {size} exceeds {w}x{h} image"
        )));
    }
    let (nx, ny) = (patch_count(w, size, stride), patch_count(h, size, stride));
    let mut out = Vec::with_capacity(nx * ny);
    for py in 0..ny {
        for px in 0..nx {
            let (x0, y0) = (px * stride, py * stride);
            out.push(PatchPair {
                lr: lr.crop(x0, y0, size, size)?,
                hr: hr.crop(x0, y0, size, size)?,
            });
        }
    }
    Ok(out)
}
