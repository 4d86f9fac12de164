use super::{clamp_unit, RasterImage};
use crate::error::{Error, Result};

/// Full-range (JPEG/JFIF) luma-chroma planes. Chroma is offset by 0.5 so
/// every plane lives in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct YCbCrImage {
    pub y: RasterImage,
    pub cb: RasterImage,
    pub cr: RasterImage,
}

impl YCbCrImage {
    pub fn new(y: RasterImage, cb: RasterImage, cr: RasterImage) -> Result<Self> {
        for p in [&y, &cb, &cr] {
            if p.channels() != 1 {
                return Err(Error::ChannelMismatch {
                    expected: 1,
                    actual: p.channels(),
                });
            }
        }
        if y.dims() != cb.dims() || y.dims() != cr.dims() {
            return Err(Error::DimensionMismatch(
                "Y, Cb and Cr planes must have identical dimensions".into(),
            ));
        }
        Ok(Self { y, cb, cr })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.y.dims()
    }
}

#[inline]
fn forward(r: f64, g: f64, b: f64) -> [f64; 3] {
    [
        0.299 * r + 0.587 * g + 0.114 * b,
        0.5 - 0.168736 * r - 0.331264 * g + 0.5 * b,
        0.5 + 0.5 * r - 0.418688 * g - 0.081312 * b,
    ]
}

#[inline]
fn inverse(y: f64, cb: f64, cr: f64) -> [f64; 3] {
    let cb = cb - 0.5;
    let cr = cr - 0.5;
    [y + 1.402 * cr, y - 0.344136 * cb - 0.714136 * cr, y + 1.772 * cb]
}

pub fn rgb_to_ycbcr(img: &RasterImage) -> Result<YCbCrImage> {
    if img.channels() != 3 {
        return Err(Error::ChannelMismatch {
            expected: 3,
            actual: img.channels(),
        });
    }
    let n = img.width() * img.height();
    let mut planes = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for px in img.data().chunks_exact(3) {
        let out = forward(px[0] as f64, px[1] as f64, px[2] as f64);
        for (plane, v) in planes.iter_mut().zip(out) {
            plane.push(clamp_unit(v as f32));
        }
    }
    let (w, h) = img.dims();
    let [y, cb, cr] = planes;
    Ok(YCbCrImage {
        y: RasterImage::new(w, h, 1, y)?,
        cb: RasterImage::new(w, h, 1, cb)?,
        cr: RasterImage::new(w, h, 1, cr)?,
    })
}

pub fn ycbcr_to_rgb(img: &YCbCrImage) -> Result<RasterImage> {
    let (w, h) = img.dims();
    let mut data = Vec::with_capacity(w * h * 3);
    for ((&y, &cb), &cr) in img.y.data().iter().zip(img.cb.data()).zip(img.cr.data()) {
        for v in inverse(y as f64, cb as f64, cr as f64) {
            data.push(clamp_unit(v as f32));
        }
    }
    RasterImage::new(w, h, 3, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pixel(r: f32, g: f32, b: f32) -> RasterImage {
        RasterImage::new(1, 1, 3, vec![r, g, b]).unwrap()
    }

    #[test]
    fn black_and_white_have_neutral_chroma() {
        let black = rgb_to_ycbcr(&pixel(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(
            (black.y.get(0, 0, 0), black.cb.get(0, 0, 0), black.cr.get(0, 0, 0)),
            (0.0, 0.5, 0.5)
        );
        let white = rgb_to_ycbcr(&pixel(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(
            (white.y.get(0, 0, 0), white.cb.get(0, 0, 0), white.cr.get(0, 0, 0)),
            (1.0, 0.5, 0.5)
        );
    }

    #[test]
    fn inverse_of_extremes() {
        let one = |v| RasterImage::new(1, 1, 1, vec![v]).unwrap();
        let black = ycbcr_to_rgb(&YCbCrImage::new(one(0.0), one(0.5), one(0.5)).unwrap()).unwrap();
        assert_eq!(black.data(), &[0.0, 0.0, 0.0]);
        let white = ycbcr_to_rgb(&YCbCrImage::new(one(1.0), one(0.5), one(0.5)).unwrap()).unwrap();
        assert_eq!(white.data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn single_channel_input_is_rejected() {
        let gray = RasterImage::filled(2, 2, 1, 0.3).unwrap();
        assert!(matches!(
            rgb_to_ycbcr(&gray),
            Err(Error::ChannelMismatch { expected: 3, actual: 1 })
        ));
    }

    #[test]
    fn matches_scalar_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let img = RasterImage::from_fn(9, 7, 3, |_, _, _| rng.random::<f32>()).unwrap();
        let ycc = rgb_to_ycbcr(&img).unwrap();
        for y in 0..7 {
            for x in 0..9 {
                let (r, g, b) = (img.get(x, y, 0), img.get(x, y, 1), img.get(x, y, 2));
                let ey = 0.299 * r + 0.587 * g + 0.114 * b;
                let ecb = 0.5 - 0.168736 * r - 0.331264 * g + 0.5 * b;
                let ecr = 0.5 + 0.5 * r - 0.418688 * g - 0.081312 * b;
                assert!((ycc.y.get(x, y, 0) - ey.clamp(0.0, 1.0)).abs() <= 1e-6);
                assert!((ycc.cb.get(x, y, 0) - ecb.clamp(0.0, 1.0)).abs() <= 1e-6);
                assert!((ycc.cr.get(x, y, 0) - ecr.clamp(0.0, 1.0)).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn round_trip_error_bounded_on_all_gray_levels_and_primaries() {
        let mut worst = 0.0f32;
        for v in 0..=255u8 {
            for rgb in [[v, 0, 0], [0, v, 0], [0, 0, v], [v, v, v], [v, 255 - v, v / 2]] {
                let img = RasterImage::from_u8(1, 1, 3, &rgb).unwrap();
                let back = ycbcr_to_rgb(&rgb_to_ycbcr(&img).unwrap()).unwrap();
                for (a, b) in img.data().iter().zip(back.data()) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        assert!(worst <= 2.0 / 255.0, "worst {worst}");
    }
}
