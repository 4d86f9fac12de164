//! Training-pair synthesis and the dataset archive format.
//!
//! Archive layout (little-endian):
//!
//! ```text
//! "SRDS"  version:u32 = 1  patch_size:u32  channels:u32  pair_count:u64
//! pair_count × (LR patch, HR patch), each channels × patch_size² f32 in
//!     channel-major order
//! manifest_len:u32  manifest: UTF-8 JSON array of
//!     {"file": ..., "degradation": ..., "pairs": n}
//! ```

use std::fs;
use std::io::{self, Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filters::{sharpen, DenoiseParams};
use crate::error::{Error, Result};
use crate::interp::{degrade, ScaleFactor, ScaleMethod};
use crate::raster::{extract_patches, rgb_to_ycbcr, PatchPair, RasterImage};

pub const MAGIC: [u8; 4] = *b"SRDS";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub degradation: String,
    /// Number of consecutive pairs in the archive cut from this image.
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetArchive {
    pub patch_size: usize,
    pub channels: usize,
    pub pairs: Vec<PatchPair>,
    pub manifest: Vec<ManifestEntry>,
}

/// Which planes training pairs are cut from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatchColor {
    /// The Y plane of full-range YCbCr.
    Luma,
    Rgb,
}

impl PatchColor {
    pub fn channels(self) -> usize {
        match self {
            Self::Luma => 1,
            Self::Rgb => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreprocessConfig {
    pub degradation: ScaleMethod,
    pub sharpen: bool,
    pub denoise: DenoiseParams,
    /// Denoise before sharpening instead of after.
    pub denoise_first: bool,
    pub patch_size: usize,
    pub stride: usize,
    pub color: PatchColor,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            degradation: ScaleMethod::Bilinear,
            sharpen: true,
            denoise: DenoiseParams::default_bilateral(),
            denoise_first: false,
            patch_size: 32,
            stride: 16,
            color: PatchColor::Luma,
        }
    }
}

/// Cleans one source image into the high-resolution ground truth.
pub fn prepare_ground_truth(img: &RasterImage, cfg: &PreprocessConfig) -> Result<RasterImage> {
    let mut hr = img.to_rgb();
    if cfg.denoise_first {
        hr = cfg.denoise.apply(&hr)?;
    }
    if cfg.sharpen {
        hr = sharpen(&hr);
    }
    if !cfg.denoise_first {
        hr = cfg.denoise.apply(&hr)?;
    }
    Ok(hr)
}

/// Ground truth and its half-resolution degradation, in the configured color
/// planes.
pub fn training_planes(img: &RasterImage, cfg: &PreprocessConfig) -> Result<(RasterImage, RasterImage)> {
    let hr = prepare_ground_truth(img, cfg)?;
    let lr = degrade(&hr, ScaleFactor::inverse(2)?, cfg.degradation)?;
    Ok(match cfg.color {
        PatchColor::Rgb => (lr, hr),
        PatchColor::Luma => (rgb_to_ycbcr(&lr)?.y, rgb_to_ycbcr(&hr)?.y),
    })
}

/// Turns a corpus of named images into aligned LR/HR training patches.
///
/// Images are processed in parallel; pairs are stored in corpus order.
pub fn preprocess_corpus(images: &[(String, RasterImage)], cfg: &PreprocessConfig) -> Result<DatasetArchive> {
    if images.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for (name, img) in images {
        if img.width() < cfg.patch_size || img.height() < cfg.patch_size {
            return Err(Error::DimensionMismatch(format!(
                "{name}: {}x{} is smaller than the {} pixel patch",
                img.width(),
                img.height(),
                cfg.patch_size
            )));
        }
    }
    let per_image: Vec<Vec<PatchPair>> = images
        .par_iter()
        .map(|(_, img)| {
            let (lr, hr) = training_planes(img, cfg)?;
            extract_patches(&lr, &hr, cfg.patch_size, cfg.stride)
        })
        .collect::<Result<_>>()?;
    let manifest = images
        .iter()
        .zip(&per_image)
        .map(|((name, _), pairs)| ManifestEntry {
            file: name.clone(),
            degradation: cfg.degradation.name().to_string(),
            pairs: pairs.len(),
        })
        .collect();
    Ok(DatasetArchive {
        patch_size: cfg.patch_size,
        channels: cfg.color.channels(),
        pairs: per_image.into_iter().flatten().collect(),
        manifest,
    })
}

fn write_planar(out: &mut Vec<u8>, img: &RasterImage) {
    for c in 0..img.channels() {
        for &v in img.data().iter().skip(c).step_by(img.channels()) {
            out.write_f32::<LE>(v).expect("Vec write");
        }
    }
}

fn truncated(what: &'static str) -> impl FnOnce(io::Error) -> Error {
    move |e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Truncated(format!("archive ends inside {what}")),
        _ => Error::Io(e),
    }
}

impl DatasetArchive {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Index of the source image of every pair, from the manifest.
    pub fn pair_sources(&self) -> Vec<usize> {
        self.manifest
            .iter()
            .enumerate()
            .flat_map(|(i, e)| std::iter::repeat_n(i, e.pairs))
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let plane = self.patch_size * self.patch_size * self.channels;
        let mut out = Vec::with_capacity(24 + self.pairs.len() * plane * 8);
        out.extend_from_slice(&MAGIC);
        out.write_u32::<LE>(VERSION).expect("Vec write");
        out.write_u32::<LE>(self.patch_size as u32).expect("Vec write");
        out.write_u32::<LE>(self.channels as u32).expect("Vec write");
        out.write_u64::<LE>(self.pairs.len() as u64).expect("Vec write");
        for p in &self.pairs {
            write_planar(&mut out, &p.lr);
            write_planar(&mut out, &p.hr);
        }
        let manifest = serde_json::to_vec(&self.manifest).expect("manifest serializes");
        out.write_u32::<LE>(manifest.len() as u32).expect("Vec write");
        out.extend_from_slice(&manifest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated("magic"))?;
        if magic != MAGIC {
            return Err(Error::BadMagic {
                expected: MAGIC,
                found: magic,
            });
        }
        let version = r.read_u32::<LE>().map_err(truncated("header"))?;
        if version != VERSION {
            return Err(Error::VersionMismatch {
                expected: VERSION,
                found: version,
            });
        }
        let patch_size = r.read_u32::<LE>().map_err(truncated("header"))? as usize;
        let channels = r.read_u32::<LE>().map_err(truncated("header"))? as usize;
        let count = r.read_u64::<LE>().map_err(truncated("header"))? as usize;
        if patch_size == 0 || !(channels == 1 || channels == 3) {
            return Err(Error::Inconsistent(format!(
                "patch size {patch_size} with {channels} channels"
            )));
        }
        let plane = patch_size * patch_size * channels;
        let remaining = bytes.len() - r.position() as usize;
        if count.checked_mul(plane * 8).is_none_or(|n| n > remaining) {
            return Err(Error::Truncated(format!("archive too short for {count} pairs")));
        }
        let mut buf = vec![0.0f32; plane];
        let mut read_patch = |r: &mut Cursor<&[u8]>| -> Result<RasterImage> {
            r.read_f32_into::<LE>(&mut buf).map_err(truncated("patch data"))?;
            let n = patch_size * patch_size;
            let interleaved = (0..plane).map(|i| buf[(i % channels) * n + i / channels]).collect();
            RasterImage::new(patch_size, patch_size, channels, interleaved)
                .map_err(|e| Error::Inconsistent(e.to_string()))
        };
        let mut pairs = Vec::with_capacity(count);
        for _ in 0..count {
            let lr = read_patch(&mut r)?;
            let hr = read_patch(&mut r)?;
            pairs.push(PatchPair { lr, hr });
        }
        let len = r.read_u32::<LE>().map_err(truncated("manifest length"))? as usize;
        let mut text = vec![0u8; len.min(bytes.len())];
        if len > text.len() {
            return Err(Error::Truncated("archive ends inside the manifest".into()));
        }
        r.read_exact(&mut text).map_err(truncated("manifest"))?;
        if r.position() as usize != bytes.len() {
            return Err(Error::Inconsistent("trailing bytes after manifest".into()));
        }
        let manifest: Vec<ManifestEntry> =
            serde_json::from_slice(&text).map_err(|e| Error::Inconsistent(format!("manifest: {e}")))?;
        if manifest.is_empty() {
            return Err(Error::Inconsistent("empty manifest".into()));
        }
        if manifest.iter().map(|e| e.pairs).sum::<usize>() != count {
            return Err(Error::Inconsistent("manifest pair counts do not add up".into()));
        }
        Ok(Self {
            patch_size,
            channels,
            pairs,
            manifest,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::scale;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> RasterImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RasterImage::from_fn(w, h, 3, |_, _, _| rng.random()).unwrap()
    }

    fn plain() -> PreprocessConfig {
        PreprocessConfig {
            sharpen: false,
            denoise: DenoiseParams::None,
            ..PreprocessConfig::default()
        }
    }

    #[test]
    fn tiling_count() {
        let cfg = PreprocessConfig {
            stride: 32,
            ..PreprocessConfig::default()
        };
        let a = preprocess_corpus(&[("a.png".into(), random_image(64, 64, 1))], &cfg).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a.manifest[0].pairs, 4);
        assert_eq!(a.channels, 1);
    }

    #[test]
    fn constant_image_gives_identical_pairs() {
        let flat = RasterImage::filled(48, 40, 3, 0.42).unwrap();
        let a = preprocess_corpus(&[("f".into(), flat)], &plain()).unwrap();
        assert!(a.pairs.iter().all(|p| p.lr == p.hr));
    }

    #[test]
    fn lr_patches_are_crops_of_degraded_ground_truth() {
        let images: Vec<_> = (0..3)
            .map(|i| (format!("{i}.png"), random_image(50 + 7 * i as usize, 45, i)))
            .collect();
        let cfg = PreprocessConfig {
            color: PatchColor::Rgb,
            degradation: ScaleMethod::Bicubic,
            denoise: DenoiseParams::None,
            stride: 9,
            ..PreprocessConfig::default()
        };
        let archive = preprocess_corpus(&images, &cfg).unwrap();
        let mut it = archive.pairs.iter();
        for (_, img) in &images {
            let hr = sharpen(img);
            let small = scale(&hr, ScaleFactor::inverse(2).unwrap(), ScaleMethod::Bicubic);
            let lr = crate::interp::resize(&small, hr.width(), hr.height(), ScaleMethod::Bicubic).unwrap();
            let nx = crate::raster::patch_count(hr.width(), 32, 9);
            let ny = crate::raster::patch_count(hr.height(), 32, 9);
            for j in 0..ny {
                for i in 0..nx {
                    let p = it.next().unwrap();
                    assert_eq!(p.lr, lr.crop(i * 9, j * 9, 32, 32).unwrap());
                    assert_eq!(p.hr, hr.crop(i * 9, j * 9, 32, 32).unwrap());
                }
            }
        }
        assert!(it.next().is_none());
    }

    #[test]
    fn rejects_empty_and_small_inputs() {
        assert!(matches!(preprocess_corpus(&[], &plain()), Err(Error::EmptyCorpus)));
        let small = RasterImage::filled(31, 64, 3, 0.5).unwrap();
        assert!(matches!(
            preprocess_corpus(&[("s".into(), small)], &plain()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn archive_round_trip_and_errors() {
        for color in [PatchColor::Luma, PatchColor::Rgb] {
            let cfg = PreprocessConfig {
                color,
                ..PreprocessConfig::default()
            };
            let images = vec![
                ("a.png".to_string(), random_image(40, 36, 3)),
                ("b.png".to_string(), random_image(33, 33, 4)),
            ];
            let archive = preprocess_corpus(&images, &cfg).unwrap();
            let bytes = archive.to_bytes();
            let back = DatasetArchive::from_bytes(&bytes).unwrap();
            assert_eq!(back, archive);
            assert_eq!(back.to_bytes(), bytes);
            assert_eq!(back.pair_sources(), vec![0, 1]);

            let mut bad = bytes.clone();
            bad[1] = b'X';
            assert!(matches!(DatasetArchive::from_bytes(&bad), Err(Error::BadMagic { .. })));
            let mut bad = bytes.clone();
            bad[4] = 9;
            assert!(matches!(
                DatasetArchive::from_bytes(&bad),
                Err(Error::VersionMismatch { .. })
            ));
            for cut in [2, 20, bytes.len() / 2, bytes.len() - 3] {
                assert!(
                    matches!(DatasetArchive::from_bytes(&bytes[..cut]), Err(Error::Truncated(_))),
                    "cut {cut}"
                );
            }
        }
    }
}
