use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageReader};

use super::RasterImage;
use crate::error::{Error, Result};

/// On-disk formats. JPEG is decode-only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    /// Binary PNM: `P6` for RGB, `P5` for grayscale.
    Ppm,
    Jpeg,
}

impl ImageFormat {
    pub fn from_extension(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(Self::Png),
            "ppm" | "pgm" | "pnm" => Some(Self::Ppm),
            "jpg" | "jpeg" => Some(Self::Jpeg),
            _ => None,
        }
    }

    fn sniff(bytes: &[u8]) -> Option<Self> {
        if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
            Some(Self::Png)
        } else if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
            Some(Self::Jpeg)
        } else if bytes.starts_with(b"P6") || bytes.starts_with(b"P5") {
            Some(Self::Ppm)
        } else {
            None
        }
    }
}

/// Reads a PNG, PPM/PGM or JPEG file. Alpha is dropped; gray images load as
/// one channel.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    match ImageFormat::sniff(&bytes) {
        Some(ImageFormat::Ppm) => decode_pnm(&bytes),
        Some(_) => decode_with_image_crate(&bytes),
        None => Err(Error::UnsupportedFormat(format!(
            "{}: unrecognized file signature",
            path.display()
        ))),
    }
}

/// Writes PNG or PPM depending on the file extension.
pub fn save_image(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match ImageFormat::from_extension(path) {
        Some(ImageFormat::Png) => encode_png(img)?,
        Some(ImageFormat::Ppm) => encode_pnm(img),
        Some(ImageFormat::Jpeg) => return Err(Error::UnsupportedFormat("JPEG is supported for reading only".into())),
        None => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: unknown output extension",
                path.display()
            )))
        }
    };
    fs::write(path, bytes)?;
    Ok(())
}

fn decode_with_image_crate(bytes: &[u8]) -> Result<RasterImage> {
    let decoded = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()?
        .decode()
        .map_err(|e| Error::CorruptImage(e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    match decoded {
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_) => RasterImage::from_u8(w, h, 1, decoded.to_luma8().as_raw()),
        other => RasterImage::from_u8(w, h, 3, other.to_rgb8().as_raw()),
    }
}

fn encode_png(img: &RasterImage) -> Result<Vec<u8>> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let raw = img.to_u8();
    let dynamic = match img.channels() {
        1 => DynamicImage::ImageLuma8(image::GrayImage::from_raw(w, h, raw).expect("buffer size")),
        _ => DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, raw).expect("buffer size")),
    };
    let mut out = Vec::new();
    dynamic
        .write_to(&mut Cursor::new(&mut out), image::ImageFormat::Png)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(out)
}

/// `P6\n<w> <h>\n255\n` (or `P5` for gray) followed by raw samples.
fn encode_pnm(img: &RasterImage) -> Vec<u8> {
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.to_u8());
    out
}

fn decode_pnm(bytes: &[u8]) -> Result<RasterImage> {
    let channels = if bytes.starts_with(b"P6") { 3 } else { 1 };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // Whitespace and `#` comments may separate header fields.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::CorruptImage("malformed PNM header".into()))?;
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "PNM maxval {maxval} (only 255 is supported)"
        )));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::CorruptImage("malformed PNM header".into()));
    }
    pos += 1;
    let need = w * h * channels;
    let body = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::CorruptImage(format!("PNM body shorter than {need} bytes")))?;
    RasterImage::from_u8(w, h, channels, body).map_err(|e| Error::CorruptImage(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_u8_image(w: usize, h: usize, c: usize, seed: u64) -> RasterImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bytes: Vec<u8> = (0..w * h * c).map(|_| rng.random()).collect();
        RasterImage::from_u8(w, h, c, &bytes).unwrap()
    }

    #[test]
    fn png_and_ppm_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for (name, c) in [("a.png", 3), ("g.png", 1), ("a.ppm", 3), ("g.pgm", 1)] {
            let img = random_u8_image(13, 7, c, c as u64);
            let path = dir.path().join(name);
            save_image(&img, &path).unwrap();
            let back = load_image(&path).unwrap();
            assert_eq!(back.to_u8(), img.to_u8(), "{name}");
            assert_eq!(back.channels(), c);
        }
    }

    #[test]
    fn ppm_layout_is_exact() {
        let img = RasterImage::from_u8(2, 1, 3, &[255, 0, 0, 1, 2, 3]).unwrap();
        assert_eq!(encode_pnm(&img), b"P6\n2 1\n255\n\xff\x00\x00\x01\x02\x03");
    }

    #[test]
    fn loads_one_pixel_red_ppm() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("red.ppm");
        fs::write(&path, b"P6\n1 1\n255\n\xff\x00\x00").unwrap();
        assert_eq!(load_image(&path).unwrap().data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn distinct_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_image(dir.path().join("missing.png")),
            Err(Error::NotFound(_))
        ));

        let junk = dir.path().join("junk.png");
        fs::write(&junk, b"not an image at all").unwrap();
        assert!(matches!(load_image(&junk), Err(Error::UnsupportedFormat(_))));

        let corrupt = dir.path().join("corrupt.png");
        let mut bytes = b"\x89PNG\r\n\x1a\n".to_vec();
        bytes.extend_from_slice(&[0u8; 40]);
        fs::write(&corrupt, bytes).unwrap();
        assert!(matches!(load_image(&corrupt), Err(Error::CorruptImage(_))));

        let short = dir.path().join("short.ppm");
        fs::write(&short, b"P6\n4 4\n255\n\x00\x00").unwrap();
        assert!(matches!(load_image(&short), Err(Error::CorruptImage(_))));

        let img = random_u8_image(2, 2, 3, 1);
        assert!(matches!(
            save_image(&img, dir.path().join("x.jpg")),
            Err(Error::UnsupportedFormat(_))
        ));
        assert!(matches!(
            save_image(&img, dir.path().join("x.bmp")),
            Err(Error::UnsupportedFormat(_))
        ));
    }
}
