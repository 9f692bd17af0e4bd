//! File formats: PFM for HDR images, 8-bit PNG for LDR images and masks,
//! JSON for parameters and reports.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ::image::{ImageBuffer, Luma, Rgb};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::image::{Mask, RgbImage};
use crate::{Error, Result};

/// Write a three-channel little-endian PFM (rows stored bottom to top).
pub fn write_pfm(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        write!(w, "PF\n{} {}\n-1.0\n", img.width(), img.height())?;
        for y in (0..img.height()).rev() {
            for x in 0..img.width() {
                for c in img.get(x, y) {
                    w.write_all(&(c as f32).to_le_bytes())?;
                }
            }
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Read a PFM file. Grayscale (`Pf`) images are replicated to three channels.
pub fn read_pfm(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pfm(&bytes).map_err(|reason| Error::format(path, reason))
}

fn parse_pfm(bytes: &[u8]) -> std::result::Result<RgbImage, String> {
    let mut pos = 0;
    let mut token = || -> std::result::Result<String, String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let channels = match token()?.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(format!("unknown PFM magic {other:?}")),
    };
    let width: usize = token()?.parse().map_err(|_| "bad width")?;
    let height: usize = token()?.parse().map_err(|_| "bad height")?;
    let scale: f64 = token()?.parse().map_err(|_| "bad scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err("scale must be non-zero".into());
    }
    let little = scale < 0.0;
    // exactly one whitespace byte separates the header from the data
    let data = &bytes[pos + 1..];
    let expected = width * height * channels * 4;
    if data.len() < expected {
        return Err(format!("expected {expected} data bytes, found {}", data.len()));
    }

    let mut img = RgbImage::new(width, height);
    let mut values = data.chunks_exact(4).map(|b| {
        let b = [b[0], b[1], b[2], b[3]];
        (if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) }) as f64
    });
    for y in (0..height).rev() {
        for x in 0..width {
            let px = if channels == 3 {
                [values.next().unwrap(), values.next().unwrap(), values.next().unwrap()]
            } else {
                [values.next().unwrap(); 3]
            };
            img.set(x, y, px);
        }
    }
    Ok(img)
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Write an 8-bit RGB PNG; values are clipped to `[0, 1]`.
pub fn write_png(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_raw(
        img.width() as u32,
        img.height() as u32,
        img.data().iter().map(|&v| to_u8(v)).collect(),
    )
    .expect("buffer length matches dimensions");
    buf.save(path.as_ref())?;
    Ok(())
}

/// Read a PNG as RGB in `[0, 1]`.
pub fn read_png(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::io(path, std::io::ErrorKind::NotFound.into()));
    }
    let img = ::image::open(path)?.to_rgb32f();
    let (w, h) = img.dimensions();
    RgbImage::from_vec(
        w as usize,
        h as usize,
        img.into_raw().into_iter().map(f64::from).collect(),
    )
}

/// Read a grayscale mask; pixels brighter than mid-gray are set.
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::io(path, std::io::ErrorKind::NotFound.into()));
    }
    let img = ::image::open(path)?.to_luma8();
    let (w, h) = img.dimensions();
    Mask::from_vec(
        w as usize,
        h as usize,
        img.into_raw().into_iter().map(|v| v > 127).collect(),
    )
}

pub fn write_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(
        mask.width() as u32,
        mask.height() as u32,
        mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect(),
    )
    .expect("buffer length matches dimensions");
    buf.save(path.as_ref())?;
    Ok(())
}

/// Load an image by extension: `.pfm` as HDR, anything else through the
/// PNG reader.
pub fn read_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("pfm") => read_pfm(path),
        _ => read_png(path),
    }
}

pub fn write_image(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("pfm") => write_pfm(path, img),
        _ => write_png(path, img),
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient() -> RgbImage {
        let mut img = RgbImage::new(5, 3);
        for y in 0..3 {
            for x in 0..5 {
                img.set(x, y, [x as f64 * 0.25, y as f64 * 0.5, 1.5]);
            }
        }
        img
    }

    #[test]
    fn pfm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pfm");
        let img = gradient();
        write_pfm(&p, &img).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"PF\n5 3\n-1.0\n"));
        assert_eq!(read_pfm(&p).unwrap(), img);
    }

    #[test]
    fn pfm_rows_are_bottom_up() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pfm");
        write_pfm(&p, &gradient()).unwrap();
        let bytes = fs::read(&p).unwrap();
        let data = &bytes[b"PF\n5 3\n-1.0\n".len()..];
        // first stored pixel is the bottom-left one: (0, 1.0, 1.5)
        let g = f32::from_le_bytes([data[4], data[5], data[6], data[7]]);
        assert_eq!(g, 1.0);
    }

    #[test]
    fn pfm_big_endian_and_gray() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend(0.5f32.to_be_bytes());
        bytes.extend(2.0f32.to_be_bytes());
        let img = parse_pfm(&bytes).unwrap();
        assert_eq!(img.get(0, 0), [0.5; 3]);
        assert_eq!(img.get(1, 0), [2.0; 3]);
    }

    #[test]
    fn pfm_rejects_garbage() {
        assert!(parse_pfm(b"P6\n1 1\n255\n").is_err());
        assert!(parse_pfm(b"PF\n4 4\n-1.0\n\0\0").is_err());
    }

    #[test]
    fn png_round_trip_quantizes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let img = gradient().map(|v| v.min(1.0));
        write_png(&p, &img).unwrap();
        let back = read_png(&p).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-7);
        }
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        let m = Mask::from_fn(4, 2, |x, y| (x + y) % 2 == 0);
        write_mask(&p, &m).unwrap();
        assert_eq!(read_mask(&p).unwrap(), m);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(read_pfm("/nonexistent/x.pfm"), Err(Error::Io { .. })));
        assert!(matches!(read_png("/nonexistent/x.png"), Err(Error::Io { .. })));
    }
}
