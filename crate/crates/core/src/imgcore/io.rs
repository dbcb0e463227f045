//! PFM and PNG reading/writing.
//!
//! PFM files are written little-endian (scale `-1.0`) with rows stored bottom
//! to top, as the format prescribes. 16-bit PNGs are taken as linear and
//! divided by 65535.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use super::{LinearImage, PixelMask, ScalarMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pfm,
    Png16,
}

impl ImageFormat {
    /// Guesses the format from the file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("pfm") => Ok(ImageFormat::Pfm),
            Some("png") => Ok(ImageFormat::Png16),
            _ => Err(Error::format(
                path,
                "unknown image extension (expected .pfm or .png)",
            )),
        }
    }
}

pub fn load_image(path: impl AsRef<Path>, format: ImageFormat) -> Result<LinearImage> {
    let path = path.as_ref();
    match format {
        ImageFormat::Pfm => {
            let pfm = read_pfm(path)?;
            if pfm.channels != 3 {
                return Err(Error::format(
                    path,
                    "expected a color (PF) file, found grayscale (Pf)",
                ));
            }
            let data = pfm
                .data
                .chunks_exact(3)
                .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
                .collect();
            LinearImage::new(pfm.width, pfm.height, data)
                .map_err(|e| Error::format(path, e.to_string()))
        }
        ImageFormat::Png16 => load_png16(path),
    }
}

pub fn save_image(img: &LinearImage, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        ImageFormat::Pfm => {
            let data: Vec<f32> = img
                .pixels()
                .iter()
                .flat_map(|p| p.iter().map(|&v| v as f32))
                .collect();
            write_pfm(path, img.width(), img.height(), 3, &data)
        }
        ImageFormat::Png16 => {
            let raw: Vec<u16> = img
                .pixels()
                .iter()
                .flat_map(|p| p.iter().map(|&v| quantize16(v)))
                .collect();
            let buf: ImageBuffer<Rgb<u16>, Vec<u16>> =
                ImageBuffer::from_raw(img.width() as u32, img.height() as u32, raw)
                    .expect("buffer length matches dimensions");
            buf.save(path)
                .map_err(|e| Error::format(path, format!("png encode failed: {e}")))
        }
    }
}

/// Writes a single-channel `Pf` file; invalid pixels become NaN.
pub fn save_scalar_pfm(map: &ScalarMap, path: impl AsRef<Path>) -> Result<()> {
    let data: Vec<f32> = map
        .values()
        .iter()
        .zip(map.validity())
        .map(|(&v, &m)| if m { v as f32 } else { f32::NAN })
        .collect();
    write_pfm(path.as_ref(), map.width(), map.height(), 1, &data)
}

/// Reads a single-channel `Pf` file; non-finite samples are invalid.
pub fn load_scalar_pfm(path: impl AsRef<Path>) -> Result<ScalarMap> {
    let path = path.as_ref();
    let pfm = read_pfm(path)?;
    if pfm.channels != 1 {
        return Err(Error::format(path, "expected a grayscale (Pf) file"));
    }
    let data: Vec<f64> = pfm.data.iter().map(|&v| v as f64).collect();
    let mask = data.iter().map(|v| v.is_finite()).collect();
    ScalarMap::new(pfm.width, pfm.height, data, mask)
}

/// Writes a mask as an 8-bit grayscale PNG with values 0 and 255.
pub fn save_mask_png(mask: &PixelMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw: Vec<u8> = mask
        .as_slice()
        .iter()
        .map(|&m| if m { 255 } else { 0 })
        .collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, raw)
            .expect("buffer length matches dimensions");
    buf.save(path)
        .map_err(|e| Error::format(path, format!("png encode failed: {e}")))
}

/// Reads a mask PNG of any bit depth; any non-zero luma is `true`.
pub fn load_mask_png(path: impl AsRef<Path>) -> Result<PixelMask> {
    let path = path.as_ref();
    let img = open_png(path)?;
    let luma = img.to_luma16();
    let (w, h) = luma.dimensions();
    PixelMask::new(
        w as usize,
        h as usize,
        luma.as_raw().iter().map(|&v| v > 0).collect(),
    )
}

/// Writes an 8-bit RGB PNG, used for visualizations.
pub fn save_rgb8_png(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    pixels: &[[u8; 3]],
) -> Result<()> {
    let path = path.as_ref();
    let raw: Vec<u8> = pixels.iter().flatten().copied().collect();
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(width as u32, height as u32, raw).ok_or_else(|| {
            Error::DimensionMismatch(format!("{} pixels for {width}x{height}", pixels.len()))
        })?;
    buf.save(path)
        .map_err(|e| Error::format(path, format!("png encode failed: {e}")))
}

fn quantize16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn open_png(path: &Path) -> Result<DynamicImage> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    image::ImageReader::with_format(BufReader::new(file), image::ImageFormat::Png)
        .decode()
        .map_err(|e| Error::format(path, format!("png decode failed: {e}")))
}

fn load_png16(path: &Path) -> Result<LinearImage> {
    let img = open_png(path)?;
    let rgb = match img {
        DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_)
        | DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_) => img.to_rgb16(),
        other => {
            return Err(Error::UnsupportedBitDepth {
                path: path.to_path_buf(),
                detail: format!("{:?}, expected 16 bits per channel", other.color()),
            })
        }
    };
    let (w, h) = rgb.dimensions();
    let data = rgb
        .as_raw()
        .chunks_exact(3)
        .map(|c| {
            [
                c[0] as f64 / 65535.0,
                c[1] as f64 / 65535.0,
                c[2] as f64 / 65535.0,
            ]
        })
        .collect();
    LinearImage::new(w as usize, h as usize, data)
}

struct Pfm {
    width: usize,
    height: usize,
    channels: usize,
    /// Interleaved samples, top row first.
    data: Vec<f32>,
}

fn read_pfm(path: &Path) -> Result<Pfm> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;

    let mut pos = 0;
    let mut token = || -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated PFM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let channels = match token()?.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(Error::format(path, format!("bad PFM magic {other:?}"))),
    };
    let width: usize = token()?
        .parse()
        .map_err(|_| Error::format(path, "bad PFM width"))?;
    let height: usize = token()?
        .parse()
        .map_err(|_| Error::format(path, "bad PFM height"))?;
    let scale: f64 = token()?
        .parse()
        .map_err(|_| Error::format(path, "bad PFM scale"))?;
    if width == 0 || height == 0 || scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(path, "degenerate PFM header"));
    }
    // Exactly one whitespace byte separates the header from the payload.
    pos += 1;

    let count = width * height * channels;
    let payload = bytes.get(pos..).unwrap_or_default();
    if payload.len() != count * 4 {
        return Err(Error::format(
            path,
            format!(
                "header says {width}x{height}x{channels} ({} bytes) but payload has {} bytes",
                count * 4,
                payload.len()
            ),
        ));
    }
    let little = scale < 0.0;
    let samples: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| {
            let b = [b[0], b[1], b[2], b[3]];
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();

    let row = width * channels;
    let mut data = Vec::with_capacity(count);
    for y in (0..height).rev() {
        data.extend_from_slice(&samples[y * row..(y + 1) * row]);
    }
    Ok(Pfm {
        width,
        height,
        channels,
        data,
    })
}

fn write_pfm(
    path: &Path,
    width: usize,
    height: usize,
    channels: usize,
    data: &[f32],
) -> Result<()> {
    debug_assert_eq!(data.len(), width * height * channels);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let magic = if channels == 3 { "PF" } else { "Pf" };
    let row = width * channels;
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        write!(out, "{magic}\n{width} {height}\n-1.0\n")?;
        for y in (0..height).rev() {
            for v in &data[y * row..(y + 1) * row] {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}
