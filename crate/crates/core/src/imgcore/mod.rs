//! Image containers, log transform, Mexican-hat filtering and file I/O.
//!
//! Pixels are stored row-major, top row first, as `f64` linear RGB.

mod filter;
mod io;

pub use filter::{log_transform, mexican_hat, MexicanHat, DEFAULT_EPS, DEFAULT_SIGMA};
pub use io::{
    load_image, load_mask_png, load_scalar_pfm, save_image, save_mask_png, save_rgb8_png,
    save_scalar_pfm, ImageFormat,
};

use crate::error::{Error, Result};

/// A linear-RGB image with finite, non-negative samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

impl LinearImage {
    pub fn new(width: usize, height: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        for (i, px) in data.iter().enumerate() {
            for (channel, &value) in px.iter().enumerate() {
                if !value.is_finite() || value < 0.0 {
                    return Err(Error::InvalidPixel {
                        x: i % width,
                        y: i / width,
                        channel,
                        value,
                    });
                }
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![[0.0; 3]; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn into_pixels(self) -> Vec<[f64; 3]> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    pub fn same_size<T: Dimensions>(&self, other: &T) -> bool {
        self.width == other.width() && self.height == other.height()
    }

    /// Multiplies every sample by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        let data = self
            .data
            .iter()
            .map(|p| [p[0] * k, p[1] * k, p[2] * k])
            .collect();
        Self::new(self.width, self.height, data)
    }

    pub fn max_value(&self) -> f64 {
        self.data
            .iter()
            .flat_map(|p| p.iter().copied())
            .fold(0.0, f64::max)
    }
}

/// Per-pixel participation flags; `true` means the pixel takes part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl PixelMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Pixel-wise conjunction.
    pub fn and(&self, other: &PixelMask) -> Result<PixelMask> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(format!(
                "mask {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a && b)
            .collect();
        Ok(PixelMask {
            width: self.width,
            height: self.height,
            data,
        })
    }
}

/// A scalar map with a validity mask. Valid entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
    mask: Vec<bool>,
}

impl ScalarMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if mask.len() != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} entries, data has {}",
                mask.len(),
                data.len()
            )));
        }
        let mut mask = mask;
        // Non-finite values cannot be valid.
        for (m, v) in mask.iter_mut().zip(&data) {
            if !v.is_finite() {
                *m = false;
            }
        }
        Ok(Self {
            width,
            height,
            data,
            mask,
        })
    }

    /// All-valid map built from a closure.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data, vec![true; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Raw values, including those of invalid pixels.
    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn validity(&self) -> &[bool] {
        &self.mask
    }

    pub fn mask(&self) -> PixelMask {
        PixelMask {
            width: self.width,
            height: self.height,
            data: self.mask.clone(),
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        self.mask[i].then(|| self.data[i])
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&v| v).count()
    }

    /// Iterator over `(index, value)` of valid pixels.
    pub fn valid_values(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.data
            .iter()
            .zip(&self.mask)
            .enumerate()
            .filter_map(|(i, (&v, &m))| m.then_some((i, v)))
    }

    /// Invalidates every pixel where `mask` is false.
    pub fn restrict(mut self, mask: &PixelMask) -> Result<Self> {
        if mask.width != self.width || mask.height != self.height {
            return Err(Error::DimensionMismatch(format!(
                "map {}x{} vs mask {}x{}",
                self.width, self.height, mask.width, mask.height
            )));
        }
        for (m, &keep) in self.mask.iter_mut().zip(&mask.data) {
            *m &= keep;
        }
        Ok(self)
    }
}

/// An image paired with the pixels that carry usable signal.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedImage {
    pub image: LinearImage,
    pub mask: PixelMask,
}

impl MaskedImage {
    pub fn new(image: LinearImage, mask: PixelMask) -> Result<Self> {
        if !image.same_size(&mask) {
            return Err(Error::DimensionMismatch(format!(
                "image {}x{} vs mask {}x{}",
                image.width(),
                image.height(),
                mask.width(),
                mask.height()
            )));
        }
        Ok(Self { image, mask })
    }

    pub fn unmasked(image: LinearImage) -> Self {
        let mask = PixelMask::full(image.width(), image.height());
        Self { image, mask }
    }
}

/// Anything with a pixel grid.
pub trait Dimensions {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
}

macro_rules! impl_dimensions {
    ($($t:ty),*) => {
        $(impl Dimensions for $t {
            fn width(&self) -> usize { self.width }
            fn height(&self) -> usize { self.height }
        })*
    };
}

impl_dimensions!(LinearImage, PixelMask, ScalarMap);

pub(crate) fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::DimensionMismatch(format!(
            "{width}x{height} grid with {len} samples"
        )));
    }
    Ok(())
}

pub(crate) fn ensure_same_size<A: Dimensions, B: Dimensions>(
    a: &A,
    b: &B,
    what: &str,
) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}
