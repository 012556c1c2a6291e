//! RGB raster with real-valued intensities in `[0, 1]`.
//!
//! [`Image`] is the unit every corruption kernel and estimator consumes. Pixels
//! are stored interleaved (`r, g, b, r, g, b, ...`) in row-major order.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};
use thiserror::Error;

/// Smallest supported width or height.
pub const MIN_SIDE: usize = 8;

/// Number of colour channels; grayscale and alpha inputs are converted on load.
pub const CHANNELS: usize = 3;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image {width}x{height} is below the {MIN_SIDE}x{MIN_SIDE} minimum")]
    TooSmall { width: usize, height: usize },
    #[error("expected {expected} intensities for the raster, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("intensity {value} at offset {offset} is outside [0, 1]")]
    OutOfRange { offset: usize, value: f64 },
    #[error("image codec error: {0}")]
    Codec(#[from] image::ImageError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image from interleaved RGB intensities, validating shape and range.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(ImageError::TooSmall { width, height });
        }
        let expected = width * height * CHANNELS;
        if data.len() != expected {
            return Err(ImageError::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        if let Some((offset, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(ImageError::OutOfRange { offset, value });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image from arbitrary values, clipping each into `[0, 1]`.
    /// Non-finite values map to zero.
    pub fn from_unclipped(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        let data = data
            .into_iter()
            .map(|v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 })
            .collect();
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height * CHANNELS])
    }

    /// Builds an image by evaluating `f(x, y, channel)` for every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                for c in 0..CHANNELS {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::from_unclipped(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, channel: usize) -> f64 {
        self.data[(y * self.width + x) * CHANNELS + channel]
    }

    /// Mean over every intensity of every channel.
    pub fn mean(&self) -> f64 {
        crate::metrics::stats::kahan_sum(self.data.iter().copied()) / self.data.len() as f64
    }

    /// Decodes PNG or JPEG bytes into an RGB image.
    pub fn decode(bytes: &[u8]) -> Result<Self, ImageError> {
        let decoded = image::load_from_memory(bytes)?;
        Self::from_rgb8(&decoded.to_rgb8())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        let decoded = image::open(path)?;
        Self::from_rgb8(&decoded.to_rgb8())
    }

    pub fn from_rgb8(rgb: &RgbImage) -> Result<Self, ImageError> {
        let data = rgb.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect();
        Self::new(rgb.width() as usize, rgb.height() as usize, data)
    }

    /// Quantizes to 8 bits per channel (round to nearest).
    pub fn to_rgb8(&self) -> RgbImage {
        let raw = self.data.iter().map(|&v| quantize_u8(v)).collect();
        RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("raster length matches dimensions")
    }

    /// Lossless 8-bit PNG encoding, as sent over the wire protocol.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>, ImageError> {
        let mut out = Cursor::new(Vec::new());
        self.to_rgb8().write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        self.to_rgb8()
            .save_with_format(path, ImageFormat::Png)
            .map_err(ImageError::from)
    }

    /// Splits into one plane per channel.
    pub(crate) fn planes(&self) -> [Plane; CHANNELS] {
        std::array::from_fn(|c| Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().skip(c).step_by(CHANNELS).copied().collect(),
        })
    }

    /// Interleaves planes and clips into `[0, 1]`.
    pub(crate) fn from_planes(planes: &[Plane; CHANNELS]) -> Self {
        let (width, height) = (planes[0].width, planes[0].height);
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for i in 0..width * height {
            for plane in planes {
                let v = plane.data[i];
                data.push(if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 });
            }
        }
        Self {
            width,
            height,
            data,
        }
    }
}

pub(crate) fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Single-channel working buffer. Unlike [`Image`] its values are unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
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

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// 180 degree rotation.
    pub fn rot180(&self) -> Self {
        let mut data = self.data.clone();
        data.reverse();
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }
}
