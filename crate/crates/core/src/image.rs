//! Row-major floating-point rasters.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)]
use num_traits::Float;


/// Rec. 601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, PartialEq)]
pub enum ImageError {
    /// Sample buffer length does not match `width × height × channels`.
    BufferSize { expected: usize, actual: usize },
    UnsupportedChannels(usize),
    TooSmall { width: usize, height: usize, min: usize },
    DimensionMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },
}

impl fmt::Display for ImageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BufferSize { expected, actual } => {
                write!(f, "sample buffer has {actual} values, expected {expected}")
            }
            Self::UnsupportedChannels(c) => write!(f, "{c} channels (only 1 or 3 supported)"),
            Self::TooSmall { width, height, min } => {
                write!(f, "image {width}x{height} is smaller than the {min}x{min} minimum")
            }
            Self::DimensionMismatch { expected, actual } => write!(
                f,
                "image dimensions {}x{}x{} do not match expected {}x{}x{}",
                actual.0, actual.1, actual.2, expected.0, expected.1, expected.2
            ),
        }
    }
}

impl core::error::Error for ImageError {}

/// Interleaved samples, nominal range `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::UnsupportedChannels(channels));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(ImageError::BufferSize {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self::new(width, height, channels, vec![value; width * height * channels])
            .expect("channels must be 1 or 3")
    }

    /// Single-channel image from `f(x, y)`.
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
            channels: 1,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Image {
        Image {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn clamp01(&self) -> Image {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    /// Luminance plane; single-channel images are returned unchanged.
    pub fn luminance(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|px| LUMA_WEIGHTS[0] * px[0] + LUMA_WEIGHTS[1] * px[1] + LUMA_WEIGHTS[2] * px[2])
            .collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    pub fn mean_luminance(&self) -> f64 {
        let l = self.luminance();
        if l.data.is_empty() {
            return 0.0;
        }
        l.data.iter().sum::<f64>() / l.data.len() as f64
    }

    /// One channel as a single-channel image.
    pub fn channel(&self, c: usize) -> Image {
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Interleaves single-channel planes.
    pub fn from_planes(planes: &[Image]) -> Result<Image, ImageError> {
        let first = planes.first().ok_or(ImageError::UnsupportedChannels(0))?;
        let (w, h) = (first.width, first.height);
        for p in planes {
            if p.dims() != (w, h, 1) {
                return Err(ImageError::DimensionMismatch {
                    expected: (w, h, 1),
                    actual: p.dims(),
                });
            }
        }
        let c = planes.len();
        let mut data = vec![0.0; w * h * c];
        for (ci, p) in planes.iter().enumerate() {
            for (i, v) in p.data.iter().enumerate() {
                data[i * c + ci] = *v;
            }
        }
        Image::new(w, h, c, data)
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &Image) -> Result<Image, ImageError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Image) -> Result<Image, ImageError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(&self, other: &Image, mut f: impl FnMut(f64, f64) -> f64) -> Result<Image, ImageError> {
        if self.dims() != other.dims() {
            return Err(ImageError::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(Image {
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
            ..*self
        })
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn mean_abs_diff(&self, other: &Image) -> f64 {
        let n = self.data.len().max(1) as f64;
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).sum::<f64>() / n
    }

    /// Bilinear sample of channel 0 at a continuous position, plus the exact
    /// partial derivatives of the bilinear interpolant. `None` outside
    /// `[0, w-1) × [0, h-1)`.
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<(f64, f64, f64)> {
        if !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        if x0 + 1 >= self.width || y0 + 1 >= self.height {
            return None;
        }
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let c = self.channels;
        let i00 = (y0 * self.width + x0) * c;
        let i10 = i00 + c;
        let i01 = i00 + self.width * c;
        let i11 = i01 + c;
        let (a, b, cc, d) = (self.data[i00], self.data[i10], self.data[i01], self.data[i11]);
        let top = a + fx * (b - a);
        let bot = cc + fx * (d - cc);
        let v = top + fy * (bot - top);
        let gx = (b - a) * (1.0 - fy) + (d - cc) * fy;
        let gy = bot - top;
        Some((v, gx, gy))
    }
}

/// Per-pixel ray length in scene units; `0` marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if data.len() != width * height {
            return Err(ImageError::BufferSize {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self { width, height, data })
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

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        let d = self.get(x, y);
        d > 0.0 && d.is_finite()
    }
}
