//! Exposure correction.
//!
//! - [`estimate_gamma`] / [`apply_gamma`]: global adaptive gamma, `γ = ln(target) / ln(mean)`.
//! - [`enhance_local`]: spatially varying gain on the low-pass level of a
//!   four-level Laplacian pyramid, with damped gain on the band-pass levels.
//!
//! Running an external learned enhancer over a directory of frames needs a
//! filesystem and processes and is provided by the std companion crate.

use alloc::string::String;
use alloc::vec;
use core::fmt;

use serde::{Deserialize, Serialize};
#[allow(unused_imports)]
use num_traits::Float;

use crate::image::Image;
use crate::pyramid::{expand, laplacian_pyramid, reconstruct, reflect101, PyramidError, LEVELS};

/// Luminance is clamped into `[MEAN_FLOOR, 1 - MEAN_FLOOR]` before taking logs.
const MEAN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnhanceMethod {
    None,
    GlobalGamma,
    LocalPyramid,
    External,
}

impl EnhanceMethod {
    pub const ALL: [EnhanceMethod; 4] = [Self::None, Self::GlobalGamma, Self::LocalPyramid, Self::External];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::GlobalGamma => "global_gamma",
            Self::LocalPyramid => "local_pyramid",
            Self::External => "external",
        }
    }
}

impl fmt::Display for EnhanceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for EnhanceMethod {
    type Err = EnhanceError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| EnhanceError::UnknownMethod(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnhanceParams {
    pub method: EnhanceMethod,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gain_min: f64,
    pub gain_max: f64,
    pub target_mean: f64,
    /// Band-pass levels are scaled by `gain^detail_exponent`.
    pub detail_exponent: f64,
    pub external_command: String,
}

impl Default for EnhanceParams {
    fn default() -> Self {
        Self {
            method: EnhanceMethod::None,
            gamma_min: 0.4,
            gamma_max: 2.5,
            gain_min: 0.5,
            gain_max: 4.0,
            target_mean: 0.5,
            detail_exponent: 0.5,
            external_command: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnhanceError {
    InvalidParams(String),
    UnknownMethod(String),
    Pyramid(PyramidError),
    /// The method needs the std companion crate (external process).
    RequiresHost(EnhanceMethod),
}

impl fmt::Display for EnhanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidParams(m) => write!(f, "invalid enhancement parameters: {m}"),
            Self::UnknownMethod(m) => write!(
                f,
                "unknown enhancement method {m:?} (expected none, global_gamma, local_pyramid or external)"
            ),
            Self::Pyramid(e) => write!(f, "{e}"),
            Self::RequiresHost(m) => write!(f, "method {m} cannot be applied to a single in-memory frame"),
        }
    }
}

impl core::error::Error for EnhanceError {}

impl From<PyramidError> for EnhanceError {
    fn from(e: PyramidError) -> Self {
        Self::Pyramid(e)
    }
}

impl EnhanceParams {
    pub fn with_method(method: EnhanceMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EnhanceError> {
        let bad = |m: &str| Err(EnhanceError::InvalidParams(m.into()));
        if !(self.gamma_min > 0.0 && self.gamma_min <= self.gamma_max && self.gamma_max.is_finite()) {
            return bad("need 0 < gamma_min <= gamma_max");
        }
        if !(self.gain_min > 0.0 && self.gain_min <= 1.0 && self.gain_max >= 1.0 && self.gain_max.is_finite()) {
            return bad("need 0 < gain_min <= 1 <= gain_max");
        }
        if !(self.target_mean > 0.0 && self.target_mean < 1.0) {
            return bad("target_mean must lie in (0, 1)");
        }
        if !(self.detail_exponent >= 0.0 && self.detail_exponent.is_finite()) {
            return bad("detail_exponent must be finite and non-negative");
        }
        if self.method == EnhanceMethod::External && self.external_command.trim().is_empty() {
            return bad("external method needs a command");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaEstimate {
    pub gamma: f64,
    /// Mean luminance was 0 or 1 (or outside) and had to be clamped.
    pub mean_clamped: bool,
    /// The raw estimate fell outside `[gamma_min, gamma_max]`.
    pub gamma_clamped: bool,
}

/// `γ = ln(target) / ln(mean luminance)`, clamped to the parameter range.
pub fn estimate_gamma(img: &Image, params: &EnhanceParams) -> GammaEstimate {
    let raw_mean = img.mean_luminance();
    let mean = raw_mean.clamp(MEAN_FLOOR, 1.0 - MEAN_FLOOR);
    let mean_clamped = !(raw_mean == mean);
    let raw = params.target_mean.ln() / mean.ln();
    let gamma = raw.clamp(params.gamma_min, params.gamma_max);
    GammaEstimate {
        gamma,
        mean_clamped,
        gamma_clamped: gamma != raw,
    }
}

/// `out = clamp(in, 0, 1)^γ` per sample.
pub fn apply_gamma(img: &Image, gamma: f64) -> Image {
    if gamma == 1.0 {
        return img.clone();
    }
    img.map(|v| v.clamp(0.0, 1.0).powf(gamma))
}

pub fn enhance_global(img: &Image, params: &EnhanceParams) -> Image {
    apply_gamma(img, estimate_gamma(img, params).gamma)
}

/// Box filter with reflect-101 borders; `window` is forced odd.
fn box_filter(img: &Image, window: usize) -> Image {
    let r = (window / 2) as isize;
    let (w, h, _) = img.dims();
    let n = (2 * r + 1) as f64;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for d in -r..=r {
                acc += img.get(reflect101(x as isize + d, w), y, 0);
            }
            tmp[y * w + x] = acc / n;
        }
    }
    Image::from_fn(w, h, |x, y| {
        let mut acc = 0.0;
        for d in -r..=r {
            acc += tmp[reflect101(y as isize + d, h) * w + x];
        }
        acc / n
    })
}

/// Gain field on the low-pass grid: `target / local mean`, clamped.
pub fn local_gain(lowpass_luma: &Image, params: &EnhanceParams) -> Image {
    let side = lowpass_luma.width().min(lowpass_luma.height());
    let window = (side / 4).max(3) | 1;
    let local = box_filter(lowpass_luma, window);
    local.map(|m| {
        if m > 0.0 {
            (params.target_mean / m).clamp(params.gain_min, params.gain_max)
        } else {
            params.gain_max
        }
    })
}

/// Local exposure correction in the Laplacian domain. Output is clipped to
/// `[0, 1]`; color images receive the same gain on every channel.
pub fn enhance_local(img: &Image, params: &EnhanceParams) -> Result<Image, EnhanceError> {
    let mut lp = laplacian_pyramid(img)?;
    let low = lp.level(LEVELS - 1).luminance();
    let gain = local_gain(&low, params);

    let mut gains = vec![gain];
    for k in (0..LEVELS - 1).rev() {
        let target = lp.level(k);
        let up = expand(gains.last().expect("non-empty"), target.width(), target.height())?;
        gains.push(up);
    }
    gains.reverse();

    let c = img.channels();
    for (k, g) in gains.iter().enumerate() {
        let exponent = if k == LEVELS - 1 { 1.0 } else { params.detail_exponent };
        let level = lp.level_mut(k);
        let w = level.width();
        for (i, px) in level.data_mut().chunks_exact_mut(c).enumerate() {
            let gv = g.get(i % w, i / w, 0);
            let f = if exponent == 1.0 { gv } else { gv.powf(exponent) };
            for v in px {
                *v *= f;
            }
        }
    }
    let out = reconstruct(&lp)?;
    Ok(out.map(|v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 }))
}

/// Dispatches the in-memory methods.
pub fn enhance(img: &Image, params: &EnhanceParams) -> Result<Image, EnhanceError> {
    match params.method {
        EnhanceMethod::None => Ok(img.clone()),
        EnhanceMethod::GlobalGamma => Ok(enhance_global(img, params)),
        EnhanceMethod::LocalPyramid => enhance_local(img, params),
        EnhanceMethod::External => Err(EnhanceError::RequiresHost(EnhanceMethod::External)),
    }
}
