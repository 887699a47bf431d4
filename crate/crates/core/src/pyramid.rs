//! Four-level Gaussian and Laplacian pyramids.
//!
//! Reduce: separable binomial blur `[1 4 6 4 1] / 16` with reflect-101
//! borders, then keep even samples (ceiling dimensions). Expand: zero
//! insertion into the recorded finer dimensions followed by the same kernel
//! scaled by two per axis.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::image::{Image, ImageError};

pub const LEVELS: usize = 4;

/// Smallest side accepted for pyramid construction.
pub const MIN_SIDE: usize = 8;

const KERNEL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

#[derive(Debug, Clone, PartialEq)]
pub enum PyramidError {
    Image(ImageError),
    /// Level `level` has dimensions inconsistent with its finer neighbour.
    Structure {
        level: usize,
        expected: (usize, usize),
        actual: (usize, usize),
    },
}

impl fmt::Display for PyramidError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Image(e) => write!(f, "{e}"),
            Self::Structure { level, expected, actual } => write!(
                f,
                "pyramid level {level} is {}x{}, expected {}x{}",
                actual.0, actual.1, expected.0, expected.1
            ),
        }
    }
}

impl core::error::Error for PyramidError {}

impl From<ImageError> for PyramidError {
    fn from(e: ImageError) -> Self {
        Self::Image(e)
    }
}

/// Reflect-101 index into `0..n` (the edge sample is not repeated).
#[inline]
pub fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

fn check_size(img: &Image) -> Result<(), PyramidError> {
    if img.width() < MIN_SIDE || img.height() < MIN_SIDE {
        return Err(ImageError::TooSmall {
            width: img.width(),
            height: img.height(),
            min: MIN_SIDE,
        }
        .into());
    }
    Ok(())
}

/// Blur and decimate by two; output is `ceil(w/2) × ceil(h/2)`.
pub fn reduce(img: &Image) -> Image {
    let (w, h, c) = img.dims();
    let ow = w.div_ceil(2);
    let oh = h.div_ceil(2);
    // horizontal pass at even columns only
    let mut tmp = vec![0.0; ow * h * c];
    for y in 0..h {
        for ox in 0..ow {
            let x = 2 * ox as isize;
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, wgt) in KERNEL.iter().enumerate() {
                    acc += wgt * img.get(reflect101(x + k as isize - 2, w), y, ch);
                }
                tmp[(y * ow + ox) * c + ch] = acc;
            }
        }
    }
    let mut out = vec![0.0; ow * oh * c];
    for oy in 0..oh {
        let y = 2 * oy as isize;
        for ox in 0..ow {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, wgt) in KERNEL.iter().enumerate() {
                    let yy = reflect101(y + k as isize - 2, h);
                    acc += wgt * tmp[(yy * ow + ox) * c + ch];
                }
                out[(oy * ow + ox) * c + ch] = acc;
            }
        }
    }
    Image::new(ow, oh, c, out).expect("shape is consistent")
}

/// Taps of the expand filter for one output coordinate: coarse index and weight.
fn expand_taps(n_fine: usize) -> Vec<[(usize, f64); 3]> {
    (0..n_fine)
        .map(|x| {
            let mut taps = [(0usize, 0.0f64); 3];
            let mut t = 0;
            for (k, wgt) in KERNEL.iter().enumerate() {
                let xx = reflect101(x as isize + k as isize - 2, n_fine);
                if xx.is_multiple_of(2) {
                    // taps landing on the same coarse sample are merged
                    if let Some(slot) = taps[..t].iter_mut().find(|s| s.0 == xx / 2) {
                        slot.1 += 2.0 * wgt;
                    } else {
                        taps[t] = (xx / 2, 2.0 * wgt);
                        t += 1;
                    }
                }
            }
            taps
        })
        .collect()
}

/// Upsample `img` to `width × height`, which must halve (rounding up) to
/// the dimensions of `img`.
pub fn expand(img: &Image, width: usize, height: usize) -> Result<Image, PyramidError> {
    let (cw, ch_, c) = img.dims();
    if width.div_ceil(2) != cw || height.div_ceil(2) != ch_ {
        return Err(PyramidError::Structure {
            level: 0,
            expected: (width.div_ceil(2), height.div_ceil(2)),
            actual: (cw, ch_),
        });
    }
    let xt = expand_taps(width);
    let yt = expand_taps(height);
    let mut tmp = vec![0.0; width * ch_ * c];
    for cy in 0..ch_ {
        for (x, taps) in xt.iter().enumerate() {
            for ch in 0..c {
                let mut acc = 0.0;
                for &(cx, wgt) in taps {
                    acc += wgt * img.get(cx, cy, ch);
                }
                tmp[(cy * width + x) * c + ch] = acc;
            }
        }
    }
    let mut out = vec![0.0; width * height * c];
    for (y, taps) in yt.iter().enumerate() {
        for x in 0..width {
            for ch in 0..c {
                let mut acc = 0.0;
                for &(cy, wgt) in taps {
                    acc += wgt * tmp[(cy * width + x) * c + ch];
                }
                out[(y * width + x) * c + ch] = acc;
            }
        }
    }
    Ok(Image::new(width, height, c, out)?)
}

/// Level 1 is the input; each further level is [`reduce`] of the previous.
pub fn gaussian_pyramid(img: &Image) -> Result<Vec<Image>, PyramidError> {
    check_size(img)?;
    Ok(gaussian_levels(img, LEVELS))
}

pub(crate) fn gaussian_levels(img: &Image, levels: usize) -> Vec<Image> {
    let mut out = Vec::with_capacity(levels);
    out.push(img.clone());
    for _ in 1..levels {
        let next = reduce(out.last().expect("non-empty"));
        out.push(next);
    }
    out
}

/// `l1..l3` band-pass, `l4` low-pass residual.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianPyramid {
    levels: Vec<Image>,
}

impl LaplacianPyramid {
    /// Checks that each level halves (rounding up) the previous one.
    pub fn from_levels(levels: Vec<Image>) -> Result<Self, PyramidError> {
        if levels.len() != LEVELS {
            return Err(PyramidError::Structure {
                level: levels.len(),
                expected: (LEVELS, 1),
                actual: (levels.len(), 1),
            });
        }
        for k in 1..levels.len() {
            let prev = &levels[k - 1];
            let cur = &levels[k];
            let expected = (prev.width().div_ceil(2), prev.height().div_ceil(2));
            if (cur.width(), cur.height()) != expected || cur.channels() != prev.channels() {
                return Err(PyramidError::Structure {
                    level: k + 1,
                    expected,
                    actual: (cur.width(), cur.height()),
                });
            }
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[Image] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &Image {
        &self.levels[k]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut Image {
        &mut self.levels[k]
    }
}

pub fn laplacian_pyramid(img: &Image) -> Result<LaplacianPyramid, PyramidError> {
    let gp = gaussian_pyramid(img)?;
    let mut levels = Vec::with_capacity(LEVELS);
    for k in 0..LEVELS - 1 {
        let up = expand(&gp[k + 1], gp[k].width(), gp[k].height())?;
        levels.push(gp[k].sub(&up)?);
    }
    levels.push(gp[LEVELS - 1].clone());
    Ok(LaplacianPyramid { levels })
}

/// Upsample-and-add from the coarsest level to the finest.
pub fn reconstruct(lp: &LaplacianPyramid) -> Result<Image, PyramidError> {
    let levels = lp.levels();
    let mut cur = levels[levels.len() - 1].clone();
    for k in (0..levels.len() - 1).rev() {
        let fine = &levels[k];
        let up = expand(&cur, fine.width(), fine.height()).map_err(|_| PyramidError::Structure {
            level: k + 2,
            expected: (fine.width().div_ceil(2), fine.height().div_ceil(2)),
            actual: (cur.width(), cur.height()),
        })?;
        cur = up.add(fine)?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(w: usize, h: usize, seed: u64) -> Image {
        let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        Image::from_fn(w, h, |_, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect101(-1, 5), 1);
        assert_eq!(reflect101(-2, 5), 2);
        assert_eq!(reflect101(5, 5), 3);
        assert_eq!(reflect101(6, 5), 2);
        assert_eq!(reflect101(-3, 2), 1);
        assert_eq!(reflect101(7, 1), 0);
    }

    #[test]
    fn level_sizes() {
        let sizes = |w, h| -> Vec<(usize, usize)> {
            gaussian_pyramid(&Image::filled(w, h, 1, 0.3))
                .unwrap()
                .iter()
                .map(|l| (l.width(), l.height()))
                .collect()
        };
        assert_eq!(sizes(64, 64), [(64, 64), (32, 32), (16, 16), (8, 8)]);
        assert_eq!(sizes(65, 65), [(65, 65), (33, 33), (17, 17), (9, 9)]);
        assert!(gaussian_pyramid(&Image::filled(7, 64, 1, 0.0)).is_err());
    }

    #[test]
    fn constant_image_everywhere_constant() {
        for (w, h) in [(64, 64), (65, 47), (8, 9)] {
            let img = Image::filled(w, h, 3, 0.37);
            for l in gaussian_pyramid(&img).unwrap() {
                assert!(l.data().iter().all(|v| (v - 0.37).abs() < 1e-15));
            }
            let lp = laplacian_pyramid(&img).unwrap();
            for k in 0..3 {
                assert!(lp.level(k).data().iter().all(|v| v.abs() < 1e-15));
            }
            assert!(lp.level(3).data().iter().all(|v| (v - 0.37).abs() < 1e-15));
            let back = reconstruct(&lp).unwrap();
            assert!(back.data().iter().all(|v| (v - 0.37).abs() < 1e-15));
        }
    }

    #[test]
    fn zero_pyramid_reconstructs_zero() {
        let lp = laplacian_pyramid(&Image::filled(20, 12, 1, 0.0)).unwrap();
        assert!(reconstruct(&lp).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_lives_mostly_in_finest_band() {
        let mut img = Image::filled(32, 32, 1, 0.0);
        img.set(16, 16, 0, 1.0);
        let lp = laplacian_pyramid(&img).unwrap();
        let energy: Vec<f64> = lp.levels().iter().map(|l| l.data().iter().map(|v| v * v).sum()).collect();
        assert!(energy[0] > energy[1] && energy[0] > energy[2] && energy[0] > energy[3]);
        // oracle: upsample each level's contribution to full size and sum
        let mut total = Image::filled(32, 32, 1, 0.0);
        for k in 0..LEVELS {
            let mut contribution = lp.level(k).clone();
            for j in (0..k).rev() {
                let fine = lp.level(j);
                contribution = expand(&contribution, fine.width(), fine.height()).unwrap();
            }
            total = total.add(&contribution).unwrap();
        }
        assert!(total.max_abs_diff(&img) < 1e-12);
    }

    #[test]
    fn odd_size_roundtrip() {
        let img = noise(65, 47, 3);
        let back = reconstruct(&laplacian_pyramid(&img).unwrap()).unwrap();
        assert!(back.max_abs_diff(&img) < 1e-12);
    }

    #[test]
    fn inconsistent_levels_rejected() {
        let lp = laplacian_pyramid(&noise(16, 16, 1)).unwrap();
        let mut levels = lp.levels().to_vec();
        levels[2] = Image::filled(5, 4, 1, 0.0);
        assert!(matches!(
            LaplacianPyramid::from_levels(levels),
            Err(PyramidError::Structure { level: 3, .. })
        ));
    }
}
