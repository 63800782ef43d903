//! Training-time augmentation: random nearest-neighbour zoom, random crop,
//! max normalization and a monotone piecewise-linear histogram shift.
//!
//! Every random draw comes from a ChaCha8 stream seeded by the caller, so an
//! augmented sample is a pure function of `(image, config, seed)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::engine::{Scalar, Tensor};
use crate::imaging::{downsample_nn, Image16};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error("bad input shape: {0}")]
    BadInputShape(String),
    #[error("bad augmentation config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CropMode {
    Random,
    Center,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AugmentConfig {
    pub zoom_lo: f64,
    pub zoom_hi: f64,
    pub output_side: usize,
    /// Interior control points of the intensity remap; 0 disables it.
    pub hist_points: usize,
    /// Maximum displacement of a control point, as a fraction of full range.
    pub hist_mag: f64,
    pub crop: CropMode,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            zoom_lo: 0.9,
            zoom_hi: 1.1,
            output_side: 224,
            hist_points: 3,
            hist_mag: 0.1,
            crop: CropMode::Random,
        }
    }
}

impl AugmentConfig {
    /// Identity augmentation: no zoom, center crop, no intensity remap.
    pub fn disabled(output_side: usize) -> Self {
        AugmentConfig {
            zoom_lo: 1.0,
            zoom_hi: 1.0,
            output_side,
            hist_points: 0,
            hist_mag: 0.0,
            crop: CropMode::Center,
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        if !(self.zoom_lo > 0.0 && self.zoom_lo <= self.zoom_hi && self.zoom_hi.is_finite()) {
            return Err(AugmentError::BadConfig(format!(
                "zoom range [{}, {}]",
                self.zoom_lo, self.zoom_hi
            )));
        }
        if self.output_side == 0 {
            return Err(AugmentError::BadConfig("output side 0".into()));
        }
        if !(0.0..=1.0).contains(&self.hist_mag) {
            return Err(AugmentError::BadConfig(format!("hist_mag {}", self.hist_mag)));
        }
        Ok(())
    }

    /// Smallest square input side for which every zoom keeps the crop inside.
    pub fn min_input_side(&self) -> usize {
        let mut side = self.output_side;
        while zoomed_side(side, self.zoom_lo) < self.output_side {
            side += 1;
        }
        side
    }
}

fn zoomed_side(side: usize, factor: f64) -> usize {
    (libm::round(side as f64 * factor) as usize).max(1)
}

/// Monotone piecewise-linear map of `[0, 1]` onto itself through `(0, 0)`,
/// the interior control points and `(1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityRemap {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl IntensityRemap {
    pub fn identity() -> Self {
        IntensityRemap {
            xs: alloc::vec![0.0, 1.0],
            ys: alloc::vec![0.0, 1.0],
        }
    }

    /// Control points at `k / (points + 1)`, each shifted by up to `±mag`,
    /// clamped to `[0, 1]` and sorted so the map stays monotone.
    pub fn random<R: Rng>(points: usize, mag: f64, rng: &mut R) -> Self {
        let mut xs = Vec::with_capacity(points + 2);
        let mut ys = Vec::with_capacity(points + 2);
        xs.push(0.0);
        ys.push(0.0);
        for k in 1..=points {
            let x = k as f64 / (points + 1) as f64;
            let shift = if mag > 0.0 { rng.random_range(-mag..=mag) } else { 0.0 };
            xs.push(x);
            ys.push((x + shift).clamp(0.0, 1.0));
        }
        xs.push(1.0);
        ys.push(1.0);
        ys.sort_by(f64::total_cmp);
        IntensityRemap { xs, ys }
    }

    pub fn apply(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, 1.0);
        let seg = self.xs.windows(2).position(|w| v <= w[1]).unwrap_or(self.xs.len() - 2);
        let (x0, x1) = (self.xs[seg], self.xs[seg + 1]);
        let (y0, y1) = (self.ys[seg], self.ys[seg + 1]);
        y0 + (y1 - y0) * (v - x0) / (x1 - x0)
    }
}

/// Crops `side × side` at `(x0, y0)` and divides by `max` (zero stays zero).
fn crop_normalized<T: Scalar>(img: &Image16, x0: usize, y0: usize, side: usize, max: u16, remap: &IntensityRemap) -> Vec<T> {
    let max = if max == 0 { 1.0 } else { max as f64 };
    let identity = remap.xs.len() == 2;
    let mut out = Vec::with_capacity(side * side);
    for y in y0..y0 + side {
        let row = &img.data()[y * img.width() + x0..y * img.width() + x0 + side];
        out.extend(row.iter().map(|&v| {
            let n = v as f64 / max;
            T::from_f64_lossy(if identity { n } else { remap.apply(n) })
        }));
    }
    out
}

fn check_input(img: &Image16, cfg: &AugmentConfig) -> Result<(), AugmentError> {
    cfg.validate()?;
    if !img.is_square() {
        return Err(AugmentError::BadInputShape(format!(
            "{}x{} is not square",
            img.width(),
            img.height()
        )));
    }
    if zoomed_side(img.width(), cfg.zoom_lo) < cfg.output_side {
        return Err(AugmentError::BadInputShape(format!(
            "side {} too small for a {} crop at zoom {}",
            img.width(),
            cfg.output_side,
            cfg.zoom_lo
        )));
    }
    Ok(())
}

/// Augments one square image into a `[1, side, side]` tensor in `[0, 1]`.
pub fn augment_sample<T: Scalar>(img: &Image16, cfg: &AugmentConfig, seed: u64) -> Result<Tensor<T>, AugmentError> {
    check_input(img, cfg)?;
    let mut rng = rng_from_seed(seed);
    let factor = if cfg.zoom_hi > cfg.zoom_lo {
        rng.random_range(cfg.zoom_lo..=cfg.zoom_hi)
    } else {
        cfg.zoom_lo
    };
    let z = zoomed_side(img.width(), factor);
    let zoomed;
    let src = if z == img.width() {
        img
    } else {
        zoomed = downsample_nn(img, z).map_err(|e| AugmentError::BadInputShape(format!("{e}")))?;
        &zoomed
    };
    let s = cfg.output_side;
    let slack = z - s;
    let (x0, y0) = match cfg.crop {
        CropMode::Center => (slack / 2, slack / 2),
        CropMode::Random => (rng.random_range(0..=slack), rng.random_range(0..=slack)),
    };
    let remap = if cfg.hist_points > 0 && cfg.hist_mag > 0.0 {
        IntensityRemap::random(cfg.hist_points, cfg.hist_mag, &mut rng)
    } else {
        IntensityRemap::identity()
    };
    let data = crop_normalized(src, x0, y0, s, img.max_value(), &remap);
    Ok(Tensor::from_vec(&[1, s, s], data).expect("crop size matches shape"))
}

/// Deterministic evaluation transform: center crop of the max-normalized
/// image.
pub fn center_crop<T: Scalar>(img: &Image16, side: usize) -> Result<Tensor<T>, AugmentError> {
    augment_sample(img, &AugmentConfig::disabled(side), 0)
}
