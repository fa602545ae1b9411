//! Depth evidence extraction: representative relative depth per person,
//! intra-human regression slope with correlation weight, and the global
//! scale bounds [X_min, X_max] for the solver.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::ImageSize;

/// Non-quasi-planar scale bound multipliers.
pub const DEFAULT_ALPHA1: f64 = 1.0;
pub const DEFAULT_ALPHA2: f64 = 5.0;

#[derive(Debug, Error, PartialEq)]
pub enum DepthFitError {
    #[error("raster has {got} values, expected {expected} for its dimensions")]
    RasterSizeMismatch { got: usize, expected: usize },
    #[error("raster contains a non-finite value at index {0}")]
    NonFiniteRaster(usize),
    #[error("no visible in-bounds pixel to sample")]
    EmptySample,
    #[error("need at least 2 samples with non-identical rel depths, got {0} usable")]
    DegenerateSamples(usize),
    #[error("all correlation weights vanish; no usable intra-human fit")]
    NoUsableFits,
    #[error("scale estimate must be positive, got {0}")]
    NonPositiveScale(f64),
}

/// Row-major grid of relative-depth values (top-left origin).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthRaster {
    pub size: ImageSize,
    values: Vec<f32>,
}

impl DepthRaster {
    pub fn new(size: ImageSize, values: Vec<f32>) -> Result<Self, DepthFitError> {
        let expected = size.width as usize * size.height as usize;
        if values.len() != expected {
            return Err(DepthFitError::RasterSizeMismatch {
                got: values.len(),
                expected,
            });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(DepthFitError::NonFiniteRaster(idx));
        }
        Ok(Self { size, values })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Nearest-pixel lookup; `None` when the rounded pixel is out of bounds.
    pub fn sample_nearest(&self, x: f64, y: f64) -> Option<f64> {
        let col = x.round();
        let row = y.round();
        if col < 0.0 || row < 0.0 || !col.is_finite() || !row.is_finite() {
            return None;
        }
        let (col, row) = (col as u32, row as u32);
        if col >= self.size.width || row >= self.size.height {
            return None;
        }
        let idx = row as usize * self.size.width as usize + col as usize;
        Some(f64::from(self.values[idx]))
    }
}

/// A projected surface-point pixel with its visibility flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexPixel {
    pub x: f64,
    pub y: f64,
    #[serde(default = "default_visible")]
    pub visible: bool,
}

fn default_visible() -> bool {
    true
}

/// One (mesh depth, raster value) pair for the intra-human regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthSamplePair {
    /// Person's own predicted camera-space depth at a surface point, meters.
    #[serde(rename = "mesh_depth_m")]
    pub mesh_depth: f64,
    /// Relative depth map value at the projected pixel, dimensionless.
    pub rel_depth: f64,
}

/// Per-person regression of mesh depth on raster value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntraHumanFit {
    /// OLS slope X_i, meters per rel-depth unit.
    pub slope: f64,
    /// Pearson correlation w_i in [-1, 1].
    pub correlation: f64,
    pub sample_count: usize,
}

/// Feasible range for the global depth scale s_d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleBounds {
    /// Weighted-average intra-human slope X.
    pub x_estimate: f64,
    /// X_min = alpha1 * X.
    pub lower: f64,
    /// X_max = alpha2 * X.
    pub upper: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Inter-person depth spread smaller than within-person spread;
    /// the scale is then fixed to X.
    pub quasi_planar: bool,
}

/// Mean raster value over the visible in-bounds pixels (nearest-pixel lookup).
pub fn sample_representative_depth(
    raster: &DepthRaster,
    pixels: &[VertexPixel],
) -> Result<f64, DepthFitError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for p in pixels {
        if !p.visible {
            continue;
        }
        if let Some(v) = raster.sample_nearest(p.x, p.y) {
            sum += v;
            count += 1;
        }
    }
    if count == 0 {
        return Err(DepthFitError::EmptySample);
    }
    Ok(sum / count as f64)
}

/// OLS slope of mesh depth regressed on rel depth, plus their Pearson
/// correlation. A person whose mesh depths are all identical carries no
/// linear evidence; its correlation is defined as 0.
pub fn fit_intra_human(samples: &[DepthSamplePair]) -> Result<IntraHumanFit, DepthFitError> {
    let n = samples.len();
    if n < 2 {
        return Err(DepthFitError::DegenerateSamples(n));
    }
    let nf = n as f64;
    let mean_rel = samples.iter().map(|s| s.rel_depth).sum::<f64>() / nf;
    let mean_mesh = samples.iter().map(|s| s.mesh_depth).sum::<f64>() / nf;

    let mut ss_rel = 0.0;
    let mut ss_mesh = 0.0;
    let mut ss_cross = 0.0;
    for s in samples {
        let dr = s.rel_depth - mean_rel;
        let dm = s.mesh_depth - mean_mesh;
        ss_rel += dr * dr;
        ss_mesh += dm * dm;
        ss_cross += dr * dm;
    }
    if ss_rel == 0.0 {
        return Err(DepthFitError::DegenerateSamples(n));
    }
    let slope = ss_cross / ss_rel;
    let correlation = if ss_mesh == 0.0 {
        0.0
    } else {
        (ss_cross / (ss_rel.sqrt() * ss_mesh.sqrt())).clamp(-1.0, 1.0)
    };
    Ok(IntraHumanFit {
        slope,
        correlation,
        sample_count: n,
    })
}

/// Correlation-weighted average of the per-person slopes. Negative
/// correlations indicate a depth-model failure for that person and are
/// clamped to zero before weighting. Compensated summation keeps the
/// result independent of aggregation order.
pub fn aggregate_scale(fits: &[IntraHumanFit]) -> Result<f64, DepthFitError> {
    let mut num = KahanSum::default();
    let mut den = KahanSum::default();
    for fit in fits {
        let w = fit.correlation.max(0.0);
        num.add(w * fit.slope);
        den.add(w);
    }
    if den.value() <= 0.0 {
        return Err(DepthFitError::NoUsableFits);
    }
    Ok(num.value() / den.value())
}

/// Population variance (divide by N). Defined as 0 for a single value.
pub fn population_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Pick scale bounds around X with the default (alpha1, alpha2) = (1, 5).
pub fn select_bounds(
    x_estimate: f64,
    inter_depths: &[f64],
    intra_variances: &[f64],
) -> Result<ScaleBounds, DepthFitError> {
    select_bounds_with_alphas(
        x_estimate,
        inter_depths,
        intra_variances,
        DEFAULT_ALPHA1,
        DEFAULT_ALPHA2,
    )
}

/// Quasi-planar scenes (inter-person depth variance below the mean
/// intra-person variance) pin the scale: (alpha1, alpha2) = (1, 1).
/// Otherwise the supplied multipliers apply.
pub fn select_bounds_with_alphas(
    x_estimate: f64,
    inter_depths: &[f64],
    intra_variances: &[f64],
    alpha1: f64,
    alpha2: f64,
) -> Result<ScaleBounds, DepthFitError> {
    if !x_estimate.is_finite() || x_estimate <= 0.0 {
        return Err(DepthFitError::NonPositiveScale(x_estimate));
    }
    let inter_var = population_variance(inter_depths);
    let mean_intra = if intra_variances.is_empty() {
        0.0
    } else {
        intra_variances.iter().sum::<f64>() / intra_variances.len() as f64
    };
    let quasi_planar = inter_var < mean_intra;
    let (a1, a2) = if quasi_planar {
        (1.0, 1.0)
    } else {
        (alpha1, alpha2)
    };
    Ok(ScaleBounds {
        x_estimate,
        lower: a1 * x_estimate,
        upper: a2 * x_estimate,
        alpha1: a1,
        alpha2: a2,
        quasi_planar,
    })
}

/// Kahan compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, value: f64) {
        let y = value - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}
