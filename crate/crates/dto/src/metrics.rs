//! Evaluation metrics (pairwise depth-relation accuracy, height error) and
//! the two scalar loss functions (asymmetric FoV loss, relative metric
//! loss), all pure functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Predicted depths closer than this (meters) count as the same layer.
pub const DEFAULT_PCDR_EQUAL_THRESHOLD_M: f64 = 0.2;
/// Ground-truth annotation layers are built with this separation (meters).
pub const DEFAULT_LAYER_THRESHOLD_M: f64 = 0.3;
/// Relative-metric-loss proximity gate tau (meters).
pub const DEFAULT_RM_TAU_M: f64 = 1.0;
/// FoV overestimation penalty multiplier.
pub const FOV_OVERESTIMATION_FACTOR: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("need at least 2 annotated persons, got {0}")]
    InsufficientPersons(usize),
    #[error("prediction/annotation length mismatch ({pred} vs {gt})")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("no visible keypoints")]
    NoVisibleKeypoints,
    #[error("head height must be positive, got {0}")]
    InvalidHeadHeight(f64),
}

/// Pairwise depth ordering between two persons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DepthRelation {
    Closer,
    Farther,
    Equal,
}

/// Optional per-person ground truth attached to a scene.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruthAnnotation {
    /// Ordinal relative depth layer (smaller = closer).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_layer: Option<i64>,
    #[serde(
        default,
        rename = "gt_depth_m",
        skip_serializing_if = "Option::is_none"
    )]
    pub gt_depth: Option<f64>,
    #[serde(
        default,
        rename = "gt_height_m",
        skip_serializing_if = "Option::is_none"
    )]
    pub gt_height: Option<f64>,
    #[serde(
        default,
        rename = "gt_fov_rad",
        skip_serializing_if = "Option::is_none"
    )]
    pub gt_fov: Option<f64>,
}

/// Relation of person i to person j from annotation layers.
pub fn relation_from_layers(layer_i: i64, layer_j: i64) -> DepthRelation {
    match layer_i.cmp(&layer_j) {
        std::cmp::Ordering::Less => DepthRelation::Closer,
        std::cmp::Ordering::Greater => DepthRelation::Farther,
        std::cmp::Ordering::Equal => DepthRelation::Equal,
    }
}

/// Relation of person i to person j from predicted depths.
pub fn relation_from_depths(z_i: f64, z_j: f64, equal_threshold: f64) -> DepthRelation {
    if (z_i - z_j).abs() < equal_threshold {
        DepthRelation::Equal
    } else if z_i < z_j {
        DepthRelation::Closer
    } else {
        DepthRelation::Farther
    }
}

/// Correct/total pair counts for one image, optionally restricted to pairs
/// touching a person selected by `include` (the age-bucket rule).
pub fn pcdr_counts(
    pred_depths: &[f64],
    gt_layers: &[i64],
    equal_threshold: f64,
    include: Option<&[bool]>,
) -> Result<(usize, usize), MetricsError> {
    if pred_depths.len() != gt_layers.len() {
        return Err(MetricsError::LengthMismatch {
            pred: pred_depths.len(),
            gt: gt_layers.len(),
        });
    }
    if let Some(mask) = include {
        if mask.len() != pred_depths.len() {
            return Err(MetricsError::LengthMismatch {
                pred: pred_depths.len(),
                gt: mask.len(),
            });
        }
    }
    let n = pred_depths.len();
    if n < 2 {
        return Err(MetricsError::InsufficientPersons(n));
    }
    let mut correct = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if let Some(mask) = include {
                if !mask[i] && !mask[j] {
                    continue;
                }
            }
            total += 1;
            let gt = relation_from_layers(gt_layers[i], gt_layers[j]);
            let pred = relation_from_depths(pred_depths[i], pred_depths[j], equal_threshold);
            if gt == pred {
                correct += 1;
            }
        }
    }
    Ok((correct, total))
}

/// Percentage of correct depth relations over all unordered pairs of one
/// image.
pub fn pcdr(
    pred_depths: &[f64],
    gt_layers: &[i64],
    equal_threshold: f64,
) -> Result<f64, MetricsError> {
    let (correct, total) = pcdr_counts(pred_depths, gt_layers, equal_threshold, None)?;
    Ok(correct as f64 / total as f64)
}

/// Asymmetric FoV loss: overestimation is penalized 3x.
pub fn fov_loss(pred: f64, gt: f64) -> f64 {
    let diff = gt - pred;
    if pred > gt {
        FOV_OVERESTIMATION_FACTOR * diff * diff
    } else {
        diff * diff
    }
}

/// Mean log(1 + |pred_rd − gt_rd|) over pairs whose ground-truth relative
/// depth distance is below tau; 0 when no pair qualifies.
pub fn relative_metric_loss(pairs: &[(f64, f64)], tau: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for &(pred_rd, gt_rd) in pairs {
        if gt_rd < tau {
            sum += (1.0 + (pred_rd - gt_rd).abs()).ln();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Mean absolute height error in millimeters, correspondence-based.
pub fn height_error(pred_heights: &[f64], gt_heights: &[f64]) -> Result<f64, MetricsError> {
    if pred_heights.len() != gt_heights.len() {
        return Err(MetricsError::LengthMismatch {
            pred: pred_heights.len(),
            gt: gt_heights.len(),
        });
    }
    if pred_heights.is_empty() {
        return Err(MetricsError::InsufficientPersons(0));
    }
    let sum: f64 = pred_heights
        .iter()
        .zip(gt_heights)
        .map(|(p, g)| (p - g).abs())
        .sum();
    Ok(sum / pred_heights.len() as f64 * 1000.0)
}

/// A detected 2D keypoint with its visibility flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub visible: bool,
}

/// Keypoint-matching validity predicate: a keypoint matches when its pixel
/// distance to the corresponding projected joint is under half the head
/// height; the instance is valid when over half of its visible keypoints
/// match.
pub fn match_keypoints(
    query: &[Keypoint],
    target: &[[f64; 2]],
    head_height: f64,
) -> Result<bool, MetricsError> {
    if !(head_height.is_finite() && head_height > 0.0) {
        return Err(MetricsError::InvalidHeadHeight(head_height));
    }
    if query.len() != target.len() {
        return Err(MetricsError::LengthMismatch {
            pred: query.len(),
            gt: target.len(),
        });
    }
    let mut visible = 0usize;
    let mut matched = 0usize;
    for (k, t) in query.iter().zip(target) {
        if !k.visible {
            continue;
        }
        visible += 1;
        let dist = ((k.x - t[0]).powi(2) + (k.y - t[1]).powi(2)).sqrt();
        if dist < head_height / 2.0 {
            matched += 1;
        }
    }
    if visible == 0 {
        return Err(MetricsError::NoVisibleKeypoints);
    }
    Ok(2 * matched > visible)
}
