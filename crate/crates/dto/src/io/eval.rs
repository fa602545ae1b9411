//! Prediction/annotation file schemas and the evaluation report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::canonical::write_canonical_json;
use super::IoError;
use crate::metrics::pcdr_counts;
use crate::priors::AgeGroup;
use crate::solver::KktCase;

pub const PREDICTIONS_SCHEMA_VERSION: &str = "dto-predictions-v1";
pub const ANNOTATIONS_SCHEMA_VERSION: &str = "dto-annotations-v1";
pub const EVAL_REPORT_SCHEMA_VERSION: &str = "dto-eval-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonPrediction {
    pub id: String,
    #[serde(rename = "depth_m")]
    pub depth: f64,
    #[serde(rename = "height_m")]
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePredictions {
    pub scene_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kkt_case: Option<KktCase>,
    /// Per-file isolation: a scene that failed to solve carries the error
    /// text instead of person entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub persons: Vec<PersonPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionsFile {
    pub schema_version: String,
    pub scenes: Vec<ScenePredictions>,
}

impl PredictionsFile {
    pub fn new(scenes: Vec<ScenePredictions>) -> Self {
        Self {
            schema_version: PREDICTIONS_SCHEMA_VERSION.to_string(),
            scenes,
        }
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let file: PredictionsFile = load_json(path)?;
        check_version(&file.schema_version, PREDICTIONS_SCHEMA_VERSION)?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        write_canonical_json(path, self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonAnnotation {
    pub id: String,
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
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_group: Option<AgeGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAnnotations {
    pub scene_id: String,
    pub persons: Vec<PersonAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationsFile {
    pub schema_version: String,
    pub scenes: Vec<SceneAnnotations>,
}

impl AnnotationsFile {
    pub fn new(scenes: Vec<SceneAnnotations>) -> Self {
        Self {
            schema_version: ANNOTATIONS_SCHEMA_VERSION.to_string(),
            scenes,
        }
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let file: AnnotationsFile = load_json(path)?;
        check_version(&file.schema_version, ANNOTATIONS_SCHEMA_VERSION)?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        write_canonical_json(path, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcdrAggregation {
    /// Per-image PCDR averaged across images (crowded images don't
    /// dominate).
    Images,
    /// All pairs pooled across images.
    Pairs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub equal_threshold: f64,
    pub aggregation: PcdrAggregation,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            equal_threshold: crate::metrics::DEFAULT_PCDR_EQUAL_THRESHOLD_M,
            aggregation: PcdrAggregation::Images,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pcdr: Option<f64>,
    pub pcdr_by_group: BTreeMap<String, Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height_error_mm: Option<f64>,
    pub n_scenes: usize,
    pub n_pairs: usize,
}

impl EvalReport {
    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        write_canonical_json(path, self)
    }
}

struct SceneEval {
    depths: Vec<f64>,
    layers: Vec<i64>,
    groups: Vec<Option<AgeGroup>>,
}

/// Evaluate predictions against annotations: PCDR (overall and per age
/// bucket; a pair belongs to a bucket when at least one member does) and
/// correspondence-based height error.
pub fn evaluate(
    pred: &PredictionsFile,
    gt: &AnnotationsFile,
    options: &EvalOptions,
) -> Result<EvalReport, IoError> {
    let gt_by_scene: BTreeMap<&str, &SceneAnnotations> =
        gt.scenes.iter().map(|s| (s.scene_id.as_str(), s)).collect();

    let mut scene_evals: Vec<SceneEval> = Vec::new();
    let mut height_abs_err_sum = 0.0;
    let mut height_count = 0usize;
    for scene in &pred.scenes {
        let Some(gt_scene) = gt_by_scene.get(scene.scene_id.as_str()) else {
            continue;
        };
        let gt_by_id: BTreeMap<&str, &PersonAnnotation> = gt_scene
            .persons
            .iter()
            .map(|p| (p.id.as_str(), p))
            .collect();
        let mut eval = SceneEval {
            depths: vec![],
            layers: vec![],
            groups: vec![],
        };
        for person in &scene.persons {
            let Some(ann) = gt_by_id.get(person.id.as_str()) else {
                continue;
            };
            if let Some(layer) = ann.depth_layer {
                eval.depths.push(person.depth);
                eval.layers.push(layer);
                eval.groups.push(ann.age_group);
            }
            if let Some(gt_h) = ann.gt_height {
                height_abs_err_sum += (person.height - gt_h).abs();
                height_count += 1;
            }
        }
        if eval.depths.len() >= 2 {
            scene_evals.push(eval);
        }
    }

    let overall = aggregate_pcdr(&scene_evals, options, None)?;
    let mut by_group = BTreeMap::new();
    for group in AgeGroup::ALL {
        let value = aggregate_pcdr(&scene_evals, options, Some(group))?;
        by_group.insert(group.as_str().to_string(), value.0);
    }

    Ok(EvalReport {
        schema_version: EVAL_REPORT_SCHEMA_VERSION.to_string(),
        pcdr: overall.0,
        pcdr_by_group: by_group,
        height_error_mm: if height_count > 0 {
            Some(height_abs_err_sum / height_count as f64 * 1000.0)
        } else {
            None
        },
        n_scenes: scene_evals.len(),
        n_pairs: overall.1,
    })
}

fn aggregate_pcdr(
    scenes: &[SceneEval],
    options: &EvalOptions,
    bucket: Option<AgeGroup>,
) -> Result<(Option<f64>, usize), IoError> {
    let mut per_image = Vec::new();
    let mut pooled_correct = 0usize;
    let mut pooled_total = 0usize;
    for scene in scenes {
        let mask: Option<Vec<bool>> =
            bucket.map(|b| scene.groups.iter().map(|g| *g == Some(b)).collect());
        let (correct, total) = pcdr_counts(
            &scene.depths,
            &scene.layers,
            options.equal_threshold,
            mask.as_deref(),
        )
        .map_err(|e| IoError::Validation {
            what: format!("pcdr: {e}"),
        })?;
        if total > 0 {
            per_image.push(correct as f64 / total as f64);
            pooled_correct += correct;
            pooled_total += total;
        }
    }
    let value = match options.aggregation {
        PcdrAggregation::Images => {
            if per_image.is_empty() {
                None
            } else {
                Some(per_image.iter().sum::<f64>() / per_image.len() as f64)
            }
        }
        PcdrAggregation::Pairs => {
            if pooled_total == 0 {
                None
            } else {
                Some(pooled_correct as f64 / pooled_total as f64)
            }
        }
    };
    Ok((value, pooled_total))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: path.display().to_string(),
        source: e,
    })
}

fn check_version(got: &str, expected: &str) -> Result<(), IoError> {
    if got != expected {
        return Err(IoError::Validation {
            what: format!("schema_version: got {got:?}, expected {expected:?}"),
        });
    }
    Ok(())
}
