//! File formats and schemas: canonical JSON scenes/solutions, the binary
//! depth raster, prediction/annotation files and evaluation reports.

mod canonical;
mod eval;
mod raster;
mod scene;

pub use canonical::{to_canonical_json, write_canonical_json};
pub use eval::{
    evaluate, AnnotationsFile, EvalOptions, EvalReport, PcdrAggregation, PersonAnnotation,
    PersonPrediction, PredictionsFile, SceneAnnotations, ScenePredictions,
    ANNOTATIONS_SCHEMA_VERSION, EVAL_REPORT_SCHEMA_VERSION, PREDICTIONS_SCHEMA_VERSION,
};
pub use raster::{
    decode_raster, encode_raster, read_raster, write_raster, RASTER_HEADER_LEN, RASTER_MAGIC,
};
pub use scene::{
    load_scene, CameraSpec, MeshSample, PersonRecord, PriorSpec, Scene, SceneFile, SolutionFile,
    SCENE_SCHEMA_VERSION, SOLUTION_SCHEMA_VERSION,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error in {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("validation error: {what}")]
    Validation { what: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("raster error: {what}")]
    Raster { what: String },
}

/// User-supplied demographic table: group key -> mixture components, each
/// moment-matched into that group's Gaussian. Missing keys keep built-ins.
pub fn load_prior_table(path: &std::path::Path) -> Result<crate::priors::PriorTable, IoError> {
    use crate::priors::{fit_single_gaussian, GaussianComponent, PriorTable};
    use std::collections::BTreeMap;

    let text = std::fs::read_to_string(path).map_err(|e| IoError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let raw: BTreeMap<String, Vec<GaussianComponent>> =
        serde_json::from_str(&text).map_err(|e| IoError::Parse {
            path: path.display().to_string(),
            source: e,
        })?;

    let mut table = PriorTable::default();
    for (key, components) in &raw {
        let fitted = fit_single_gaussian(components).map_err(|e| IoError::Validation {
            what: format!("prior table {key}: {e}"),
        })?;
        match key.as_str() {
            "baby" => table.baby = fitted,
            "kid" => table.kid = fitted,
            "teen" => table.teen = fitted,
            "adult_male" => table.adult_male = fitted,
            "adult_female" => table.adult_female = fitted,
            other => {
                return Err(IoError::Validation {
                    what: format!(
                        "prior table: unknown group {other:?} \
                         (expected baby/kid/teen/adult_male/adult_female)"
                    ),
                })
            }
        }
    }
    Ok(table)
}
