//! Scene and solution file schemas, validation and normalization.
//!
//! A scene file carries per-person evidence in one of two forms:
//! precomputed (`rep_rel_depth` plus optional `samples`) or raw (`pixels`
//! plus `mesh_samples`, resolved against the referenced depth raster at
//! load). Both forms normalize to the same solver inputs.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::canonical::{to_canonical_json, write_canonical_json};
use super::raster::read_raster;
use super::IoError;
use crate::camera::{CameraIntrinsics, ImageSize};
use crate::depthfit::{sample_representative_depth, DepthRaster, DepthSamplePair, VertexPixel};
use crate::metrics::GroundTruthAnnotation;
use crate::priors::{AgeGroup, Gender, HeightPrior, PriorTable};
use crate::scenegen::GroundTruthScene;
use crate::solver::{DtoSolution, PersonObservation};

pub const SCENE_SCHEMA_VERSION: &str = "dto-scene-v1";
pub const SOLUTION_SCHEMA_VERSION: &str = "dto-solution-v1";

/// Camera block: exactly one of `fov_deg` / `focal_px`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focal_px: Option<f64>,
    /// Override for datasets with non-centered principal points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub principal_point: Option<[f64; 2]>,
}

impl CameraSpec {
    pub fn resolve(&self, image: ImageSize) -> Result<CameraIntrinsics, IoError> {
        let cam = match (self.fov_deg, self.focal_px) {
            (Some(fov_deg), None) => CameraIntrinsics::from_fov(fov_deg.to_radians(), image)
                .map_err(|e| IoError::Validation {
                    what: format!("camera: {e}"),
                })?,
            (None, Some(focal)) => {
                CameraIntrinsics::from_focal(focal, image).map_err(|e| IoError::Validation {
                    what: format!("camera: {e}"),
                })?
            }
            _ => {
                return Err(IoError::Validation {
                    what: "camera: exactly one of fov_deg / focal_px required".to_string(),
                })
            }
        };
        Ok(match self.principal_point {
            Some([cx, cy]) => cam.with_principal_point(cx, cy),
            None => cam,
        })
    }
}

/// Raw-evidence mesh sample: the person's own depth at a surface point
/// plus the pixel it projects to (raster lookup happens at load).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSample {
    #[serde(rename = "mesh_depth_m")]
    pub mesh_depth: f64,
    pub pixel: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    #[serde(rename = "mean_m")]
    pub mean: f64,
    #[serde(rename = "std_m")]
    pub std_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonRecord {
    pub id: String,
    #[serde(rename = "initial_height_m")]
    pub initial_height: f64,
    #[serde(rename = "initial_depth_m")]
    pub initial_depth: f64,
    #[serde(default, rename = "root_xy_m")]
    pub root_xy: [f64; 2],
    pub age_group: AgeGroup,
    #[serde(default)]
    pub gender: Gender,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rep_rel_depth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<DepthSamplePair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels: Option<Vec<VertexPixel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_samples: Option<Vec<MeshSample>>,
    /// Explicit prior override; normally derived from demographics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<GroundTruthAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub schema_version: String,
    pub image: ImageSize,
    pub camera: CameraSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_raster_path: Option<String>,
    /// Fallback intra-human scale X for scenes without usable sample pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_estimate: Option<f64>,
    pub persons: Vec<PersonRecord>,
}

/// Validated, normalized scene ready for the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: ImageSize,
    pub camera: CameraIntrinsics,
    pub persons: Vec<PersonObservation>,
    /// Parallel to `persons`.
    pub annotations: Vec<Option<GroundTruthAnnotation>>,
    pub scale_estimate: Option<f64>,
}

impl SceneFile {
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let file: SceneFile = serde_json::from_str(&text).map_err(|e| IoError::Parse {
            path: path.display().to_string(),
            source: e,
        })?;
        if file.schema_version != SCENE_SCHEMA_VERSION {
            return Err(IoError::Validation {
                what: format!(
                    "schema_version: got {:?}, expected {SCENE_SCHEMA_VERSION:?}",
                    file.schema_version
                ),
            });
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        write_canonical_json(path, self)
    }

    pub fn to_canonical_string(&self) -> Result<String, IoError> {
        to_canonical_json(self)
    }

    /// Validate and normalize. `raster` must be supplied when any person
    /// carries raw evidence.
    pub fn to_scene(
        &self,
        raster: Option<&DepthRaster>,
        priors: &PriorTable,
    ) -> Result<Scene, IoError> {
        let camera = self.camera.resolve(self.image)?;
        if let Some(r) = raster {
            if r.size != self.image {
                return Err(IoError::Validation {
                    what: format!(
                        "raster dims: raster {}x{} vs image {}x{}",
                        r.size.width, r.size.height, self.image.width, self.image.height
                    ),
                });
            }
        }
        if self.persons.is_empty() {
            return Err(IoError::Validation {
                what: "persons: empty scene".to_string(),
            });
        }
        let mut seen = BTreeSet::new();
        let mut persons = Vec::with_capacity(self.persons.len());
        let mut annotations = Vec::with_capacity(self.persons.len());
        for rec in &self.persons {
            if !seen.insert(rec.id.as_str()) {
                return Err(IoError::Validation {
                    what: format!("duplicate id: {}", rec.id),
                });
            }
            let (rep_rel_depth, samples) = rec.normalize_evidence(raster)?;
            let prior = match rec.prior {
                Some(p) => {
                    HeightPrior::new(p.mean, p.std_dev).map_err(|e| IoError::Validation {
                        what: format!("person {}: prior: {e}", rec.id),
                    })?
                }
                None => priors
                    .person_prior(rec.age_group, rec.gender, rec.initial_height)
                    .map_err(|e| IoError::Validation {
                        what: format!("person {}: prior: {e}", rec.id),
                    })?,
            };
            persons.push(PersonObservation {
                id: rec.id.clone(),
                initial_height: rec.initial_height,
                initial_depth: rec.initial_depth,
                rep_rel_depth,
                prior,
                samples,
                age_group: rec.age_group,
                gender: rec.gender,
                root_xy: rec.root_xy,
            });
            annotations.push(rec.annotation);
        }
        Ok(Scene {
            image: self.image,
            camera,
            persons,
            annotations,
            scale_estimate: self.scale_estimate,
        })
    }

    /// Export a generated scene in precomputed-evidence form.
    pub fn from_ground_truth(scene: &GroundTruthScene) -> Self {
        let annotations = scene.annotations();
        SceneFile {
            schema_version: SCENE_SCHEMA_VERSION.to_string(),
            image: scene.image,
            camera: CameraSpec {
                fov_deg: Some(scene.camera.vertical_fov.to_degrees()),
                focal_px: None,
                principal_point: None,
            },
            depth_raster_path: None,
            scale_estimate: None,
            persons: scene
                .persons
                .iter()
                .zip(annotations)
                .map(|(p, ann)| PersonRecord {
                    id: p.id.clone(),
                    initial_height: p.initial_height,
                    initial_depth: p.initial_depth,
                    root_xy: p.root_xy,
                    age_group: p.age_group,
                    gender: p.gender,
                    rep_rel_depth: Some(p.rep_rel_depth),
                    samples: Some(p.samples.clone()),
                    pixels: None,
                    mesh_samples: None,
                    prior: Some(PriorSpec {
                        mean: p.prior.mean,
                        std_dev: p.prior.std_dev,
                    }),
                    annotation: Some(ann),
                })
                .collect(),
        }
    }
}

impl PersonRecord {
    /// Exactly one evidence form; raw evidence resolves against the raster.
    fn normalize_evidence(
        &self,
        raster: Option<&DepthRaster>,
    ) -> Result<(f64, Vec<DepthSamplePair>), IoError> {
        let precomputed = self.rep_rel_depth.is_some() || self.samples.is_some();
        let raw = self.pixels.is_some() || self.mesh_samples.is_some();
        match (precomputed, raw) {
            (true, true) => Err(IoError::Validation {
                what: format!(
                    "person {}: both precomputed and raw evidence given",
                    self.id
                ),
            }),
            (false, false) => Err(IoError::Validation {
                what: format!("person {}: no depth evidence given", self.id),
            }),
            (true, false) => {
                let d = self.rep_rel_depth.ok_or_else(|| IoError::Validation {
                    what: format!("person {}: samples given without rep_rel_depth", self.id),
                })?;
                Ok((d, self.samples.clone().unwrap_or_default()))
            }
            (false, true) => {
                let raster = raster.ok_or_else(|| IoError::Validation {
                    what: format!(
                        "person {}: raw evidence requires depth_raster_path",
                        self.id
                    ),
                })?;
                let pixels = self.pixels.as_deref().ok_or_else(|| IoError::Validation {
                    what: format!("person {}: raw evidence requires pixels", self.id),
                })?;
                let d = sample_representative_depth(raster, pixels).map_err(|e| {
                    IoError::Validation {
                        what: format!("person {}: {e}", self.id),
                    }
                })?;
                let mut samples = Vec::new();
                for ms in self.mesh_samples.as_deref().unwrap_or_default() {
                    // surface points projecting off the raster carry no value
                    if let Some(rel) = raster.sample_nearest(ms.pixel[0], ms.pixel[1]) {
                        samples.push(DepthSamplePair {
                            mesh_depth: ms.mesh_depth,
                            rel_depth: rel,
                        });
                    }
                }
                Ok((d, samples))
            }
        }
    }
}

/// Scene loader: resolves the raster reference relative to the scene file.
pub fn load_scene(path: &Path, priors: &PriorTable) -> Result<Scene, IoError> {
    let file = SceneFile::load(path)?;
    let raster = match &file.depth_raster_path {
        Some(rel) => {
            let raster_path = path.parent().unwrap_or_else(|| Path::new(".")).join(rel);
            Some(read_raster(&raster_path)?)
        }
        None => None,
    };
    file.to_scene(raster.as_ref(), priors)
}

/// Wire form of a solution, versioned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub schema_version: String,
    #[serde(flatten)]
    pub solution: DtoSolution,
}

impl SolutionFile {
    pub fn new(solution: DtoSolution) -> Self {
        Self {
            schema_version: SOLUTION_SCHEMA_VERSION.to_string(),
            solution,
        }
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let file: SolutionFile = serde_json::from_str(&text).map_err(|e| IoError::Parse {
            path: path.display().to_string(),
            source: e,
        })?;
        if file.schema_version != SOLUTION_SCHEMA_VERSION {
            return Err(IoError::Validation {
                what: format!(
                    "schema_version: got {:?}, expected {SOLUTION_SCHEMA_VERSION:?}",
                    file.schema_version
                ),
            });
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        write_canonical_json(path, self)
    }
}
