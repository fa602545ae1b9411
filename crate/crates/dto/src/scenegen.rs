//! Synthetic scene generation and the brute-force grid oracle.
//!
//! The generator draws ground-truth persons, derives internally consistent
//! initial estimates (the estimated height/depth pair preserves the
//! projected 2D size: ĥ/ẑ = h_true/z_true), and produces relative-depth
//! evidence through the inverse of the true affine transform plus additive
//! Gaussian noise.
//!
//! Randomness is ChaCha8 seeded via `seed_from_u64`; uniforms are
//! `(next_u64 >> 11) * 2^-53` and normals come from one Box-Muller cosine
//! per draw, so the stream is reproducible from the documented algorithm
//! alone. Every draw happens unconditionally (noise draws occur even at
//! sigma = 0), keeping stream positions independent of parameter values.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraIntrinsics, ImageSize};
use crate::depthfit::{DepthSamplePair, ScaleBounds};
use crate::metrics::GroundTruthAnnotation;
use crate::priors::{adult_demographic, minor_prior, AgeGroup, Gender, HeightPrior, PriorTable};
use crate::solver::{AffineDepthTransform, PersonObservation};

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("person_count must be at least 1")]
    NoPersons,
    #[error("depth range ({0}, {1}) must satisfy 0 < min < max and min > sample extent")]
    BadDepthRange(f64, f64),
    #[error("true_scale must be positive, got {0}")]
    BadScale(f64),
    #[error("noise sigma must be non-negative and finite, got {0}")]
    BadNoise(f64),
    #[error("initial_scale_bias must be positive, got {0}")]
    BadBias(f64),
    #[error("demographic mix weights must be positive and sum to 1 (sum = {0})")]
    BadMix(f64),
    #[error("camera: {0}")]
    Camera(String),
}

/// How the generator assigns each person's height prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// The production construction: tabulated minors, hybrid adults.
    #[default]
    Demographic,
    /// Prior mean pinned to the sampled true height (demographic sigma);
    /// makes noiseless scenes exactly recoverable.
    CenteredAtTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemographicWeight {
    pub age_group: AgeGroup,
    #[serde(default)]
    pub gender: Gender,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub person_count: usize,
    /// (min, max) true root depth in meters.
    pub depth_range: (f64, f64),
    /// s* of the generating affine transform.
    pub true_scale: f64,
    /// t* of the generating affine transform.
    pub true_shift: f64,
    /// Sigma of the additive error on initial height estimates, meters.
    pub height_noise_sigma: f64,
    /// Sigma of the additive error on relative depth values.
    pub depth_noise_sigma: f64,
    pub demographic_mix: Vec<DemographicWeight>,
    pub seed: u64,
    #[serde(default)]
    pub prior_mode: PriorMode,
    /// Multiplies the initial height/depth estimates jointly (consistent
    /// misscale of the whole person); moves the scale bounds relative to
    /// the true scale.
    #[serde(default = "default_bias")]
    pub initial_scale_bias: f64,
    #[serde(default = "default_fov_deg")]
    pub fov_deg: f64,
    #[serde(default = "default_image_width")]
    pub image_width: u32,
    #[serde(default = "default_image_height")]
    pub image_height: u32,
    #[serde(default = "default_samples_per_person")]
    pub samples_per_person: usize,
    /// Half the body depth extent spanned by intra-human samples, meters.
    #[serde(default = "default_sample_half_extent")]
    pub sample_half_extent_m: f64,
    /// Depth separation that starts a new annotation layer, meters.
    #[serde(default = "default_layer_threshold")]
    pub layer_threshold_m: f64,
}

fn default_bias() -> f64 {
    1.0
}
fn default_fov_deg() -> f64 {
    60.0
}
fn default_image_width() -> u32 {
    1920
}
fn default_image_height() -> u32 {
    1080
}
fn default_samples_per_person() -> usize {
    64
}
fn default_sample_half_extent() -> f64 {
    0.15
}
fn default_layer_threshold() -> f64 {
    crate::metrics::DEFAULT_LAYER_THRESHOLD_M
}

impl GenConfig {
    /// A plausible mixed-demographic baseline; callers override fields.
    pub fn example(person_count: usize, seed: u64) -> Self {
        Self {
            person_count,
            depth_range: (2.0, 20.0),
            true_scale: 8.0,
            true_shift: 1.5,
            height_noise_sigma: 0.0,
            depth_noise_sigma: 0.0,
            demographic_mix: paper_demographic_mix(),
            seed,
            prior_mode: PriorMode::Demographic,
            initial_scale_bias: 1.0,
            fov_deg: default_fov_deg(),
            image_width: default_image_width(),
            image_height: default_image_height(),
            samples_per_person: default_samples_per_person(),
            sample_half_extent_m: default_sample_half_extent(),
            layer_threshold_m: default_layer_threshold(),
        }
    }

    fn validate(&self) -> Result<(), GenError> {
        if self.person_count == 0 {
            return Err(GenError::NoPersons);
        }
        let (lo, hi) = self.depth_range;
        if !(lo.is_finite() && hi.is_finite()) || lo <= self.sample_half_extent_m || lo > hi {
            return Err(GenError::BadDepthRange(lo, hi));
        }
        if !(self.true_scale.is_finite() && self.true_scale > 0.0) {
            return Err(GenError::BadScale(self.true_scale));
        }
        for sigma in [self.height_noise_sigma, self.depth_noise_sigma] {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(GenError::BadNoise(sigma));
            }
        }
        if !(self.initial_scale_bias.is_finite() && self.initial_scale_bias > 0.0) {
            return Err(GenError::BadBias(self.initial_scale_bias));
        }
        if self.demographic_mix.is_empty() {
            return Err(GenError::BadMix(0.0));
        }
        let mut sum = 0.0;
        for w in &self.demographic_mix {
            if !(w.weight.is_finite() && w.weight > 0.0) {
                return Err(GenError::BadMix(w.weight));
            }
            sum += w.weight;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(GenError::BadMix(sum));
        }
        Ok(())
    }
}

/// Adult-dominated mix matching the generated dataset's composition
/// (minors are a small fraction of in-the-wild crowds).
pub fn paper_demographic_mix() -> Vec<DemographicWeight> {
    vec![
        DemographicWeight {
            age_group: AgeGroup::Adult,
            gender: Gender::Male,
            weight: 0.47,
        },
        DemographicWeight {
            age_group: AgeGroup::Adult,
            gender: Gender::Female,
            weight: 0.47,
        },
        DemographicWeight {
            age_group: AgeGroup::Teen,
            gender: Gender::Unknown,
            weight: 0.02,
        },
        DemographicWeight {
            age_group: AgeGroup::Kid,
            gender: Gender::Unknown,
            weight: 0.03,
        },
        DemographicWeight {
            age_group: AgeGroup::Baby,
            gender: Gender::Unknown,
            weight: 0.01,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonTruth {
    pub id: String,
    #[serde(rename = "true_height_m")]
    pub true_height: f64,
    #[serde(rename = "true_depth_m")]
    pub true_depth: f64,
}

/// A generated scene together with everything needed to check recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthScene {
    pub image: ImageSize,
    pub camera: CameraIntrinsics,
    pub persons: Vec<PersonObservation>,
    pub truths: Vec<PersonTruth>,
    pub transform: AffineDepthTransform,
    pub layer_threshold: f64,
}

impl GroundTruthScene {
    /// Relative depth layers from true depths: sorted persons chain into
    /// one layer while consecutive gaps stay under the threshold.
    pub fn depth_layers(&self) -> Vec<i64> {
        assign_depth_layers(
            &self.truths.iter().map(|t| t.true_depth).collect::<Vec<_>>(),
            self.layer_threshold,
        )
    }

    pub fn annotations(&self) -> Vec<GroundTruthAnnotation> {
        let layers = self.depth_layers();
        self.truths
            .iter()
            .zip(layers)
            .map(|(t, layer)| GroundTruthAnnotation {
                depth_layer: Some(layer),
                gt_depth: Some(t.true_depth),
                gt_height: Some(t.true_height),
                gt_fov: Some(self.camera.vertical_fov),
            })
            .collect()
    }
}

/// Single-linkage layer assignment with the given separation threshold.
pub fn assign_depth_layers(depths: &[f64], threshold: f64) -> Vec<i64> {
    let mut order: Vec<usize> = (0..depths.len()).collect();
    order.sort_by(|&i, &j| depths[i].total_cmp(&depths[j]));
    let mut layers = vec![0i64; depths.len()];
    let mut layer = 0i64;
    for w in 1..order.len() {
        if depths[order[w]] - depths[order[w - 1]] >= threshold {
            layer += 1;
        }
        layers[order[w]] = layer;
    }
    layers
}

fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform01(rng)
}

/// One Box-Muller cosine draw; u1 is kept strictly positive.
fn normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = uniform01(rng);
    sigma * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn pick_demographic(rng: &mut ChaCha8Rng, mix: &[DemographicWeight]) -> (AgeGroup, Gender) {
    let u = uniform01(rng);
    let mut cum = 0.0;
    for w in mix {
        cum += w.weight;
        if u < cum {
            return (w.age_group, w.gender);
        }
    }
    let last = mix.last().expect("mix is nonempty");
    (last.age_group, last.gender)
}

fn group_sigma(group: AgeGroup, gender: Gender) -> f64 {
    match group {
        AgeGroup::Adult => adult_demographic(gender).std_dev,
        _ => minor_prior(group).expect("minor group").std_dev,
    }
}

fn group_prior(group: AgeGroup, gender: Gender) -> HeightPrior {
    match group {
        AgeGroup::Adult => adult_demographic(gender),
        _ => minor_prior(group).expect("minor group"),
    }
}

/// Draw a full scene. Deterministic in (config, seed).
pub fn generate(config: &GenConfig) -> Result<GroundTruthScene, GenError> {
    config.validate()?;
    let image = ImageSize::new(config.image_width, config.image_height)
        .map_err(|e| GenError::Camera(e.to_string()))?;
    let camera = CameraIntrinsics::from_fov(config.fov_deg.to_radians(), image)
        .map_err(|e| GenError::Camera(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let priors = PriorTable::default();

    let mut persons = Vec::with_capacity(config.person_count);
    let mut truths = Vec::with_capacity(config.person_count);
    for i in 0..config.person_count {
        let (group, gender) = pick_demographic(&mut rng, &config.demographic_mix);
        let base = group_prior(group, gender);
        let h_true = (base.mean + normal(&mut rng, base.std_dev)).clamp(0.35, 2.45);
        let z_true = uniform_in(&mut rng, config.depth_range.0, config.depth_range.1);

        let eps_h = normal(&mut rng, config.height_noise_sigma);
        let initial_height = (config.initial_scale_bias * (h_true + eps_h)).max(0.05);
        // estimated height and depth move together so the projected 2D
        // size of the person is unchanged
        let initial_depth = z_true * initial_height / h_true;

        let rep_rel_depth = (z_true - config.true_shift) / config.true_scale
            + normal(&mut rng, config.depth_noise_sigma);

        let px = uniform_in(&mut rng, 0.15, 0.85) * f64::from(image.width);
        let py = uniform_in(&mut rng, 0.15, 0.85) * f64::from(image.height);
        let root_xy = [
            (px - camera.principal_point[0]) * initial_depth / camera.focal_length,
            (py - camera.principal_point[1]) * initial_depth / camera.focal_length,
        ];

        let mesh_scale = initial_depth / z_true;
        let n = config.samples_per_person;
        let mut samples = Vec::with_capacity(n);
        for j in 0..n {
            let frac = if n > 1 {
                j as f64 / (n - 1) as f64
            } else {
                0.5
            };
            let delta = -config.sample_half_extent_m + 2.0 * config.sample_half_extent_m * frac;
            let rel = (z_true + delta - config.true_shift) / config.true_scale
                + normal(&mut rng, config.depth_noise_sigma);
            samples.push(DepthSamplePair {
                mesh_depth: initial_depth + delta * mesh_scale,
                rel_depth: rel,
            });
        }

        let prior = match config.prior_mode {
            PriorMode::Demographic => priors
                .person_prior(group, gender, initial_height)
                .expect("generated heights are positive"),
            PriorMode::CenteredAtTruth => HeightPrior {
                mean: h_true,
                std_dev: group_sigma(group, gender),
            },
        };

        let id = format!("p{i}");
        persons.push(PersonObservation {
            id: id.clone(),
            initial_height,
            initial_depth,
            rep_rel_depth,
            prior,
            samples,
            age_group: group,
            gender,
            root_xy,
        });
        truths.push(PersonTruth {
            id,
            true_height: h_true,
            true_depth: z_true,
        });
    }

    Ok(GroundTruthScene {
        image,
        camera,
        persons,
        truths,
        transform: AffineDepthTransform {
            scale: config.true_scale,
            shift: config.true_shift,
        },
        layer_threshold: config.layer_threshold_m,
    })
}

/// Search box and resolution for the grid oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub s_min: f64,
    pub s_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub s_cells: usize,
    pub t_cells: usize,
}

impl GridSpec {
    /// Box around (s, t) with a relative margin per coordinate, floored so
    /// near-zero centers still get a real search range. The box is nudged
    /// so (s, t) falls on a grid node: otherwise the argmin of a narrow
    /// diagonal valley can drift several cells along the valley floor and
    /// the cell-distance comparison measures discretization, not solver
    /// error.
    pub fn around(s: f64, t: f64, margin_frac: f64, min_margin: f64, cells: usize) -> Self {
        let ms = (margin_frac * s.abs()).max(min_margin);
        let mt = (margin_frac * t.abs()).max(min_margin);
        if cells < 2 {
            return Self {
                s_min: s,
                s_max: s,
                t_min: t,
                t_max: t,
                s_cells: 1,
                t_cells: 1,
            };
        }
        let span = (cells - 1) as f64;
        let ds = 2.0 * ms / span;
        let dt = 2.0 * mt / span;
        let k = ((cells - 1) / 2) as f64;
        Self {
            s_min: s - ds * k,
            s_max: s - ds * k + ds * span,
            t_min: t - dt * k,
            t_max: t - dt * k + dt * span,
            s_cells: cells,
            t_cells: cells,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSolution {
    pub scale: f64,
    pub shift: f64,
    pub objective: f64,
    /// Grid cell sizes, for cell-distance assertions.
    pub s_cell: f64,
    pub t_cell: f64,
}

/// Objective of the constrained problem evaluated from raw person fields;
/// shares no code with the analytic solver's coefficient route.
pub fn objective_from_persons(persons: &[PersonObservation], s: f64, t: f64) -> f64 {
    persons
        .iter()
        .map(|p| {
            let h = p.initial_height * (s * p.rep_rel_depth + t) / p.initial_depth;
            let r = (h - p.prior.mean) / p.prior.std_dev;
            r * r
        })
        .sum()
}

/// Exhaustive minimization over a dense grid, with s restricted to the
/// feasible interval. Used only by tests and the `oracle` subcommand.
pub fn oracle_solve(
    persons: &[PersonObservation],
    bounds: &ScaleBounds,
    grid: &GridSpec,
) -> OracleSolution {
    let s_cells = grid.s_cells.max(1);
    let t_cells = grid.t_cells.max(1);
    let s_step = if s_cells > 1 {
        (grid.s_max - grid.s_min) / (s_cells - 1) as f64
    } else {
        0.0
    };
    let t_step = if t_cells > 1 {
        (grid.t_max - grid.t_min) / (t_cells - 1) as f64
    } else {
        0.0
    };

    // Feasibility in s: keep the box's own nodes (clipping and re-spacing
    // them would move every node) and add the interval endpoints that fall
    // inside the box, so a clamped optimum is itself a candidate.
    let mut s_values: Vec<f64> = (0..s_cells)
        .map(|i| grid.s_min + s_step * i as f64)
        .filter(|s| (bounds.lower..=bounds.upper).contains(s))
        .collect();
    for endpoint in [bounds.lower, bounds.upper] {
        if endpoint >= grid.s_min && endpoint <= grid.s_max {
            s_values.push(endpoint);
        }
    }
    if s_values.is_empty() {
        // box missed the feasible interval entirely; scan the interval
        s_values = (0..s_cells)
            .map(|i| {
                bounds.lower
                    + (bounds.upper - bounds.lower) * i as f64 / (s_cells - 1).max(1) as f64
            })
            .collect();
    }
    s_values.sort_by(f64::total_cmp);
    s_values.dedup();

    let ratios: Vec<f64> = persons
        .iter()
        .map(|p| p.initial_height / p.initial_depth)
        .collect();
    let inv_sigmas: Vec<f64> = persons.iter().map(|p| 1.0 / p.prior.std_dev).collect();
    let t_values: Vec<f64> = (0..t_cells)
        .map(|j| grid.t_min + t_step * j as f64)
        .collect();

    let mut best = (f64::INFINITY, s_values[0], grid.t_min);
    let mut row = vec![0.0f64; t_cells];
    for &s in &s_values {
        row.fill(0.0);
        for (k, p) in persons.iter().enumerate() {
            let alpha = (ratios[k] * s * p.rep_rel_depth - p.prior.mean) * inv_sigmas[k];
            let beta = ratios[k] * inv_sigmas[k];
            for (acc, &t) in row.iter_mut().zip(&t_values) {
                let r = alpha + beta * t;
                *acc += r * r;
            }
        }
        for (j, &obj) in row.iter().enumerate() {
            if obj < best.0 {
                best = (obj, s, t_values[j]);
            }
        }
    }
    OracleSolution {
        scale: best.1,
        shift: best.2,
        objective: best.0,
        s_cell: s_step,
        t_cell: t_step,
    }
}
