//! Closed-form solve of the constrained MAP problem for the global affine
//! depth transform (s_d, t_d).
//!
//! With a_i = ĥ_i·d_i/(ẑ_i·σ_i), b_i = ĥ_i/(ẑ_i·σ_i), c_i = μ_i/σ_i the
//! objective is L(s, t) = Σ(a_i·s + b_i·t − c_i)², a convex quadratic with
//! box constraint X_min ≤ s ≤ X_max. The KKT conditions reduce to three
//! cases: the unconstrained optimum when feasible, otherwise s clamped to
//! the violated bound with t re-solved from the stationarity condition in
//! t, which is independent of the multipliers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depthfit::{
    aggregate_scale, fit_intra_human, population_variance, select_bounds_with_alphas,
    DepthFitError, DepthSamplePair, IntraHumanFit, ScaleBounds, DEFAULT_ALPHA1, DEFAULT_ALPHA2,
};
use crate::priors::{AgeGroup, Gender, HeightPrior};

/// Scenes whose mean standardized residual exceeds this are discarded.
pub const DEFAULT_FILTER_THRESHOLD: f64 = 1.5;

/// The 2x2 normal system is declared singular when
/// det < this · (Σa²)(Σb²); scale-relative so unit choices don't matter.
pub const SINGULARITY_RELATIVE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("scene has no persons")]
    EmptyScene,
    #[error("invalid observation for person {id}: {reason}")]
    InvalidObservation { id: String, reason: String },
    #[error("normal system is singular (all rel depths equal)")]
    SingularSystem,
    #[error("invalid scale bounds: {0}")]
    InvalidBounds(String),
    #[error("corrected depth is non-positive for person {id} (z* = {depth})")]
    InfeasibleDepth { id: String, depth: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    DepthFit(#[from] DepthFitError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// One detected person's initial estimate and evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonObservation {
    pub id: String,
    /// T-pose height estimate ĥ_i, meters.
    pub initial_height: f64,
    /// Root depth estimate ẑ_i, meters.
    pub initial_depth: f64,
    /// Representative relative depth d_i.
    pub rep_rel_depth: f64,
    pub prior: HeightPrior,
    /// Paired (mesh depth, raster value) samples; may be empty.
    #[serde(default)]
    pub samples: Vec<DepthSamplePair>,
    pub age_group: AgeGroup,
    #[serde(default)]
    pub gender: Gender,
    /// Camera-space root (x̂, ŷ); the corrected translation slides along
    /// the ray through this point.
    #[serde(default)]
    pub root_xy: [f64; 2],
}

impl PersonObservation {
    fn validate(&self) -> Result<(), SolveError> {
        let fail = |reason: &str| {
            Err(SolveError::InvalidObservation {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if !(self.initial_height.is_finite() && self.initial_height > 0.0) {
            return fail("initial_height must be positive and finite");
        }
        if !(self.initial_depth.is_finite() && self.initial_depth > 0.0) {
            return fail("initial_depth must be positive and finite");
        }
        if !self.rep_rel_depth.is_finite() {
            return fail("rep_rel_depth must be finite");
        }
        if !(self.prior.std_dev.is_finite() && self.prior.std_dev > 0.0) {
            return fail("prior std_dev must be positive");
        }
        if !self.root_xy.iter().all(|v| v.is_finite()) {
            return fail("root_xy must be finite");
        }
        Ok(())
    }
}

/// Per-person quadratic coefficients of the reduced objective.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverCoefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

pub fn build_coefficients(persons: &[PersonObservation]) -> Result<SolverCoefficients, SolveError> {
    if persons.is_empty() {
        return Err(SolveError::EmptyScene);
    }
    let mut a = Vec::with_capacity(persons.len());
    let mut b = Vec::with_capacity(persons.len());
    let mut c = Vec::with_capacity(persons.len());
    for p in persons {
        p.validate()?;
        let denom = p.initial_depth * p.prior.std_dev;
        a.push(p.initial_height * p.rep_rel_depth / denom);
        b.push(p.initial_height / denom);
        c.push(p.prior.mean / p.prior.std_dev);
    }
    Ok(SolverCoefficients { a, b, c })
}

/// Sums entering the normal equations.
#[derive(Debug, Clone, Copy)]
struct QuadSums {
    saa: f64,
    sab: f64,
    sbb: f64,
    sac: f64,
    sbc: f64,
}

impl QuadSums {
    fn from_coefficients(coeffs: &SolverCoefficients) -> Self {
        let mut s = QuadSums {
            saa: 0.0,
            sab: 0.0,
            sbb: 0.0,
            sac: 0.0,
            sbc: 0.0,
        };
        for ((&a, &b), &c) in coeffs.a.iter().zip(&coeffs.b).zip(&coeffs.c) {
            s.saa += a * a;
            s.sab += a * b;
            s.sbb += b * b;
            s.sac += a * c;
            s.sbc += b * c;
        }
        s
    }

    /// Optimal t for a fixed s, from the stationarity condition in t.
    fn shift_for_scale(&self, s: f64) -> f64 {
        (self.sbc - s * self.sab) / self.sbb
    }
}

/// Solve the unconstrained 2x2 normal system
/// (Σa²)s + (Σab)t = Σac, (Σab)s + (Σb²)t = Σbc.
pub fn solve_unconstrained(coeffs: &SolverCoefficients) -> Result<(f64, f64), SolveError> {
    let s = QuadSums::from_coefficients(coeffs);
    let det = s.saa * s.sbb - s.sab * s.sab;
    if det < SINGULARITY_RELATIVE_THRESHOLD * s.saa * s.sbb || det <= 0.0 {
        return Err(SolveError::SingularSystem);
    }
    let scale = (s.sac * s.sbb - s.sbc * s.sab) / det;
    let shift = (s.saa * s.sbc - s.sab * s.sac) / det;
    Ok((scale, shift))
}

/// Global affine map from relative to metric depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineDepthTransform {
    /// s_d, meters per rel-depth unit.
    pub scale: f64,
    /// t_d, meters.
    pub shift: f64,
}

impl AffineDepthTransform {
    pub fn apply(&self, rel_depth: f64) -> f64 {
        self.scale * rel_depth + self.shift
    }
}

/// Which KKT case produced the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KktCase {
    Interior,
    ClampedLower,
    ClampedUpper,
    PlanarFixedScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonSolution {
    pub id: String,
    /// z_i* = s_d·d_i + t_d, meters.
    #[serde(rename = "corrected_depth_m")]
    pub corrected_depth: f64,
    /// h_i* = ĥ_i·z_i*/ẑ_i, meters.
    #[serde(rename = "corrected_height_m")]
    pub corrected_height: f64,
    /// |h_i* − μ_i| / σ_i.
    pub standardized_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtoSolution {
    pub transform: AffineDepthTransform,
    pub kkt_case: KktCase,
    pub scale_bounds: ScaleBounds,
    pub persons: Vec<PersonSolution>,
    /// Σ((h_i* − μ_i)/σ_i)², without log-pdf normalization constants.
    pub objective_value: f64,
    pub mean_residual: f64,
    /// Some corrected depth came out non-positive; the scene is rejected.
    pub infeasible_depth: bool,
    pub accepted: bool,
}

/// Solve the bounded MAP problem by KKT case analysis.
pub fn solve(
    persons: &[PersonObservation],
    bounds: &ScaleBounds,
    filter_threshold: f64,
) -> Result<DtoSolution, SolveError> {
    if !(bounds.lower.is_finite() && bounds.upper.is_finite())
        || bounds.lower <= 0.0
        || bounds.lower > bounds.upper
    {
        return Err(SolveError::InvalidBounds(format!(
            "lower {} upper {}",
            bounds.lower, bounds.upper
        )));
    }
    let coeffs = build_coefficients(persons)?;
    let sums = QuadSums::from_coefficients(&coeffs);

    let (scale, shift, kkt_case) = if bounds.quasi_planar {
        let s = bounds.x_estimate.clamp(bounds.lower, bounds.upper);
        (s, sums.shift_for_scale(s), KktCase::PlanarFixedScale)
    } else {
        match solve_unconstrained(&coeffs) {
            Ok((s_unc, t_unc)) => {
                if s_unc < bounds.lower {
                    let s = bounds.lower;
                    (s, sums.shift_for_scale(s), KktCase::ClampedLower)
                } else if s_unc > bounds.upper {
                    let s = bounds.upper;
                    (s, sums.shift_for_scale(s), KktCase::ClampedUpper)
                } else {
                    (s_unc, t_unc, KktCase::Interior)
                }
            }
            Err(SolveError::SingularSystem) => {
                let s = bounds.x_estimate.clamp(bounds.lower, bounds.upper);
                (s, sums.shift_for_scale(s), KktCase::PlanarFixedScale)
            }
            Err(e) => return Err(e),
        }
    };

    let transform = AffineDepthTransform { scale, shift };
    let mut person_solutions = Vec::with_capacity(persons.len());
    let mut objective = 0.0;
    let mut residual_sum = 0.0;
    let mut infeasible = false;
    for p in persons {
        let z = transform.apply(p.rep_rel_depth);
        let h = p.initial_height * z / p.initial_depth;
        let signed = (h - p.prior.mean) / p.prior.std_dev;
        objective += signed * signed;
        let residual = signed.abs();
        residual_sum += residual;
        if z <= 0.0 {
            infeasible = true;
        }
        person_solutions.push(PersonSolution {
            id: p.id.clone(),
            corrected_depth: z,
            corrected_height: h,
            standardized_residual: residual,
        });
    }
    let mean_residual = residual_sum / persons.len() as f64;
    Ok(DtoSolution {
        transform,
        kkt_case,
        scale_bounds: *bounds,
        persons: person_solutions,
        objective_value: objective,
        mean_residual,
        infeasible_depth: infeasible,
        accepted: !infeasible && mean_residual <= filter_threshold,
    })
}

/// Posterior filtering: keep the scene iff the mean standardized residual
/// is at or below the threshold.
pub fn filter_scene(solution: &DtoSolution, threshold: f64) -> bool {
    if solution.persons.is_empty() {
        return false;
    }
    let mean = solution
        .persons
        .iter()
        .map(|p| p.standardized_residual)
        .sum::<f64>()
        / solution.persons.len() as f64;
    mean <= threshold
}

/// A person after the ray-preserving translation update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedPerson {
    pub id: String,
    /// Camera-space root (x*, y*, z*), meters.
    pub root: [f64; 3],
    /// Corrected T-pose height h*, meters.
    pub height: f64,
}

/// Move every person along its viewing ray to the corrected depth, so the
/// projected root pixel is unchanged, and carry the corrected height.
pub fn apply_solution(
    persons: &[PersonObservation],
    solution: &DtoSolution,
) -> Result<Vec<CorrectedPerson>, SolveError> {
    if persons.len() != solution.persons.len() {
        return Err(SolveError::InvalidObservation {
            id: String::new(),
            reason: format!(
                "solution has {} persons, scene has {}",
                solution.persons.len(),
                persons.len()
            ),
        });
    }
    let mut corrected = Vec::with_capacity(persons.len());
    for (p, ps) in persons.iter().zip(&solution.persons) {
        if p.id != ps.id {
            return Err(SolveError::InvalidObservation {
                id: p.id.clone(),
                reason: format!("solution person id mismatch ({} vs {})", ps.id, p.id),
            });
        }
        if ps.corrected_depth <= 0.0 {
            return Err(SolveError::InfeasibleDepth {
                id: p.id.clone(),
                depth: ps.corrected_depth,
            });
        }
        let ratio = ps.corrected_depth / p.initial_depth;
        corrected.push(CorrectedPerson {
            id: p.id.clone(),
            root: [
                p.root_xy[0] * ratio,
                p.root_xy[1] * ratio,
                ps.corrected_depth,
            ],
            height: ps.corrected_height,
        });
    }
    Ok(corrected)
}

/// Tunables for the full per-scene pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub filter_threshold: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Fallback X when no person has a usable intra-human fit.
    pub scale_estimate_override: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            filter_threshold: DEFAULT_FILTER_THRESHOLD,
            alpha1: DEFAULT_ALPHA1,
            alpha2: DEFAULT_ALPHA2,
            scale_estimate_override: None,
        }
    }
}

/// Full pipeline for one scene: per-person fits, weighted scale estimate,
/// quasi-planar bound selection, then the KKT solve.
///
/// Persons with degenerate samples are excluded from the scale aggregate
/// but still enter the MAP objective through their d_i.
pub fn solve_scene(
    persons: &[PersonObservation],
    options: &SolveOptions,
) -> Result<DtoSolution, PipelineError> {
    if persons.is_empty() {
        return Err(SolveError::EmptyScene.into());
    }
    let mut fits: Vec<IntraHumanFit> = Vec::new();
    let mut intra_variances: Vec<f64> = Vec::new();
    for p in persons {
        if !p.samples.is_empty() {
            let mesh: Vec<f64> = p.samples.iter().map(|s| s.mesh_depth).collect();
            intra_variances.push(population_variance(&mesh));
        }
        if p.samples.len() >= 2 {
            match fit_intra_human(&p.samples) {
                Ok(fit) => fits.push(fit),
                Err(DepthFitError::DegenerateSamples(_)) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    let x_estimate = match aggregate_scale(&fits) {
        Ok(x) => x,
        Err(DepthFitError::NoUsableFits) => match options.scale_estimate_override {
            Some(x) => x,
            None => return Err(DepthFitError::NoUsableFits.into()),
        },
        Err(e) => return Err(e.into()),
    };
    let inter_depths: Vec<f64> = persons.iter().map(|p| p.initial_depth).collect();
    let bounds = select_bounds_with_alphas(
        x_estimate,
        &inter_depths,
        &intra_variances,
        options.alpha1,
        options.alpha2,
    )?;
    Ok(solve(persons, &bounds, options.filter_threshold)?)
}
