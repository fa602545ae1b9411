//! Depth-conditioned Translation Optimization (DTO).
//!
//! Given per-person initial 3D placements, relative-depth evidence and
//! demographic labels for a multi-person scene, jointly solve for the
//! global affine depth transform (s_d, t_d) that places every person at a
//! scene-consistent, metrically plausible depth; then filter, correct and
//! evaluate scenes.
//!
//! Pipeline per scene:
//! 1. [`depthfit`]: representative depth d_i per person, intra-human
//!    regression slopes, weighted scale estimate X and bounds [X_min, X_max]
//!    (quasi-planar scenes pin the scale to X).
//! 2. [`solver`]: closed-form KKT solve of the bounded MAP problem under
//!    per-person Gaussian height priors from [`priors`]; standardized
//!    residuals drive the accept/reject filter; translations update along
//!    the camera ray ([`camera`]).
//! 3. [`metrics`]/[`io`]: evaluation (pairwise depth relations, height
//!    error) and the file formats binding everything into a CLI.
//!
//! [`scenegen`] provides the synthetic generator and the brute-force grid
//! oracle used for verification.

pub mod camera;
pub mod cli;
pub mod depthfit;
pub mod io;
pub mod metrics;
pub mod priors;
pub mod scenegen;
pub mod solver;

pub use camera::{CameraIntrinsics, ImageSize};
pub use depthfit::{DepthRaster, DepthSamplePair, IntraHumanFit, ScaleBounds};
pub use priors::{AgeGroup, Gender, HeightPrior, PriorTable};
pub use solver::{
    solve_scene, AffineDepthTransform, DtoSolution, KktCase, PersonObservation, SolveOptions,
};
