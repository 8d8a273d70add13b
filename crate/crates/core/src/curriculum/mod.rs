//! Curriculum regions and their action on latent objectives.
//!
//! A curriculum restricts the weight vector to a closed convex set `Ψ`. The
//! latent objective becomes
//!
//! ```text
//! F_new(l) = inf_{v in Ψ} <v, l> + R_SP(v, λ)
//! ```
//!
//! normalized with the same constant as the unconstrained objective, so
//! `F_new >= F` pointwise.

mod action;
mod region;
mod solve;

pub use action::{
    affine_action, critical_region_side, curriculum_action_numeric, group_latent, homogeneous_action_ray,
    homogeneous_closed_form, ActionPoint, ActionRoute, AffineActionResult, CurriculumAction, NumericAction,
    NumericOptions, Side,
};
pub use region::{CurriculumRegion, HalfspaceSpec, RegionKind, RegionSpec};
pub(crate) use solve::objective as solve_objective;
pub use solve::{constrained_weights, ConstrainedWeights, SolveMethod, SolverOptions};
