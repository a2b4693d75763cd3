//! Statistical optimization of the outer precoders.
//!
//! The chance-constrained QoS problem is replaced by a deterministic
//! restriction, relaxed to an SDP over `W_n = F_n F_nᴴ`, and solved by
//! bisection on `γ` with a Lagrange-dual feasibility test at each level.

pub mod bca;
pub mod dual;
#[cfg(test)]
pub(crate) mod fixtures;
pub mod problem;
pub mod refine;

pub use bca::{bca, extract_control, tightness_residual, BcaOptions, BcaResult, BisectionStep};
pub use dual::{
    assemble_dual_matrix, dual_subgradient, dual_value, inner_maximizer, solve_fixed_gamma, DualOptions,
    DualPoint, FixedGammaOutcome, FixedGammaStatus,
};
pub use problem::{build_constants, build_constants_with, interference_bound, DirectGain, projectors, restriction_constants, QoSProblem, UserConstants};
pub use refine::{refine_delta, GammaAggregate, RefineOptions, RefineOutcome};
