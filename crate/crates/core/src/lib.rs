//! Numerical solver for prescribed Weingarten curvature equations
//!
//! ```text
//! σ_k(κ(X)) = Σ_{l=0}^{k-1} α_l(X) σ_l(κ(X))
//! ```
//!
//! on star-shaped surfaces X = ρ(x)·x in R³. The equation is reached by
//! continuation in t ∈ [0, 1] through a family of quotient equations whose
//! t = 0 member is solved exactly by a round sphere.
//!
//! Modules, bottom-up:
//!
//! - [`symmfunc`]: elementary symmetric functions, Garding cones, Newton-Maclaurin.
//! - [`exprlang`]: expression language for α_l(X) and φ(ρ).
//! - [`spheregeom`]: sphere grid, covariant differences, radial-graph geometry.
//! - [`sparse`]: CSR matrix and direct solve.
//! - [`curvop`]: the curvature operator family, its Jacobian and diagnostics.
//! - [`continuation`]: hypothesis checks, Newton corrector, t-continuation.

pub mod continuation;
pub mod curvop;
pub mod exprlang;
pub mod sparse;
pub mod spheregeom;
pub mod symmfunc;

pub use continuation::{
    check_hypotheses, continue_to_one, initial_solution, newton_solve, HypothesisKind, HypothesisReport, SolveReport,
};
pub use curvop::{ProblemSpec, SolverSettings};
pub use spheregeom::{RadialField, SphereGrid};
pub use symmfunc::CurvatureVector;
