//! Exact optimal experimental designs by quadratic approximation of Kiefer's
//! Φ_p criteria around an anchor information matrix.
//!
//! The pipeline: an optimal approximate design ([`solve_ad`]) supplies the
//! anchor, [`QuadModel`] turns the criterion into a low-rank concave quadratic
//! `hᵀξ − |Sᵀξ|²`, and [`branch_and_bound`] maximizes it over integer designs
//! satisfying a [`ConstraintSet`]. [`aqua_solve`] runs all three.

pub mod approx;
pub mod aqua;
pub mod criteria;
pub mod error;
pub mod integer;
pub mod model;
pub mod polytope;
pub mod quadmodel;
pub mod scalar;
pub mod scenario;
pub mod symlin;

#[cfg(test)]
pub(crate) mod testutil;

pub use approx::{
    equivalence_gap, solve_ad, solve_relaxed_qp, AdOptions, AdSolution, QpOptions, QpRelaxation, QpWarmStart,
};
pub use aqua::{
    aqua_solve, efficient_rounding, export_micqp, iterative_aqua, AquaOptions, AquaResult, IterOptions, IterRecord,
    MicqpDocument,
};
pub use criteria::{efficiency, phi, phi_gradient, Criterion};
pub use error::{Error, Result};
pub use integer::{
    branch_and_bound, kl_exchange, round_incumbent, BnbOptions, KlOptions, KlOutcome, SolveReport, Termination,
};
pub use model::{Design, DesignProblem};
pub use polytope::{lp_max, ConstraintSet, Sense};
pub use quadmodel::{ExchangeState, QuadModel};
pub use scalar::Scalar;
pub use symlin::{PsdFactor, SymMatrix};

pub type SymMatrixF64 = SymMatrix<f64>;
pub type SymMatrixF32 = SymMatrix<f32>;
pub type CriterionF64 = Criterion<f64>;
pub type CriterionF32 = Criterion<f32>;
pub type DesignF64 = Design<f64>;
pub type DesignF32 = Design<f32>;
pub type DesignProblemF64 = DesignProblem<f64>;
pub type DesignProblemF32 = DesignProblem<f32>;
pub type ConstraintSetF64 = ConstraintSet<f64>;
pub type ConstraintSetF32 = ConstraintSet<f32>;
pub type QuadModelF64 = QuadModel<f64>;
pub type QuadModelF32 = QuadModel<f32>;
