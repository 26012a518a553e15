//! Linear second-order problems in divergence form, their strong residuals
//! (single-network and split) and the weak-form diagnostic.

mod coeff;
mod problem;
mod residual;
mod weak;

pub use coeff::{CoefficientField, Shape, Structure};
pub use problem::{
    counterexample_ball, poisson_square, PdeProblem, PointCoefficients, PointFn, Reference,
    SineProduct, VectorFn, BUILTIN_PROBLEMS,
};
pub use residual::{
    gradient_mismatch, gradient_mismatch_fields, pinn_residual, split_residual,
    split_residual_fields,
};
pub use weak::{weak_residual, weak_residual_sampled, TestFunction, WeakEstimate};
