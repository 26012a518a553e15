//! Residual-minimization solvers for second-order linear elliptic PDEs.
//!
//! Two objectives are provided for a Dirichlet problem
//! `N[u] = f in Ω, u = g on ∂Ω` with `N[u] = −D·(A Du) + bᵀDu + cu`:
//!
//! * the classical strong-form PINN loss `λ_N ‖N[u] − f‖_p + λ_B ‖u − g‖_p`;
//! * the variable-splitting loss, which trains an auxiliary network `V ≈ Du`
//!   next to `u` and penalizes `‖−D·(AV) + bᵀV + cu − f‖_p`,
//!   `‖Du − V‖_p` and the boundary misfit.
//!
//! The [`counterexample`] module certifies, by exact radial quadrature, a
//! sequence of functions whose strong-form loss tends to zero while the
//! functions converge to something that is not the solution.
//!
//! Module map:
//!
//! * [`autodiff`]: dual numbers, hyper-dual numbers and a reverse-mode tape;
//! * [`model`]: multilayer perceptrons, batched derivative propagation, checkpoints;
//! * [`pde`]: problem definitions, pointwise residuals, weak-form residual;
//! * [`quad`]: domains, collocation sampling, discrete `L^p` norms;
//! * [`train`]: loss assembly, optimizers, training loop and monitors;
//! * [`counterexample`]: the degenerate-operator failure sequence;
//! * [`cli`]: the `vspinn` command-line front end.

pub mod autodiff;
pub mod cli;
pub mod counterexample;
mod error;
pub mod model;
pub mod pde;
pub mod quad;
pub mod train;

pub use error::{Error, Result};

// The guide under `book/` is compiled as doctests so its snippets stay in
// sync with the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/derivatives.md")]
    mod derivatives {}
    #[doc = include_str!("../../../book/src/residuals.md")]
    mod residuals {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/pathology.md")]
    mod pathology {}
    #[doc = include_str!("../../../book/src/monitors.md")]
    mod monitors {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
