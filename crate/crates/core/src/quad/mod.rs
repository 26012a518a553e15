//! Domains, collocation sampling, discrete `L^p` norms, boundary averages
//! and the Poincaré-ratio diagnostic.

mod domain;
mod norms;
mod sample;

pub use domain::{ball_volume, Domain};
pub(crate) use norms::check_exponent;
pub use norms::{boundary_average, lp_norm, poincare_estimate, poincare_ratio, PoincareEstimate};
pub use sample::{sample, CollocationSet, PointSet, Scheme};

/// Default interior collocation count.
pub const DEFAULT_INTERIOR: usize = 4096;
/// Default boundary collocation count.
pub const DEFAULT_BOUNDARY: usize = 1024;
