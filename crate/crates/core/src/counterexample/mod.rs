//! The radial sequence `u_n(x) = ρ_n(|x|)` on the unit ball whose
//! single-network residual loss tends to zero while `u_n → 1` (not the
//! solution `u* = 0`) and `‖Du_n‖_p` grows without bound for `p > 1`.
//!
//! ```
//! use vspinn::counterexample::{certify, SeqParams};
//!
//! let row = certify(&SeqParams::new(10, 2, 2.0)?)?;
//! assert!(row.scaled_loss_p <= row.loss_upper_bound);
//! assert!((row.scaled_grad_p - 17.7).abs() < 1e-10);
//! # Ok::<(), vspinn::Error>(())
//! ```

mod certify;
mod integrate;
mod sequence;

pub use certify::{
    certify, grad_lower_bound, loss_upper_bound, pathology_table, PathologyRow, PathologyTable,
    Trends, ABS_TOL, MAX_DEPTH, PATHOLOGY_COLUMNS, REL_TOL,
};
pub use integrate::{gauss_kronrod_15, integrate, Integral};
pub use sequence::{
    grad_u_n, q_n, radial_residual, rho_n, rho_n_generic, u_n, RadialJet, SeqParams, UnField,
};
