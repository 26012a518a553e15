//! Losses, the training loop and its convergence monitors.
//!
//! Two objectives are available. The single-network loss
//! `λ_N ‖N[u] − f‖_p + λ_B ‖u − g‖_{p,∂Ω}` needs second derivatives of `u`.
//! The split loss introduces `V ≈ Du` and minimizes
//! `λ_N ‖−Σ_ij D_j(a_ij V_i) + b·V + cu − f‖_p + λ_D ‖Du − V‖_p + λ_B ‖u − g‖_{p,∂Ω}`,
//! which needs first derivatives only.
//!
//! ```
//! use vspinn::pde::poisson_square;
//! use vspinn::train::{train, Mode, Networks, TrainConfig};
//!
//! let problem = poisson_square();
//! let config = TrainConfig { max_iters: 0, ..TrainConfig::default() };
//! let nets = Networks::default_for(Mode::Vs, 2, 0)?;
//! let (_, report) = train(&config, &problem, nets)?;
//! assert_eq!(report.len(), 1);
//! # Ok::<(), vspinn::Error>(())
//! ```

mod loss;
mod monitor;
mod objective;
mod optim;
mod tape;
mod trainer;

pub use loss::{lp_norm_grad, pinn_loss, vs_loss, vs_loss_fields, LossBreakdown, LossWeights};
pub use monitor::{MonitorReport, MonitorRow, MONITOR_COLUMNS};
pub use objective::{Mode, Objective};
pub use optim::{Optimizer, OptimizerState};
pub use tape::VsTapeLoss;
pub use trainer::{parse_exponent, train, CollocationSpec, Networks, TrainConfig, Trainer};
pub(crate) use trainer::exponent as exponent_serde;
