//! Multilayer perceptrons for the primary variable `u` and the auxiliary
//! variable `V`.

mod checkpoint;
mod jet;
mod mlp;
mod split;

pub use checkpoint::{Checkpoint, NetRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use jet::{JetPlan, JetTrace, Jets, Probe};
pub use mlp::{Activation, Mlp, MlpSpec};
pub use split::{SplitModel, SplitSample};
