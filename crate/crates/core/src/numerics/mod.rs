//! Dense differentiable computation: the tape, initialization, and Adam.

mod adam;
mod init;
pub mod linalg;
mod params;
mod tape;

pub use adam::AdamState;
pub use init::{seeded_rng, xavier_init, SeededRng};
pub use params::{Bound, ParamId, ParamSet};
pub use tape::{Tape, TensorNode, Var, LEAKY_SLOPE};
