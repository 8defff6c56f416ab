//! Reverse-mode differentiation over matrix-valued nodes.

mod gradcheck;
mod tape;

pub use gradcheck::{gradcheck, GradCheck};
pub use tape::{Tape, Tensor, Var};
