//! Early-exit inference simulator: threshold-gated exits, UCB threshold
//! selection, exit-head distillation on a toy cascade, and synthetic traces.

pub mod bandit;
pub mod cascade;
pub mod distill;
pub mod error;
pub mod synth;

pub use error::{Error, Result};
