//! Task-driven semantic bit allocation for a block-based intra codec.
//!
//! A deep Q-network picks one quantization parameter per coding unit so as
//! to trade bits against the change a task model's importance map undergoes
//! after coding.

pub mod agent;
pub mod baselines;
pub mod cli;
pub mod codec;
pub mod dataset;
pub mod env;
pub mod eval;
pub mod error;
pub mod pgm;
pub mod semantics;

pub use error::{Error, Result};
