//! Command implementations behind the `rsc` binary, usable in-process.

mod commands;
mod config;

pub use commands::*;
pub use config::{OracleChoice, RunConfig, KEYS};

use crate::error::Error;

/// Process exit status for an error: 2 for bad input or configuration,
/// 3 when there is too little data to evaluate, 1 otherwise.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::InvalidInput(_) | Error::NotFound(_) | Error::Parse { .. } | Error::Io { .. } | Error::Model(_) => 2,
        Error::Eval(_) => 3,
        Error::Fit(_) => 1,
        Error::Frame { source, .. } => exit_code(source),
    }
}
