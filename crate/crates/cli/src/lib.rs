//! Experiment drivers behind the `gbbkit` binary: shape conversion, pair
//! scoring, the random-box scatter study, representation fidelity over
//! synthetic or COCO-style annotations, and regression-harness runs.
//!
//! Every driver writes CSV (header row, `.` decimals, `\n` line ends) to a
//! caller-supplied writer, so tests can run them in memory.

pub mod coco;
pub mod fidelity;
pub mod regress;
pub mod scatter;
pub mod score;
pub mod shapes;
pub mod stats;

use std::fmt;
use std::io;

/// Failure of a subcommand, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input or configuration; exit code 2.
    Usage(String),
    /// Failure while running; exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(format!("I/O error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
