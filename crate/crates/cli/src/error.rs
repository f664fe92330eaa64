//! Error classification for the exit-code contract:
//! 0 success, 1 usage error, 2 input/parse error, 3 undefined metric.

use std::fmt;

use darkgrid_core::cfg::CfgError;
use darkgrid_core::detect::DecodeError;
use darkgrid_core::engine::{ForwardError, WeightError};
use darkgrid_core::eval::EvalError;
use darkgrid_core::tensor::TensorError;

#[derive(Debug)]
pub enum CliError {
    /// Contradictory or out-of-range flags and arguments.
    Usage(String),
    /// Unreadable or unparseable inputs: files, configs, weights, images.
    Input(String),
    /// A requested metric has no defined value for these inputs.
    UndefinedMetric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::UndefinedMetric(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Input(msg) => write!(f, "{msg}"),
            CliError::UndefinedMetric(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CfgError> for CliError {
    fn from(e: CfgError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<WeightError> for CliError {
    fn from(e: WeightError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ForwardError> for CliError {
    fn from(e: ForwardError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<DecodeError> for CliError {
    fn from(e: DecodeError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::UndefinedMetric { .. } => CliError::UndefinedMetric(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
