// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by sampling, statistics, calibration, detection and benchmarking.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid interval ({tau1}, {tau2}]")]
    InvalidInterval { tau1: f64, tau2: f64 },

    #[error("degenerate window ({tau1}, {tau2}]: {reason}")]
    DegenerateWindow { tau1: f64, tau2: f64, reason: String },

    #[error("unsupported parameter: {0}")]
    Unsupported(String),

    #[error("unsupported scale L = {scale}: {reason}")]
    UnsupportedScale { scale: f64, reason: String },

    #[error("calibration required: {0}")]
    CalibrationRequired(String),

    #[error("calibration failure: {0}")]
    CalibrationFailure(String),

    #[error("calibration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("spec error: {0}")]
    Spec(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown table id: {0}")]
    UnknownTable(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
