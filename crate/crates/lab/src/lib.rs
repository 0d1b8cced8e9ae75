//! Reproducible experiment plumbing on top of `pucci-core`.
//!
//! A [`config::ScenarioConfig`] (strict JSON) names a lattice, an operator,
//! analytic or file-backed data and analysis parameters. The functions in
//! [`scenarios`] run one study each and return a [`report::Report`], which
//! [`report::write_report`] serializes to `report.csv`, `report.json` and
//! grid-function files.

pub mod config;
pub mod fields;
pub mod points;
pub mod report;
pub mod scenarios;

use pucci_core::grid::GridError;
use pucci_core::operators::OperatorError;
use pucci_core::regularity::RegularityError;
use pucci_core::solver::SolverError;
use thiserror::Error;

/// Errors of a scenario run, split by the exit code they map to.
#[derive(Debug, Error)]
pub enum LabError {
    /// Unusable input: configuration, data files, preconditions.
    #[error("{0}")]
    Validation(String),
    /// The computation itself failed.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl LabError {
    /// `1` for validation errors, `2` for numerical and output failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Validation(_) => 1,
            LabError::Numerical(_) | LabError::Output { .. } => 2,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        LabError::Validation(msg.into())
    }
}

impl From<GridError> for LabError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::InvalidGrid(_)
            | GridError::NotAligned { .. }
            | GridError::GridMismatch
            | GridError::Format(_)
            | GridError::HeaderMismatch(_)
            | GridError::EndiannessMissing
            | GridError::Truncated { .. }
            | GridError::Io(_) => LabError::Validation(e.to_string()),
            _ => LabError::Numerical(e.to_string()),
        }
    }
}

impl From<OperatorError> for LabError {
    fn from(e: OperatorError) -> Self {
        match e {
            OperatorError::InvalidParameter(_)
            | OperatorError::DimensionMismatch { .. }
            | OperatorError::GridMismatch => LabError::Validation(e.to_string()),
            OperatorError::Grid(g) => g.into(),
            _ => LabError::Numerical(e.to_string()),
        }
    }
}

impl From<SolverError> for LabError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Cfl { .. } | SolverError::GridMismatch | SolverError::Invalid(_) => {
                LabError::Validation(e.to_string())
            }
            SolverError::Operator(o) => o.into(),
            SolverError::Grid(g) => g.into(),
            SolverError::BlowUp { .. } => LabError::Numerical(e.to_string()),
        }
    }
}

impl From<RegularityError> for LabError {
    fn from(e: RegularityError) -> Self {
        match e {
            RegularityError::InvalidParameter(_)
            | RegularityError::NotHalfSpace
            | RegularityError::FaceNotZero { .. }
            | RegularityError::NotANode { .. } => LabError::Validation(e.to_string()),
            RegularityError::Grid(g) => g.into(),
            _ => LabError::Numerical(e.to_string()),
        }
    }
}
