use thiserror::Error;

use crate::id::{ElementId, StateValue};
use crate::validate::ValidationReport;

/// Everything that can go wrong across the crate.
///
/// `code` gives each variant a stable short name that the command line tool
/// prints next to the message, so callers can match on failures without
/// parsing prose.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate label `{label}` at level {level}")]
    DuplicateLabel { label: String, level: usize },

    #[error("unknown element `{}` at level {}", .0.label(), .0.level())]
    UnknownElement(ElementId),

    #[error("unknown bond `{}` at level {}", .0.label(), .0.level())]
    UnknownBond(ElementId),

    #[error("expected a level {expected} member, got `{}` at level {}", found.label(), found.level())]
    LevelMismatch { expected: usize, found: ElementId },

    #[error("bond `{label}` would have an empty boundary")]
    EmptyBoundary { label: String },

    #[error("state {state} is not among the assigned states for the boundary of `{label}`")]
    StateNotAssigned { label: String, state: StateValue },

    #[error("level {level} does not exist in a structure of order {order}")]
    BadLevel { level: usize, order: usize },

    #[error("bond `{}` does not bind exactly {{`{}`}}", bond.label(), element.label())]
    BoundaryMismatch { element: ElementId, bond: ElementId },

    #[error("bond `{}` duplicates the boundary and formation state of `{}`", second.label(), first.label())]
    DuplicateBond { first: ElementId, second: ElementId },

    #[error("representation mismatch: {0}")]
    RepresentationMismatch(String),

    #[error("malformed chain: {0}")]
    MalformedChain(String),

    #[error("unknown label `{label}` in space {space}")]
    UnknownLabel { label: String, space: String },

    #[error("malformed tree: {0}")]
    MalformedTree(String),

    #[error("bad signature: {0}")]
    BadSignature(String),

    #[error("no base state for level 0 element `{0}`")]
    MissingBaseState(String),

    #[error("no aggregator for level {0}")]
    AggregatorGap(usize),

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("prior assignment does not match this structure and aggregator setup")]
    StalePrior,

    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("a series needs at least 3 samples, got {0}")]
    ShortSeries(usize),

    #[error("series `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("sample {index} of series `{series}` is not finite")]
    NonFiniteSample { series: String, index: usize },

    #[error("row {row}, column `{column}`: {detail}")]
    CsvData { row: usize, column: String, detail: String },

    #[error("structure failed validation with {} violation(s)", .0.len())]
    Invalid(ValidationReport),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::DuplicateLabel { .. } => "duplicate-label",
            Error::UnknownElement(_) => "unknown-element",
            Error::UnknownBond(_) => "unknown-bond",
            Error::LevelMismatch { .. } => "level-mismatch",
            Error::EmptyBoundary { .. } => "empty-boundary",
            Error::StateNotAssigned { .. } => "state-not-assigned",
            Error::BadLevel { .. } => "bad-level",
            Error::BoundaryMismatch { .. } => "boundary-mismatch",
            Error::DuplicateBond { .. } => "duplicate-bond",
            Error::RepresentationMismatch(_) => "representation-mismatch",
            Error::MalformedChain(_) => "malformed-chain",
            Error::UnknownLabel { .. } => "unknown-label",
            Error::MalformedTree(_) => "malformed-tree",
            Error::BadSignature(_) => "bad-signature",
            Error::MissingBaseState(_) => "missing-base-state",
            Error::AggregatorGap(_) => "aggregator-gap",
            Error::SpaceMismatch(_) => "space-mismatch",
            Error::StalePrior => "stale-prior",
            Error::LengthMismatch(..) => "length-mismatch",
            Error::ShortSeries(_) => "short-series",
            Error::ZeroVariance(_) => "zero-variance",
            Error::NonFiniteSample { .. } => "non-finite-sample",
            Error::CsvData { .. } => "csv-data",
            Error::Invalid(_) => "invalid-structure",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    /// The validation report carried by an `Invalid` error.
    pub fn report(&self) -> Option<&ValidationReport> {
        match self {
            Error::Invalid(report) => Some(report),
            _ => None,
        }
    }
}
