use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single row-level problem found while validating an observation file.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateId {
        obs_id: String,
    },
    CoordinateOutOfRange {
        obs_id: String,
        field: &'static str,
        value: f64,
    },
    InvalidDate {
        obs_id: String,
        value: String,
    },
    UnknownLabel {
        obs_id: String,
        label: String,
    },
    /// A label with zero or more than one parent, or a label used on two levels.
    BrokenHierarchy {
        label: String,
        detail: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { obs_id } => write!(f, "DuplicateId: obs_id {obs_id:?} appears more than once"),
            Violation::CoordinateOutOfRange { obs_id, field, value } => {
                write!(f, "CoordinateOutOfRange: {obs_id:?} has {field} = {value}")
            }
            Violation::InvalidDate { obs_id, value } => {
                write!(f, "InvalidDate: {obs_id:?} has date {value:?} (expected YYYY-MM-DD)")
            }
            Violation::UnknownLabel { obs_id, label } => {
                write!(f, "UnknownLabel: {obs_id:?} uses label {label:?}")
            }
            Violation::BrokenHierarchy { label, detail } => {
                write!(f, "BrokenHierarchy: label {label:?}: {detail}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset failed validation with {} violation(s):\n{}", .0.len(), format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),

    #[error("unsupported checkpoint format version {0:?}")]
    UnsupportedVersion(String),

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("k = {k} out of range 1..={classes}")]
    KOutOfRange { k: usize, classes: usize },

    #[error("observation {0:?} missing from one of the inputs")]
    MissingObservation(String),

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    #[error("every class is empty")]
    AllEmpty,

    #[error("all sampling weights are zero")]
    AllZeroWeights,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("infeasible generator spec: {0}")]
    InfeasibleSpec(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for I/O failures, as opposed to bad input or configuration.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  - {x}")).collect::<Vec<_>>().join("\n")
}
