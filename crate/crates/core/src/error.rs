use thiserror::Error;

use crate::quantum::Outcome;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("matrix is not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("vector is not a unit direction (norm {0})")]
    NotUnit(f64),

    #[error("Bloch vector norm {0} exceeds 1")]
    OutsideBlochBall(f64),

    #[error("outcome {outcome:?} along {setting} never occurs (probability {probability:e})")]
    OutcomeNeverOccurs {
        setting: &'static str,
        outcome: Outcome,
        probability: f64,
    },

    #[error("invalid game settings: {0}")]
    InvalidSettings(String),

    #[error("conditional states leave the measurement plane (|y| = {0:e})")]
    OutOfPlane(f64),

    #[error("setting marginal {0:e} too small for a conditional projection")]
    DegenerateSetting(f64),

    #[error("merged cap covers the whole disk (r12 = {0})")]
    CapDegenerate(f64),

    #[error("chord is parallel to the z-axis plane cut (|sin gamma| = {0:e})")]
    DegenerateGamma(f64),

    #[error("record inconsistent with quantum state space (|B| exceeds 1 by {0:e})")]
    RecordInconsistent(f64),

    #[error("invalid LHS model: {0}")]
    InvalidModel(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("count record has zero total")]
    EmptyRecord,

    #[error("invalid process matrix: {0}")]
    InvalidChi(String),

    #[error("tomography data is not informationally complete: {0}")]
    IncompleteData(String),
}

impl Error {
    /// Stable machine-readable code used in CLI output rows.
    pub fn reason_code(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::InvalidState(_) => "invalid-state",
            Error::NotUnit(_) => "not-unit",
            Error::OutsideBlochBall(_) => "outside-bloch-ball",
            Error::OutcomeNeverOccurs { .. } => "outcome-never-occurs",
            Error::InvalidSettings(_) => "invalid-settings",
            Error::OutOfPlane(_) => "out-of-plane",
            Error::DegenerateSetting(_) => "degenerate-setting",
            Error::CapDegenerate(_) => "cap-degenerate",
            Error::DegenerateGamma(_) => "degenerate-gamma",
            Error::RecordInconsistent(_) => "record-inconsistent",
            Error::InvalidModel(_) => "invalid-model",
            Error::InvalidProbabilities(_) => "invalid-probabilities",
            Error::EmptyRecord => "empty-record",
            Error::InvalidChi(_) => "invalid-chi",
            Error::IncompleteData(_) => "incomplete-data",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
