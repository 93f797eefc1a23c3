use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// A single violated scenario constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroCount(&'static str),
    BsPositionCount { expected: usize, found: usize },
    TooFewAntennas { antennas: usize, users: usize },
    TooFewAntennasPerBs { antennas: usize, bss: usize, users: usize },
    TooFewUsers { users: usize, bss: usize },
    NonPositive(&'static str, f64),
    NotFinite(&'static str),
    NegativeRician(&'static str, f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroCount(name) => write!(f, "{name} must be at least 1"),
            Violation::BsPositionCount { expected, found } => {
                write!(f, "expected {expected} BS positions, found {found}")
            }
            Violation::TooFewAntennas { antennas, users } => {
                write!(f, "M < K: {antennas} antennas cannot serve up to {users} users")
            }
            Violation::TooFewAntennasPerBs { antennas, bss, users } => {
                write!(f, "J*M < K: {bss} BSs with {antennas} antennas each cannot serve {users} users")
            }
            Violation::TooFewUsers { users, bss } => {
                write!(f, "K < J: {users} users cannot give each of {bss} BSs at least one user")
            }
            Violation::NonPositive(name, v) => write!(f, "{name} must be > 0 (got {v})"),
            Violation::NotFinite(name) => write!(f, "{name} must be finite"),
            Violation::NegativeRician(name, v) => {
                write!(f, "{name} Rician factor must be >= 0 (got {v})")
            }
        }
    }
}

/// Every violated invariant of a scenario, in check order.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid scenario:")?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("matrix is rank deficient: numerical rank {rank}, need {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("distance must be positive (got {0})")]
    Domain(f64),

    #[error("user {0} is not associated with any BS")]
    UnassignedUser(usize),

    #[error("user {user} is already served by BS {bs}")]
    AlreadyAssigned { user: usize, bs: usize },

    #[error("association is incomplete: {0} users unassigned")]
    IncompleteAssociation(usize),

    #[error("BS {0} serves no users")]
    EmptyCell(usize),

    #[error("no feasible BS-user candidate among {0} unassigned users")]
    NoFeasibleCandidate(usize),

    #[error("invalid plan: {0}")]
    Plan(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
