use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time {0:?}, expected zero-padded HH:MM")]
    InvalidTime(String),
    #[error("unknown undertaking {0:?}")]
    UnknownUndertaking(String),
    #[error("unknown OD pair {0:?}")]
    UnknownOdPair(String),
    #[error("no slot at {time} on OD pair {od:?}")]
    UnknownSlot { od: String, time: String },
    #[error("no free slot")]
    NoFreeSlot,
    #[error("OD pair {od:?}: {requests} requests but only {free} free slots")]
    InsufficientSlots { od: String, requests: usize, free: usize },
    #[error("invalid priority order: {0}")]
    InvalidPriorityOrder(String),
    #[error("inconsistent retiming: {0}")]
    InconsistentRetiming(String),
    #[error("invalid input: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("oracle scale exceeded: {0}")]
    OracleScaleExceeded(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("profile shape {found:?} does not match tensor shape {expected:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("no equilibrium within tolerance {tolerance:e}; best candidate has epsilon {:e}", .best.epsilon_nash)]
    NoEquilibrium { tolerance: f64, best: Box<crate::equilibrium::EquilibriumResult> },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
