use std::fmt;

use crate::benchmarks::{HdResult, HdSlot};
use crate::power_min::PowerMinOutcome;
use crate::rate_max::RateMaxOutcome;
use crate::special_case::AoOutcome;

/// Constraint family a failure is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintFamily {
    Radar,
    Uplink(usize),
    Downlink(usize),
    Power,
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintFamily::Radar => write!(f, "radar"),
            ConstraintFamily::Uplink(k) => write!(f, "uplink-{k}"),
            ConstraintFamily::Downlink(l) => write!(f, "downlink-{l}"),
            ConstraintFamily::Power => write!(f, "power"),
        }
    }
}

/// Best iterate carried by [`Error::IterationLimit`].
#[derive(Debug, Clone)]
pub enum BestIterate {
    PowerMin(PowerMinOutcome),
    SpecialCase(AoOutcome),
    RateMax(RateMaxOutcome),
    /// Half-duplex power minimization with at least one slot at its limit.
    HalfDuplexPower(HdResult),
    /// Half-duplex rate maximization with at least one slot at its limit.
    HalfDuplexRate(HdResult),
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ill-conditioned interference-plus-noise matrix (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("degenerate quantity: {0}")]
    Degenerate(String),

    #[error("problem infeasible (offending constraint family: {})", family.map(|f| f.to_string()).unwrap_or_else(|| "unknown".into()))]
    Infeasible { family: Option<ConstraintFamily> },

    #[error("{slot} slot: {source}")]
    Slot {
        slot: HdSlot,
        #[source]
        source: Box<Error>,
    },

    #[error("iteration limit reached after {iterations} iterations")]
    IterationLimit {
        iterations: usize,
        best: Box<BestIterate>,
    },

    #[error("conic solver stopped at its numerical limit ({0})")]
    NumericalLimit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short machine-readable label used in run records.
    pub fn status_label(&self) -> &'static str {
        match self {
            Error::Infeasible { .. } => "infeasible",
            Error::Slot { source, .. } => source.status_label(),
            Error::IterationLimit { .. } => "iteration_limit",
            Error::NumericalLimit(_) => "numerical_limit",
            Error::IllConditioned(_) => "ill_conditioned",
            _ => "error",
        }
    }
}
