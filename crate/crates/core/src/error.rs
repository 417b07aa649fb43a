use std::fmt;

use crate::solver::SolveStatus;

/// A single constraint of the feasible power set that a point fails.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NegativePower { user: usize, power: f64 },
    PowerAboveMax { user: usize, power: f64, max: f64 },
    RateBelowMin { user: usize, rate: f64, min: f64 },
}

impl Violation {
    pub fn user(&self) -> usize {
        match *self {
            Violation::NegativePower { user, .. }
            | Violation::PowerAboveMax { user, .. }
            | Violation::RateBelowMin { user, .. } => user,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativePower { user, power } => {
                write!(f, "user {user}: negative power {power:e} W")
            }
            Violation::PowerAboveMax { user, power, max } => {
                write!(f, "user {user}: power {power:e} W exceeds max {max:e} W")
            }
            Violation::RateBelowMin { user, rate, min } => {
                write!(f, "user {user}: rate {rate:e} bit/s below required {min:e} bit/s")
            }
        }
    }
}

struct Violations<'a>(&'a [Violation]);

impl fmt::Display for Violations<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("user index {index} out of range for {n} users")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("negative input for {name}: {value}")]
    NegativeInput { name: &'static str, value: f64 },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid power vector: {0}")]
    InvalidPower(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("QoS constraint of user {0} is absent (r_min = 0)")]
    QosAbsent(usize),
    #[error("initial point is infeasible: {}", Violations(.0))]
    InfeasibleInitialPoint(Vec<Violation>),
    #[error("convex subproblem failed at iteration {iteration}: {status:?}")]
    SubproblemFailure { iteration: usize, status: SolveStatus },
    #[error("objective decreased from {previous:e} to {candidate:e} at iteration {iteration}")]
    NonMonotoneStep { iteration: usize, previous: f64, candidate: f64 },
    #[error("user {0} has zero rate at the initial point")]
    DegenerateRate(usize),
    #[error("QoS target of user {0} is undefined: no interference or self-interference")]
    DegenerateTarget(usize),
    #[error("QoS fraction r = {0} must lie in [0, 1)")]
    InvalidQosFraction(f64),
    #[error("brute-force oracle supports at most 3 users, got {0}")]
    OracleTooLarge(usize),
    #[error("no feasible instance after {0} draws")]
    RedrawLimit(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
