//! Weighted-sum energy-efficiency (WSEE) power control for
//! interference-coupled wireless networks.
//!
//! The nonconvex sum-of-ratios problem is solved by sequential convex
//! optimization in the log-power domain: every outer iteration replaces
//! the nonconvex rate terms by tight concave lower bounds and maximizes the
//! resulting convex program with a log-barrier interior-point method.
//!
//! - [`model`]: exact SINR, rate, power and efficiency evaluation.
//! - [`surrogate`]: lower-bound coefficients and convex subproblem builders.
//! - [`solver`]: the interior-point solver for the canonical subproblems.
//! - [`sco`]: outer drivers (WSEE, WSR, general power model, multiple
//!   resource blocks) and KKT certification.
//! - [`scenario`]: random relay-assisted MIMO instances.
//! - [`harness`]: experiment sweeps, brute-force oracle, CSV/JSON I/O.

pub mod error;
pub mod harness;
pub mod model;
pub mod solver;
pub mod scenario;
pub mod sco;
pub mod surrogate;

pub use error::{Error, Result, Violation};
