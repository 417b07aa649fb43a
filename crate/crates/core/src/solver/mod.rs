//! Log-barrier interior-point solver for concave maximization over
//! canonical constraints `g_i(x) >= 0` and a variable box.

mod barrier;
mod canonical;
mod nnls;

pub use barrier::{find_strictly_feasible, kkt_residual, solve, PhaseOne};
pub use canonical::{AffineForm, CanonicalFunction, Evaluation, ExpTerm, LseTerm, EXPONENT_CLAMP};
pub use nnls::nnls;

use serde::Serialize;

use crate::error::{Error, Result};

/// Stand-in magnitude for infinite box bounds (log2 domain: 1e-18 .. 1e18).
pub const BOX_SENTINEL: f64 = 60.0;

/// Maximize `objective(x)` subject to `constraints[i](x) >= 0` and
/// `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProgram {
    pub n_vars: usize,
    pub objective: CanonicalFunction,
    pub constraints: Vec<CanonicalFunction>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ConvexProgram {
    /// Unconstrained program over `n_vars` free variables.
    pub fn new(n_vars: usize, objective: CanonicalFunction) -> Self {
        ConvexProgram {
            n_vars,
            objective,
            constraints: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n_vars],
            upper: vec![f64::INFINITY; n_vars],
        }
    }

    pub fn with_constraint(mut self, g: CanonicalFunction) -> Self {
        self.constraints.push(g);
        self
    }

    pub fn with_bounds(mut self, index: usize, lower: f64, upper: f64) -> Self {
        self.lower[index] = lower;
        self.upper[index] = upper;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.n_vars || self.upper.len() != self.n_vars {
            return Err(Error::InvalidOption("box length does not match variable count".into()));
        }
        let fns = std::iter::once(&self.objective).chain(&self.constraints);
        for (k, f) in fns.enumerate() {
            if !f.is_concave_form() {
                return Err(Error::InvalidOption(format!("function {k} has a negative term weight")));
            }
            if f.max_index().is_some_and(|m| m >= self.n_vars) {
                return Err(Error::InvalidOption(format!("function {k} references a missing variable")));
            }
        }
        for k in 0..self.n_vars {
            let (lo, hi) = self.bounds(k);
            if !(lo < hi) {
                return Err(Error::InvalidOption(format!("empty box for variable {k}")));
            }
        }
        Ok(())
    }

    /// Box of variable `k` with infinite ends replaced by the sentinel.
    pub fn bounds(&self, k: usize) -> (f64, f64) {
        let lo = if self.lower[k].is_finite() { self.lower[k] } else { -BOX_SENTINEL };
        let hi = if self.upper[k].is_finite() { self.upper[k] } else { BOX_SENTINEL };
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Initial barrier weight.
    pub t0: f64,
    /// Barrier weight growth factor per outer iteration.
    pub growth: f64,
    /// Outer stop when `m / t` falls below this.
    pub gap_tol: f64,
    /// Centering stops when half the squared Newton decrement falls below this.
    pub centering_tol: f64,
    pub max_newton: usize,
    pub max_outer: usize,
    /// Armijo sufficient-decrease slope.
    pub armijo: f64,
    /// Backtracking shrink factor.
    pub shrink: f64,
    /// Minimum slack of a point accepted as strictly feasible.
    pub slack_min: f64,
    /// Stationarity bound (relative to the objective gradient) for `Optimal`.
    pub kkt_tol: f64,
    /// Record one trace line per Newton step.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            t0: 1.0,
            growth: 10.0,
            gap_tol: 1e-8,
            centering_tol: 1e-9,
            max_newton: 200,
            max_outer: 40,
            armijo: 0.01,
            shrink: 0.5,
            slack_min: 1e-8,
            kkt_tol: 1e-6,
            trace: false,
        }
    }
}

/// `(stationarity inf-norm, max constraint violation, max |lambda_i g_i|)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct KktResidual {
    pub stationarity: f64,
    pub violation: f64,
    pub complementarity: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.violation).max(self.complementarity)
    }
}

/// Multipliers for the general constraints and both sides of the box.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Duals {
    pub constraints: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceLine {
    pub t: f64,
    pub step: f64,
    pub objective: f64,
    pub decrement: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub objective: f64,
    pub duals: Duals,
    pub kkt: KktResidual,
    pub outer_iterations: usize,
    pub newton_steps: usize,
    pub status: SolveStatus,
    /// Objective after each centering, in order of increasing `t`.
    pub outer_objectives: Vec<f64>,
    /// A sentinel box bound is within 1e-6 of the returned point.
    pub sentinel_active: bool,
    pub trace: Vec<TraceLine>,
}

impl SolveReport {
    pub fn trace_dump(&self) -> String {
        self.trace
            .iter()
            .map(|l| format!("t={:.3e} step={:.3e} obj={:.12e} dec={:.3e}\n", l.t, l.step, l.objective, l.decrement))
            .collect()
    }
}
