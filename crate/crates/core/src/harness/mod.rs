//! Experiment engine: Monte Carlo sweeps over the relay scenario,
//! convergence traces, a brute-force grid oracle for small networks, and
//! CSV/JSON reporting.

mod io;
mod oracle;
mod sweep;

pub use io::{
    read_instance, solve_output, write_convergence_csv, write_json, write_summary_csv, write_sweep_csv, SolveOutput,
    CONVERGENCE_HEADER, SUMMARY_HEADER, SWEEP_HEADER,
};
pub use oracle::{brute_force_oracle, brute_force_oracle_with, Incumbent, OracleResult, MAX_ORACLE_USERS};
pub use sweep::{
    audit_record, instance_for, run_convergence, run_sweep, summarize, ConvergenceRow, ConvergenceSpec, SummaryRow, SweepOutput,
    TrialRecord,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GeneralPowerUser, UserLink};
use crate::scenario::ScenarioConfig;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "WSEE_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Wsee,
    Wsr,
    WseeGeneral,
    WseeMultiRb,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Wsee, Scheme::Wsr, Scheme::WseeGeneral, Scheme::WseeMultiRb];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Wsee => "wsee",
            Scheme::Wsr => "wsr",
            Scheme::WseeGeneral => "wsee_general",
            Scheme::WseeMultiRb => "wsee_multi_rb",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == key)
            .ok_or_else(|| Error::InvalidOption(format!("unknown scheme '{s}' (expected wsee, wsr, wsee_general, wsee_multi_rb)")))
    }
}

/// Extra power-model terms used by the general scheme: `mu_2 p^2` and
/// `xi R^delta` on top of the scenario's linear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralModel {
    pub higher_order_mu: Vec<f64>,
    pub xi: f64,
    pub delta: f64,
}

impl Default for GeneralModel {
    fn default() -> Self {
        GeneralModel { higher_order_mu: vec![0.5], xi: 1e-7, delta: 1.0 }
    }
}

impl GeneralModel {
    pub fn user(&self, u: &UserLink) -> GeneralPowerUser {
        let mut mu = vec![u.mu];
        mu.extend(&self.higher_order_mu);
        GeneralPowerUser { mu, xi: self.xi, delta: self.delta, p_st: u.p_st }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub pmax_dbm: Vec<f64>,
    pub r: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    pub lambdas: Vec<f64>,
    pub epsilon: f64,
    pub seed: u64,
    /// Resource blocks for the multi-block scheme.
    pub n_rb: usize,
    pub general: GeneralModel,
    /// Worker threads; `None` uses the environment override or all cores.
    pub workers: Option<usize>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            scenario: ScenarioConfig::default(),
            pmax_dbm: (0..=8).map(|k| 5.0 * k as f64).collect(),
            r: vec![0.0, 0.2, 0.8],
            schemes: vec![Scheme::Wsee, Scheme::Wsr],
            trials: 200,
            lambdas: vec![1.0],
            epsilon: 1e-4,
            seed: 1,
            n_rb: 2,
            general: GeneralModel::default(),
            workers: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidOption("trials must be at least 1".into()));
        }
        if self.pmax_dbm.is_empty() || self.r.is_empty() || self.schemes.is_empty() || self.lambdas.is_empty() {
            return Err(Error::InvalidOption("grids must be non-empty".into()));
        }
        if self.pmax_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidOption("P_max grid must be finite".into()));
        }
        for &r in &self.r {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::InvalidQosFraction(r));
            }
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0 && *l <= 1.0)) {
            return Err(Error::InvalidOption("lambda values must lie in (0, 1]".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidOption("epsilon must be positive".into()));
        }
        if self.n_rb == 0 {
            return Err(Error::InvalidOption("n_rb must be at least 1".into()));
        }
        let mut cfg = self.scenario.clone();
        cfg.r = 0.0;
        cfg.validate()
    }
}

/// Parse `A:STEP:B` (inclusive) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidOption(format!("cannot parse grid '{s}'"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
        let (a, step, b) = (v[0], v[1], v[2]);
        if !(step > 0.0) || b < a {
            return Err(bad());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|k| a + step * k as f64).collect());
    }
    parse_list(s)
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::InvalidOption(format!("cannot parse number '{p}'"))))
        .collect()
}

pub fn parse_schemes(s: &str) -> Result<Vec<Scheme>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

/// Worker count: explicit value, else `WSEE_WORKERS`, else all cores (0).
pub fn worker_count(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .unwrap_or(0)
}

/// Map `f` over `items`, in parallel when the `parallel` feature is on.
/// Output order matches input order.
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if workers != 1 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                return pool.install(|| items.par_iter().map(&f).collect());
            }
        }
    }
    let _ = workers;
    items.iter().map(f).collect()
}
