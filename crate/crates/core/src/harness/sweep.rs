use serde::Serialize;

use super::{par_map, worker_count, ExperimentSpec, GeneralModel, Scheme};
use crate::error::{Error, Result};
use crate::model::{GeneralPowerUser, MultiRbInstance, NetworkInstance};
use crate::scenario::{
    dbm_to_watt, generate_feasible, generate_feasible_multi_rb, trial_seed, with_p_max_multi_rb, with_qos,
    with_qos_multi_rb, ScenarioConfig,
};
use crate::sco::{wsee_maximize, wsee_maximize_general, wsee_maximize_multi_rb, wsr_maximize, ScoOptions, ScoResult};

/// One solved (trial, scheme, grid point).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub pmax_dbm: f64,
    pub r: f64,
    pub lambda: f64,
    pub wsee: f64,
    pub wsr: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    pub wall_ms: f64,
    /// Final powers; empty when the run failed.
    pub p: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub records: Vec<TrialRecord>,
    /// Rejected channel draws per trial (single-band instance).
    pub redraws: Vec<usize>,
    /// Rejected draws per trial for the multi-block instance, when used.
    pub redraws_multi_rb: Vec<usize>,
}

/// Instances of one trial, generated once and specialized per grid point.
pub(crate) struct TrialInstances {
    pub single: Option<NetworkInstance>,
    pub multi: Option<MultiRbInstance>,
    pub redraws: usize,
    pub redraws_multi: usize,
    pub error: Option<String>,
}

/// Instances are drawn at the largest QoS fraction and checked at the
/// smallest `P_max` of the grid; every other grid point is then feasible
/// at equal powers as well.
pub(crate) fn trial_instances(spec: &ExperimentSpec, seed: u64) -> TrialInstances {
    let mut cfg: ScenarioConfig = spec.scenario.clone();
    cfg.r = spec.r.iter().copied().fold(0.0, f64::max);
    let p_check = dbm_to_watt(spec.pmax_dbm.iter().copied().fold(f64::INFINITY, f64::min));
    let mut out = TrialInstances { single: None, multi: None, redraws: 0, redraws_multi: 0, error: None };
    let wants_single = spec.schemes.iter().any(|s| *s != Scheme::WseeMultiRb);
    if wants_single {
        match generate_feasible(&cfg, seed, p_check) {
            Ok((inst, n)) => {
                out.single = Some(inst);
                out.redraws = n;
            }
            Err(e) => out.error = Some(e.to_string()),
        }
    }
    if spec.schemes.contains(&Scheme::WseeMultiRb) {
        match generate_feasible_multi_rb(&cfg, spec.n_rb, seed, p_check) {
            Ok((mrb, n)) => {
                out.multi = Some(mrb);
                out.redraws_multi = n;
            }
            Err(e) => out.error = Some(e.to_string()),
        }
    }
    out
}

pub(crate) enum PointInstance {
    Single(NetworkInstance),
    General(NetworkInstance, Vec<GeneralPowerUser>),
    Multi(MultiRbInstance),
}

impl PointInstance {
    pub fn build(ti: &TrialInstances, scheme: Scheme, general: &GeneralModel, pmax_w: f64, r: f64) -> Result<Self> {
        let missing = || Error::InvalidInstance(ti.error.clone().unwrap_or_else(|| "instance unavailable".into()));
        match scheme {
            Scheme::WseeMultiRb => {
                let m = ti.multi.as_ref().ok_or_else(missing)?;
                Ok(PointInstance::Multi(with_qos_multi_rb(&with_p_max_multi_rb(m, pmax_w)?, r)?))
            }
            _ => {
                let base = ti.single.as_ref().ok_or_else(missing)?;
                let inst = with_qos(&base.with_p_max(pmax_w)?, r)?;
                if scheme == Scheme::WseeGeneral {
                    let users = inst.users().iter().map(|u| general.user(u)).collect();
                    Ok(PointInstance::General(inst, users))
                } else {
                    Ok(PointInstance::Single(inst))
                }
            }
        }
    }

    pub fn solve(&self, scheme: Scheme, opts: &ScoOptions) -> Result<ScoResult> {
        match (self, scheme) {
            (PointInstance::Single(i), Scheme::Wsr) => wsr_maximize(i, opts),
            (PointInstance::Single(i), _) => wsee_maximize(i, opts),
            (PointInstance::General(i, u), _) => wsee_maximize_general(i, u, opts),
            (PointInstance::Multi(m), _) => wsee_maximize_multi_rb(m, opts),
        }
    }

    /// `(wsee, wsr)` at `p`, with the scheme's own power model.
    pub fn evaluate(&self, p: &[f64]) -> Result<(f64, f64)> {
        match self {
            PointInstance::Single(i) => Ok((i.wsee(p)?, i.wsr(p)?)),
            PointInstance::General(i, u) => Ok((i.wsee_general(u, p)?, i.wsr(p)?)),
            PointInstance::Multi(m) => Ok((m.wsee(p)?, m.wsr(p)?)),
        }
    }
}

fn now_ms() -> f64 {
    #[cfg(not(target_arch = "wasm32"))]
    {
        use std::sync::OnceLock;
        use std::time::Instant;
        static T0: OnceLock<Instant> = OnceLock::new();
        T0.get_or_init(Instant::now).elapsed().as_secs_f64() * 1e3
    }
    #[cfg(target_arch = "wasm32")]
    {
        0.0
    }
}

#[derive(Clone, Copy)]
struct GridPoint {
    scheme: Scheme,
    pmax_dbm: f64,
    r: f64,
    lambda: f64,
}

fn grid(spec: &ExperimentSpec) -> Vec<GridPoint> {
    let mut schemes = spec.schemes.clone();
    schemes.sort();
    schemes.dedup();
    let mut pts = Vec::new();
    for &scheme in &schemes {
        for &pmax_dbm in &spec.pmax_dbm {
            for &r in &spec.r {
                for &lambda in &spec.lambdas {
                    pts.push(GridPoint { scheme, pmax_dbm, r, lambda });
                }
            }
        }
    }
    pts
}

fn run_point(spec: &ExperimentSpec, ti: &TrialInstances, trial: usize, seed: u64, g: GridPoint) -> TrialRecord {
    let t0 = now_ms();
    let opts = ScoOptions { epsilon: spec.epsilon, ..ScoOptions::with_scale(g.lambda) };
    let res = PointInstance::build(ti, g.scheme, &spec.general, dbm_to_watt(g.pmax_dbm), g.r)
        .and_then(|pi| pi.solve(g.scheme, &opts));
    let wall_ms = now_ms() - t0;
    let mut rec = run_point_record(trial, seed, g, wall_ms);
    match res {
        Ok(s) => {
            rec.wsee = s.wsee;
            rec.wsr = s.wsr;
            rec.iterations = s.iterations;
            rec.converged = s.converged;
            rec.kkt_residual = s.kkt.max();
            rec.p = s.p;
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

/// Full Monte Carlo sweep. Failed points are kept as rows with NaN values
/// and `converged = false`.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let pts = grid(spec);
    let trials: Vec<usize> = (0..spec.trials).collect();
    let per_trial = par_map(&trials, worker_count(spec.workers), |&t| {
        let seed = trial_seed(spec.seed, t as u64);
        let ti = trial_instances(spec, seed);
        let recs: Vec<TrialRecord> = pts.iter().map(|g| run_point(spec, &ti, t, seed, *g)).collect();
        (recs, ti.redraws, ti.redraws_multi)
    });
    let mut out = SweepOutput::default();
    for (recs, n, m) in per_trial {
        out.records.extend(recs);
        out.redraws.push(n);
        out.redraws_multi_rb.push(m);
    }
    sort_records(&mut out.records);
    Ok(out)
}

pub(crate) fn sort_records(recs: &mut [TrialRecord]) {
    recs.sort_by(|a, b| {
        a.trial
            .cmp(&b.trial)
            .then(a.scheme.cmp(&b.scheme))
            .then(a.pmax_dbm.total_cmp(&b.pmax_dbm))
            .then(a.r.total_cmp(&b.r))
            .then(a.lambda.total_cmp(&b.lambda))
    });
}

/// Single-band instance a sweep uses for `trial` at one grid point.
pub fn instance_for(spec: &ExperimentSpec, trial: usize, pmax_dbm: f64, r: f64) -> Result<NetworkInstance> {
    let single = ExperimentSpec { schemes: vec![Scheme::Wsee], ..spec.clone() };
    let ti = trial_instances(&single, trial_seed(spec.seed, trial as u64));
    match PointInstance::build(&ti, Scheme::Wsee, &spec.general, dbm_to_watt(pmax_dbm), r)? {
        PointInstance::Single(inst) => Ok(inst),
        _ => unreachable!("single-band scheme"),
    }
}

/// Regenerate the instance behind `rec` and re-evaluate its stored powers.
/// Returns the recomputed `(wsee, wsr)`.
pub fn audit_record(spec: &ExperimentSpec, rec: &TrialRecord) -> Result<(f64, f64)> {
    if rec.p.is_empty() {
        return Err(Error::InvalidPower("record holds no powers".into()));
    }
    let single = ExperimentSpec { schemes: vec![rec.scheme], ..spec.clone() };
    let ti = trial_instances(&single, trial_seed(spec.seed, rec.trial as u64));
    let pi = PointInstance::build(&ti, rec.scheme, &spec.general, dbm_to_watt(rec.pmax_dbm), rec.r)?;
    pi.evaluate(&rec.p)
}

/// Per grid point statistics over trials with finite values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub pmax_dbm: f64,
    pub r: f64,
    pub lambda: f64,
    pub trials: usize,
    pub converged: usize,
    pub wsee_mean: f64,
    pub wsee_median: f64,
    pub wsee_std: f64,
    pub wsr_mean: f64,
    pub wsr_median: f64,
    pub wsr_std: f64,
}

fn stats(xs: &mut [f64]) -> (f64, f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    let median = if xs.len() % 2 == 1 { xs[m] } else { 0.5 * (xs[m - 1] + xs[m]) };
    let std = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, median, std)
}

/// Sample statistics per (scheme, P_max, r, lambda), sorted by that key.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Scheme, f64, f64, f64)> =
        records.iter().map(|r| (r.scheme, r.pmax_dbm, r.r, r.lambda)).collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)).then(a.3.total_cmp(&b.3)));
    keys.dedup();
    keys.into_iter()
        .map(|(scheme, pmax_dbm, r, lambda)| {
            let rows: Vec<&TrialRecord> = records
                .iter()
                .filter(|x| x.scheme == scheme && x.pmax_dbm == pmax_dbm && x.r == r && x.lambda == lambda)
                .collect();
            let mut e: Vec<f64> = rows.iter().map(|x| x.wsee).filter(|v| v.is_finite()).collect();
            let mut s: Vec<f64> = rows.iter().map(|x| x.wsr).filter(|v| v.is_finite()).collect();
            let (wsee_mean, wsee_median, wsee_std) = stats(&mut e);
            let (wsr_mean, wsr_median, wsr_std) = stats(&mut s);
            SummaryRow {
                scheme,
                pmax_dbm,
                r,
                lambda,
                trials: rows.len(),
                converged: rows.iter().filter(|x| x.converged).count(),
                wsee_mean,
                wsee_median,
                wsee_std,
                wsr_mean,
                wsr_median,
                wsr_std,
            }
        })
        .collect()
}

/// Convergence trace experiment: WSEE driver at one `P_max`, several
/// starting scales.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSpec {
    pub scenario: ScenarioConfig,
    pub pmax_dbm: f64,
    pub r: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub workers: Option<usize>,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        ConvergenceSpec {
            scenario: ScenarioConfig::default(),
            pmax_dbm: 20.0,
            r: vec![0.0],
            lambdas: vec![0.01, 0.1, 1.0],
            trials: 200,
            seed: 1,
            epsilon: 1e-4,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub trial: usize,
    pub seed: u64,
    pub r: f64,
    pub lambda: f64,
    pub iteration: usize,
    pub wsee: f64,
}

/// Runs every (trial, r, lambda) and returns one record per run with the
/// objective history, plus the flattened per-iteration rows.
pub fn run_convergence(spec: &ConvergenceSpec) -> Result<(Vec<TrialRecord>, Vec<Vec<f64>>, Vec<ConvergenceRow>)> {
    let es = ExperimentSpec {
        scenario: spec.scenario.clone(),
        pmax_dbm: vec![spec.pmax_dbm],
        r: spec.r.clone(),
        schemes: vec![Scheme::Wsee],
        trials: spec.trials,
        lambdas: spec.lambdas.clone(),
        epsilon: spec.epsilon,
        seed: spec.seed,
        workers: spec.workers,
        ..Default::default()
    };
    es.validate()?;
    let pts = grid(&es);
    let trials: Vec<usize> = (0..es.trials).collect();
    let per_trial = par_map(&trials, worker_count(es.workers), |&t| {
        let seed = trial_seed(es.seed, t as u64);
        let ti = trial_instances(&es, seed);
        pts.iter()
            .map(|g| {
                let t0 = now_ms();
                let opts = ScoOptions { epsilon: es.epsilon, ..ScoOptions::with_scale(g.lambda) };
                let res = PointInstance::build(&ti, g.scheme, &es.general, dbm_to_watt(g.pmax_dbm), g.r)
                    .and_then(|pi| pi.solve(g.scheme, &opts));
                let wall_ms = now_ms() - t0;
                let mut rec = run_point_record(t, seed, *g, wall_ms);
                let hist = match res {
                    Ok(s) => {
                        rec.wsee = s.wsee;
                        rec.wsr = s.wsr;
                        rec.iterations = s.iterations;
                        rec.converged = s.converged;
                        rec.kkt_residual = s.kkt.max();
                        rec.p = s.p;
                        s.history
                    }
                    Err(e) => {
                        rec.error = Some(e.to_string());
                        Vec::new()
                    }
                };
                (rec, hist)
            })
            .collect::<Vec<_>>()
    });
    let mut recs = Vec::new();
    let mut hists = Vec::new();
    let mut rows = Vec::new();
    for (rec, hist) in per_trial.into_iter().flatten() {
        for (k, f) in hist.iter().enumerate() {
            rows.push(ConvergenceRow { trial: rec.trial, seed: rec.seed, r: rec.r, lambda: rec.lambda, iteration: k, wsee: *f });
        }
        recs.push(rec);
        hists.push(hist);
    }
    Ok((recs, hists, rows))
}

fn run_point_record(trial: usize, seed: u64, g: GridPoint, wall_ms: f64) -> TrialRecord {
    TrialRecord {
        trial,
        seed,
        scheme: g.scheme,
        pmax_dbm: g.pmax_dbm,
        r: g.r,
        lambda: g.lambda,
        wsee: f64::NAN,
        wsr: f64::NAN,
        iterations: 0,
        converged: false,
        kkt_residual: f64::NAN,
        wall_ms,
        p: Vec::new(),
        error: None,
    }
}
