//! WebAssembly bindings for the browser demo in `www/`. Every export
//! returns a JSON string; errors come back as `{"error": "..."}`.

use serde::Serialize;
use wasm_bindgen::prelude::*;
use wsee::harness::{run_sweep, summarize, ExperimentSpec, Scheme};
use wsee::scenario::{dbm_to_watt, generate_feasible, trial_seed, with_qos, ScenarioConfig};
use wsee::sco::{wsee_maximize, ScoOptions};
use wsee::surrogate::log_bound_coeffs;

fn to_json<T: Serialize>(r: wsee::Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

#[derive(Serialize)]
struct Trace {
    history: Vec<f64>,
    iterations: usize,
    wsee: f64,
    wsr: f64,
    p: Vec<f64>,
    redraws: usize,
}

/// Objective trace of the WSEE driver on one random instance.
#[wasm_bindgen]
pub fn convergence_run(seed: u32, n_users: u32, pmax_dbm: f64, r: f64, lambda: f64) -> String {
    to_json(convergence_inner(seed as u64, n_users as usize, pmax_dbm, r, lambda))
}

fn convergence_inner(seed: u64, n_users: usize, pmax_dbm: f64, r: f64, lambda: f64) -> wsee::Result<Trace> {
    let cfg = ScenarioConfig { n_users, p_max: dbm_to_watt(pmax_dbm), ..Default::default() };
    let (inst, redraws) = generate_feasible(&cfg, trial_seed(seed, 0), cfg.p_max)?;
    let inst = with_qos(&inst, r)?;
    let res = wsee_maximize(&inst, &ScoOptions::with_scale(lambda))?;
    Ok(Trace { history: res.history, iterations: res.iterations, wsee: res.wsee, wsr: res.wsr, p: res.p, redraws })
}

#[derive(Serialize)]
struct SweepPoint {
    scheme: Scheme,
    pmax_dbm: f64,
    wsee_mean: f64,
    wsr_mean: f64,
    converged: usize,
    trials: usize,
}

/// Mean WSEE and WSR of both drivers over a `P_max` grid.
#[wasm_bindgen]
pub fn pmax_sweep(seed: u32, trials: u32, n_users: u32, from_dbm: f64, to_dbm: f64, step_db: f64, r: f64) -> String {
    to_json(sweep_inner(seed as u64, trials as usize, n_users as usize, from_dbm, to_dbm, step_db, r))
}

fn sweep_inner(
    seed: u64,
    trials: usize,
    n_users: usize,
    from_dbm: f64,
    to_dbm: f64,
    step_db: f64,
    r: f64,
) -> wsee::Result<Vec<SweepPoint>> {
    let grid = wsee::harness::parse_grid(&format!("{from_dbm}:{step_db}:{to_dbm}"))?;
    let spec = ExperimentSpec {
        scenario: ScenarioConfig { n_users, ..Default::default() },
        pmax_dbm: grid,
        r: vec![r],
        schemes: vec![Scheme::Wsee, Scheme::Wsr],
        trials,
        seed,
        workers: Some(1),
        ..Default::default()
    };
    let out = run_sweep(&spec)?;
    Ok(summarize(&out.records)
        .into_iter()
        .map(|s| SweepPoint {
            scheme: s.scheme,
            pmax_dbm: s.pmax_dbm,
            wsee_mean: s.wsee_mean,
            wsr_mean: s.wsr_mean,
            converged: s.converged,
            trials: s.trials,
        })
        .collect())
}

#[derive(Serialize)]
struct Curve {
    alpha: f64,
    beta: f64,
    gamma: Vec<f64>,
    exact: Vec<f64>,
    bound: Vec<f64>,
}

/// `log2(1 + g)` and its lower bound expanded at `g0`, on `n` log-spaced
/// points of `[lo, hi]`.
#[wasm_bindgen]
pub fn log_bound_curve(g0: f64, lo: f64, hi: f64, n: u32) -> String {
    to_json(curve_inner(g0, lo, hi, n as usize))
}

fn curve_inner(g0: f64, lo: f64, hi: f64, n: usize) -> wsee::Result<Curve> {
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(wsee::Error::InvalidOption("need 0 < lo < hi and n >= 2".into()));
    }
    let c = log_bound_coeffs(g0)?;
    let gamma: Vec<f64> = (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect();
    Ok(Curve {
        alpha: c.alpha,
        beta: c.beta,
        exact: gamma.iter().map(|g| g.ln_1p() / std::f64::consts::LN_2).collect(),
        bound: gamma.iter().map(|g| c.bound(*g)).collect(),
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_touches_at_expansion() {
        let v: serde_json::Value = serde_json::from_str(&log_bound_curve(3.0, 0.1, 100.0, 41)).unwrap();
        let ex = v["exact"].as_array().unwrap();
        let bd = v["bound"].as_array().unwrap();
        for (e, b) in ex.iter().zip(bd) {
            assert!(b.as_f64().unwrap() <= e.as_f64().unwrap() + 1e-12);
        }
        let c = log_bound_coeffs(3.0).unwrap();
        assert!((c.bound(3.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn errors_are_reported() {
        assert!(log_bound_curve(1.0, 1.0, 0.5, 10).contains("error"));
        assert!(convergence_run(1, 2, 20.0, 1.5, 1.0).contains("error"));
    }

    #[test]
    fn trace_and_sweep() {
        let v: serde_json::Value = serde_json::from_str(&convergence_run(4, 3, 20.0, 0.2, 0.1)).unwrap();
        let h: Vec<f64> = serde_json::from_value(v["history"].clone()).unwrap();
        assert!(h.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9)));
        let s: serde_json::Value = serde_json::from_str(&pmax_sweep(1, 2, 3, 0.0, 10.0, 10.0, 0.0)).unwrap();
        assert_eq!(s.as_array().unwrap().len(), 4);
    }
}
