#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsee::model::NetworkInstance;
use wsee::scenario::{dbm_to_watt, generate_feasible, trial_seed, ScenarioConfig};
use wsee::solver::{AffineForm, CanonicalFunction, ConvexProgram};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_affine(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> AffineForm {
    let mut a = AffineForm::constant(rng.random_range(-1.0..1.0));
    for k in 0..n {
        if rng.random_bool(0.7) {
            a = a.plus(k, scale * rng.random_range(-1.0..1.0));
        }
    }
    a
}

/// Random concave canonical function of `n` variables.
pub fn random_canonical(rng: &mut ChaCha8Rng, n: usize) -> CanonicalFunction {
    let mut f = CanonicalFunction::from_affine(random_affine(rng, n, 1.0));
    for _ in 0..rng.random_range(0..=3) {
        let w = rng.random_range(0.1..2.0);
        f = f.minus_exp(w, random_affine(rng, n, 1.0));
    }
    for _ in 0..rng.random_range(0..=2) {
        let w = rng.random_range(0.1..2.0);
        let m = rng.random_range(1..=4);
        f = f.minus_lse(w, (0..m).map(|_| random_affine(rng, n, 1.0)).collect());
    }
    f
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[k] += h;
            b[k] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `||a - b||_inf / max(||b||_inf, floor)`.
pub fn rel_diff(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    inf_norm(&d) / inf_norm(b).max(floor)
}

/// A convex program with known maximizer `x` and optimal value.
pub struct Planted {
    pub program: ConvexProgram,
    pub x: Vec<f64>,
    pub value: f64,
}

/// Builds a program whose KKT conditions hold at a random `x*` with random
/// nonnegative multipliers on a random active set. The objective's affine
/// part is solved for, so `x*` is optimal by convexity.
pub fn planted_program(rng: &mut ChaCha8Rng) -> Planted {
    let n = rng.random_range(1..=6);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    // strictly concave curvature in every coordinate
    let mut h = CanonicalFunction::constant(rng.random_range(-3.0..3.0));
    for k in 0..n {
        let a = rng.random_range(0.3..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let w = rng.random_range(0.2..2.0);
        h = h.minus_exp(w, AffineForm::constant(rng.random_range(-1.0..1.0)).plus(k, a));
    }
    if rng.random_bool(0.5) {
        let m = rng.random_range(2..=3);
        h = h.minus_lse(rng.random_range(0.2..1.0), (0..m).map(|_| random_affine(rng, n, 1.0)).collect());
    }
    // Slater direction: every active constraint increases along `d`
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut stationarity = h.gradient(&x);
    let mut constraints = Vec::new();
    for _ in 0..rng.random_range(0..=4) {
        let mut g = random_canonical(rng, n);
        let gx = g.value(&x);
        let grad = g.gradient(&x);
        let slope: f64 = grad.iter().zip(&d).map(|(a, b)| a * b).sum();
        let norm = grad.iter().map(|a| a * a).sum::<f64>().sqrt();
        if rng.random_bool(0.5) && slope > 0.1 * norm {
            g.affine.constant -= gx;
            let lam = rng.random_range(0.1..2.0);
            for (s, dg) in stationarity.iter_mut().zip(grad) {
                *s += lam * dg;
            }
        } else {
            g.affine.constant -= gx - rng.random_range(0.5..2.0);
        }
        constraints.push(g);
    }
    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut upper = vec![f64::INFINITY; n];
    for k in 0..n {
        match rng.random_range(0..4) {
            0 if d[k] < 0.0 => {
                upper[k] = x[k];
                lower[k] = x[k] - rng.random_range(1.0..3.0);
                stationarity[k] -= rng.random_range(0.1..2.0);
            }
            0 => {
                lower[k] = x[k];
                upper[k] = x[k] + rng.random_range(1.0..3.0);
                stationarity[k] += rng.random_range(0.1..2.0);
            }
            1 => {
                lower[k] = x[k] - rng.random_range(0.5..3.0);
                upper[k] = x[k] + rng.random_range(0.5..3.0);
            }
            _ => {}
        }
    }
    let mut c = AffineForm::constant(0.0);
    for (k, s) in stationarity.iter().enumerate() {
        c = c.plus(k, -s);
    }
    let objective = h.plus(CanonicalFunction::from_affine(c));
    let mut program = ConvexProgram::new(n, objective);
    for g in constraints {
        program = program.with_constraint(g);
    }
    for k in 0..n {
        program = program.with_bounds(k, lower[k], upper[k]);
    }
    let value = program.objective.value(&x);
    Planted { program, x, value }
}

/// Default relay scenario with `n` users and `P_max` in dBm.
pub fn scenario(n: usize, pmax_dbm: f64, r: f64) -> ScenarioConfig {
    ScenarioConfig { n_users: n, p_max: dbm_to_watt(pmax_dbm), r, ..Default::default() }
}

/// Feasible instance number `k` of a seeded stream.
pub fn instance(cfg: &ScenarioConfig, base: u64, k: u64) -> NetworkInstance {
    generate_feasible(cfg, trial_seed(base, k), cfg.p_max).expect("feasible draw").0
}

use wsee::scenario::generate_feasible_multi_rb;
use wsee::surrogate::{
    f_and_f_tilde, log_bound_coeffs, multi_rb_coeffs, multi_rb_rate_surrogate, multi_rb_rate_surrogate_gradient,
    phi_tilde, phi_tilde_gradient, rate_bound, rate_bound_function, BoundCoeffs,
};

/// Worst cases seen by the three-property suite.
#[derive(Debug, Default, Clone)]
pub struct SuiteStats {
    pub points: usize,
    /// Points where a surrogate exceeded its true function.
    pub bound_violations: usize,
    /// Largest relative value gap at an expansion point.
    pub value_err: f64,
    /// Largest relative gradient gap at an expansion point (vs central FD).
    pub grad_err: f64,
}

const BOUND_SLACK: f64 = 1e-12;
const FD_STEP: f64 = 1e-5;

fn exact_phi(inst: &NetworkInstance, q: &[f64], v: f64, i: usize) -> f64 {
    let p: Vec<f64> = q.iter().map(|x| x.exp2()).collect();
    let u = inst.users()[i];
    inst.rate(&p, i).unwrap() - u.mu * (q[i] + v).exp2() - u.p_st * v.exp2()
}

fn pows(q: &[f64]) -> Vec<f64> {
    q.iter().map(|x| x.exp2()).collect()
}

/// Checks bound direction on `points` random points per instance, and value
/// and gradient tightness at the expansion point, for the rate bound, the
/// EE residual, the objective tangent and the multi-block QoS bound.
pub fn surrogate_suite(instances: usize, points: usize, seed: u64) -> SuiteStats {
    let mut st = SuiteStats::default();
    let mut r = rng(seed);
    let cfg = scenario(5, 20.0, 0.2);
    let n = cfg.n_users;
    for k in 0..instances as u64 {
        let inst = instance(&cfg, seed, k);
        let (mrb, _) = generate_feasible_multi_rb(&cfg, 2, trial_seed(seed, k), cfg.p_max).unwrap();
        let kk = mrb.n_rb();
        let p0: Vec<f64> = (0..n).map(|_| cfg.p_max * r.random_range(0.05..1.0)).collect();
        let q0: Vec<f64> = p0.iter().map(|p| p.log2()).collect();
        let coeffs: Vec<BoundCoeffs> =
            inst.channel().sinrs(&p0).into_iter().map(|g| log_bound_coeffs(g).unwrap()).collect();
        let v0: Vec<f64> = inst.ees(&p0).iter().map(|e| e.log2() - 0.5).collect();
        let w = inst.weights();
        let mp0: Vec<f64> = (0..n * kk).map(|_| cfg.p_max / kk as f64 * r.random_range(0.05..1.0)).collect();
        let mut mq0: Vec<f64> = mp0.iter().map(|p| p.log2()).collect();
        mq0.resize(n * kk + n, 0.0);
        let mcoeffs = multi_rb_coeffs(&mrb, &mp0).unwrap();

        for _ in 0..points {
            st.points += 1;
            let q: Vec<f64> = q0.iter().map(|x| x + r.random_range(-3.0..3.0)).collect();
            let v: Vec<f64> = v0.iter().map(|x| x + r.random_range(-2.0..2.0)).collect();
            let p = pows(&q);
            let mut bad = false;
            for i in 0..n {
                let rt = inst.rate(&p, i).unwrap();
                bad |= rate_bound(&inst, &q, &coeffs[i], i) > rt + BOUND_SLACK * rt.abs();
                let ph = exact_phi(&inst, &q, v[i], i);
                bad |= phi_tilde(&inst, &q, v[i], &coeffs[i], i) > ph + BOUND_SLACK * rt.abs();
            }
            let (f, ft) = f_and_f_tilde(&v, &v0, &w);
            bad |= ft > f + BOUND_SLACK * f;
            let mut mq: Vec<f64> = mq0.iter().take(n * kk).map(|x| x + r.random_range(-3.0..3.0)).collect();
            let mp = pows(&mq);
            mq.resize(n * kk + n, 0.0);
            for i in 0..n {
                let rt = mrb.rate(&mp, i).unwrap();
                bad |= multi_rb_rate_surrogate(&mrb, &mq, &mcoeffs, i) > rt + BOUND_SLACK * rt.abs();
            }
            st.bound_violations += bad as usize;
        }

        let rel = |a: f64, b: f64, scale: f64| (a - b).abs() / scale.abs().max(f64::MIN_POSITIVE);
        for i in 0..n {
            let rt = inst.rate(&p0, i).unwrap();
            st.value_err = st.value_err.max(rel(rate_bound(&inst, &q0, &coeffs[i], i), rt, rt));
            st.value_err =
                st.value_err.max(rel(phi_tilde(&inst, &q0, v0[i], &coeffs[i], i), exact_phi(&inst, &q0, v0[i], i), rt));
            let g = rate_bound_function(inst.channel(), inst.bandwidth(), &coeffs[i], i, |j| j).gradient(&q0);
            let fd = fd_gradient(|q| inst.rate(&pows(q), i).unwrap(), &q0, FD_STEP);
            st.grad_err = st.grad_err.max(rel_diff(&g, &fd, 0.0));
            let g = phi_tilde_gradient(&inst, &q0, v0[i], &coeffs[i], i);
            let mut x0 = q0.clone();
            x0.extend(vec![0.0; n]);
            x0[n + i] = v0[i];
            let fd = fd_gradient(|x| exact_phi(&inst, &x[..n], x[n + i], i), &x0, FD_STEP);
            st.grad_err = st.grad_err.max(rel_diff(&g, &fd, 0.0));

            let mrt = mrb.rate(&mp0, i).unwrap();
            st.value_err = st.value_err.max(rel(multi_rb_rate_surrogate(&mrb, &mq0, &mcoeffs, i), mrt, mrt));
            let g = multi_rb_rate_surrogate_gradient(&mrb, &mq0, &mcoeffs, i);
            let fd = fd_gradient(
                |x| {
                    let mut full = pows(&x[..n * kk]);
                    full.truncate(n * kk);
                    mrb.rate(&full, i).unwrap()
                },
                &mq0,
                FD_STEP,
            );
            st.grad_err = st.grad_err.max(rel_diff(&g, &fd, 0.0));
        }
        let (f, ft) = f_and_f_tilde(&v0, &v0, &w);
        st.value_err = st.value_err.max(rel(ft, f, f));
        let g: Vec<f64> = (0..n).map(|i| std::f64::consts::LN_2 * w[i] * v0[i].exp2()).collect();
        let fd = fd_gradient(|v| f_and_f_tilde(v, &v0, &w).0, &v0, FD_STEP);
        st.grad_err = st.grad_err.max(rel_diff(&g, &fd, 0.0));
        // the surrogate tangent itself
        let fd_t = fd_gradient(|v| f_and_f_tilde(v, &v0, &w).1, &v0, FD_STEP);
        st.grad_err = st.grad_err.max(rel_diff(&fd_t, &fd, 0.0));
    }
    st
}

/// Scalar log bound on a log-spaced SINR grid around several expansion
/// points: returns (violations, max |gap| at the expansion point).
pub fn log_bound_grid() -> (usize, f64) {
    let mut bad = 0;
    let mut gap: f64 = 0.0;
    for e in -30..=30 {
        let g0 = 10f64.powf(e as f64 / 5.0);
        let c = log_bound_coeffs(g0).unwrap();
        for k in -400..=400 {
            let g = 10f64.powf(k as f64 / 50.0);
            let exact = g.ln_1p() / std::f64::consts::LN_2;
            if c.bound(g) > exact + 1e-12 * exact.abs().max(1.0) {
                bad += 1;
            }
        }
        let exact = g0.ln_1p() / std::f64::consts::LN_2;
        gap = gap.max((c.bound(g0) - exact).abs() / exact);
    }
    (bad, gap)
}
