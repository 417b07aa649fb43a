//! Sequential convex optimization drivers.
//!
//! Each outer iteration expands the concave bounds at the current powers,
//! solves the convex subproblem, and moves to its optimizer. The auxiliary
//! variables (`v = log2 EE`, and `y = log2 R` for the general power model)
//! are re-tightened from the new powers before the next expansion, so the
//! recorded objective is always the exact one at the current powers.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    Feasibility, GeneralPowerUser, MultiRbInstance, NetworkInstance, FEASIBILITY_TOL,
};
use crate::solver::{
    find_strictly_feasible, nnls, solve, AffineForm, CanonicalFunction, ConvexProgram, KktResidual, PhaseOne,
    SolveReport, SolveStatus, SolverOptions,
};
use crate::surrogate::{
    build_multi_rb_subproblem, build_wsee_general_subproblem, build_wsee_subproblem, build_wsr_subproblem,
    neg_epsilon_function, theta_function, SurrogateProblem, VarLayout,
};

/// Smallest power allowed in a starting point (the log domain needs `p > 0`).
pub const POWER_FLOOR: f64 = 1e-12;

/// Constraint activity threshold for KKT certification.
pub const ACTIVITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPoint {
    /// `p = lambda * P_max` (split evenly over resource blocks).
    Scale(f64),
    Powers(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct ScoOptions {
    /// Relative objective change that stops the iteration.
    pub epsilon: f64,
    pub max_iter: usize,
    pub initial: InitialPoint,
    /// Keep every subproblem report in the result.
    pub record_history: bool,
    pub solver: SolverOptions,
}

impl Default for ScoOptions {
    fn default() -> Self {
        ScoOptions {
            epsilon: 1e-4,
            max_iter: 100,
            initial: InitialPoint::Scale(1.0),
            record_history: false,
            solver: SolverOptions::default(),
        }
    }
}

impl ScoOptions {
    pub fn with_scale(lambda: f64) -> Self {
        ScoOptions { initial: InitialPoint::Scale(lambda), ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidOption(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidOption("max_iter must be at least 1".into()));
        }
        if let InitialPoint::Scale(l) = self.initial {
            if !(l > 0.0 && l <= 1.0) {
                return Err(Error::InvalidOption(format!("initial scale must lie in (0, 1], got {l}")));
            }
        }
        Ok(())
    }
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    /// Relative objective change fell below epsilon.
    Tolerance,
    /// The subproblem has no interior around the current point.
    Pinned,
    /// The subproblem optimizer was marginally worse than the current point.
    Stalled,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct ScoResult {
    /// Final powers (user-major over blocks for the multi-block driver).
    pub p: Vec<f64>,
    /// Driver objective at `p`: WSEE for the efficiency drivers, WSR otherwise.
    pub objective: f64,
    pub wsee: f64,
    pub wsr: f64,
    pub ee: Vec<f64>,
    /// Number of convex subproblems solved.
    pub iterations: usize,
    /// Objective at the start and after each accepted step.
    pub history: Vec<f64>,
    pub converged: bool,
    pub stop: StopReason,
    pub kkt: KktResidual,
    /// Subproblem statuses, one per iteration.
    pub statuses: Vec<SolveStatus>,
    pub reports: Vec<SolveReport>,
}

struct Outer {
    p: Vec<f64>,
    history: Vec<f64>,
    iterations: usize,
    stop: StopReason,
    statuses: Vec<SolveStatus>,
    reports: Vec<SolveReport>,
}

/// Shared outer loop. `objective` is the exact objective at powers,
/// `build` the subproblem expanded at powers, `project` clips rounding
/// overshoot of the power budget.
fn run_outer(
    p0: Vec<f64>,
    opts: &ScoOptions,
    objective: impl Fn(&[f64]) -> Result<f64>,
    feasibility: impl Fn(&[f64]) -> Result<Feasibility>,
    build: impl Fn(&[f64]) -> Result<SurrogateProblem>,
    project: impl Fn(&mut [f64]),
) -> Result<Outer> {
    let start = feasibility(&p0)?;
    if !start.is_feasible() {
        return Err(Error::InfeasibleInitialPoint(start.violations));
    }
    let mut p = p0;
    let mut f = objective(&p)?;
    let mut out = Outer {
        p: Vec::new(),
        history: vec![f],
        iterations: 0,
        stop: StopReason::MaxIter,
        statuses: Vec::new(),
        reports: Vec::new(),
    };
    for iteration in 1..=opts.max_iter {
        let sub = build(&p)?;
        let report = solve(&sub.program, &sub.interior_guess(), &opts.solver)?;
        out.iterations = iteration;
        out.statuses.push(report.status);
        let status = report.status;
        let x = report.x.clone();
        if opts.record_history {
            out.reports.push(report);
        }
        if status == SolveStatus::Infeasible {
            out.stop = StopReason::Pinned;
            break;
        }
        let mut cand = sub.powers(&x);
        project(&mut cand);
        let usable = cand.iter().all(|v| v.is_finite()) && feasibility(&cand)?.is_feasible();
        if !usable {
            if status == SolveStatus::Optimal {
                let bad = feasibility(&cand)?;
                return Err(Error::InfeasibleInitialPoint(bad.violations));
            }
            return Err(Error::SubproblemFailure { iteration, status });
        }
        let f_new = objective(&cand)?;
        if f_new < f {
            if f - f_new <= opts.epsilon * f.abs() {
                out.stop = StopReason::Stalled;
                break;
            }
            if status != SolveStatus::Optimal {
                return Err(Error::SubproblemFailure { iteration, status });
            }
            return Err(Error::NonMonotoneStep { iteration, previous: f, candidate: f_new });
        }
        let change = if f != 0.0 { (f_new - f) / f.abs() } else { (f_new - f).abs() };
        p = cand;
        f = f_new;
        out.history.push(f);
        if change < opts.epsilon {
            out.stop = StopReason::Tolerance;
            break;
        }
    }
    out.p = p;
    Ok(out)
}

fn floored(p: Vec<f64>) -> Vec<f64> {
    p.into_iter().map(|x| if x.is_finite() { x.max(POWER_FLOOR) } else { x }).collect()
}

fn initial_single(inst: &NetworkInstance, init: &InitialPoint) -> Result<Vec<f64>> {
    let p = match init {
        InitialPoint::Scale(l) => inst.p_max().iter().map(|m| l * m).collect(),
        InitialPoint::Powers(p) => {
            if p.len() != inst.n_users() {
                return Err(Error::InvalidPower(format!("initial point has length {}", p.len())));
            }
            p.clone()
        }
    };
    Ok(floored(p))
}

fn log2_all(p: &[f64]) -> Vec<f64> {
    p.iter().map(|x| x.log2()).collect()
}

fn cap_single(inst: &NetworkInstance) -> impl Fn(&mut [f64]) + '_ {
    move |p: &mut [f64]| {
        for (x, u) in p.iter_mut().zip(inst.users()) {
            *x = x.min(u.p_max);
        }
    }
}

fn finish(inst: &NetworkInstance, out: Outer, objective: f64, kkt: KktResidual) -> Result<ScoResult> {
    Ok(ScoResult {
        wsee: inst.wsee(&out.p)?,
        wsr: inst.wsr(&out.p)?,
        ee: inst.ees(&out.p),
        objective,
        iterations: out.iterations,
        history: out.history,
        converged: out.stop != StopReason::MaxIter,
        stop: out.stop,
        kkt,
        statuses: out.statuses,
        reports: out.reports,
        p: out.p,
    })
}

/// Weighted-sum energy-efficiency maximization with the linear power model.
pub fn wsee_maximize(inst: &NetworkInstance, opts: &ScoOptions) -> Result<ScoResult> {
    opts.validate()?;
    let p0 = initial_single(inst, &opts.initial)?;
    let out = run_outer(
        p0,
        opts,
        |p| inst.wsee(p),
        |p| inst.feasibility(p, FEASIBILITY_TOL),
        |p| {
            let v: Vec<f64> = inst.ees(p).iter().map(|e| e.log2()).collect();
            build_wsee_subproblem(inst, &log2_all(p), &v)
        },
        cap_single(inst),
    )?;
    let kkt = certify_kkt(inst, &out.p)?;
    let f = inst.wsee(&out.p)?;
    finish(inst, out, f, kkt)
}

/// Weighted-sum rate maximization under the same power and QoS constraints.
pub fn wsr_maximize(inst: &NetworkInstance, opts: &ScoOptions) -> Result<ScoResult> {
    opts.validate()?;
    let p0 = initial_single(inst, &opts.initial)?;
    let out = run_outer(
        p0,
        opts,
        |p| inst.wsr(p),
        |p| inst.feasibility(p, FEASIBILITY_TOL),
        |p| build_wsr_subproblem(inst, &log2_all(p)),
        cap_single(inst),
    )?;
    let kkt = certify_kkt_wsr(inst, &out.p)?;
    let f = inst.wsr(&out.p)?;
    finish(inst, out, f, kkt)
}

/// WSEE maximization with rate-dependent power consumption.
pub fn wsee_maximize_general(
    inst: &NetworkInstance,
    users: &[GeneralPowerUser],
    opts: &ScoOptions,
) -> Result<ScoResult> {
    opts.validate()?;
    if users.len() != inst.n_users() {
        return Err(Error::InvalidInstance("general power model length mismatch".into()));
    }
    for u in users {
        u.validate()?;
    }
    let p0 = initial_single(inst, &opts.initial)?;
    if let Some(i) = inst.rates(&p0).iter().position(|r| !(*r > 0.0)) {
        return Err(Error::DegenerateRate(i));
    }
    let out = run_outer(
        p0,
        opts,
        |p| inst.wsee_general(users, p),
        |p| inst.feasibility(p, FEASIBILITY_TOL),
        |p| {
            let rates = inst.rates(p);
            if let Some(i) = rates.iter().position(|r| !(*r > 0.0)) {
                return Err(Error::DegenerateRate(i));
            }
            let y: Vec<f64> = rates.iter().map(|r| r.log2()).collect();
            let mut v = Vec::with_capacity(p.len());
            for i in 0..p.len() {
                v.push(users[i].efficiency(p[i], rates[i])?.log2());
            }
            build_wsee_general_subproblem(inst, users, &log2_all(p), &y, &v)
        },
        cap_single(inst),
    )?;
    let kkt = certify_kkt_general(inst, users, &out.p)?;
    let f = inst.wsee_general(users, &out.p)?;
    let mut res = finish(inst, out, f, kkt)?;
    res.wsee = f;
    res.ee = (0..inst.n_users()).map(|i| inst.ee_general(users, &res.p, i)).collect::<Result<_>>()?;
    Ok(res)
}

/// WSEE maximization over `K` resource blocks with a per-user total power
/// budget.
pub fn wsee_maximize_multi_rb(mrb: &MultiRbInstance, opts: &ScoOptions) -> Result<ScoResult> {
    opts.validate()?;
    let kk = mrb.n_rb();
    let p0 = match &opts.initial {
        InitialPoint::Scale(l) => {
            mrb.users().iter().flat_map(|u| std::iter::repeat_n(l * u.p_max / kk as f64, kk)).collect()
        }
        InitialPoint::Powers(p) => {
            if p.len() != mrb.n_users() * kk {
                return Err(Error::InvalidPower(format!("initial point has length {}", p.len())));
            }
            p.clone()
        }
    };
    let out = run_outer(
        floored(p0),
        opts,
        |p| mrb.wsee(p),
        |p| mrb.feasibility(p, FEASIBILITY_TOL),
        |p| {
            let v: Vec<f64> = mrb.ees(p).iter().map(|e| e.log2()).collect();
            build_multi_rb_subproblem(mrb, &log2_all(p), &v)
        },
        |p| {
            for (i, u) in mrb.users().iter().enumerate() {
                let total = mrb.total_power(p, i);
                if total > u.p_max {
                    for x in &mut p[i * kk..(i + 1) * kk] {
                        *x *= u.p_max / total;
                    }
                }
            }
        },
    )?;
    let kkt = certify_kkt_multi_rb(mrb, &out.p)?;
    let f = mrb.wsee(&out.p)?;
    Ok(ScoResult {
        wsee: f,
        wsr: mrb.wsr(&out.p)?,
        ee: mrb.ees(&out.p),
        objective: f,
        iterations: out.iterations,
        history: out.history,
        converged: out.stop != StopReason::MaxIter,
        stop: out.stop,
        kkt,
        statuses: out.statuses,
        reports: out.reports,
        p: out.p,
    })
}

/// Feasible starting powers found by maximizing the smallest QoS and
/// power-cap slack (a phase-I solve over `q`).
pub fn find_feasible_start(inst: &NetworkInstance, opts: &SolverOptions) -> Result<Vec<f64>> {
    let pmax = inst.p_max();
    if inst.is_feasible(&pmax, FEASIBILITY_TOL)? {
        return Ok(pmax);
    }
    let layout = VarLayout::wsr(inst.n_users());
    let mut prog = ConvexProgram::new(layout.n_vars(), CanonicalFunction::default());
    for (i, u) in inst.users().iter().enumerate() {
        prog.upper[i] = u.p_max.log2();
        if u.r_min > 0.0 {
            prog.constraints.push(theta_function(inst, i, &layout)?);
        }
    }
    let q0: Vec<f64> = pmax.iter().map(|p| p.log2() - 1.0).collect();
    match find_strictly_feasible(&prog, &q0, opts) {
        PhaseOne::Feasible(q) => {
            let p: Vec<f64> = q.iter().map(|x| x.exp2()).collect();
            let f = inst.feasibility(&p, FEASIBILITY_TOL)?;
            if f.is_feasible() {
                Ok(p)
            } else {
                Err(Error::InfeasibleInitialPoint(f.violations))
            }
        }
        PhaseOne::Infeasible { x, .. } => {
            let p: Vec<f64> = x.iter().zip(&pmax).map(|(q, m)| q.exp2().min(*m)).collect();
            Err(Error::InfeasibleInitialPoint(inst.feasibility(&p, FEASIBILITY_TOL)?.violations))
        }
    }
}

/// A constraint `g >= 0` at the certification point: scaled value and
/// gradient over the problem variables.
struct Row {
    value: f64,
    grad: Vec<f64>,
}

/// Least-squares KKT residual of `max f s.t. g_k >= 0`: multipliers from
/// NNLS over the active rows; stationarity relative to `||grad f||_inf`.
fn certify(grad_f: &[f64], rows: &[Row]) -> KktResidual {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let gscale = inf(grad_f);
    let gscale = if gscale > 0.0 { gscale } else { 1.0 };
    let violation = rows.iter().fold(0.0f64, |m, r| m.max(-r.value));
    let active: Vec<&Row> = rows.iter().filter(|r| r.value <= ACTIVITY_TOL && inf(&r.grad) > 0.0).collect();
    let n = grad_f.len();
    let b = DVector::from_iterator(n, grad_f.iter().map(|g| -g / gscale));
    let mut a = DMatrix::zeros(n, active.len());
    let mut col_scale = Vec::with_capacity(active.len());
    for (k, r) in active.iter().enumerate() {
        let s = inf(&r.grad);
        col_scale.push(s);
        for j in 0..n {
            a[(j, k)] = r.grad[j] / s;
        }
    }
    let lambda = nnls(&a, &b);
    let resid = &a * &lambda - &b;
    let complementarity = active
        .iter()
        .enumerate()
        .fold(0.0f64, |m, (k, r)| m.max((lambda[k] * r.value / col_scale[k]).abs()));
    KktResidual { stationarity: resid.amax(), violation: violation.max(0.0), complementarity }
}

fn unit(n: usize, k: usize, s: f64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = s;
    v
}

/// Row of an exact canonical constraint.
fn canonical_row(g: &CanonicalFunction, x: &[f64]) -> Row {
    let e = g.evaluate(x);
    Row { value: e.value, grad: e.gradient }
}

fn check_point(inst: &NetworkInstance, p: &[f64]) -> Result<()> {
    if p.len() != inst.n_users() || p.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::InvalidPower(format!("certification needs positive finite powers, got {p:?}")));
    }
    Ok(())
}

/// Rows common to the single-band problems: power caps (`log2 P_max - q`)
/// and exact QoS (`theta`), over a layout with `n` variables in total.
fn cap_and_qos_rows(inst: &NetworkInstance, x: &[f64], layout: &VarLayout) -> Result<Vec<Row>> {
    let n = x.len();
    let mut rows = Vec::new();
    for (i, u) in inst.users().iter().enumerate() {
        let k = layout.q(i, 0);
        rows.push(Row { value: u.p_max.log2() - x[k], grad: unit(n, k, -1.0) });
        if u.r_min > 0.0 {
            rows.push(canonical_row(&theta_function(inst, i, layout)?, x));
        }
    }
    Ok(rows)
}

/// KKT residual of the log-domain WSEE problem (variables `q`, `v` with
/// `v = log2 EE(p)`) at powers `p`.
pub fn certify_kkt(inst: &NetworkInstance, p: &[f64]) -> Result<KktResidual> {
    check_point(inst, p)?;
    let n = inst.n_users();
    let layout = VarLayout::wsee(n);
    let b = inst.bandwidth();
    let v: Vec<f64> = inst.ees(p).iter().map(|e| e.log2()).collect();
    let x: Vec<f64> = log2_all(p).into_iter().chain(v.iter().copied()).collect();
    let mut rows = cap_and_qos_rows(inst, &x, &layout)?;
    let rates = inst.rates(p);
    let mut grad_f = vec![0.0; layout.n_vars()];
    for (i, u) in inst.users().iter().enumerate() {
        let ev = v[i].exp2();
        grad_f[layout.v(i)] = LN_2 * u.weight * ev;
        let mut grad: Vec<f64> = inst.rate_grad_q(p, i)?.into_iter().map(|g| g / b).collect();
        grad.resize(layout.n_vars(), 0.0);
        grad[layout.q(i, 0)] -= u.mu * LN_2 * p[i] * ev / b;
        grad[layout.v(i)] = -LN_2 * (u.mu * p[i] + u.p_st) * ev / b;
        let value = (rates[i] - (u.mu * p[i] + u.p_st) * ev) / b;
        rows.push(Row { value, grad });
    }
    Ok(certify(&grad_f, &rows))
}

/// KKT residual of the log-domain WSR problem at powers `p`.
pub fn certify_kkt_wsr(inst: &NetworkInstance, p: &[f64]) -> Result<KktResidual> {
    check_point(inst, p)?;
    let layout = VarLayout::wsr(inst.n_users());
    let x = log2_all(p);
    let rows = cap_and_qos_rows(inst, &x, &layout)?;
    let mut grad_f = vec![0.0; x.len()];
    for (i, u) in inst.users().iter().enumerate() {
        for (gf, g) in grad_f.iter_mut().zip(inst.rate_grad_q(p, i)?) {
            *gf += u.weight * g;
        }
    }
    Ok(certify(&grad_f, &rows))
}

/// KKT residual of the general-power-model problem over `(q, y, v)` with
/// `y = log2 R(p)` and `v = log2 psi(p, R(p))`.
pub fn certify_kkt_general(inst: &NetworkInstance, users: &[GeneralPowerUser], p: &[f64]) -> Result<KktResidual> {
    check_point(inst, p)?;
    let n = inst.n_users();
    let layout = VarLayout::general(n);
    let b = inst.bandwidth();
    let rates = inst.rates(p);
    let mut x = log2_all(p);
    x.extend(rates.iter().map(|r| r.log2()));
    for i in 0..n {
        x.push(users[i].efficiency(p[i], rates[i])?.log2());
    }
    let mut rows = cap_and_qos_rows(inst, &x, &layout)?;
    let mut grad_f = vec![0.0; layout.n_vars()];
    for (i, u) in inst.users().iter().enumerate() {
        grad_f[layout.v(i)] = LN_2 * u.weight * x[layout.v(i)].exp2();
        let mut grad: Vec<f64> = inst.rate_grad_q(p, i)?.into_iter().map(|g| g / b).collect();
        grad.resize(layout.n_vars(), 0.0);
        let ey = x[layout.y(i)].exp2();
        grad[layout.y(i)] = -LN_2 * ey / b;
        rows.push(Row { value: (rates[i] - ey) / b, grad });
        rows.push(canonical_row(&neg_epsilon_function(&users[i], layout.q(i, 0), layout.y(i), layout.v(i)), &x));
    }
    Ok(certify(&grad_f, &rows))
}

/// KKT residual of the multi-block WSEE problem at user-major powers `p`.
pub fn certify_kkt_multi_rb(mrb: &MultiRbInstance, p: &[f64]) -> Result<KktResidual> {
    let (n, kk) = (mrb.n_users(), mrb.n_rb());
    if p.len() != n * kk || p.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::InvalidPower(format!("certification needs positive finite powers, got {p:?}")));
    }
    let layout = VarLayout::multi_rb(n, kk);
    let b = mrb.rb_bandwidth();
    let v: Vec<f64> = mrb.ees(p).iter().map(|e| e.log2()).collect();
    let x: Vec<f64> = log2_all(p).into_iter().chain(v.iter().copied()).collect();
    let nv = layout.n_vars();
    let rates = mrb.rates(p);
    let mut rows = Vec::new();
    let mut grad_f = vec![0.0; nv];
    for (i, u) in mrb.users().iter().enumerate() {
        let cap = CanonicalFunction::constant(u.p_max.log2())
            .minus_lse(1.0, (0..kk).map(|k| AffineForm::var(layout.q(i, k))).collect());
        rows.push(canonical_row(&cap, &x));
        let mut rate_grad: Vec<f64> = mrb.rate_grad_q(p, i).into_iter().map(|g| g / b).collect();
        rate_grad.resize(nv, 0.0);
        if u.r_min > 0.0 {
            rows.push(Row { value: (rates[i] - u.r_min) / b, grad: rate_grad.clone() });
        }
        let ev = v[i].exp2();
        let total = mrb.total_power(p, i);
        grad_f[layout.v(i)] = LN_2 * u.weight * ev;
        let mut grad = rate_grad;
        for k in 0..kk {
            grad[layout.q(i, k)] -= u.mu * LN_2 * p[layout.q(i, k)] * ev / b;
        }
        grad[layout.v(i)] = -LN_2 * (u.mu * total + u.p_st) * ev / b;
        rows.push(Row { value: (rates[i] - (u.mu * total + u.p_st) * ev) / b, grad });
    }
    Ok(certify(&grad_f, &rows))
}
