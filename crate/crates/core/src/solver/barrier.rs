use nalgebra::{DMatrix, DVector};

use super::{
    AffineForm, CanonicalFunction, ConvexProgram, Duals, KktResidual, SolveReport, SolveStatus, SolverOptions,
    TraceLine, BOX_SENTINEL,
};
use crate::error::Result;

/// Result of the phase-I search for an interior starting point.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseOne {
    Feasible(Vec<f64>),
    /// No point with slack `>= slack_min` was found; `best_slack` is the
    /// largest minimum slack reached.
    Infeasible { best_slack: f64, x: Vec<f64> },
}

/// Relative size of barrier-value changes treated as rounding noise.
const ROUNDOFF: f64 = 1e-15;

struct Barrier<'a> {
    prog: &'a ConvexProgram,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

struct Run {
    x: Vec<f64>,
    t: f64,
    outer: usize,
    newton: usize,
    outer_objectives: Vec<f64>,
    status: SolveStatus,
    trace: Vec<TraceLine>,
}

enum Centering {
    Converged,
    /// Line search could not make progress; treated as centered.
    Stalled,
    MaxIter,
    Failed,
}

impl<'a> Barrier<'a> {
    fn new(prog: &'a ConvexProgram) -> Self {
        let (lo, hi) = (0..prog.n_vars).map(|k| prog.bounds(k)).unzip();
        Barrier { prog, lo, hi }
    }

    fn n_inequalities(&self) -> usize {
        self.prog.constraints.len() + 2 * self.prog.n_vars
    }

    fn slack(&self, x: &[f64]) -> f64 {
        let mut s = f64::INFINITY;
        for g in &self.prog.constraints {
            s = s.min(g.value(x));
        }
        for k in 0..x.len() {
            s = s.min(x[k] - self.lo[k]).min(self.hi[k] - x[k]);
        }
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            s
        }
    }

    /// Barrier function `-t f0 - sum log(slacks)`; `None` outside the domain.
    fn value(&self, x: &[f64], t: f64) -> Option<f64> {
        let mut v = -t * self.prog.objective.value(x);
        for g in &self.prog.constraints {
            let gv = g.value(x);
            if !(gv > 0.0) {
                return None;
            }
            v -= gv.ln();
        }
        for k in 0..x.len() {
            let (a, b) = (x[k] - self.lo[k], self.hi[k] - x[k]);
            if !(a > 0.0 && b > 0.0) {
                return None;
            }
            v -= a.ln() + b.ln();
        }
        v.is_finite().then_some(v)
    }

    fn center(&self, x: &mut Vec<f64>, t: f64, opts: &SolverOptions, run: &mut Run) -> Centering {
        let n = x.len();
        for _ in 0..opts.max_newton {
            let e0 = self.prog.objective.evaluate(x);
            let mut grad = DVector::from_iterator(n, e0.gradient.iter().map(|g| -t * g));
            let mut hess = e0.hessian * (-t);
            for g in &self.prog.constraints {
                let e = g.evaluate(x);
                if !(e.value > 0.0) {
                    return Centering::Failed;
                }
                let gg = DVector::from_vec(e.gradient);
                grad -= &gg / e.value;
                hess += &gg * gg.transpose() / (e.value * e.value) - e.hessian / e.value;
            }
            for k in 0..n {
                let (a, b) = (x[k] - self.lo[k], self.hi[k] - x[k]);
                grad[k] += -1.0 / a + 1.0 / b;
                hess[(k, k)] += 1.0 / (a * a) + 1.0 / (b * b);
            }
            if grad.iter().any(|g| !g.is_finite()) || hess.iter().any(|h| !h.is_finite()) {
                return Centering::Failed;
            }
            let Some(step) = newton_direction(&hess, &grad) else {
                return Centering::Failed;
            };
            let slope = grad.dot(&step);
            let decrement = -slope;
            let Some(f0) = self.value(x, t) else {
                return Centering::Failed;
            };
            // below the rounding noise of the barrier value nothing is left to gain
            if decrement / 2.0 <= opts.centering_tol.max(ROUNDOFF * (f0.abs() + t * self.prog.objective.value(x).abs())) {
                return Centering::Converged;
            }
            let mut s = 1.0;
            let accepted = loop {
                let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, di)| xi + s * di).collect();
                if let Some(f) = self.value(&xn, t) {
                    // strict decrease: once the Armijo target rounds to f0 no step is progress
                    if f <= f0 + opts.armijo * s * slope && f < f0 {
                        break Some(xn);
                    }
                }
                s *= opts.shrink;
                if s < 1e-16 {
                    break None;
                }
            };
            run.newton += 1;
            let Some(xn) = accepted else {
                return Centering::Stalled;
            };
            *x = xn;
            if opts.trace {
                run.trace.push(TraceLine { t, step: s, objective: self.prog.objective.value(x), decrement });
            }
        }
        Centering::MaxIter
    }

    fn run(&self, x0: Vec<f64>, opts: &SolverOptions, gap_tol: f64, stop: &dyn Fn(&[f64]) -> bool) -> Run {
        let m = self.n_inequalities() as f64;
        let mut run = Run {
            x: x0,
            t: opts.t0,
            outer: 0,
            newton: 0,
            outer_objectives: Vec::new(),
            status: SolveStatus::MaxIter,
            trace: Vec::new(),
        };
        let mut x = run.x.clone();
        let mut t = opts.t0;
        for outer in 1..=opts.max_outer {
            run.outer = outer;
            match self.center(&mut x, t, opts, &mut run) {
                Centering::Failed => {
                    run.status = SolveStatus::NumericalFailure;
                    break;
                }
                Centering::MaxIter => {
                    run.status = SolveStatus::MaxIter;
                    run.x = x.clone();
                    run.t = t;
                    run.outer_objectives.push(self.prog.objective.value(&x));
                    return run;
                }
                Centering::Converged | Centering::Stalled => {}
            }
            run.x = x.clone();
            run.t = t;
            run.outer_objectives.push(self.prog.objective.value(&x));
            if stop(&x) || m / t <= gap_tol {
                run.status = SolveStatus::Optimal;
                return run;
            }
            t *= opts.growth;
        }
        run
    }

    fn duals(&self, x: &[f64], t: f64) -> Duals {
        Duals {
            constraints: self.prog.constraints.iter().map(|g| 1.0 / (t * g.value(x))).collect(),
            lower: (0..x.len()).map(|k| 1.0 / (t * (x[k] - self.lo[k]))).collect(),
            upper: (0..x.len()).map(|k| 1.0 / (t * (self.hi[k] - x[k]))).collect(),
        }
    }
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = hess.diagonal().iter().fold(1.0f64, |m, d| m.max(d.abs()));
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut h = hess.clone();
        if reg > 0.0 {
            for k in 0..h.nrows() {
                h[(k, k)] += reg;
            }
        }
        if let Some(ch) = h.cholesky() {
            let d = ch.solve(&(-grad));
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    None
}

/// Interior point with minimum slack `>= opts.slack_min`, found by a
/// max-min-slack phase-I barrier solve when `x0` is not already one.
pub fn find_strictly_feasible(prog: &ConvexProgram, x0: &[f64], opts: &SolverOptions) -> PhaseOne {
    let barrier = Barrier::new(prog);
    let slack0 = barrier.slack(x0);
    if slack0 >= opts.slack_min {
        return PhaseOne::Feasible(x0.to_vec());
    }
    if !slack0.is_finite() || x0.iter().any(|v| !v.is_finite()) {
        return PhaseOne::Infeasible { best_slack: f64::NEG_INFINITY, x: x0.to_vec() };
    }
    let n = prog.n_vars;
    let s_var = n;
    let minus_s = CanonicalFunction::from_affine(AffineForm::default().plus(s_var, -1.0));
    let mut phase = ConvexProgram::new(n + 1, CanonicalFunction::from_affine(AffineForm::var(s_var)));
    for g in &prog.constraints {
        phase.constraints.push(g.clone().plus(minus_s.clone()));
    }
    let mut margin = 1.0f64;
    for k in 0..n {
        let (lo, hi) = (barrier.lo[k], barrier.hi[k]);
        margin = margin.max(1.0 + (lo - x0[k]).max(x0[k] - hi));
        phase.constraints.push(CanonicalFunction::from_affine(
            AffineForm::var(k).plus(s_var, -1.0).offset(-lo),
        ));
        phase.constraints.push(CanonicalFunction::from_affine(
            AffineForm::default().plus(k, -1.0).plus(s_var, -1.0).offset(hi),
        ));
    }
    for k in 0..n {
        phase.lower[k] = barrier.lo[k] - margin;
        phase.upper[k] = barrier.hi[k] + margin;
    }
    let s_start = slack0 - 1.0;
    let target = 0.5;
    phase.lower[s_var] = s_start - 1.0;
    phase.upper[s_var] = 1.0;
    let mut start = x0.to_vec();
    start.push(s_start);

    let phase_barrier = Barrier::new(&phase);
    let run = phase_barrier.run(start, opts, opts.gap_tol * 1e-2, &|x| x[s_var] >= target);
    let x: Vec<f64> = run.x[..n].to_vec();
    let best = barrier.slack(&x);
    if best >= opts.slack_min {
        PhaseOne::Feasible(x)
    } else {
        PhaseOne::Infeasible { best_slack: best, x }
    }
}

/// Multipliers refitted by NNLS on the constraints whose barrier dual is
/// not negligible; the rest are set to zero.
fn polish_duals(prog: &ConvexProgram, x: &[f64], raw: &Duals) -> Duals {
    let n = prog.n_vars;
    let cutoff = 1e-6 * raw.constraints.iter().chain(&raw.lower).chain(&raw.upper).fold(0.0f64, |m, d| m.max(*d));
    // (kind, index): 0 = constraint, 1 = lower, 2 = upper
    let mut cols: Vec<(u8, usize, Vec<f64>)> = Vec::new();
    for (i, g) in prog.constraints.iter().enumerate() {
        if raw.constraints[i] > cutoff {
            cols.push((0, i, g.gradient(x)));
        }
    }
    for k in 0..n {
        let mut e = vec![0.0; n];
        if raw.lower[k] > cutoff {
            e[k] = 1.0;
            cols.push((1, k, e.clone()));
            e[k] = 0.0;
        }
        if raw.upper[k] > cutoff {
            e[k] = -1.0;
            cols.push((2, k, e));
        }
    }
    let scale: Vec<f64> = cols.iter().map(|c| c.2.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300)).collect();
    let a = DMatrix::from_fn(n, cols.len(), |r, c| cols[c].2[r] / scale[c]);
    let b = DVector::from_iterator(n, prog.objective.gradient(x).into_iter().map(|g| -g));
    let lam = super::nnls(&a, &b);
    let mut d = Duals {
        constraints: vec![0.0; prog.constraints.len()],
        lower: vec![0.0; n],
        upper: vec![0.0; n],
    };
    for (c, (kind, idx, _)) in cols.iter().enumerate() {
        let v = lam[c] / scale[c];
        match kind {
            0 => d.constraints[*idx] = v,
            1 => d.lower[*idx] = v,
            _ => d.upper[*idx] = v,
        }
    }
    d
}

/// KKT residual of `max f0 s.t. g >= 0, lo <= x <= hi` at `(x, duals)`;
/// missing dual entries count as zero.
pub fn kkt_residual(prog: &ConvexProgram, x: &[f64], duals: &Duals) -> KktResidual {
    let n = prog.n_vars;
    let dual = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
    let mut grad = prog.objective.gradient(x);
    let mut violation = 0.0f64;
    let mut complementarity = 0.0f64;
    for (i, g) in prog.constraints.iter().enumerate() {
        let e = g.evaluate(x);
        let lam = dual(&duals.constraints, i);
        for k in 0..n {
            grad[k] += lam * e.gradient[k];
        }
        violation = violation.max(-e.value);
        complementarity = complementarity.max((lam * e.value).abs());
    }
    for k in 0..n {
        let (lo, hi) = prog.bounds(k);
        let (ll, lu) = (dual(&duals.lower, k), dual(&duals.upper, k));
        grad[k] += ll - lu;
        violation = violation.max(lo - x[k]).max(x[k] - hi);
        complementarity = complementarity.max((ll * (x[k] - lo)).abs()).max((lu * (hi - x[k])).abs());
    }
    KktResidual {
        stationarity: grad.iter().fold(0.0f64, |m, g| m.max(g.abs())),
        violation: violation.max(0.0),
        complementarity,
    }
}

/// Maximize the program from `warm_start` (phase I runs first when the
/// warm start is not strictly feasible).
pub fn solve(prog: &ConvexProgram, warm_start: &[f64], opts: &SolverOptions) -> Result<SolveReport> {
    prog.validate()?;
    if warm_start.len() != prog.n_vars {
        return Err(crate::error::Error::InvalidOption("warm start has wrong length".into()));
    }
    let barrier = Barrier::new(prog);
    let x0 = match find_strictly_feasible(prog, warm_start, opts) {
        PhaseOne::Feasible(x) => x,
        PhaseOne::Infeasible { x, .. } => {
            let objective = prog.objective.value(&x);
            return Ok(SolveReport {
                kkt: kkt_residual(prog, &x, &Duals::default()),
                x,
                objective,
                duals: Duals::default(),
                outer_iterations: 0,
                newton_steps: 0,
                status: SolveStatus::Infeasible,
                outer_objectives: Vec::new(),
                sentinel_active: false,
                trace: Vec::new(),
            });
        }
    };
    let run = barrier.run(x0, opts, opts.gap_tol, &|_| false);
    let (duals, kkt) = {
        let raw = barrier.duals(&run.x, run.t);
        let raw_kkt = kkt_residual(prog, &run.x, &raw);
        let fitted = polish_duals(prog, &run.x, &raw);
        let fitted_kkt = kkt_residual(prog, &run.x, &fitted);
        if fitted_kkt.max() < raw_kkt.max() {
            (fitted, fitted_kkt)
        } else {
            (raw, raw_kkt)
        }
    };
    let (objective, clamped) = prog.objective.value_clamped(&run.x);
    let clamped = clamped || prog.constraints.iter().any(|g| g.value_clamped(&run.x).1);
    let grad_scale = prog.objective.gradient(&run.x).iter().fold(1.0f64, |m, g| m.max(g.abs()));
    let mut status = run.status;
    if status == SolveStatus::Optimal && (clamped || kkt.stationarity > opts.kkt_tol * grad_scale) {
        status = SolveStatus::NumericalFailure;
    }
    let sentinel_active = (0..prog.n_vars).any(|k| {
        (!prog.lower[k].is_finite() && (run.x[k] + BOX_SENTINEL).abs() < 1e-6)
            || (!prog.upper[k].is_finite() && (run.x[k] - BOX_SENTINEL).abs() < 1e-6)
    });
    Ok(SolveReport {
        x: run.x,
        objective,
        duals,
        kkt,
        outer_iterations: run.outer,
        newton_steps: run.newton,
        status,
        outer_objectives: run.outer_objectives,
        sentinel_active,
        trace: run.trace,
    })
}
