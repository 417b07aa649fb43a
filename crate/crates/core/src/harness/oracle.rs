use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{NetworkInstance, FEASIBILITY_TOL};

/// Largest network the exhaustive grid accepts.
pub const MAX_ORACLE_USERS: usize = 3;

/// Lowest grid power as a fraction of `P_max`.
const GRID_FLOOR: f64 = 1e-6;

const REPAIR_SWEEPS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Incumbent {
    pub p: Vec<f64>,
    pub value: f64,
    /// Largest objective change between the incumbent and its feasible
    /// neighbours at the final refinement step.
    pub resolution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub wsee: Incumbent,
    pub wsr: Incumbent,
    /// Number of feasible grid points.
    pub feasible_points: usize,
}

/// Exhaustive search over a log-spaced grid of `grid` points per user on
/// `[1e-6 P_max, P_max]` (plus `p = 0`), followed by `refine` rounds of
/// pattern search with the step halved after each round.
pub fn brute_force_oracle(inst: &NetworkInstance, grid: usize, refine: usize) -> Result<OracleResult> {
    brute_force_oracle_with(inst, grid, refine, &[])
}

/// As [`brute_force_oracle`], with extra candidate points. Feasible hints
/// take part in the incumbent selection before refinement.
pub fn brute_force_oracle_with(
    inst: &NetworkInstance,
    grid: usize,
    refine: usize,
    hints: &[Vec<f64>],
) -> Result<OracleResult> {
    let n = inst.n_users();
    if n > MAX_ORACLE_USERS {
        return Err(Error::OracleTooLarge(n));
    }
    if grid < 2 {
        return Err(Error::InvalidOption("oracle grid needs at least 2 points".into()));
    }
    let pmax = inst.p_max();
    // axis in log10 units relative to P_max; None encodes p = 0
    let step = -GRID_FLOOR.log10() / (grid - 1) as f64;
    let axis: Vec<Option<f64>> =
        std::iter::once(None).chain((0..grid).map(|k| Some(GRID_FLOOR.log10() + step * k as f64))).collect();
    let power = |i: usize, e: Option<f64>| e.map_or(0.0, |e| pmax[i] * 10f64.powf(e.min(0.0)));

    let mut best_e: Option<(Vec<f64>, f64)> = None;
    let mut best_r: Option<(Vec<f64>, f64)> = None;
    let mut feasible = 0;
    let consider = |p: &[f64], best_e: &mut Option<(Vec<f64>, f64)>, best_r: &mut Option<(Vec<f64>, f64)>| -> Result<bool> {
        let Some((e, r)) = evaluate(inst, p)? else { return Ok(false) };
        if best_e.as_ref().is_none_or(|b| e > b.1) {
            *best_e = Some((p.to_vec(), e));
        }
        if best_r.as_ref().is_none_or(|b| r > b.1) {
            *best_r = Some((p.to_vec(), r));
        }
        Ok(true)
    };

    let mut idx = vec![0usize; n];
    let mut p = vec![0.0; n];
    'grid: loop {
        for i in 0..n {
            p[i] = power(i, axis[idx[i]]);
        }
        if consider(&p, &mut best_e, &mut best_r)? {
            feasible += 1;
        }
        for i in 0..n {
            idx[i] += 1;
            if idx[i] < axis.len() {
                continue 'grid;
            }
            idx[i] = 0;
        }
        break;
    }
    for h in hints {
        if h.len() != n {
            return Err(Error::InvalidPower(format!("hint has length {}, expected {n}", h.len())));
        }
        consider(h, &mut best_e, &mut best_r)?;
    }
    let (Some(be), Some(br)) = (best_e, best_r) else {
        return Err(Error::InvalidInstance("no feasible grid point".into()));
    };
    let f_e = |p: &mut [f64]| repaired(inst, p).map(|o| o.map(|(e, _)| e));
    let f_r = |p: &mut [f64]| repaired(inst, p).map(|o| o.map(|(_, r)| r));
    Ok(OracleResult {
        wsee: refine_coords(be, step, refine, &pmax, f_e)?,
        wsr: refine_coords(br, step, refine, &pmax, f_r)?,
        feasible_points: feasible,
    })
}

/// `(wsee, wsr)` at `p`, or `None` when `p` is infeasible.
fn evaluate(inst: &NetworkInstance, p: &[f64]) -> Result<Option<(f64, f64)>> {
    if !inst.is_feasible(p, FEASIBILITY_TOL)? {
        return Ok(None);
    }
    Ok(Some((inst.wsee(p)?, inst.wsr(p)?)))
}

/// Raises `p` to the least power vector above it that meets every rate
/// constraint (fixed point of the standard interference mapping), then
/// evaluates. `None` when that point exceeds `P_max`.
fn repaired(inst: &NetworkInstance, p: &mut [f64]) -> Result<Option<(f64, f64)>> {
    let ch = inst.channel();
    let floor = p.to_vec();
    let gmin: Vec<f64> = (0..p.len()).map(|i| inst.gamma_min(i)).collect::<Result<_>>()?;
    for _ in 0..REPAIR_SWEEPS {
        let mut moved = false;
        for i in 0..p.len() {
            if gmin[i] == 0.0 {
                continue;
            }
            let margin = ch.gain(i, i) - gmin[i] * ch.self_interference()[i];
            if margin <= 0.0 {
                return Ok(None);
            }
            let rest = ch.denominator(p, i) - ch.self_interference()[i] * p[i];
            let need = (gmin[i] * rest / margin).max(floor[i]);
            if need > p[i] * (1.0 + 1e-13) {
                moved = true;
            }
            p[i] = need;
            if p[i] > inst.users()[i].p_max {
                return Ok(None);
            }
        }
        if !moved {
            break;
        }
    }
    evaluate(inst, p)
}

/// Multiplicative pattern search: each round tries every move
/// `p_i * 10^(s_i h)` with `s` in `{-1, 0, 1}^N \ {0}` until none improves,
/// then halves `h`. Candidates are repaired onto the rate constraints, so
/// the search can follow the curved ridge those constraints carve out.
fn refine_coords(
    start: (Vec<f64>, f64),
    step: f64,
    rounds: usize,
    pmax: &[f64],
    f: impl Fn(&mut [f64]) -> Result<Option<f64>>,
) -> Result<Incumbent> {
    let (mut p, mut best) = start;
    let n = p.len();
    let floor: Vec<f64> = pmax.iter().map(|m| m * GRID_FLOOR).collect();
    let dirs: Vec<Vec<i32>> = (0..3usize.pow(n as u32))
        .map(|mut c| {
            (0..n)
                .map(|_| {
                    let d = (c % 3) as i32 - 1;
                    c /= 3;
                    d
                })
                .collect::<Vec<i32>>()
        })
        .filter(|d| d.iter().any(|x| *x != 0))
        .collect();
    let shift = |p: &[f64], d: &[i32], h: f64| -> Vec<f64> {
        p.iter()
            .zip(d)
            .enumerate()
            .map(|(i, (x, s))| match s {
                0 => *x,
                _ => (x.max(floor[i]) * 10f64.powf(*s as f64 * h)).min(pmax[i]),
            })
            .collect()
    };
    let mut h = step;
    for _ in 0..rounds {
        h *= 0.5;
        loop {
            let mut improved = false;
            for d in &dirs {
                let mut q = shift(&p, d, h);
                if let Some(v) = f(&mut q)? {
                    if v > best {
                        best = v;
                        p = q;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
    let mut resolution: f64 = 0.0;
    for d in &dirs {
        if let Some(v) = f(&mut shift(&p, d, h))? {
            resolution = resolution.max((v - best).abs());
        }
    }
    Ok(Incumbent { p, value: best, resolution })
}
