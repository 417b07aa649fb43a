//! Concave lower bounds of the nonconvex rate and efficiency constraints,
//! and the convex subproblems built from them.
//!
//! Everything lives in the log-power domain `q = log2 p`. With
//! `log2(1 + g) >= a log2 g + b` (tight with equal slope at `g = g'`), the
//! rate becomes `B (a log2 gamma(2^q) + b)`, and `log2 gamma(2^q)` is an
//! affine term minus a log-sum-exp, hence concave.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::model::{gamma_min, ChannelCoeffs, GeneralPowerUser, MultiRbInstance, NetworkInstance};
use crate::solver::{AffineForm, CanonicalFunction, ConvexProgram};

/// Coefficients of `log2(1 + g) >= alpha log2 g + beta`, tight at the
/// expansion SINR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCoeffs {
    pub alpha: f64,
    pub beta: f64,
    pub expansion_sinr: f64,
}

impl BoundCoeffs {
    /// Right-hand side of the bound at SINR `gamma`.
    pub fn bound(&self, gamma: f64) -> f64 {
        if self.alpha == 0.0 {
            self.beta
        } else {
            self.alpha * gamma.log2() + self.beta
        }
    }
}

/// Bound coefficients at `gamma_prime`; zero expansion SINR gives the
/// trivial bound `log2(1 + g) >= 0`.
pub fn log_bound_coeffs(gamma_prime: f64) -> Result<BoundCoeffs> {
    if !(gamma_prime >= 0.0 && gamma_prime.is_finite()) {
        return Err(Error::NegativeInput { name: "expansion SINR", value: gamma_prime });
    }
    if gamma_prime == 0.0 {
        return Ok(BoundCoeffs { alpha: 0.0, beta: 0.0, expansion_sinr: 0.0 });
    }
    let alpha = gamma_prime / (1.0 + gamma_prime);
    let beta = gamma_prime.ln_1p() / LN_2 - alpha * gamma_prime.log2();
    Ok(BoundCoeffs { alpha, beta, expansion_sinr: gamma_prime })
}

/// Positions of the decision variables inside a subproblem vector.
///
/// Powers are user-major (`q[i * n_rb + k]`), followed by the optional
/// rate variables `y` and efficiency variables `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub n_users: usize,
    pub n_rb: usize,
    pub has_rate_vars: bool,
    pub has_ee_vars: bool,
}

impl VarLayout {
    pub fn wsee(n_users: usize) -> Self {
        VarLayout { n_users, n_rb: 1, has_rate_vars: false, has_ee_vars: true }
    }

    pub fn wsr(n_users: usize) -> Self {
        VarLayout { n_users, n_rb: 1, has_rate_vars: false, has_ee_vars: false }
    }

    pub fn general(n_users: usize) -> Self {
        VarLayout { n_users, n_rb: 1, has_rate_vars: true, has_ee_vars: true }
    }

    pub fn multi_rb(n_users: usize, n_rb: usize) -> Self {
        VarLayout { n_users, n_rb, has_rate_vars: false, has_ee_vars: true }
    }

    pub fn n_power_vars(&self) -> usize {
        self.n_users * self.n_rb
    }

    pub fn n_vars(&self) -> usize {
        self.n_power_vars()
            + if self.has_rate_vars { self.n_users } else { 0 }
            + if self.has_ee_vars { self.n_users } else { 0 }
    }

    pub fn q(&self, i: usize, k: usize) -> usize {
        i * self.n_rb + k
    }

    pub fn y(&self, i: usize) -> usize {
        assert!(self.has_rate_vars);
        self.n_power_vars() + i
    }

    pub fn v(&self, i: usize) -> usize {
        assert!(self.has_ee_vars);
        self.n_power_vars() + if self.has_rate_vars { self.n_users } else { 0 } + i
    }
}

/// `log2 gamma_i(2^q)` on one band, as `log2 w_ii + q_i - LSE(...)`.
pub fn log_sinr_function(ch: &ChannelCoeffs, i: usize, q: impl Fn(usize) -> usize) -> CanonicalFunction {
    let mut exps = Vec::with_capacity(ch.n_users() + 1);
    for j in 0..ch.n_users() {
        let w = ch.gain(j, i);
        if j != i && w > 0.0 {
            exps.push(AffineForm::var(q(j)).offset(w.log2()));
        }
    }
    let phi = ch.self_interference()[i];
    if phi > 0.0 {
        exps.push(AffineForm::var(q(i)).offset(phi.log2()));
    }
    let noise = ch.noise()[i];
    if noise > 0.0 {
        exps.push(AffineForm::constant(noise.log2()));
    }
    CanonicalFunction::from_affine(AffineForm::var(q(i)).offset(ch.gain(i, i).log2())).minus_lse(1.0, exps)
}

/// `bandwidth * (alpha log2 gamma_i + beta)`: the concave rate lower bound.
pub fn rate_bound_function(
    ch: &ChannelCoeffs,
    bandwidth: f64,
    coeffs: &BoundCoeffs,
    i: usize,
    q: impl Fn(usize) -> usize,
) -> CanonicalFunction {
    let base = CanonicalFunction::constant(bandwidth * coeffs.beta);
    if coeffs.alpha == 0.0 {
        return base;
    }
    base.plus(log_sinr_function(ch, i, q).scaled(bandwidth * coeffs.alpha))
}

/// QoS constraint `theta_i(q) >= 0`, equivalent to `R_i >= R_i^min`.
pub fn theta_function(inst: &NetworkInstance, i: usize, layout: &VarLayout) -> Result<CanonicalFunction> {
    let user = inst.user(i)?;
    if user.r_min == 0.0 {
        return Err(Error::QosAbsent(i));
    }
    let gmin = gamma_min(user, inst.bandwidth());
    Ok(log_sinr_function(inst.channel(), i, |j| layout.q(j, 0)).plus(CanonicalFunction::constant(-gmin.log2())))
}

/// Surrogate efficiency constraint scaled by `1 / B`:
/// `(R~_i(q) - mu_i 2^(q_i + v_i) - P_st 2^v_i) / B`.
pub fn phi_tilde_function(
    inst: &NetworkInstance,
    coeffs: &BoundCoeffs,
    i: usize,
    layout: &VarLayout,
) -> CanonicalFunction {
    let b = inst.bandwidth();
    let user = &inst.users()[i];
    rate_bound_function(inst.channel(), 1.0, coeffs, i, |j| layout.q(j, 0))
        .minus_exp(user.mu / b, AffineForm::var(layout.q(i, 0)).plus(layout.v(i), 1.0))
        .minus_exp(user.p_st / b, AffineForm::var(layout.v(i)))
}

/// `-epsilon_i(q_i, y_i, v_i)`: non-negative iff the general-model
/// efficiency at `(2^q_i, 2^y_i)` is at least `2^v_i`.
pub fn neg_epsilon_function(user: &GeneralPowerUser, q: usize, y: usize, v: usize) -> CanonicalFunction {
    let mut f = CanonicalFunction::constant(1.0);
    for (m, &mu) in user.mu.iter().enumerate() {
        let order = (m + 1) as f64;
        f = f.minus_exp(mu, AffineForm::default().plus(q, order).plus(v, 1.0).plus(y, -1.0));
    }
    f.minus_exp(user.xi, AffineForm::var(v).plus(y, -(1.0 - user.delta)))
        .minus_exp(user.p_st, AffineForm::var(v).plus(y, -1.0))
}

/// `theta_i(q)` at a point `q` (one entry per user).
pub fn theta(inst: &NetworkInstance, q: &[f64], i: usize) -> Result<f64> {
    let layout = VarLayout::wsr(inst.n_users());
    Ok(theta_function(inst, i, &layout)?.value(q))
}

/// Concave rate lower bound `R~_i(q)` in bit/s.
pub fn rate_bound(inst: &NetworkInstance, q: &[f64], coeffs: &BoundCoeffs, i: usize) -> f64 {
    rate_bound_function(inst.channel(), inst.bandwidth(), coeffs, i, |j| j).value(q)
}

fn wsee_point(q: &[f64], i: usize, v_i: f64) -> Vec<f64> {
    let n = q.len();
    let mut x = q.to_vec();
    x.resize(2 * n, 0.0);
    x[n + i] = v_i;
    x
}

/// `phi~_i(q, v_i) = R~_i(q) - mu_i 2^(q_i + v_i) - P_st 2^v_i` in bit/s.
pub fn phi_tilde(inst: &NetworkInstance, q: &[f64], v_i: f64, coeffs: &BoundCoeffs, i: usize) -> f64 {
    let layout = VarLayout::wsee(inst.n_users());
    inst.bandwidth() * phi_tilde_function(inst, coeffs, i, &layout).value(&wsee_point(q, i, v_i))
}

/// Gradient of `phi~_i` (bit/s) over `(q, v)`.
pub fn phi_tilde_gradient(inst: &NetworkInstance, q: &[f64], v_i: f64, coeffs: &BoundCoeffs, i: usize) -> Vec<f64> {
    let layout = VarLayout::wsee(inst.n_users());
    phi_tilde_function(inst, coeffs, i, &layout)
        .gradient(&wsee_point(q, i, v_i))
        .into_iter()
        .map(|g| g * inst.bandwidth())
        .collect()
}

/// Objective `f(v) = sum w_i 2^v_i` and its tangent `f~` at `v_prime`.
pub fn f_and_f_tilde(v: &[f64], v_prime: &[f64], weights: &[f64]) -> (f64, f64) {
    let f = v.iter().zip(weights).map(|(vi, w)| w * vi.exp2()).sum();
    let f_tilde = v
        .iter()
        .zip(v_prime)
        .zip(weights)
        .map(|((vi, vp), w)| w * vp.exp2() * (1.0 + LN_2 * (vi - vp)))
        .sum();
    (f, f_tilde)
}

/// `epsilon_i(q_i, y_i, v_i)`; non-positive iff `psi_i(2^q_i, 2^y_i) >= 2^v_i`.
pub fn epsilon_constraint(user: &GeneralPowerUser, q_i: f64, y_i: f64, v_i: f64) -> f64 {
    -neg_epsilon_function(user, 0, 1, 2).value(&[q_i, y_i, v_i])
}

/// Surrogate QoS rows for every user with a positive minimum rate, scaled
/// by `1 / B_RB`. A single block keeps the exact (already concave) form;
/// with several blocks each block's rate is replaced by its log bound at
/// `coeffs[i * K + k]`.
pub fn build_multi_rb_qos(mrb: &MultiRbInstance, coeffs: &[BoundCoeffs]) -> Vec<(usize, CanonicalFunction)> {
    let layout = VarLayout::multi_rb(mrb.n_users(), mrb.n_rb());
    let kk = mrb.n_rb();
    let mut rows = Vec::new();
    for (i, user) in mrb.users().iter().enumerate() {
        if user.r_min == 0.0 {
            continue;
        }
        let row = if kk == 1 {
            let gmin = gamma_min(user, mrb.rb_bandwidth());
            log_sinr_function(&mrb.blocks()[0], i, |j| layout.q(j, 0))
                .plus(CanonicalFunction::constant(-gmin.log2()))
        } else {
            multi_rb_rate_bound(mrb, coeffs, i, &layout, 1.0)
                .plus(CanonicalFunction::constant(-user.r_min / mrb.rb_bandwidth()))
        };
        rows.push((i, row));
    }
    rows
}

/// `scale * sum_k (alpha_k log2 gamma_k + beta_k)` for user `i`.
fn multi_rb_rate_bound(
    mrb: &MultiRbInstance,
    coeffs: &[BoundCoeffs],
    i: usize,
    layout: &VarLayout,
    scale: f64,
) -> CanonicalFunction {
    let kk = mrb.n_rb();
    let mut f = CanonicalFunction::default();
    for k in 0..kk {
        f = f.plus(rate_bound_function(&mrb.blocks()[k], scale, &coeffs[i * kk + k], i, |j| layout.q(j, k)));
    }
    f
}

/// Value of the multi-block QoS surrogate `B_RB sum_k (alpha log2 gamma + beta)`
/// in bit/s at powers `q` (user-major).
pub fn multi_rb_rate_surrogate(mrb: &MultiRbInstance, q: &[f64], coeffs: &[BoundCoeffs], i: usize) -> f64 {
    let layout = VarLayout::multi_rb(mrb.n_users(), mrb.n_rb());
    multi_rb_rate_bound(mrb, coeffs, i, &layout, mrb.rb_bandwidth()).value(q)
}

/// Gradient of [`multi_rb_rate_surrogate`] with respect to `q`.
pub fn multi_rb_rate_surrogate_gradient(mrb: &MultiRbInstance, q: &[f64], coeffs: &[BoundCoeffs], i: usize) -> Vec<f64> {
    let layout = VarLayout::multi_rb(mrb.n_users(), mrb.n_rb());
    multi_rb_rate_bound(mrb, coeffs, i, &layout, mrb.rb_bandwidth()).gradient(q)
}

/// Bound coefficients at the SINRs of every user on every block.
pub fn multi_rb_coeffs(mrb: &MultiRbInstance, p: &[f64]) -> Result<Vec<BoundCoeffs>> {
    let mut out = Vec::with_capacity(p.len());
    for i in 0..mrb.n_users() {
        for g in mrb.sinrs(p, i) {
            out.push(log_bound_coeffs(g)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubproblemKind {
    Wsee,
    WseeGeneral,
    Wsr,
    WseeMultiRb,
}

/// One convex subproblem of the sequential scheme together with the point
/// it was expanded at.
#[derive(Debug, Clone)]
pub struct SurrogateProblem {
    pub kind: SubproblemKind,
    pub layout: VarLayout,
    pub program: ConvexProgram,
    /// Expansion point in the program's variable layout.
    pub expansion: Vec<f64>,
    /// Bound coefficients, user-major over blocks.
    pub coeffs: Vec<BoundCoeffs>,
}

impl SurrogateProblem {
    /// Transmit powers `2^q` of a program point.
    pub fn powers(&self, x: &[f64]) -> Vec<f64> {
        x[..self.layout.n_power_vars()].iter().map(|q| q.exp2()).collect()
    }

    /// Expansion point with the auxiliary variables pulled inside their
    /// constraints; the power variables are left untouched.
    pub fn interior_guess(&self) -> Vec<f64> {
        let mut x = self.expansion.clone();
        let l = self.layout;
        for i in 0..l.n_users {
            if l.has_rate_vars {
                x[l.y(i)] -= 1.0;
            }
            if l.has_ee_vars {
                x[l.v(i)] -= if l.has_rate_vars { 2.0 } else { 1.0 };
            }
        }
        x
    }
}

fn check_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::InvalidOption(format!("{name} has length {got}, expected {want}")))
    }
}

/// Objective `sum w_i 2^v'_i v_i`, normalized by `f(v')` so the barrier gap
/// is relative.
fn ee_objective(weights: &[f64], v_prime: &[f64], layout: &VarLayout) -> CanonicalFunction {
    let coefs: Vec<f64> = weights.iter().zip(v_prime).map(|(w, v)| w * v.exp2()).collect();
    let total: f64 = coefs.iter().sum();
    let norm = if total > 0.0 { total } else { 1.0 };
    let mut a = AffineForm::default();
    for (i, c) in coefs.iter().enumerate() {
        if *c != 0.0 {
            a.add(layout.v(i), c / norm);
        }
    }
    CanonicalFunction::from_affine(a)
}

fn single_band_coeffs(inst: &NetworkInstance, q_prime: &[f64]) -> Result<Vec<BoundCoeffs>> {
    let p: Vec<f64> = q_prime.iter().map(|q| q.exp2()).collect();
    inst.channel().sinrs(&p).into_iter().map(log_bound_coeffs).collect()
}

fn add_power_caps(prog: &mut ConvexProgram, inst: &NetworkInstance, layout: &VarLayout) {
    for (i, u) in inst.users().iter().enumerate() {
        prog.upper[layout.q(i, 0)] = u.p_max.log2();
    }
}

fn add_qos(prog: &mut ConvexProgram, inst: &NetworkInstance, layout: &VarLayout) -> Result<()> {
    for (i, u) in inst.users().iter().enumerate() {
        if u.r_min > 0.0 {
            prog.constraints.push(theta_function(inst, i, layout)?);
        }
    }
    Ok(())
}

/// Convex subproblem over `(q, v)`: caps, exact QoS, surrogate efficiency
/// constraints; objective is the tangent of `f` at `v'`.
pub fn build_wsee_subproblem(inst: &NetworkInstance, q_prime: &[f64], v_prime: &[f64]) -> Result<SurrogateProblem> {
    let n = inst.n_users();
    check_len("q'", q_prime.len(), n)?;
    check_len("v'", v_prime.len(), n)?;
    let layout = VarLayout::wsee(n);
    let coeffs = single_band_coeffs(inst, q_prime)?;
    let mut program = ConvexProgram::new(layout.n_vars(), ee_objective(&inst.weights(), v_prime, &layout));
    add_power_caps(&mut program, inst, &layout);
    add_qos(&mut program, inst, &layout)?;
    for (i, c) in coeffs.iter().enumerate() {
        program.constraints.push(phi_tilde_function(inst, c, i, &layout));
    }
    let expansion = q_prime.iter().chain(v_prime).copied().collect();
    Ok(SurrogateProblem { kind: SubproblemKind::Wsee, layout, program, expansion, coeffs })
}

/// Convex subproblem over `q` for weighted-sum-rate maximization; the
/// objective is the rate bound normalized by the current WSR.
pub fn build_wsr_subproblem(inst: &NetworkInstance, q_prime: &[f64]) -> Result<SurrogateProblem> {
    let n = inst.n_users();
    check_len("q'", q_prime.len(), n)?;
    let layout = VarLayout::wsr(n);
    let coeffs = single_band_coeffs(inst, q_prime)?;
    let p: Vec<f64> = q_prime.iter().map(|q| q.exp2()).collect();
    let wsr = inst.wsr(&p)?;
    let norm = if wsr > 0.0 { wsr } else { inst.bandwidth() };
    let mut objective = CanonicalFunction::default();
    for (i, (c, u)) in coeffs.iter().zip(inst.users()).enumerate() {
        if u.weight > 0.0 {
            objective = objective.plus(rate_bound_function(
                inst.channel(),
                inst.bandwidth() * u.weight / norm,
                c,
                i,
                |j| layout.q(j, 0),
            ));
        }
    }
    let mut program = ConvexProgram::new(layout.n_vars(), objective);
    add_power_caps(&mut program, inst, &layout);
    add_qos(&mut program, inst, &layout)?;
    Ok(SurrogateProblem { kind: SubproblemKind::Wsr, layout, program, expansion: q_prime.to_vec(), coeffs })
}

/// Convex subproblem over `(q, y, v)` for the rate-dependent power model:
/// caps, exact QoS, `R~_i(q) >= 2^y_i` and `epsilon_i <= 0`.
pub fn build_wsee_general_subproblem(
    inst: &NetworkInstance,
    users: &[GeneralPowerUser],
    q_prime: &[f64],
    y_prime: &[f64],
    v_prime: &[f64],
) -> Result<SurrogateProblem> {
    let n = inst.n_users();
    check_len("general users", users.len(), n)?;
    check_len("q'", q_prime.len(), n)?;
    check_len("y'", y_prime.len(), n)?;
    check_len("v'", v_prime.len(), n)?;
    let layout = VarLayout::general(n);
    let coeffs = single_band_coeffs(inst, q_prime)?;
    let mut program = ConvexProgram::new(layout.n_vars(), ee_objective(&inst.weights(), v_prime, &layout));
    add_power_caps(&mut program, inst, &layout);
    add_qos(&mut program, inst, &layout)?;
    let b = inst.bandwidth();
    for (i, c) in coeffs.iter().enumerate() {
        program.constraints.push(
            rate_bound_function(inst.channel(), 1.0, c, i, |j| layout.q(j, 0))
                .minus_exp(1.0 / b, AffineForm::var(layout.y(i))),
        );
    }
    for (i, u) in users.iter().enumerate() {
        program.constraints.push(neg_epsilon_function(u, layout.q(i, 0), layout.y(i), layout.v(i)));
    }
    let expansion = q_prime.iter().chain(y_prime).chain(v_prime).copied().collect();
    Ok(SurrogateProblem { kind: SubproblemKind::WseeGeneral, layout, program, expansion, coeffs })
}

/// Convex subproblem over per-block powers and `v` for `K` resource blocks.
pub fn build_multi_rb_subproblem(mrb: &MultiRbInstance, q_prime: &[f64], v_prime: &[f64]) -> Result<SurrogateProblem> {
    let (n, kk) = (mrb.n_users(), mrb.n_rb());
    check_len("q'", q_prime.len(), n * kk)?;
    check_len("v'", v_prime.len(), n)?;
    let layout = VarLayout::multi_rb(n, kk);
    let p: Vec<f64> = q_prime.iter().map(|q| q.exp2()).collect();
    let coeffs = multi_rb_coeffs(mrb, &p)?;
    let weights: Vec<f64> = mrb.users().iter().map(|u| u.weight).collect();
    let mut program = ConvexProgram::new(layout.n_vars(), ee_objective(&weights, v_prime, &layout));
    for (i, u) in mrb.users().iter().enumerate() {
        if kk == 1 {
            program.upper[layout.q(i, 0)] = u.p_max.log2();
        } else {
            let exps = (0..kk).map(|k| AffineForm::var(layout.q(i, k))).collect();
            program.constraints.push(CanonicalFunction::constant(u.p_max.log2()).minus_lse(1.0, exps));
        }
    }
    program.constraints.extend(build_multi_rb_qos(mrb, &coeffs).into_iter().map(|(_, row)| row));
    let b = mrb.rb_bandwidth();
    for (i, u) in mrb.users().iter().enumerate() {
        let mut row = multi_rb_rate_bound(mrb, &coeffs, i, &layout, 1.0);
        for k in 0..kk {
            row = row.minus_exp(u.mu / b, AffineForm::var(layout.q(i, k)).plus(layout.v(i), 1.0));
        }
        program.constraints.push(row.minus_exp(u.p_st / b, AffineForm::var(layout.v(i))));
    }
    let expansion = q_prime.iter().chain(v_prime).copied().collect();
    Ok(SurrogateProblem { kind: SubproblemKind::WseeMultiRb, layout, program, expansion, coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{UserLink, FEASIBILITY_TOL};

    fn user(weight: f64, r_min: f64) -> UserLink {
        UserLink { weight, p_max: 1.0, r_min, mu: 5.0, p_st: 0.375 }
    }

    fn two_user(r_min: f64) -> NetworkInstance {
        let ch = ChannelCoeffs::new(vec![2.0, 1.0, 1.0, 3.0], vec![0.1, 0.0], vec![1.0, 1.0]).unwrap();
        NetworkInstance::new(2e6, ch, vec![user(0.5, r_min), user(0.5, r_min)]).unwrap()
    }

    #[test]
    fn bound_coefficient_examples() {
        let c = log_bound_coeffs(1.0).unwrap();
        assert_eq!((c.alpha, c.beta), (0.5, 1.0));
        let z = log_bound_coeffs(0.0).unwrap();
        assert_eq!((z.alpha, z.beta), (0.0, 0.0));
        assert_eq!(z.bound(5.0), 0.0);
        let c3 = log_bound_coeffs(3.0).unwrap();
        assert_eq!(c3.alpha, 0.75);
        assert!((c3.beta - (2.0 - 0.75 * 3f64.log2())).abs() < 1e-15);
        assert!((c3.beta - 0.81128).abs() < 1e-5);
        assert!((c3.bound(3.0) - 2.0).abs() < 1e-12);
        for k in 1..200 {
            let g = 0.05 * k as f64;
            assert!((1.0 + g).log2() >= c3.bound(g) - 1e-12);
        }
        assert!(log_bound_coeffs(-1.0).is_err());
        assert!(log_bound_coeffs(f64::NAN).is_err());
    }

    #[test]
    fn alpha_increases_towards_one() {
        let mut last = -1.0;
        for k in -30..60 {
            let a = log_bound_coeffs(10f64.powf(k as f64 / 6.0)).unwrap().alpha;
            assert!(a > last && a < 1.0);
            last = a;
        }
    }

    #[test]
    fn theta_single_user_reduces_to_q() {
        // omega = 1, phi = 0, noise = 1, gamma_min = 1 (r_min = B)
        let ch = ChannelCoeffs::new(vec![1.0], vec![0.0], vec![1.0]).unwrap();
        let inst = NetworkInstance::new(2e6, ch, vec![user(1.0, 2e6)]).unwrap();
        for q in [-3.0, 0.0, 0.5, 2.0] {
            let expect = q - (1.0f64 + 0.0).log2() - 0.0;
            let got = theta(&inst, &[q], 0).unwrap();
            // log2(noise) = 0 so theta = q exactly
            assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
        }
        assert!(matches!(theta(&two_user(0.0), &[0.0, 0.0], 0), Err(Error::QosAbsent(0))));
    }

    #[test]
    fn theta_matches_rate_constraint() {
        let base = two_user(0.0);
        let p = [0.3, 0.6];
        let rmin: Vec<f64> = (0..2).map(|i| base.rate(&p, i).unwrap()).collect();
        let inst = base.with_r_min(&rmin).unwrap();
        let q: Vec<f64> = p.iter().map(|x: &f64| x.log2()).collect();
        for i in 0..2 {
            assert!(theta(&inst, &q, i).unwrap().abs() < 1e-9);
            let mut up = q.clone();
            up[i] += 0.1;
            assert!(theta(&inst, &up, i).unwrap() > 0.0);
            let mut down = q.clone();
            down[i] -= 0.1;
            assert!(theta(&inst, &down, i).unwrap() < 0.0);
            assert!(!inst.is_feasible(&down.iter().map(|x| x.exp2()).collect::<Vec<_>>(), FEASIBILITY_TOL).unwrap());
        }
    }

    #[test]
    fn surrogates_are_tight_at_expansion() {
        let inst = two_user(0.0);
        let q = [-1.3, 0.2];
        let p: Vec<f64> = q.iter().map(|x: &f64| x.exp2()).collect();
        for i in 0..2 {
            let c = log_bound_coeffs(inst.sinr(&p, i).unwrap()).unwrap();
            let exact = inst.rate(&p, i).unwrap();
            assert!((rate_bound(&inst, &q, &c, i) - exact).abs() <= 1e-9 * exact);
            let v = (inst.ee(&p, i).unwrap()).log2();
            // phi at the tight v is zero, so is phi~
            assert!(phi_tilde(&inst, &q, v, &c, i).abs() <= 1e-9 * exact);
            // vanishing exponentials leave the rate bound
            assert!((phi_tilde(&inst, &q, -200.0, &c, i) - exact).abs() <= 1e-9 * exact);
        }
    }

    #[test]
    fn single_user_phi_tilde_root_is_log_bounded_ee() {
        let ch = ChannelCoeffs::new(vec![1.0], vec![0.0], vec![0.5]).unwrap();
        let inst = NetworkInstance::new(1e6, ch, vec![user(1.0, 0.0)]).unwrap();
        let c = log_bound_coeffs(2.0).unwrap();
        let q = [0.3f64];
        // bisection on v for phi~(q, v) = 0
        let (mut lo, mut hi) = (-40.0, 60.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi_tilde(&inst, &q, mid, &c, 0) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = q[0].exp2();
        let bounded_rate = 1e6 * c.bound(p / 0.5);
        let ee_tilde = bounded_rate / (5.0 * p + 0.375);
        assert!((lo - ee_tilde.log2()).abs() < 1e-9);
    }

    #[test]
    fn tangent_of_objective() {
        let w = [0.2, 0.8];
        let vp = [3.0, -1.0];
        let (f, ft) = f_and_f_tilde(&vp, &vp, &w);
        assert_eq!(f, ft);
        let (f, ft) = f_and_f_tilde(&[3.5, -2.0], &vp, &w);
        assert!(f > ft);
        // gradient of f~ is ln2 w 2^v'
        let h = 1e-6;
        let (_, a) = f_and_f_tilde(&[3.0 + h, -1.0], &vp, &w);
        let (_, b) = f_and_f_tilde(&[3.0 - h, -1.0], &vp, &w);
        assert!(((a - b) / (2.0 * h) - LN_2 * 0.2 * 8.0).abs() < 1e-8);
    }

    #[test]
    fn epsilon_examples() {
        let u = GeneralPowerUser { mu: vec![5.0, 0.5], xi: 1e-7, delta: 0.7, p_st: 0.375 };
        let (q, y): (f64, f64) = (-2.0, 20.0);
        let psi = u.efficiency(q.exp2(), y.exp2()).unwrap();
        assert!(epsilon_constraint(&u, q, y, psi.log2()).abs() < 1e-9);
        assert!((epsilon_constraint(&u, q, y, -300.0) + 1.0).abs() < 1e-12);
        assert!(epsilon_constraint(&u, q, y, psi.log2() - 0.1) < 0.0);
        assert!(epsilon_constraint(&u, q, y, psi.log2() + 0.1) > 0.0);
    }

    #[test]
    fn single_block_multi_rb_program_matches_single_band() {
        let inst = two_user(3e5);
        let mrb = MultiRbInstance::from_single(&inst);
        let q = [-1.0, -0.5];
        let v = [19.0, 20.0];
        let a = build_wsee_subproblem(&inst, &q, &v).unwrap();
        let b = build_multi_rb_subproblem(&mrb, &q, &v).unwrap();
        assert_eq!(a.program, b.program);
        assert_eq!(a.expansion, b.expansion);
    }

    #[test]
    fn multi_rb_qos_symmetric_under_block_swap() {
        let inst = two_user(4e5);
        let ch = inst.channel().clone();
        let mrb = MultiRbInstance::new(1e6, vec![ch.clone(), ch], inst.users().to_vec()).unwrap();
        let q = [-1.0, -2.0, 0.1, -0.4];
        let swapped = [-2.0, -1.0, -0.4, 0.1];
        let p: Vec<f64> = q.iter().map(|x: &f64| x.exp2()).collect();
        let c = multi_rb_coeffs(&mrb, &p).unwrap();
        let ps: Vec<f64> = swapped.iter().map(|x: &f64| x.exp2()).collect();
        let cs = multi_rb_coeffs(&mrb, &ps).unwrap();
        let rows = build_multi_rb_qos(&mrb, &c);
        let rows_s = build_multi_rb_qos(&mrb, &cs);
        for ((_, r), (_, rs)) in rows.iter().zip(&rows_s) {
            assert!((r.value(&q) - rs.value(&swapped)).abs() < 1e-12);
        }
        for i in 0..2 {
            let exact = mrb.rate(&p, i).unwrap();
            assert!((multi_rb_rate_surrogate(&mrb, &q, &c, i) - exact).abs() <= 1e-9 * exact);
        }
    }

    #[test]
    fn programs_are_concave_forms() {
        let inst = two_user(1e5);
        let sub = build_wsee_subproblem(&inst, &[-1.0, -1.0], &[18.0, 18.0]).unwrap();
        sub.program.validate().unwrap();
        let sub = build_wsr_subproblem(&inst, &[-1.0, -1.0]).unwrap();
        sub.program.validate().unwrap();
        let users: Vec<_> = inst.users().iter().map(GeneralPowerUser::linear).collect();
        let sub = build_wsee_general_subproblem(&inst, &users, &[-1.0, -1.0], &[19.0, 19.0], &[18.0, 18.0]).unwrap();
        sub.program.validate().unwrap();
        assert_eq!(sub.layout.n_vars(), 6);
    }
}
