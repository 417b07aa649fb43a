//! Exact evaluation of the interference network: SINR, rates, consumed
//! power, energy efficiencies and the weighted-sum objectives.
//!
//! All quantities are SI: watts, hertz, bit/s, bit/J. Coupling
//! coefficients are stored row-major by transmitter, so `gain(j, i)` is the
//! effect of transmitter `j` on receiver `i`.

use std::f64::consts::LN_2;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// Default relative tolerance for feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Per-link parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserLink {
    /// Priority weight.
    #[serde(rename = "w")]
    pub weight: f64,
    /// Maximum transmit power (W).
    pub p_max: f64,
    /// Minimum required rate (bit/s). Zero disables the QoS constraint.
    pub r_min: f64,
    /// Inverse power-amplifier efficiency.
    pub mu: f64,
    /// Static circuit power (W).
    pub p_st: f64,
}

impl UserLink {
    pub fn validate(&self) -> Result<()> {
        let ok = self.weight.is_finite()
            && self.weight >= 0.0
            && self.p_max.is_finite()
            && self.p_max > 0.0
            && self.r_min.is_finite()
            && self.r_min >= 0.0
            && self.mu.is_finite()
            && self.mu >= 1.0
            && self.p_st.is_finite()
            && self.p_st > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInstance(format!("bad user parameters {self:?}")))
        }
    }
}

/// Linear consumed power `mu * p + p_st`.
pub fn power_consumed_linear(user: &UserLink, p: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(Error::NegativeInput { name: "power", value: p });
    }
    Ok(user.mu * p + user.p_st)
}

/// Rate-dependent consumed power with polynomial amplifier terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralPowerUser {
    /// `mu[m - 1]` multiplies `p^m`; `mu[0]` is the linear coefficient.
    pub mu: Vec<f64>,
    /// Rate-dependent coefficient, W/(bit/s)^delta.
    pub xi: f64,
    /// Rate exponent in (0, 1].
    pub delta: f64,
    pub p_st: f64,
}

impl GeneralPowerUser {
    /// The conventional linear model expressed in general form.
    pub fn linear(user: &UserLink) -> Self {
        GeneralPowerUser { mu: vec![user.mu], xi: 0.0, delta: 1.0, p_st: user.p_st }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = !self.mu.is_empty()
            && self.mu.iter().all(|m| m.is_finite() && *m >= 0.0)
            && self.mu[0] >= 1.0
            && self.xi.is_finite()
            && self.xi >= 0.0
            && self.delta > 0.0
            && self.delta <= 1.0
            && self.p_st.is_finite()
            && self.p_st > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInstance(format!("bad general power model {self:?}")))
        }
    }

    /// Consumed power `sum_m mu_m p^m + xi rate^delta + p_st`.
    pub fn consumed(&self, p: f64, rate: f64) -> Result<f64> {
        if !(p >= 0.0) {
            return Err(Error::NegativeInput { name: "power", value: p });
        }
        if !(rate >= 0.0) {
            return Err(Error::NegativeInput { name: "rate", value: rate });
        }
        let mut poly = 0.0;
        let mut pm = 1.0;
        for mu in &self.mu {
            pm *= p;
            poly += mu * pm;
        }
        Ok(poly + self.xi * rate.powf(self.delta) + self.p_st)
    }

    /// Energy efficiency `rho / consumed(p, rho)`; increasing in `rho`.
    pub fn efficiency(&self, p: f64, rho: f64) -> Result<f64> {
        Ok(rho / self.consumed(p, rho)?)
    }
}

pub fn power_consumed_general(user: &GeneralPowerUser, p: f64, rate: f64) -> Result<f64> {
    user.consumed(p, rate)
}

/// `2^(r_min / B) - 1`.
pub fn gamma_min(user: &UserLink, bandwidth: f64) -> f64 {
    (user.r_min / bandwidth * LN_2).exp_m1()
}

/// Coupling coefficients of one band: gains, self-interference, noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCoeffs {
    n: usize,
    gain: Vec<f64>,
    self_interference: Vec<f64>,
    noise: Vec<f64>,
}

impl ChannelCoeffs {
    /// `gain` is row-major `n x n`, `gain[j * n + i]` the effect of
    /// transmitter `j` on receiver `i`.
    pub fn new(gain: Vec<f64>, self_interference: Vec<f64>, noise: Vec<f64>) -> Result<Self> {
        let n = noise.len();
        if n == 0 {
            return Err(Error::InvalidInstance("no users".into()));
        }
        if gain.len() != n * n {
            return Err(Error::InvalidInstance(format!(
                "omega has {} entries, expected {}",
                gain.len(),
                n * n
            )));
        }
        if self_interference.len() != n {
            return Err(Error::InvalidInstance(format!(
                "phi has {} entries, expected {n}",
                self_interference.len()
            )));
        }
        if let Some(k) = gain.iter().position(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::InvalidInstance(format!("omega[{k}] = {} is not finite and >= 0", gain[k])));
        }
        if let Some(i) = (0..n).find(|&i| !(gain[i * n + i] > 0.0)) {
            return Err(Error::InvalidInstance(format!("direct gain omega[{i},{i}] must be positive")));
        }
        if let Some(i) = self_interference.iter().position(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::InvalidInstance(format!("phi[{i}] is not finite and >= 0")));
        }
        if let Some(i) = noise.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInstance(format!("noise[{i}] is not finite and >= 0")));
        }
        Ok(ChannelCoeffs { n, gain, self_interference, noise })
    }

    pub fn n_users(&self) -> usize {
        self.n
    }

    /// Effect of transmitter `j` on receiver `i`.
    #[inline]
    pub fn gain(&self, j: usize, i: usize) -> f64 {
        self.gain[j * self.n + i]
    }

    pub fn gains(&self) -> &[f64] {
        &self.gain
    }

    pub fn self_interference(&self) -> &[f64] {
        &self.self_interference
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    pub(crate) fn set_noise(&mut self, noise: Vec<f64>) {
        self.noise = noise;
    }

    /// Interference-plus-noise seen by receiver `i`.
    #[inline]
    pub fn denominator(&self, p: &[f64], i: usize) -> f64 {
        let mut d = self.self_interference[i] * p[i] + self.noise[i];
        for (j, pj) in p.iter().enumerate() {
            if j != i {
                d += self.gain(j, i) * pj;
            }
        }
        d
    }

    #[inline]
    pub fn sinr_unchecked(&self, p: &[f64], i: usize) -> f64 {
        let num = self.gain(i, i) * p[i];
        if num == 0.0 {
            return 0.0;
        }
        num / self.denominator(p, i)
    }

    pub fn sinrs(&self, p: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.sinr_unchecked(p, i)).collect()
    }

    /// `d log2(1 + gamma_i) / d q_j` for all `j`, with `p = 2^q`.
    pub fn log_rate_grad_q(&self, p: &[f64], i: usize) -> Vec<f64> {
        let d = self.denominator(p, i);
        let s = self.gain(i, i) * p[i];
        // log2(1 + s/d) = log2(d + s) - log2(d); both are linear in p.
        let total = d + s;
        (0..self.n)
            .map(|j| {
                let (ds, dd) = if j == i {
                    (s, self.self_interference[i] * p[i])
                } else {
                    (0.0, self.gain(j, i) * p[j])
                };
                (ds + dd) / total - dd / d
            })
            .collect()
    }

    /// SINR upper limit `omega_ii / phi_i` as transmit power grows; `+inf`
    /// without self-interference.
    pub fn gamma_max(&self, i: usize) -> f64 {
        let phi = self.self_interference[i];
        if phi == 0.0 {
            f64::INFINITY
        } else {
            self.gain(i, i) / phi
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: i, n: self.n })
        }
    }
}

/// Validated non-negative transmit powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerVector(Vec<f64>);

impl PowerVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(k) = p.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidPower(format!("entry {k} = {} is not finite and >= 0", p[k])));
        }
        Ok(PowerVector(p))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for PowerVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Outcome of a feasibility check against the power and rate constraints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Feasibility {
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Single-band interference network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInstance {
    bandwidth: f64,
    channel: ChannelCoeffs,
    users: Vec<UserLink>,
}

impl NetworkInstance {
    pub fn new(bandwidth: f64, channel: ChannelCoeffs, users: Vec<UserLink>) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidInstance(format!("bandwidth {bandwidth} must be positive")));
        }
        if users.len() != channel.n_users() {
            return Err(Error::InvalidInstance(format!(
                "{} users for {} channels",
                users.len(),
                channel.n_users()
            )));
        }
        check_users(&users)?;
        if let Some(i) = channel.noise().iter().position(|x| !(*x > 0.0)) {
            return Err(Error::InvalidInstance(format!("noise[{i}] must be positive")));
        }
        Ok(NetworkInstance { bandwidth, channel, users })
    }

    /// Same channel with noise set to zero; used for interference-limited
    /// benchmarks. Skips the positive-noise check.
    pub fn noiseless(&self) -> NetworkInstance {
        let mut inst = self.clone();
        inst.channel.set_noise(vec![0.0; self.n_users()]);
        inst
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn channel(&self) -> &ChannelCoeffs {
        &self.channel
    }

    pub fn users(&self) -> &[UserLink] {
        &self.users
    }

    pub fn user(&self, i: usize) -> Result<&UserLink> {
        self.channel.check_index(i)?;
        Ok(&self.users[i])
    }

    /// Replace per-user limits/targets, keeping the channel.
    pub fn with_users(&self, users: Vec<UserLink>) -> Result<Self> {
        NetworkInstance::new(self.bandwidth, self.channel.clone(), users)
    }

    pub fn with_p_max(&self, p_max: f64) -> Result<Self> {
        self.with_users(self.users.iter().map(|u| UserLink { p_max, ..*u }).collect())
    }

    pub fn with_r_min(&self, r_min: &[f64]) -> Result<Self> {
        if r_min.len() != self.n_users() {
            return Err(Error::InvalidInstance("r_min length mismatch".into()));
        }
        self.with_users(self.users.iter().zip(r_min).map(|(u, &r)| UserLink { r_min: r, ..*u }).collect())
    }

    pub fn p_max(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.p_max).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.weight).collect()
    }

    pub(crate) fn check_powers(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_users() {
            return Err(Error::InvalidPower(format!(
                "length {} for {} users",
                p.len(),
                self.n_users()
            )));
        }
        if let Some(k) = p.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidPower(format!("entry {k} = {} is not finite and >= 0", p[k])));
        }
        Ok(())
    }

    pub fn sinr(&self, p: &[f64], i: usize) -> Result<f64> {
        self.channel.check_index(i)?;
        self.check_powers(p)?;
        Ok(self.channel.sinr_unchecked(p, i))
    }

    pub fn rate(&self, p: &[f64], i: usize) -> Result<f64> {
        Ok(self.bandwidth * self.sinr(p, i)?.ln_1p() / LN_2)
    }

    /// All rates; assumes `p` was validated.
    pub fn rates(&self, p: &[f64]) -> Vec<f64> {
        (0..self.n_users())
            .map(|i| self.bandwidth * self.channel.sinr_unchecked(p, i).ln_1p() / LN_2)
            .collect()
    }

    pub fn ee(&self, p: &[f64], i: usize) -> Result<f64> {
        let r = self.rate(p, i)?;
        Ok(r / power_consumed_linear(&self.users[i], p[i])?)
    }

    pub fn ees(&self, p: &[f64]) -> Vec<f64> {
        self.rates(p)
            .into_iter()
            .zip(&self.users)
            .zip(p)
            .map(|((r, u), &pi)| r / (u.mu * pi + u.p_st))
            .collect()
    }

    /// Energy efficiency of user `i` under a general power model.
    pub fn ee_general(&self, users: &[GeneralPowerUser], p: &[f64], i: usize) -> Result<f64> {
        let r = self.rate(p, i)?;
        users
            .get(i)
            .ok_or(Error::IndexOutOfRange { index: i, n: users.len() })?
            .efficiency(p[i], r)
    }

    pub fn wsee(&self, p: &[f64]) -> Result<f64> {
        self.check_powers(p)?;
        Ok(self.ees(p).iter().zip(&self.users).map(|(e, u)| u.weight * e).sum())
    }

    pub fn wsee_general(&self, users: &[GeneralPowerUser], p: &[f64]) -> Result<f64> {
        self.check_powers(p)?;
        if users.len() != self.n_users() {
            return Err(Error::InvalidInstance("general power model length mismatch".into()));
        }
        let rates = self.rates(p);
        let mut total = 0.0;
        for i in 0..self.n_users() {
            total += self.users[i].weight * users[i].efficiency(p[i], rates[i])?;
        }
        Ok(total)
    }

    pub fn wsr(&self, p: &[f64]) -> Result<f64> {
        self.check_powers(p)?;
        Ok(self.rates(p).iter().zip(&self.users).map(|(r, u)| u.weight * r).sum())
    }

    pub fn gamma_min(&self, i: usize) -> Result<f64> {
        Ok(gamma_min(self.user(i)?, self.bandwidth))
    }

    pub fn gamma_max(&self, i: usize) -> Result<f64> {
        self.channel.check_index(i)?;
        Ok(self.channel.gamma_max(i))
    }

    /// `d R_i / d q_j` for all `j`, with `p = 2^q`.
    pub fn rate_grad_q(&self, p: &[f64], i: usize) -> Result<Vec<f64>> {
        self.channel.check_index(i)?;
        self.check_powers(p)?;
        let mut g = self.channel.log_rate_grad_q(p, i);
        for x in &mut g {
            *x *= self.bandwidth;
        }
        Ok(g)
    }

    /// Power caps and minimum rates, each within relative tolerance `tol`.
    pub fn feasibility(&self, p: &[f64], tol: f64) -> Result<Feasibility> {
        if p.len() != self.n_users() || p.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPower(format!("{p:?}")));
        }
        let mut violations = Vec::new();
        for (i, (u, &pi)) in self.users.iter().zip(p).enumerate() {
            if pi < 0.0 {
                violations.push(Violation::NegativePower { user: i, power: pi });
            } else if pi > u.p_max * (1.0 + tol) {
                violations.push(Violation::PowerAboveMax { user: i, power: pi, max: u.p_max });
            }
        }
        if violations.is_empty() {
            let rates = self.rates(p);
            for (i, (u, r)) in self.users.iter().zip(rates).enumerate() {
                if u.r_min > 0.0 && r < u.r_min * (1.0 - tol) {
                    violations.push(Violation::RateBelowMin { user: i, rate: r, min: u.r_min });
                }
            }
        }
        Ok(Feasibility { violations })
    }

    pub fn is_feasible(&self, p: &[f64], tol: f64) -> Result<bool> {
        Ok(self.feasibility(p, tol)?.is_feasible())
    }
}

fn check_users(users: &[UserLink]) -> Result<()> {
    for u in users {
        u.validate()?;
    }
    let total: f64 = users.iter().map(|u| u.weight).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInstance(format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

/// Network with `K` resource blocks of equal bandwidth sharing one set of
/// users. Powers are laid out user-major: `p[i * K + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiRbInstance {
    rb_bandwidth: f64,
    blocks: Vec<ChannelCoeffs>,
    users: Vec<UserLink>,
}

impl MultiRbInstance {
    pub fn new(rb_bandwidth: f64, blocks: Vec<ChannelCoeffs>, users: Vec<UserLink>) -> Result<Self> {
        if !(rb_bandwidth.is_finite() && rb_bandwidth > 0.0) {
            return Err(Error::InvalidInstance("resource-block bandwidth must be positive".into()));
        }
        if blocks.is_empty() {
            return Err(Error::InvalidInstance("need at least one resource block".into()));
        }
        if blocks.iter().any(|b| b.n_users() != users.len()) {
            return Err(Error::InvalidInstance("block size does not match user count".into()));
        }
        if blocks.iter().any(|b| b.noise().iter().any(|x| !(*x > 0.0))) {
            return Err(Error::InvalidInstance("noise must be positive on every block".into()));
        }
        check_users(&users)?;
        Ok(MultiRbInstance { rb_bandwidth, blocks, users })
    }

    /// One-block view of a single-band instance.
    pub fn from_single(inst: &NetworkInstance) -> Self {
        MultiRbInstance {
            rb_bandwidth: inst.bandwidth,
            blocks: vec![inst.channel.clone()],
            users: inst.users.clone(),
        }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_rb(&self) -> usize {
        self.blocks.len()
    }

    pub fn rb_bandwidth(&self) -> f64 {
        self.rb_bandwidth
    }

    pub fn blocks(&self) -> &[ChannelCoeffs] {
        &self.blocks
    }

    pub fn users(&self) -> &[UserLink] {
        &self.users
    }

    pub fn with_users(&self, users: Vec<UserLink>) -> Result<Self> {
        MultiRbInstance::new(self.rb_bandwidth, self.blocks.clone(), users)
    }

    /// Powers of all users on block `k`.
    pub fn block_powers(&self, p: &[f64], k: usize) -> Vec<f64> {
        let kk = self.n_rb();
        (0..self.n_users()).map(|i| p[i * kk + k]).collect()
    }

    pub fn total_power(&self, p: &[f64], i: usize) -> f64 {
        let kk = self.n_rb();
        p[i * kk..(i + 1) * kk].iter().sum()
    }

    pub(crate) fn check_powers(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_users() * self.n_rb() {
            return Err(Error::InvalidPower(format!(
                "length {} for {} users x {} blocks",
                p.len(),
                self.n_users(),
                self.n_rb()
            )));
        }
        if let Some(k) = p.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidPower(format!("entry {k} = {} is not finite and >= 0", p[k])));
        }
        Ok(())
    }

    /// SINR of user `i` on every block.
    pub fn sinrs(&self, p: &[f64], i: usize) -> Vec<f64> {
        (0..self.n_rb())
            .map(|k| self.blocks[k].sinr_unchecked(&self.block_powers(p, k), i))
            .collect()
    }

    pub fn rate(&self, p: &[f64], i: usize) -> Result<f64> {
        if i >= self.n_users() {
            return Err(Error::IndexOutOfRange { index: i, n: self.n_users() });
        }
        self.check_powers(p)?;
        Ok(self.rate_unchecked(p, i))
    }

    fn rate_unchecked(&self, p: &[f64], i: usize) -> f64 {
        self.rb_bandwidth * self.sinrs(p, i).iter().map(|g| g.ln_1p()).sum::<f64>() / LN_2
    }

    pub fn rates(&self, p: &[f64]) -> Vec<f64> {
        (0..self.n_users()).map(|i| self.rate_unchecked(p, i)).collect()
    }

    /// Consumed power counts the transmit power summed over blocks.
    pub fn ees(&self, p: &[f64]) -> Vec<f64> {
        self.rates(p)
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let u = &self.users[i];
                r / (u.mu * self.total_power(p, i) + u.p_st)
            })
            .collect()
    }

    pub fn wsee(&self, p: &[f64]) -> Result<f64> {
        self.check_powers(p)?;
        Ok(self.ees(p).iter().zip(&self.users).map(|(e, u)| u.weight * e).sum())
    }

    pub fn wsr(&self, p: &[f64]) -> Result<f64> {
        self.check_powers(p)?;
        Ok(self.rates(p).iter().zip(&self.users).map(|(r, u)| u.weight * r).sum())
    }

    /// `d R_i / d q_{j,k}` in the user-major layout.
    pub fn rate_grad_q(&self, p: &[f64], i: usize) -> Vec<f64> {
        let kk = self.n_rb();
        let mut g = vec![0.0; p.len()];
        for k in 0..kk {
            let pk = self.block_powers(p, k);
            for (j, d) in self.blocks[k].log_rate_grad_q(&pk, i).into_iter().enumerate() {
                g[j * kk + k] = self.rb_bandwidth * d;
            }
        }
        g
    }

    /// Per-user total power budget and minimum rates.
    pub fn feasibility(&self, p: &[f64], tol: f64) -> Result<Feasibility> {
        if p.len() != self.n_users() * self.n_rb() || p.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPower(format!("{p:?}")));
        }
        let mut violations = Vec::new();
        for (i, u) in self.users.iter().enumerate() {
            let kk = self.n_rb();
            if let Some(&neg) = p[i * kk..(i + 1) * kk].iter().find(|x| **x < 0.0) {
                violations.push(Violation::NegativePower { user: i, power: neg });
                continue;
            }
            let total = self.total_power(p, i);
            if total > u.p_max * (1.0 + tol) {
                violations.push(Violation::PowerAboveMax { user: i, power: total, max: u.p_max });
            }
        }
        if violations.is_empty() {
            for (i, (u, r)) in self.users.iter().zip(self.rates(p)).enumerate() {
                if u.r_min > 0.0 && r < u.r_min * (1.0 - tol) {
                    violations.push(Violation::RateBelowMin { user: i, rate: r, min: u.r_min });
                }
            }
        }
        Ok(Feasibility { violations })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(weight: f64) -> UserLink {
        UserLink { weight, p_max: 1.0, r_min: 0.0, mu: 5.0, p_st: 0.375 }
    }

    pub(crate) fn two_user() -> NetworkInstance {
        // omega_{1,1}=2, omega_{2,1}=1, omega_{1,2}=1, omega_{2,2}=3
        let ch = ChannelCoeffs::new(vec![2.0, 1.0, 1.0, 3.0], vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        NetworkInstance::new(2e6, ch, vec![user(0.5), user(0.5)]).unwrap()
    }

    fn single(omega: f64, phi: f64, noise: f64) -> NetworkInstance {
        let ch = ChannelCoeffs::new(vec![omega], vec![phi], vec![noise]).unwrap();
        NetworkInstance::new(2e6, ch, vec![user(1.0)]).unwrap()
    }

    #[test]
    fn sinr_examples() {
        assert_eq!(single(1.0, 0.0, 1.0).sinr(&[1.0], 0).unwrap(), 1.0);
        let inst = two_user();
        assert_eq!(inst.sinr(&[1.0, 1.0], 0).unwrap(), 1.0);
        assert_eq!(inst.sinr(&[1.0, 1.0], 1).unwrap(), 1.5);
        assert_eq!(inst.sinr(&[0.0, 0.0], 0).unwrap(), 0.0);
        assert_eq!(inst.sinr(&[0.0, 0.0], 1).unwrap(), 0.0);
        assert!(matches!(inst.sinr(&[1.0, 1.0], 2), Err(Error::IndexOutOfRange { index: 2, n: 2 })));
    }

    #[test]
    fn rate_examples() {
        let inst = single(1.0, 0.0, 1.0);
        assert_eq!(inst.rate(&[1.0], 0).unwrap(), 2e6);
        assert_eq!(inst.rate(&[0.0], 0).unwrap(), 0.0);
        assert!((inst.rate(&[3.0], 0).unwrap() - 4e6).abs() < 1e-6);
    }

    #[test]
    fn consumed_power_examples() {
        let u = UserLink { weight: 1.0, p_max: 1.0, r_min: 0.0, mu: 5.0, p_st: 0.375 };
        assert_eq!(power_consumed_linear(&u, 0.0).unwrap(), 0.375);
        assert_eq!(power_consumed_linear(&u, 0.125).unwrap(), 1.0);
        let u1 = UserLink { mu: 1.0, p_st: 1.0, ..u };
        assert_eq!(power_consumed_linear(&u1, 1.0).unwrap(), 2.0);
        assert!(matches!(power_consumed_linear(&u, -1.0), Err(Error::NegativeInput { .. })));

        let g = GeneralPowerUser::linear(&u);
        for (p, r) in [(0.0, 0.0), (0.3, 1e6), (2.0, 5.0)] {
            assert_eq!(g.consumed(p, r).unwrap(), power_consumed_linear(&u, p).unwrap());
        }
        let g2 = GeneralPowerUser { mu: vec![5.0, 1.0], xi: 0.0, delta: 1.0, p_st: 0.375 };
        assert!((g2.consumed(0.5, 0.0).unwrap() - 3.125).abs() < 1e-15);
        let g3 = GeneralPowerUser { mu: vec![5.0], xi: 1e-6, delta: 1.0, p_st: 0.375 };
        assert!((g3.consumed(0.0, 1e6).unwrap() - 1.375).abs() < 1e-12);
        assert!(g3.consumed(0.0, -1.0).is_err());
    }

    #[test]
    fn ee_examples() {
        let ch = ChannelCoeffs::new(vec![1.0], vec![0.0], vec![0.125]).unwrap();
        let inst = NetworkInstance::new(2e6, ch, vec![user(1.0)]).unwrap();
        assert!((inst.ee(&[0.125], 0).unwrap() - 2e6).abs() < 1e-6);
        assert_eq!(inst.ee(&[0.0], 0).unwrap(), 0.0);
        let doubled = inst
            .with_users(vec![UserLink { p_st: 0.75, ..inst.users()[0] }])
            .unwrap();
        assert_eq!(doubled.ee(&[0.0], 0).unwrap(), 0.0);
        assert_eq!(inst.wsee(&[0.125]).unwrap(), inst.ee(&[0.125], 0).unwrap());
        assert_eq!(inst.wsr(&[0.125]).unwrap(), inst.rate(&[0.125], 0).unwrap());
    }

    #[test]
    fn weighted_sums_compose_per_user_values() {
        let inst = two_user();
        let p = [1.0, 1.0];
        assert_eq!(inst.wsee(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(inst.wsr(&[0.0, 0.0]).unwrap(), 0.0);
        // gamma = (1, 1.5): R = B log2 2, B log2 2.5; P_c = 5.375 each.
        let r1 = 2e6;
        let r2 = 2e6 * 2.5f64.log2();
        assert!((inst.wsr(&p).unwrap() - 0.5 * (r1 + r2)).abs() < 1e-6);
        assert!((inst.wsee(&p).unwrap() - 0.5 * (r1 + r2) / 5.375).abs() < 1e-6);
    }

    #[test]
    fn feasibility_examples() {
        let inst = two_user();
        assert!(inst.is_feasible(&[1.0, 1.0], FEASIBILITY_TOL).unwrap());
        let f = inst.feasibility(&[1.0 + 1e-6, 0.5], FEASIBILITY_TOL).unwrap();
        assert_eq!(f.violations.len(), 1);
        assert_eq!(f.violations[0].user(), 0);
        let p = [0.7, 0.4];
        let rmin: Vec<f64> = (0..2).map(|i| inst.rate(&p, i).unwrap()).collect();
        let pinned = inst.with_r_min(&rmin).unwrap();
        assert!(pinned.is_feasible(&p, 0.0).unwrap());
        assert!(!pinned.is_feasible(&[0.69, 0.4], FEASIBILITY_TOL).unwrap());
    }

    #[test]
    fn gamma_min_and_max() {
        let u = UserLink { weight: 1.0, p_max: 1.0, r_min: 0.0, mu: 5.0, p_st: 0.375 };
        let b = 2e6;
        assert_eq!(gamma_min(&u, b), 0.0);
        assert!((gamma_min(&UserLink { r_min: b, ..u }, b) - 1.0).abs() < 1e-15);
        assert!((gamma_min(&UserLink { r_min: 2.0 * b, ..u }, b) - 3.0).abs() < 1e-14);
        assert_eq!(single(2.0, 1.0, 1.0).gamma_max(0).unwrap(), 2.0);
        assert_eq!(single(2.0, 0.0, 1.0).gamma_max(0).unwrap(), f64::INFINITY);
        assert_eq!(single(3.0, 0.5, 1.0).gamma_max(0).unwrap(), 6.0);
    }

    #[test]
    fn multi_rb_reductions() {
        let inst = two_user();
        let one = MultiRbInstance::from_single(&inst);
        let p = [0.3, 0.8];
        for i in 0..2 {
            assert_eq!(one.rate(&p, i).unwrap(), inst.rate(&p, i).unwrap());
        }
        assert_eq!(one.rate(&[0.0, 0.0], 0).unwrap(), 0.0);
        let ch = inst.channel().clone();
        let two = MultiRbInstance::new(1e6, vec![ch.clone(), ch], inst.users().to_vec()).unwrap();
        // equal split of (0.3, 0.8) on two identical blocks of half bandwidth
        let split = [0.15, 0.15, 0.4, 0.4];
        let per_rb = 1e6 * (1.0 + ch_sinr(&inst, &[0.15, 0.4], 0)).log2();
        assert!((two.rate(&split, 0).unwrap() - 2.0 * per_rb).abs() < 1e-6);
        assert_eq!(two.total_power(&split, 1), 0.8);
    }

    fn ch_sinr(inst: &NetworkInstance, p: &[f64], i: usize) -> f64 {
        inst.sinr(p, i).unwrap()
    }

    #[test]
    fn rejects_bad_instances() {
        assert!(ChannelCoeffs::new(vec![0.0], vec![0.0], vec![1.0]).is_err());
        assert!(ChannelCoeffs::new(vec![1.0, 2.0], vec![0.0], vec![1.0]).is_err());
        let ch = ChannelCoeffs::new(vec![1.0], vec![0.0], vec![1.0]).unwrap();
        assert!(NetworkInstance::new(1.0, ch.clone(), vec![user(0.5)]).is_err());
        let zero_noise = ChannelCoeffs::new(vec![1.0], vec![0.0], vec![0.0]).unwrap();
        assert!(NetworkInstance::new(1.0, zero_noise, vec![user(1.0)]).is_err());
    }
}
