//! Random relay-assisted MIMO networks: `N` transmitter/receiver pairs
//! talk through one single-antenna amplify-and-forward relay, receivers use
//! maximum-ratio combining, and the end-to-end link reduces to the SINR
//! coefficients of [`NetworkInstance`].

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelCoeffs, GeneralPowerUser, MultiRbInstance, NetworkInstance, UserLink, FEASIBILITY_TOL};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Redraw budget for [`generate_feasible`].
pub const MAX_REDRAWS: usize = 10_000;

/// `10^((dBm - 30) / 10)` watts.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_users: usize,
    /// Transmit antennas per transmitter.
    pub l_t: usize,
    /// Receive antennas per receiver.
    pub l_r: usize,
    /// Relay transmit power in watts; `inf` removes the relay noise terms.
    pub relay_power: f64,
    pub carrier_hz: f64,
    pub bandwidth: f64,
    pub noise_figure_db: f64,
    pub noise_psd_dbm_hz: f64,
    pub mu: f64,
    pub p_st: f64,
    pub p_max: f64,
    /// Per-user weights; `None` means `1 / N` each.
    pub weights: Option<Vec<f64>>,
    /// QoS fraction of the noise-free equal-power rate.
    pub r: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub d_ref: f64,
    pub path_loss_exponent: f64,
    pub shadowing_db: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_users: 5,
            l_t: 2,
            l_r: 2,
            relay_power: dbm_to_watt(30.0),
            carrier_hz: 2e9,
            bandwidth: 2e6,
            noise_figure_db: 3.0,
            noise_psd_dbm_hz: -174.0,
            mu: 5.0,
            p_st: 0.375,
            p_max: dbm_to_watt(20.0),
            weights: None,
            r: 0.0,
            d_min: 200.0,
            d_max: 300.0,
            d_ref: 100.0,
            path_loss_exponent: 3.5,
            shadowing_db: 8.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidOption(format!("scenario: {m}")));
        if self.n_users == 0 || self.l_t == 0 || self.l_r == 0 {
            return bad("user and antenna counts must be positive");
        }
        if !(self.relay_power > 0.0) || !(self.bandwidth > 0.0) || !(self.carrier_hz > 0.0) {
            return bad("relay power, bandwidth and carrier must be positive");
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) || !(self.p_st > 0.0) || !(self.mu >= 1.0) {
            return bad("need p_max > 0, p_st > 0, mu >= 1");
        }
        if !(self.d_ref > 0.0 && self.d_min > 0.0 && self.d_min <= self.d_max) {
            return bad("distances must satisfy 0 < d_min <= d_max and d_ref > 0");
        }
        if !(self.shadowing_db >= 0.0) || !(self.path_loss_exponent > 0.0) {
            return bad("shadowing and path-loss exponent must be non-negative");
        }
        if !(0.0..1.0).contains(&self.r) {
            return Err(Error::InvalidQosFraction(self.r));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.n_users {
                return bad("weights length must equal n_users");
            }
        }
        Ok(())
    }

    /// Thermal noise power `F N0 B` in watts over `bandwidth`.
    pub fn noise_power(&self, bandwidth: f64) -> f64 {
        db_to_linear(self.noise_figure_db) * dbm_to_watt(self.noise_psd_dbm_hz) * bandwidth
    }

    /// Mean linear power gain at distance `d`: free-space loss up to the
    /// reference distance, exponent `path_loss_exponent` beyond it.
    pub fn path_gain(&self, d: f64) -> f64 {
        let lambda = SPEED_OF_LIGHT / self.carrier_hz;
        let free = (lambda / (4.0 * std::f64::consts::PI * self.d_ref)).powi(2);
        free * (self.d_ref / d.max(self.d_ref)).powf(self.path_loss_exponent)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.weights.clone().unwrap_or_else(|| vec![1.0 / self.n_users as f64; self.n_users])
    }

    pub fn users(&self) -> Vec<UserLink> {
        self.weights()
            .into_iter()
            .map(|w| UserLink { weight: w, p_max: self.p_max, r_min: 0.0, mu: self.mu, p_st: self.p_st })
            .collect()
    }
}

/// Large-scale gains of both hops: path loss times shadowing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Geometry {
    /// Transmitter-to-relay gain per user.
    pub uplink_gain: Vec<f64>,
    /// Relay-to-receiver gain per user.
    pub downlink_gain: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    /// Transmitter-to-relay row vectors (`L_T` entries).
    pub h: Vec<Vec<Complex64>>,
    /// Relay-to-receiver column vectors (`L_R` entries).
    pub g: Vec<Vec<Complex64>>,
    /// Equal-split beamformers `1 / sqrt(L_T)`.
    pub b: Vec<Vec<f64>>,
    /// MRC combiners `g_i (h_i b_i)`.
    pub c: Vec<Vec<Complex64>>,
}

pub fn draw_geometry(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Geometry {
    let shadow = Normal::new(0.0, cfg.shadowing_db).expect("validated shadowing");
    let hop = |rng: &mut _| {
        let d = if cfg.d_max > cfg.d_min { rng_uniform(rng, cfg.d_min, cfg.d_max) } else { cfg.d_min };
        cfg.path_gain(d) * db_to_linear(shadow.sample(rng))
    };
    let mut up = Vec::with_capacity(cfg.n_users);
    let mut down = Vec::with_capacity(cfg.n_users);
    for _ in 0..cfg.n_users {
        up.push(hop(rng));
        down.push(hop(rng));
    }
    Geometry { uplink_gain: up, downlink_gain: down }
}

fn rng_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Circularly-symmetric complex Gaussian with total variance `var`.
fn complex_gaussian(rng: &mut impl Rng, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Rayleigh fading on top of fixed large-scale gains.
pub fn draw_fading(cfg: &ScenarioConfig, geom: &Geometry, rng: &mut impl Rng) -> ChannelDraw {
    let n = cfg.n_users;
    let b = vec![vec![1.0 / (cfg.l_t as f64).sqrt(); cfg.l_t]; n];
    let mut h = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    for i in 0..n {
        h.push((0..cfg.l_t).map(|_| complex_gaussian(rng, geom.uplink_gain[i])).collect::<Vec<_>>());
        g.push((0..cfg.l_r).map(|_| complex_gaussian(rng, geom.downlink_gain[i])).collect::<Vec<_>>());
    }
    let c = (0..n)
        .map(|i| {
            let hb = dot_real(&h[i], &b[i]);
            g[i].iter().map(|x| x * hb).collect()
        })
        .collect();
    ChannelDraw { h, g, b, c }
}

pub fn draw_channels(cfg: &ScenarioConfig, rng: &mut impl Rng) -> ChannelDraw {
    let geom = draw_geometry(cfg, rng);
    draw_fading(cfg, &geom, rng)
}

fn dot_real(h: &[Complex64], b: &[f64]) -> Complex64 {
    h.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `c^H x`.
fn inner(c: &[Complex64], x: &[Complex64]) -> Complex64 {
    c.iter().zip(x).map(|(a, b)| a.conj() * b).sum()
}

/// SINR coefficients of a draw, with thermal noise over `bandwidth`.
pub fn derive_coeffs(cfg: &ScenarioConfig, draw: &ChannelDraw, bandwidth: f64) -> Result<ChannelCoeffs> {
    let n = draw.h.len();
    let sigma2 = cfg.noise_power(bandwidth);
    let hb: Vec<Complex64> = (0..n).map(|j| dot_real(&draw.h[j], &draw.b[j])).collect();
    if hb.iter().any(|x| x.norm_sqr() == 0.0) {
        return Err(Error::InvalidInstance("degenerate draw: h b = 0".into()));
    }
    let inv_pr = 1.0 / cfg.relay_power;
    let mut gain = vec![0.0; n * n];
    let mut phi = vec![0.0; n];
    let mut noise = vec![0.0; n];
    for i in 0..n {
        let cg = inner(&draw.c[i], &draw.g[i]);
        let c_norm2: f64 = draw.c[i].iter().map(|x| x.norm_sqr()).sum();
        let relay_noise = sigma2 * c_norm2 * inv_pr;
        for j in 0..n {
            let direct = (cg * hb[j]).norm_sqr();
            gain[j * n + i] = if j == i { direct } else { direct + relay_noise * hb[j].norm_sqr() };
        }
        phi[i] = relay_noise * hb[i].norm_sqr();
        noise[i] = (cg.norm_sqr() + relay_noise) * sigma2;
    }
    ChannelCoeffs::new(gain, phi, noise)
}

/// Network instance of a draw with the configured users (no QoS yet).
pub fn derive_instance(cfg: &ScenarioConfig, draw: &ChannelDraw) -> Result<NetworkInstance> {
    NetworkInstance::new(cfg.bandwidth, derive_coeffs(cfg, draw, cfg.bandwidth)?, cfg.users())
}

/// Noise-free equal-power SINR `w_ii / (sum_{j != i} w_ji + phi_i)`.
pub fn reference_sinr(ch: &ChannelCoeffs, i: usize) -> f64 {
    let mut d = ch.self_interference()[i];
    for j in 0..ch.n_users() {
        if j != i {
            d += ch.gain(j, i);
        }
    }
    ch.gain(i, i) / d
}

fn check_fraction(r: f64) -> Result<()> {
    if (0.0..1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::InvalidQosFraction(r))
    }
}

/// Minimum rates `r * B log2(1 + reference SINR)`.
pub fn qos_targets(inst: &NetworkInstance, r: f64) -> Result<Vec<f64>> {
    check_fraction(r)?;
    if r == 0.0 {
        return Ok(vec![0.0; inst.n_users()]);
    }
    (0..inst.n_users())
        .map(|i| {
            let g = reference_sinr(inst.channel(), i);
            if g.is_finite() {
                Ok(r * inst.bandwidth() * g.ln_1p() / std::f64::consts::LN_2)
            } else {
                Err(Error::DegenerateTarget(i))
            }
        })
        .collect()
}

/// Minimum rates for several blocks: `r * B_RB sum_k log2(1 + reference SINR_k)`.
pub fn qos_targets_multi_rb(mrb: &MultiRbInstance, r: f64) -> Result<Vec<f64>> {
    check_fraction(r)?;
    let mut out = vec![0.0; mrb.n_users()];
    if r == 0.0 {
        return Ok(out);
    }
    for (i, t) in out.iter_mut().enumerate() {
        let mut sum = 0.0;
        for ch in mrb.blocks() {
            let g = reference_sinr(ch, i);
            if !g.is_finite() {
                return Err(Error::DegenerateTarget(i));
            }
            sum += g.ln_1p() / std::f64::consts::LN_2;
        }
        *t = r * mrb.rb_bandwidth() * sum;
    }
    Ok(out)
}

pub fn with_qos(inst: &NetworkInstance, r: f64) -> Result<NetworkInstance> {
    inst.with_r_min(&qos_targets(inst, r)?)
}

pub fn with_qos_multi_rb(mrb: &MultiRbInstance, r: f64) -> Result<MultiRbInstance> {
    let rmin = qos_targets_multi_rb(mrb, r)?;
    mrb.with_users(mrb.users().iter().zip(&rmin).map(|(u, r)| UserLink { r_min: *r, ..*u }).collect())
}

pub fn with_p_max_multi_rb(mrb: &MultiRbInstance, p_max: f64) -> Result<MultiRbInstance> {
    mrb.with_users(mrb.users().iter().map(|u| UserLink { p_max, ..*u }).collect())
}

/// RNG for a trial: the base seed xor a splitmix64 of the trial index.
pub fn trial_seed(base: u64, trial: u64) -> u64 {
    let mut z = trial.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    base ^ (z ^ (z >> 31))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Instance with QoS fraction `cfg.r`, redrawn until `p = p_check * 1` is
/// feasible. Returns the instance and the number of rejected draws.
pub fn generate_feasible(cfg: &ScenarioConfig, seed: u64, p_check: f64) -> Result<(NetworkInstance, usize)> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    let p = vec![p_check; cfg.n_users];
    for redraws in 0..MAX_REDRAWS {
        let draw = draw_channels(cfg, &mut rng);
        let Ok(base) = derive_instance(cfg, &draw) else { continue };
        let inst = with_qos(&base, cfg.r)?;
        if inst.is_feasible(&p, FEASIBILITY_TOL)? {
            return Ok((inst, redraws));
        }
    }
    Err(Error::RedrawLimit(MAX_REDRAWS))
}

/// `K`-block instance: one geometry (path loss and shadowing), independent
/// fading per block, block bandwidth `B / K`. Redrawn until the even split
/// `p_check / K` per block is feasible.
pub fn generate_feasible_multi_rb(
    cfg: &ScenarioConfig,
    n_rb: usize,
    seed: u64,
    p_check: f64,
) -> Result<(MultiRbInstance, usize)> {
    cfg.validate()?;
    if n_rb == 0 {
        return Err(Error::InvalidOption("n_rb must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let b_rb = cfg.bandwidth / n_rb as f64;
    let p = vec![p_check / n_rb as f64; cfg.n_users * n_rb];
    'draw: for redraws in 0..MAX_REDRAWS {
        let geom = draw_geometry(cfg, &mut rng);
        let mut blocks = Vec::with_capacity(n_rb);
        for _ in 0..n_rb {
            let draw = draw_fading(cfg, &geom, &mut rng);
            match derive_coeffs(cfg, &draw, b_rb) {
                Ok(c) => blocks.push(c),
                Err(_) => continue 'draw,
            }
        }
        let mrb = with_qos_multi_rb(&MultiRbInstance::new(b_rb, blocks, cfg.users())?, cfg.r)?;
        if mrb.feasibility(&p, FEASIBILITY_TOL)?.is_feasible() {
            return Ok((mrb, redraws));
        }
    }
    Err(Error::RedrawLimit(MAX_REDRAWS))
}

/// JSON interchange form of a single-band instance.
///
/// `omega` is row-major by transmitter: `omega[j * n + i]` is the gain of
/// transmitter `j` at receiver `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub n: usize,
    #[serde(rename = "B")]
    pub bandwidth: f64,
    pub omega: Vec<f64>,
    pub phi: Vec<f64>,
    pub noise: Vec<f64>,
    pub users: Vec<UserLink>,
    /// Optional rate-dependent power model, one entry per user.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub general: Option<Vec<GeneralPowerUser>>,
}

impl InstanceDoc {
    pub fn from_instance(inst: &NetworkInstance) -> Self {
        let ch = inst.channel();
        InstanceDoc {
            n: inst.n_users(),
            bandwidth: inst.bandwidth(),
            omega: ch.gains().to_vec(),
            phi: ch.self_interference().to_vec(),
            noise: ch.noise().to_vec(),
            users: inst.users().to_vec(),
            general: None,
        }
    }

    pub fn to_instance(&self) -> Result<NetworkInstance> {
        if self.users.len() != self.n {
            return Err(Error::InvalidInstance(format!("{} users listed for n = {}", self.users.len(), self.n)));
        }
        if self.omega.len() != self.n * self.n {
            return Err(Error::InvalidInstance(format!("omega has {} entries, expected {}", self.omega.len(), self.n * self.n)));
        }
        if let Some(g) = &self.general {
            if g.len() != self.n {
                return Err(Error::InvalidInstance(format!("{} general power entries for n = {}", g.len(), self.n)));
            }
            for u in g {
                u.validate()?;
            }
        }
        let ch = ChannelCoeffs::new(self.omega.clone(), self.phi.clone(), self.noise.clone())?;
        NetworkInstance::new(self.bandwidth, ch, self.users.clone())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ScenarioConfig::default();
        assert_eq!((c.n_users, c.l_t, c.l_r), (5, 2, 2));
        assert!((c.relay_power - 1.0).abs() < 1e-12);
        assert!((c.p_max - 0.1).abs() < 1e-12);
        // F N0 B = 10^0.3 * 10^-20.4 * 2e6, about 1.59e-14 W
        let s = c.noise_power(c.bandwidth);
        assert!((s / (10f64.powf(0.3 - 20.4) * 2e6) - 1.0).abs() < 1e-12, "{s}");
        assert!((s - 1.59e-14).abs() < 0.01e-14);
        assert_eq!(c.weights(), vec![0.2; 5]);
        c.validate().unwrap();
        assert!(ScenarioConfig { r: 1.0, ..c }.validate().is_err());
    }

    #[test]
    fn dbm_conversions() {
        assert_eq!(dbm_to_watt(30.0), 1.0);
        assert!((dbm_to_watt(20.0) - 0.1).abs() < 1e-15);
        assert!((watt_to_dbm(0.001)).abs() < 1e-12);
    }

    #[test]
    fn path_gain_anchor() {
        let c = ScenarioConfig::default();
        let lambda = SPEED_OF_LIGHT / 2e9;
        let fs = (lambda / (4.0 * std::f64::consts::PI * 100.0)).powi(2);
        assert_eq!(c.path_gain(100.0), fs);
        assert!((c.path_gain(200.0) / fs - 0.5f64.powf(3.5)).abs() < 1e-15);
    }

    #[test]
    fn draw_is_deterministic_and_mrc() {
        let cfg = ScenarioConfig::default();
        let a = draw_channels(&cfg, &mut rng_from_seed(7));
        let b = draw_channels(&cfg, &mut rng_from_seed(7));
        assert_eq!(a, b);
        for i in 0..cfg.n_users {
            let nb: f64 = a.b[i].iter().map(|x| x * x).sum();
            assert!((nb - 1.0).abs() < 1e-15);
            let hb = dot_real(&a.h[i], &a.b[i]);
            for (c, g) in a.c[i].iter().zip(&a.g[i]) {
                assert_eq!(*c, g * hb);
            }
        }
        let inst = derive_instance(&cfg, &a).unwrap();
        assert_eq!(inst, derive_instance(&cfg, &b).unwrap());
    }

    #[test]
    fn unit_channel_reduction() {
        // L_T = L_R = 1, all channels 1, infinite relay power
        let cfg = ScenarioConfig { n_users: 1, l_t: 1, l_r: 1, relay_power: f64::INFINITY, ..Default::default() };
        let one = Complex64::new(1.0, 0.0);
        let draw = ChannelDraw { h: vec![vec![one]], g: vec![vec![one]], b: vec![vec![1.0]], c: vec![vec![one]] };
        let ch = derive_coeffs(&cfg, &draw, cfg.bandwidth).unwrap();
        assert_eq!(ch.gain(0, 0), 1.0);
        assert_eq!(ch.self_interference()[0], 0.0);
        assert_eq!(ch.noise()[0], cfg.noise_power(cfg.bandwidth));
    }

    #[test]
    fn qos_examples() {
        let ch = ChannelCoeffs::new(vec![2.0, 1.0, 1.0, 3.0], vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let u = UserLink { weight: 0.5, p_max: 1.0, r_min: 0.0, mu: 5.0, p_st: 0.375 };
        let inst = NetworkInstance::new(2e6, ch, vec![u, u]).unwrap();
        assert_eq!(qos_targets(&inst, 0.0).unwrap(), vec![0.0, 0.0]);
        let t = qos_targets(&inst, 0.5).unwrap();
        assert!((t[0] - 0.5 * 2e6 * 3f64.log2()).abs() < 1e-6);
        assert!((t[1] - 0.5 * 2e6 * 4f64.log2()).abs() < 1e-6);
        assert!(matches!(qos_targets(&inst, 1.0), Err(Error::InvalidQosFraction(_))));
        let lone = ChannelCoeffs::new(vec![1.0], vec![0.0], vec![1.0]).unwrap();
        let lone = NetworkInstance::new(2e6, lone, vec![UserLink { weight: 1.0, ..u }]).unwrap();
        assert!(matches!(qos_targets(&lone, 0.2), Err(Error::DegenerateTarget(0))));
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
        assert_eq!(trial_seed(1, 5), trial_seed(1, 5));
        assert_ne!(trial_seed(1, 5), trial_seed(2, 5));
    }

    #[test]
    fn json_round_trip() {
        let cfg = ScenarioConfig::default();
        let (inst, _) = generate_feasible(&ScenarioConfig { r: 0.2, ..cfg }, 3, 0.1).unwrap();
        let doc = InstanceDoc::from_instance(&inst);
        let back = InstanceDoc::from_json(&doc.to_json().unwrap()).unwrap().to_instance().unwrap();
        assert_eq!(back, inst);
        assert!(InstanceDoc::from_json(r#"{"n": 1}"#).is_err());
    }

    #[test]
    fn multi_rb_generation() {
        let cfg = ScenarioConfig { r: 0.2, ..Default::default() };
        let (mrb, _) = generate_feasible_multi_rb(&cfg, 2, 11, 0.1).unwrap();
        assert_eq!(mrb.n_rb(), 2);
        assert_eq!(mrb.rb_bandwidth(), 1e6);
        assert!(mrb.users()[0].r_min > 0.0);
    }
}
