//! Coupling coefficients and decision statistics.
//!
//! Both receivers reduce to `z_k = a_kk b_k + sum_j a_kj b_j + nu_k`. For AR
//! the receiver projects onto the perturbed direction of user `k` and user
//! `j` enters with its true channel; for TR the perturbation sits in user
//! `j`'s prefilter and the 1Rake reads one sample of the perturbed effective
//! channel.

use rand_distr::{Distribution, Normal};

use crate::signal::{relative_delay, Placement, SpreadingVector, SystemConfig};
use crate::{rng, Error, Result, Scheme};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn nonzero_norm(a: &[f64]) -> Result<f64> {
    let n = norm(a);
    if n == 0.0 || !n.is_finite() {
        Err(Error::ZeroEnergy)
    } else {
        Ok(n)
    }
}

/// `a_kk = c_hat . c / |c_hat|`, common to both schemes once the estimate is
/// fixed.
pub fn self_coupling(channel: &[f64], estimate: &[f64]) -> Result<f64> {
    Ok(dot(estimate, channel) / nonzero_norm(estimate)?)
}

/// AR useful gain with receiver-side error `xi`: `(c + xi) . c / |c + xi|`.
pub fn ar_self_coupling(channel: &[f64], xi: &[f64]) -> Result<f64> {
    let est: Vec<f64> = channel.iter().zip(xi).map(|(c, x)| c + x).collect();
    self_coupling(channel, &est)
}

/// TR useful gain with error `xi` on the (time-reversed) prefilter:
/// `c . (c + rev(xi)) / |c + rev(xi)|`.
pub fn tr_self_coupling(channel: &[f64], xi: &[f64]) -> Result<f64> {
    let est: Vec<f64> = channel.iter().zip(xi.iter().rev()).map(|(c, x)| c + x).collect();
    self_coupling(channel, &est)
}

/// AR coupling of user `j` onto user `k`'s perturbed direction, with `j`
/// delayed by `d` samples relative to `k`: `sum_l c_hat_k[l] c_j[l - d] / |c_hat_k|`.
pub fn ar_cross_coupling(estimate_k: &[f64], channel_j: &[f64], d: i64) -> Result<f64> {
    let n = nonzero_norm(estimate_k)?;
    Ok(lagged_dot(estimate_k, channel_j, -d) / n)
}

/// TR coupling: the sample of user `j`'s perturbed effective channel seen by
/// user `k`'s 1Rake, `sum_i c_j[i] c_hat_j[i + d] / |c_hat_j|`. Zero when
/// `|d|` exceeds the channel length.
pub fn tr_cross_coupling(channel_j: &[f64], estimate_j: &[f64], d: i64) -> Result<f64> {
    let n = nonzero_norm(estimate_j)?;
    Ok(lagged_dot(channel_j, estimate_j, d) / n)
}

/// `sum_i a[i] b[i + lag]`.
fn lagged_dot(a: &[f64], b: &[f64], lag: i64) -> f64 {
    let mut s = 0.0;
    for (i, &x) in a.iter().enumerate() {
        let j = i as i64 + lag;
        if j >= 0 && (j as usize) < b.len() {
            s += x * b[j as usize];
        }
    }
    s
}

/// Whether two windows of `taps` samples at relative delay `d` share a sample.
pub fn windows_overlap(d: i64, taps: usize) -> bool {
    d.unsigned_abs() < taps as u64
}

/// One user's link state: true channel, its estimate, and time-hopping code.
#[derive(Debug, Clone, PartialEq)]
pub struct UserLink {
    pub channel: Vec<f64>,
    pub estimate: Vec<f64>,
    pub code: SpreadingVector,
}

/// Realized couplings for one desired user.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSample {
    pub scheme: Scheme,
    /// `a_kk`.
    pub a_self: f64,
    /// `a_kj` for every other user in index order (zeros allowed).
    pub a_cross: Vec<f64>,
}

/// Cross coupling between desired user `k` and interferer `j`.
pub fn cross_coupling(scheme: Scheme, k: &UserLink, j: &UserLink, config: &SystemConfig) -> Result<f64> {
    let d = relative_delay(k.code.start(), j.code.start(), config.frame_samples(), config.placement);
    let taps = k.channel.len().max(j.channel.len());
    if !windows_overlap(d, taps) {
        return Ok(0.0);
    }
    match scheme {
        Scheme::Ar => ar_cross_coupling(&k.estimate, &j.channel, d),
        Scheme::Tr => tr_cross_coupling(&j.channel, &j.estimate, d),
    }
}

/// All couplings seen by user `k`.
pub fn couplings(scheme: Scheme, users: &[UserLink], k: usize, config: &SystemConfig) -> Result<CouplingSample> {
    let me = users
        .get(k)
        .ok_or_else(|| Error::InvalidParameter(format!("user index {k} out of range")))?;
    let a_self = self_coupling(&me.channel, &me.estimate)?;
    let mut a_cross = Vec::with_capacity(users.len().saturating_sub(1));
    for (j, other) in users.iter().enumerate() {
        if j != k {
            a_cross.push(cross_coupling(scheme, me, other, config)?);
        }
    }
    Ok(CouplingSample {
        scheme,
        a_self,
        a_cross,
    })
}

/// Decision statistic split into its three terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionVariable {
    pub z: f64,
    pub signal: f64,
    pub interference: f64,
    pub noise: f64,
}

impl DecisionVariable {
    pub fn new(signal: f64, interference: f64, noise: f64) -> Self {
        DecisionVariable {
            z: signal + interference + noise,
            signal,
            interference,
            noise,
        }
    }
}

fn check_config(users: &[UserLink], symbols: &[f64], config: &SystemConfig) -> Result<()> {
    config.validate()?;
    if users.len() != symbols.len() {
        return Err(Error::InvalidParameter(format!(
            "{} users but {} symbols",
            users.len(),
            symbols.len()
        )));
    }
    if users.len() != config.users {
        return Err(Error::InvalidParameter(format!(
            "config has K = {} but {} users were given",
            config.users,
            users.len()
        )));
    }
    for u in users {
        if u.channel.len() != config.tap_count() || u.estimate.len() != config.tap_count() {
            return Err(Error::InvalidParameter(format!(
                "channel length {} does not match (L + 1) * iota = {}",
                u.channel.len(),
                config.tap_count()
            )));
        }
        if u.code.frame_samples() != config.frame_samples() {
            return Err(Error::InvalidParameter("code frame does not match N * iota".into()));
        }
    }
    Ok(())
}

/// Decision variable for user `k` with an explicit noise value.
pub fn decision_variable_with_noise(
    scheme: Scheme,
    config: &SystemConfig,
    symbols: &[f64],
    users: &[UserLink],
    k: usize,
    noise: f64,
) -> Result<DecisionVariable> {
    check_config(users, symbols, config)?;
    let c = couplings(scheme, users, k, config)?;
    let signal = c.a_self * symbols[k];
    let interference: f64 = symbols
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .zip(&c.a_cross)
        .map(|((_, b), a)| a * b)
        .sum();
    Ok(DecisionVariable::new(signal, interference, noise))
}

/// Decision variable for user `k` with `nu ~ N(0, noise_var)` drawn from
/// `noise_seed`.
pub fn decision_variable(
    scheme: Scheme,
    config: &SystemConfig,
    symbols: &[f64],
    users: &[UserLink],
    k: usize,
    noise_seed: u64,
) -> Result<DecisionVariable> {
    let sd = config.noise_var.sqrt();
    let noise = Normal::new(0.0, sd)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .sample(&mut rng::seeded(noise_seed));
    decision_variable_with_noise(scheme, config, symbols, users, k, noise)
}

/// Large-system overlap probability `(2(L + 1) iota - 1) / (N iota)`, capped
/// at one.
pub fn overlap_probability(chips: usize, channel_chips: usize, iota: usize) -> f64 {
    let window = 2 * (channel_chips + 1) * iota - 1;
    (window as f64 / (chips * iota) as f64).min(1.0)
}

/// Exact overlap probability by enumerating every `(hop, offset)` pair of two
/// users.
pub fn exact_overlap_probability(chips: usize, channel_chips: usize, iota: usize, placement: Placement) -> f64 {
    let taps = (channel_chips + 1) * iota;
    let frame = chips * iota;
    let mut hits = 0u64;
    let mut total = 0u64;
    for hk in 1..=chips {
        for lk in 1..=iota {
            let xk = SpreadingVector::new(hk, lk, chips, iota).expect("in range");
            for hj in 1..=chips {
                for lj in 1..=iota {
                    let xj = SpreadingVector::new(hj, lj, chips, iota).expect("in range");
                    let d = relative_delay(xk.start(), xj.start(), frame, placement);
                    total += 1;
                    if windows_overlap(d, taps) {
                        hits += 1;
                    }
                }
            }
        }
    }
    hits as f64 / total as f64
}
