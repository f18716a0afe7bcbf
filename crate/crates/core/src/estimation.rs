//! PN training sequences and linear channel estimation.
//!
//! Training matrices are never formed: `Y^T y` is a correlation and `Y^T Y`
//! is assembled from pairwise sequence correlations.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use crate::signal::{convolve, gaussian_error, SystemConfig};
use crate::{Error, Result};

/// Maximal-length feedback taps (1-based register positions) for m = 2..=20.
const MSEQ_TAPS: [&[u32]; 19] = [
    &[2, 1],
    &[3, 2],
    &[4, 3],
    &[5, 3],
    &[6, 5],
    &[7, 6],
    &[8, 6, 5, 4],
    &[9, 5],
    &[10, 7],
    &[11, 9],
    &[12, 6, 4, 1],
    &[13, 4, 3, 1],
    &[14, 5, 3, 1],
    &[15, 14],
    &[16, 15, 13, 4],
    &[17, 14],
    &[18, 11],
    &[19, 6, 2, 1],
    &[20, 17],
];

/// Antipodal training sequence `phi` in `{-A, +A}^Nt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSequence {
    signs: Vec<i8>,
    amplitude: f64,
}

impl TrainingSequence {
    pub fn new(signs: Vec<i8>, amplitude: f64) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::InvalidParameter("empty training sequence".into()));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter("training symbols must be +-1".into()));
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("amplitude {amplitude} must be > 0")));
        }
        Ok(TrainingSequence { signs, amplitude })
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Result<Self> {
        Self::new(std::mem::take(&mut self.signs), amplitude)
    }

    pub fn symbols(&self) -> Vec<f64> {
        self.signs.iter().map(|&s| s as f64 * self.amplitude).collect()
    }

    /// `A^2 Nt`.
    pub fn energy(&self) -> f64 {
        self.amplitude * self.amplitude * self.len() as f64
    }

    /// `upsilon = phi (x) e_1^iota`, length `Nt * iota`.
    pub fn upsampled(&self, iota: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.len() * iota];
        for (i, s) in self.symbols().into_iter().enumerate() {
            v[i * iota] = s;
        }
        v
    }

    /// Sequence rotated left by `shift` symbols.
    pub fn cyclic_shift(&self, shift: usize) -> Self {
        let mut signs = self.signs.clone();
        let n = signs.len();
        signs.rotate_left(shift % n);
        TrainingSequence {
            signs,
            amplitude: self.amplitude,
        }
    }

    /// Periodic autocorrelation `rho[i] = sum_n phi[n] phi[(n + i) mod Nt]`.
    pub fn periodic_acf(&self) -> Vec<f64> {
        let n = self.len();
        let a2 = self.amplitude * self.amplitude;
        (0..n)
            .map(|i| {
                let s: i64 = (0..n).map(|k| (self.signs[k] * self.signs[(k + i) % n]) as i64).sum();
                a2 * s as f64
            })
            .collect()
    }
}

/// Unit-amplitude m-sequence of length `2^m - 1` from a Fibonacci LFSR.
/// `seed_state` selects the starting phase; zero is mapped to one.
pub fn gen_mseq(m: u32, seed_state: u32) -> Result<TrainingSequence> {
    if !(2..=20).contains(&m) {
        return Err(Error::UnsupportedRegister(m));
    }
    let taps = MSEQ_TAPS[(m - 2) as usize];
    let mask = (1u32 << m) - 1;
    let mut state = seed_state & mask;
    if state == 0 {
        state = 1;
    }
    let n = (1usize << m) - 1;
    let mut signs = Vec::with_capacity(n);
    for _ in 0..n {
        let out = (state >> (m - 1)) & 1;
        signs.push(if out == 1 { -1 } else { 1 });
        let fb = taps.iter().fold(0, |acc, &t| acc ^ ((state >> (t - 1)) & 1));
        state = ((state << 1) | fb) & mask;
    }
    TrainingSequence::new(signs, 1.0)
}

/// Downlink training burst: `upsilon` preceded by its last `L iota` samples as
/// a cyclic prefix, `(Nt + L) iota` samples in total.
pub fn dl_training_burst(training: &TrainingSequence, config: &SystemConfig) -> Vec<f64> {
    let u = training.upsampled(config.iota);
    let cp = (config.channel_chips * config.iota).min(u.len());
    let mut x = u[u.len() - cp..].to_vec();
    x.extend_from_slice(&u);
    x
}

/// Noiseless downlink observation of the cyclic-prefixed burst, `(Nt + L) iota`
/// samples.
pub fn dl_training_response(training: &TrainingSequence, channel: &[f64], config: &SystemConfig) -> Vec<f64> {
    let mut y = convolve(&dl_training_burst(training, config), channel);
    y.truncate(received_len(training, config));
    y
}

/// Noisy downlink observation with `N(0, noise_var)` samples.
pub fn receive_dl_training<R: Rng + ?Sized>(
    training: &TrainingSequence,
    channel: &[f64],
    config: &SystemConfig,
    rng: &mut R,
) -> Vec<f64> {
    let mut y = dl_training_response(training, channel, config);
    add_noise(&mut y, config.noise_var, rng);
    y
}

/// Noiseless uplink observation `upsilon * c` (no prefix), truncated to
/// `(Nt + L) iota` samples; the remaining tail is identically zero.
pub fn ul_training_response(training: &TrainingSequence, channel: &[f64], config: &SystemConfig) -> Vec<f64> {
    let mut y = convolve(&training.upsampled(config.iota), channel);
    y.truncate(received_len(training, config));
    y
}

fn add_noise<R: Rng + ?Sized>(y: &mut [f64], var: f64, rng: &mut R) {
    let noise = gaussian_error(y.len(), var, rng);
    for (yi, n) in y.iter_mut().zip(noise) {
        *yi += n;
    }
}

fn received_len(training: &TrainingSequence, config: &SystemConfig) -> usize {
    (training.len() + config.channel_chips) * config.iota
}

/// `sum_m u[m] y[m + lag]` over the valid range, skipping zero entries of `u`.
fn correlate_at(u: &[f64], y: &[f64], lag: usize, stride: usize) -> f64 {
    let mut s = 0.0;
    let mut m = 0;
    while m < u.len() && m + lag < y.len() {
        s += u[m] * y[m + lag];
        m += stride;
    }
    s
}

/// Downlink estimate and its per-tap error variance.
#[derive(Debug, Clone, PartialEq)]
pub struct DlEstimate {
    pub channel: Vec<f64>,
    pub error_var: f64,
}

/// Matched-filter estimate `c_hat = Y^T y / |upsilon|^2` on the prefix-free
/// part of a downlink burst. The circular correlation leaves a bias of
/// `-1/Nt` times the other taps on the same sub-chip phase.
pub fn dl_estimate(received: &[f64], training: &TrainingSequence, config: &SystemConfig) -> Result<DlEstimate> {
    let expected = received_len(training, config);
    if received.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: received.len(),
        });
    }
    let u = training.upsampled(config.iota);
    let m = u.len();
    let taps = config.tap_count();
    if taps > m {
        return Err(Error::InvalidParameter(format!(
            "training of {m} samples is shorter than the {taps}-tap channel"
        )));
    }
    let body = &received[config.channel_chips * config.iota..];
    let energy = training.energy();
    let channel = (0..taps)
        .map(|l| {
            let mut s = 0.0;
            for n in (0..m).step_by(config.iota) {
                s += u[n] * body[(n + l) % m];
            }
            s / energy
        })
        .collect();
    Ok(DlEstimate {
        channel,
        error_var: config.noise_var / energy,
    })
}

/// Per-tap CSI error variance delivered by matched-filter training.
pub fn training_error_var(noise_var: f64, training_energy: f64) -> f64 {
    noise_var / training_energy
}

/// Linear estimator `(xi Y^T Y + zeta I)^-1 Y^T y`.
///
/// With `xi = 0` the matched filter output is scaled by `1 / (zeta |upsilon_k|^2)`
/// so every preset estimates the channel itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorKind {
    pub xi: f64,
    pub zeta: f64,
}

impl EstimatorKind {
    pub fn zf() -> Self {
        EstimatorKind { xi: 1.0, zeta: 0.0 }
    }

    pub fn rzf(z: f64) -> Self {
        EstimatorKind { xi: 1.0, zeta: z }
    }

    pub fn mmse(noise_var: f64) -> Self {
        EstimatorKind {
            xi: 1.0,
            zeta: noise_var,
        }
    }

    pub fn mf() -> Self {
        EstimatorKind { xi: 0.0, zeta: 1.0 }
    }

    /// Resolves `zf | rzf | mmse | mf`.
    pub fn from_name(name: &str, noise_var: f64, rzf_reg: f64) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "zf" => Ok(Self::zf()),
            "rzf" => Ok(Self::rzf(rzf_reg)),
            "mmse" => Ok(Self::mmse(noise_var)),
            "mf" => Ok(Self::mf()),
            other => Err(Error::InvalidParameter(format!(
                "unknown estimator `{other}` (expected zf, rzf, mmse or mf)"
            ))),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.xi >= 0.0 && self.zeta >= 0.0) || (self.xi == 0.0 && self.zeta == 0.0) {
            return Err(Error::InvalidParameter(format!(
                "estimator parameters (xi, zeta) = ({}, {}) are invalid",
                self.xi, self.zeta
            )));
        }
        Ok(())
    }
}

/// Uplink estimates for all users.
#[derive(Debug, Clone, PartialEq)]
pub struct UlEstimate {
    pub channels: Vec<Vec<f64>>,
    /// True when `Y^T Y` was replaced by its diagonal.
    pub fast_path: bool,
}

/// Reusable uplink estimator: the normal matrix is factored once.
#[derive(Debug, Clone)]
pub struct UlEstimator {
    trainings: Vec<Vec<f64>>,
    energies: Vec<f64>,
    kind: EstimatorKind,
    taps: usize,
    iota: usize,
    rows: usize,
    factor: Option<Cholesky<f64, nalgebra::Dyn>>,
}

impl UlEstimator {
    /// `fast_path` uses `Y^T Y ~ diag(|upsilon_k|^2)`.
    pub fn new(
        trainings: &[TrainingSequence],
        kind: EstimatorKind,
        config: &SystemConfig,
        fast_path: bool,
    ) -> Result<Self> {
        kind.validate()?;
        let first = trainings
            .first()
            .ok_or_else(|| Error::InvalidParameter("no training sequences".into()))?;
        if trainings.iter().any(|t| t.len() != first.len()) {
            return Err(Error::InvalidParameter("training sequences differ in length".into()));
        }
        let taps = config.tap_count();
        let k = trainings.len();
        let rows = received_len(first, config);
        let ups: Vec<Vec<f64>> = trainings.iter().map(|t| t.upsampled(config.iota)).collect();
        let energies: Vec<f64> = trainings.iter().map(|t| t.energy()).collect();

        let factor = if kind.xi == 0.0 || fast_path {
            None
        } else {
            if rows < k * taps {
                return Err(Error::TrainingRankDeficient(format!(
                    "{rows} observations for {} unknowns",
                    k * taps
                )));
            }
            let n = k * taps;
            let mut g = DMatrix::<f64>::zeros(n, n);
            for a in 0..k {
                for b in a..k {
                    // r_ab(d) = sum_m u_a[m] u_b[m + d], d in (-taps, taps)
                    let r: Vec<f64> = (0..2 * taps - 1)
                        .map(|idx| {
                            let d = idx as i64 - (taps as i64 - 1);
                            if d >= 0 {
                                correlate_at(&ups[a], &ups[b], d as usize, 1)
                            } else {
                                correlate_at(&ups[b], &ups[a], (-d) as usize, 1)
                            }
                        })
                        .collect();
                    for i in 0..taps {
                        for j in 0..taps {
                            let v = kind.xi * r[i + taps - 1 - j];
                            g[(a * taps + i, b * taps + j)] = v;
                            g[(b * taps + j, a * taps + i)] = v;
                        }
                    }
                }
            }
            for i in 0..n {
                g[(i, i)] += kind.zeta;
            }
            let chol = Cholesky::new(g)
                .ok_or_else(|| Error::TrainingRankDeficient("normal matrix is not positive definite".into()))?;
            let diag = chol.l_dirty().diagonal();
            let (lo, hi) = diag
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x * x), hi.max(x * x)));
            if lo < 1e-12 * hi {
                return Err(Error::TrainingRankDeficient(format!("pivot ratio {:.3e}", lo / hi)));
            }
            Some(chol)
        };
        Ok(UlEstimator {
            trainings: ups,
            energies,
            kind,
            taps,
            iota: config.iota,
            rows,
            factor,
        })
    }

    pub fn estimate(&self, received: &[f64]) -> Result<UlEstimate> {
        if received.len() != self.rows {
            return Err(Error::LengthMismatch {
                expected: self.rows,
                actual: received.len(),
            });
        }
        let k = self.trainings.len();
        let mut rhs = DVector::<f64>::zeros(k * self.taps);
        for (a, u) in self.trainings.iter().enumerate() {
            for i in 0..self.taps {
                rhs[a * self.taps + i] = correlate_at(u, received, i, self.iota);
            }
        }
        let sol = match &self.factor {
            Some(chol) => chol.solve(&rhs),
            None => {
                let mut v = rhs;
                for a in 0..k {
                    let scale = if self.kind.xi == 0.0 {
                        self.kind.zeta * self.energies[a]
                    } else {
                        self.kind.xi * self.energies[a] + self.kind.zeta
                    };
                    for i in 0..self.taps {
                        v[a * self.taps + i] /= scale;
                    }
                }
                v
            }
        };
        let channels = (0..k)
            .map(|a| sol.as_slice()[a * self.taps..(a + 1) * self.taps].to_vec())
            .collect();
        Ok(UlEstimate {
            channels,
            fast_path: self.factor.is_none() && self.kind.xi != 0.0,
        })
    }
}

/// One-shot uplink estimate.
pub fn ul_estimate(
    received: &[f64],
    trainings: &[TrainingSequence],
    kind: EstimatorKind,
    config: &SystemConfig,
) -> Result<UlEstimate> {
    UlEstimator::new(trainings, kind, config, false)?.estimate(received)
}

/// Superposed uplink training observation plus noise.
pub fn receive_ul_training<R: Rng + ?Sized>(
    trainings: &[TrainingSequence],
    channels: &[Vec<f64>],
    config: &SystemConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let first = trainings
        .first()
        .ok_or_else(|| Error::InvalidParameter("no training sequences".into()))?;
    if trainings.len() != channels.len() {
        return Err(Error::InvalidParameter(
            "one channel per training sequence required".into(),
        ));
    }
    let mut y = vec![0.0; received_len(first, config)];
    for (t, c) in trainings.iter().zip(channels) {
        for (yi, v) in y.iter_mut().zip(ul_training_response(t, c, config)) {
            *yi += v;
        }
    }
    add_noise(&mut y, config.noise_var, rng);
    Ok(y)
}

/// Uplink training set: random distinct cyclic shifts of one m-sequence.
pub fn ul_training_set<R: Rng + ?Sized>(
    m: u32,
    users: usize,
    amplitude: f64,
    rng: &mut R,
) -> Result<Vec<TrainingSequence>> {
    let base = gen_mseq(m, 1)?.with_amplitude(amplitude)?;
    if users > base.len() {
        return Err(Error::InvalidParameter(format!(
            "{users} users exceed the {} distinct shifts",
            base.len()
        )));
    }
    let shifts = rand::seq::index::sample(rng, base.len(), users);
    Ok(shifts.iter().map(|s| base.cyclic_shift(s)).collect())
}

/// One phase of the frame, in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    pub name: &'static str,
    pub start: usize,
    pub len: usize,
}

/// Four-phase frame: DL training, UL training, data, postamble, with `L iota`
/// guards.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSchedule {
    pub phases: Vec<Phase>,
    /// Data samples over all uplink-occupied samples.
    pub data_fraction: f64,
}

impl FrameSchedule {
    pub fn total(&self) -> usize {
        self.phases.last().map_or(0, |p| p.start + p.len)
    }
}

pub fn frame_budget(
    dl_training: usize,
    ul_training: usize,
    data: usize,
    channel_chips: usize,
    iota: usize,
) -> FrameSchedule {
    let guard = channel_chips * iota;
    let spec = [
        ("dl_training", dl_training * iota),
        ("dl_guard", guard),
        ("ul_training", ul_training * iota),
        ("ul_guard", guard),
        ("data", data * iota),
        ("postamble", guard),
    ];
    let mut start = 0;
    let phases = spec
        .iter()
        .map(|&(name, len)| {
            let p = Phase { name, start, len };
            start += len;
            p
        })
        .collect();
    let ul_total = (ul_training + data) * iota + 2 * guard;
    let data_fraction = if ul_total == 0 {
        1.0
    } else {
        (data * iota) as f64 / ul_total as f64
    };
    FrameSchedule { phases, data_fraction }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelModel;
    use crate::rng;
    use crate::signal::Placement;
    use proptest::prelude::*;

    fn cfg(l: usize, iota: usize, noise_var: f64) -> SystemConfig {
        SystemConfig {
            chips_per_symbol: 64,
            users: 1,
            iota,
            bandwidth_hz: 1e9,
            channel_chips: l,
            symbol_energy: 1.0,
            noise_var,
            csi_error_var: 0.0,
            placement: Placement::Circular,
        }
    }

    fn circular_acf_oracle(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n).map(|i| (0..n).map(|k| x[k] * x[(k + i) % n]).sum()).collect()
    }

    #[test]
    fn mseq_small_examples() {
        for m in [2u32, 3] {
            let s = gen_mseq(m, 1).unwrap().with_amplitude(1.5).unwrap();
            let n = (1 << m) - 1;
            assert_eq!(s.len(), n);
            let acf = circular_acf_oracle(&s.symbols());
            assert!((acf[0] - 2.25 * n as f64).abs() < 1e-12);
            for v in &acf[1..] {
                assert!((v + s.energy() / n as f64).abs() < 1e-12);
            }
            assert_eq!(acf, s.periodic_acf());
        }
    }

    #[test]
    fn mseq_full_period_for_every_register() {
        for m in 2..=20u32 {
            let s = gen_mseq(m, 0x1234).unwrap();
            let n = s.len();
            // balance property: one more -1 (output bit 1) than +1
            let ones = s.signs.iter().filter(|&&x| x == -1).count();
            assert_eq!(ones, n / 2 + 1, "m = {m}");
            // maximal period: no shorter rotation reproduces the sequence
            let mask = (1u32 << m) - 1;
            let mut state = 1u32;
            let taps = MSEQ_TAPS[(m - 2) as usize];
            let mut period = 0usize;
            loop {
                let fb = taps.iter().fold(0, |acc, &t| acc ^ ((state >> (t - 1)) & 1));
                state = ((state << 1) | fb) & mask;
                period += 1;
                if state == 1 {
                    break;
                }
            }
            assert_eq!(period, n, "m = {m}");
        }
    }

    #[test]
    fn mseq_acf_identity_up_to_m12() {
        for m in 2..=12u32 {
            let s = gen_mseq(m, 5).unwrap();
            let acf = s.periodic_acf();
            let n = s.len() as f64;
            assert_eq!(acf[0], n);
            assert!(acf[1..].iter().all(|&v| v == -1.0), "m = {m}");
        }
    }

    #[test]
    fn unsupported_register() {
        assert!(matches!(gen_mseq(1, 1), Err(Error::UnsupportedRegister(1))));
        assert!(matches!(gen_mseq(21, 1), Err(Error::UnsupportedRegister(21))));
    }

    #[test]
    fn dl_noiseless_delta_channel() {
        let config = cfg(50, 1, 0.0);
        let t = gen_mseq(8, 1).unwrap();
        let mut c = vec![0.0; 51];
        c[0] = 1.0;
        let y = dl_training_response(&t, &c, &config);
        let est = dl_estimate(&y, &t, &config).unwrap();
        assert!((est.channel[0] - 1.0).abs() < 1e-12);
        for v in &est.channel[1..] {
            assert!((v + 1.0 / 255.0).abs() < 1e-12);
        }
        let max_err = est
            .channel
            .iter()
            .zip(&c)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= 50.0 / 255.0, "{max_err}");
        assert_eq!(est.error_var, 0.0);
    }

    #[test]
    fn dl_matches_circulant_oracle() {
        // c_hat = Y^T y / |u|^2 with the circulant Y built explicitly
        let config = cfg(3, 2, 0.0);
        let t = gen_mseq(3, 2).unwrap();
        let c = vec![0.5, -0.2, 0.1, 0.7, 0.3, -0.4, 0.2, 0.1];
        let u = t.upsampled(2);
        let m = u.len();
        let mut y_mat = DMatrix::<f64>::zeros(m, 8);
        for j in 0..8 {
            for n in 0..m {
                y_mat[(n, j)] = u[(n + m - j) % m];
            }
        }
        let y = dl_training_response(&t, &c, &config);
        assert_eq!(y.len(), (7 + 3) * 2);
        let body = DVector::from_vec(y[6..].to_vec());
        // the prefix makes the observation exactly circulant
        let circ = &y_mat * DVector::from_vec(c.clone());
        for n in 0..m {
            assert!((body[n] - circ[n]).abs() < 1e-14);
        }
        let direct = y_mat.transpose() * body / t.energy();
        let est = dl_estimate(&y, &t, &config).unwrap();
        for j in 0..8 {
            assert!((est.channel[j] - direct[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn dl_rejects_channel_longer_than_training() {
        let config = cfg(10, 1, 0.0);
        let t = gen_mseq(3, 1).unwrap();
        assert!(dl_estimate(&[0.0; 17], &t, &config).is_err());
    }

    #[test]
    fn dl_length_mismatch() {
        let config = cfg(2, 1, 0.0);
        let t = gen_mseq(3, 1).unwrap();
        assert!(matches!(
            dl_estimate(&[0.0; 5], &t, &config),
            Err(Error::LengthMismatch { expected: 9, actual: 5 })
        ));
    }

    #[test]
    fn dl_error_variance_law() {
        let config = cfg(4, 1, 0.5);
        let t = gen_mseq(6, 1).unwrap().with_amplitude(0.8).unwrap();
        let c = vec![0.8, 0.0, 0.6, 0.0, 0.0];
        let clean = dl_estimate(&dl_training_response(&t, &c, &config), &t, &config).unwrap();
        let mut r = rng::seeded(4);
        let mut acc = 0.0;
        let trials = 4000;
        for _ in 0..trials {
            let y = receive_dl_training(&t, &c, &config, &mut r);
            let e = dl_estimate(&y, &t, &config).unwrap();
            acc += e
                .channel
                .iter()
                .zip(&clean.channel)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
        }
        let var = acc / (trials * 5) as f64;
        let want = 0.5 / t.energy();
        assert!((var / want - 1.0).abs() < 0.05, "{var} vs {want}");
        assert_eq!(clean.error_var, want);
    }

    #[test]
    fn doubling_amplitude_quarters_error_var() {
        let config = cfg(1, 1, 1.0);
        let t = gen_mseq(4, 1).unwrap();
        let t2 = t.clone().with_amplitude(2.0).unwrap();
        let y = vec![0.0; 16];
        let a = dl_estimate(&y, &t, &config).unwrap().error_var;
        let b = dl_estimate(&y, &t2, &config).unwrap().error_var;
        assert!((a / b - 4.0).abs() < 1e-12);
    }

    fn ul_setup(k: usize, l: usize, iota: usize, seed: u64) -> (SystemConfig, Vec<TrainingSequence>, Vec<Vec<f64>>) {
        let config = cfg(l, iota, 0.0);
        let mut r = rng::seeded(seed);
        let ts = ul_training_set(7, k, 1.0, &mut r).unwrap();
        let model = ChannelModel::ExponentialGaussian {
            taps: config.tap_count(),
            decay_taps: 3.0,
        };
        let cs = (0..k).map(|_| model.draw(&mut r).unwrap().into_taps()).collect();
        (config, ts, cs)
    }

    #[test]
    fn zf_noiseless_exact_recovery() {
        let (config, ts, cs) = ul_setup(3, 5, 2, 1);
        let y = receive_ul_training(&ts, &cs, &config, &mut rng::seeded(0)).unwrap();
        let est = ul_estimate(&y, &ts, EstimatorKind::zf(), &config).unwrap();
        assert!(!est.fast_path);
        for (e, c) in est.channels.iter().zip(&cs) {
            for (a, b) in e.iter().zip(c) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        let mmse = ul_estimate(&y, &ts, EstimatorKind::mmse(0.0), &config).unwrap();
        assert_eq!(mmse.channels, est.channels);
    }

    #[test]
    fn rzf_tends_to_zf() {
        let (mut config, ts, cs) = ul_setup(2, 4, 1, 2);
        config.noise_var = 0.1;
        let y = receive_ul_training(&ts, &cs, &config, &mut rng::seeded(3)).unwrap();
        let zf = ul_estimate(&y, &ts, EstimatorKind::zf(), &config).unwrap();
        let rzf = ul_estimate(&y, &ts, EstimatorKind::rzf(1e-9), &config).unwrap();
        for (a, b) in zf.channels.concat().iter().zip(rzf.channels.concat()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn zf_rank_deficient() {
        let config = cfg(10, 1, 0.0);
        let ts: Vec<_> = (0..3).map(|s| gen_mseq(3, 1).unwrap().cyclic_shift(s)).collect();
        let err = UlEstimator::new(&ts, EstimatorKind::zf(), &config, false).unwrap_err();
        assert!(matches!(err, Error::TrainingRankDeficient(_)));
        assert!(err.to_string().contains("rzf"));
        // identical sequences make the normal matrix singular
        let config = cfg(1, 1, 0.0);
        let same = vec![gen_mseq(5, 1).unwrap(); 2];
        assert!(UlEstimator::new(&same, EstimatorKind::zf(), &config, false).is_err());
        assert!(UlEstimator::new(&same, EstimatorKind::rzf(0.1), &config, false).is_ok());
    }

    #[test]
    fn zf_unbiased() {
        let (mut config, ts, cs) = ul_setup(2, 3, 1, 7);
        config.noise_var = 0.2;
        let est = UlEstimator::new(&ts, EstimatorKind::zf(), &config, false).unwrap();
        let mut r = rng::seeded(9);
        let trials = 2000;
        let mut sum = [0.0; 8];
        let mut sq = [0.0; 8];
        for _ in 0..trials {
            let y = receive_ul_training(&ts, &cs, &config, &mut r).unwrap();
            let e = est.estimate(&y).unwrap().channels.concat();
            for (i, (a, b)) in e.iter().zip(cs.concat()).enumerate() {
                sum[i] += a - b;
                sq[i] += (a - b).powi(2);
            }
        }
        for i in 0..8 {
            let mean = sum[i] / trials as f64;
            let se = (sq[i] / trials as f64 - mean * mean).sqrt() / (trials as f64).sqrt();
            assert!(mean.abs() < 3.5 * se, "tap {i}: {mean} vs {se}");
        }
    }

    #[test]
    fn mf_matches_direct_formula() {
        let (mut config, ts, cs) = ul_setup(2, 4, 2, 5);
        config.noise_var = 0.3;
        let y = receive_ul_training(&ts, &cs, &config, &mut rng::seeded(1)).unwrap();
        let mf = ul_estimate(&y, &ts, EstimatorKind::mf(), &config).unwrap();
        let taps = config.tap_count();
        for (k, t) in ts.iter().enumerate() {
            let u = t.upsampled(2);
            for l in 0..taps {
                let direct: f64 = (0..u.len())
                    .filter(|n| n + l < y.len())
                    .map(|n| u[n] * y[n + l])
                    .sum::<f64>()
                    / t.energy();
                assert!((mf.channels[k][l] - direct).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn mf_error_variance_with_long_training() {
        // single user, long PN: per-tap error variance tends to sigma^2 / |u|^2
        let (mut config, ts, cs) = ul_setup(1, 2, 1, 8);
        config.noise_var = 0.4;
        let est = UlEstimator::new(&ts, EstimatorKind::mf(), &config, false).unwrap();
        let clean = est
            .estimate(&ul_training_response(&ts[0], &cs[0], &config))
            .unwrap()
            .channels
            .concat();
        let mut r = rng::seeded(2);
        let trials = 4000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let y = receive_ul_training(&ts, &cs, &config, &mut r).unwrap();
            let e = est.estimate(&y).unwrap().channels.concat();
            acc += e.iter().zip(&clean).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        let var = acc / (trials * clean.len()) as f64;
        let want = 0.4 / ts[0].energy();
        assert!((var / want - 1.0).abs() < 0.06, "{var} vs {want}");
    }

    #[test]
    fn fast_path_is_flagged() {
        let (config, ts, _) = ul_setup(2, 2, 1, 6);
        let est = UlEstimator::new(&ts, EstimatorKind::zf(), &config, true).unwrap();
        let y = vec![0.0; 127 + 2];
        assert!(est.estimate(&y).unwrap().fast_path);
    }

    #[test]
    fn estimator_names() {
        assert_eq!(EstimatorKind::from_name("ZF", 0.3, 0.1).unwrap(), EstimatorKind::zf());
        assert_eq!(
            EstimatorKind::from_name("mmse", 0.3, 0.1).unwrap(),
            EstimatorKind::mmse(0.3)
        );
        assert_eq!(
            EstimatorKind::from_name("rzf", 0.3, 0.1).unwrap(),
            EstimatorKind::rzf(0.1)
        );
        assert_eq!(
            EstimatorKind::from_name("mf", 0.3, 0.1).unwrap(),
            EstimatorKind { xi: 0.0, zeta: 1.0 }
        );
        assert!(EstimatorKind::from_name("ls", 0.3, 0.1).is_err());
    }

    #[test]
    fn frame_budget_examples() {
        let f = frame_budget(0, 0, 100, 0, 1);
        assert_eq!(f.data_fraction, 1.0);
        let f = frame_budget(127, 255, 2000, 50, 1);
        assert!((f.data_fraction - 2000.0 / (255.0 + 50.0 + 2000.0 + 50.0)).abs() < 1e-15);
        for name in ["dl_guard", "ul_guard", "postamble"] {
            assert_eq!(f.phases.iter().find(|p| p.name == name).unwrap().len, 50);
        }
        assert_eq!(f.total(), 127 + 255 + 2000 + 150);
        let f2 = frame_budget(127, 255, 2000, 50, 3);
        assert_eq!(f2.total(), 3 * f.total());
        assert_eq!(f2.data_fraction, f.data_fraction);
    }

    proptest! {
        #[test]
        fn cyclic_shifts_keep_acf(m in 2u32..9, shift in 0usize..600) {
            let s = gen_mseq(m, 1).unwrap();
            prop_assert_eq!(s.periodic_acf(), s.cyclic_shift(shift).periodic_acf());
        }

        #[test]
        fn dl_estimate_is_linear(seed in 0u64..200, scale in -3.0f64..3.0) {
            let config = cfg(3, 1, 0.0);
            let t = gen_mseq(5, 1).unwrap();
            let mut r = rng::seeded(seed);
            let y: Vec<f64> = gaussian_error(34, 1.0, &mut r);
            let ys: Vec<f64> = y.iter().map(|v| v * scale).collect();
            let a = dl_estimate(&y, &t, &config).unwrap().channel;
            let b = dl_estimate(&ys, &t, &config).unwrap().channel;
            for (x, z) in a.iter().zip(&b) {
                prop_assert!((x * scale - z).abs() < 1e-12);
            }
        }
    }
}
