//! Monte-Carlo experiments: error probability over SNR grids, the
//! single-user TR/AR equivalence check, and empirical coupling laws.
//!
//! Each trial draws everything it needs from its own stream keyed by
//! `(seed, trial)`. Within a trial the same channels, codes, symbols and unit
//! noise are reused at every SNR point, so curves are smooth and SNR points
//! are directly comparable. Early stopping is decided only at fixed batch
//! boundaries, which keeps results independent of the worker count.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::ChannelModel;
use crate::estimation::{dl_estimate, dl_training_response, EstimatorKind, TrainingSequence, UlEstimator};
use crate::signal::{draw_th_code, gaussian_error, relative_delay, SystemConfig};
use crate::stats::{ks_two_sample, moments, Histogram, KsResult, Moments};
use crate::transceiver::{ar_cross_coupling, self_coupling, tr_cross_coupling, windows_overlap};
use crate::{rng, Error, Result, Scheme};

/// Trials per scheduling batch.
const BATCH: u64 = 4096;
/// Errors after which an SNR point may stop (10% relative standard error).
pub const TARGET_ERRORS: u64 = 100;

/// Where channel estimates come from.
#[derive(Debug, Clone, PartialEq)]
pub enum CsiSource {
    Perfect,
    /// Additive `N(0, var)` per tap, independent of SNR.
    Direct {
        var: f64,
    },
    /// Additive Gaussian error with variance `sigma_N^2 / energy` at each SNR.
    TrainingDerived {
        energy: f64,
    },
    /// End-to-end estimation from a noisy training burst at the data SNR: DL
    /// matched filter for TR, single-user UL zero forcing for AR.
    Training {
        sequence: TrainingSequence,
    },
}

impl CsiSource {
    pub fn from_var(var: f64) -> Self {
        if var == 0.0 {
            CsiSource::Perfect
        } else {
            CsiSource::Direct { var }
        }
    }

    /// Per-tap error variance at noise variance `noise_var`.
    pub fn error_var(&self, noise_var: f64) -> f64 {
        match self {
            CsiSource::Perfect => 0.0,
            CsiSource::Direct { var } => *var,
            CsiSource::TrainingDerived { energy } => noise_var / energy,
            CsiSource::Training { sequence } => noise_var / sequence.energy(),
        }
    }

    fn depends_on_snr(&self) -> bool {
        matches!(self, CsiSource::TrainingDerived { .. } | CsiSource::Training { .. })
    }

    fn validate(&self) -> Result<()> {
        match self {
            CsiSource::Direct { var } if !(*var >= 0.0 && var.is_finite()) => Err(Error::InvalidParameter(format!(
                "CSI error variance {var} must be >= 0"
            ))),
            CsiSource::TrainingDerived { energy } if !(*energy > 0.0) => {
                Err(Error::InvalidParameter(format!("training energy {energy} must be > 0")))
            }
            _ => Ok(()),
        }
    }
}

/// Error-probability experiment for one scheme.
#[derive(Debug, Clone)]
pub struct BerExperiment {
    /// `noise_var` is ignored: it is set from each SNR point.
    pub config: SystemConfig,
    pub channel: ChannelModel,
    pub snr_grid_db: Vec<f64>,
    pub trials: u64,
    pub scheme: Scheme,
    pub seed: u64,
    pub csi: CsiSource,
    /// Stop an SNR point once it has [`TARGET_ERRORS`] errors.
    pub early_stop: bool,
    /// TR only: scale the prefilter to unit energy. Turning this off gives a
    /// deliberately mismatched transmitter.
    pub normalize_prefilter: bool,
}

impl BerExperiment {
    /// Experiment with CSI errors of variance `config.csi_error_var`.
    pub fn new(
        config: SystemConfig,
        channel: ChannelModel,
        snr_grid_db: Vec<f64>,
        trials: u64,
        scheme: Scheme,
        seed: u64,
    ) -> Self {
        let csi = CsiSource::from_var(config.csi_error_var);
        BerExperiment {
            config,
            channel,
            snr_grid_db,
            trials,
            scheme,
            seed,
            csi,
            early_stop: true,
            normalize_prefilter: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.channel.validate()?;
        self.csi.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter("SNR grid must be non-empty and finite".into()));
        }
        if self.channel.tap_count() != self.config.tap_count() {
            return Err(Error::InvalidParameter(format!(
                "channel model has {} taps but the system expects (L + 1) * iota = {}",
                self.channel.tap_count(),
                self.config.tap_count()
            )));
        }
        if !(self.config.symbol_energy > 0.0) {
            return Err(Error::InvalidParameter("symbol energy must be > 0".into()));
        }
        Ok(())
    }

    fn noise_var(&self, snr_db: f64) -> f64 {
        self.config.symbol_energy * 10f64.powf(-snr_db / 10.0)
    }
}

/// One SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    /// CSI error variance in effect at this point.
    pub sigma_xi2: f64,
    pub pe: f64,
    /// `sqrt(pe (1 - pe) / trials)`.
    pub stderr: f64,
    pub trials: u64,
    pub errors: u64,
    /// Errors and trials split by the sign of the desired symbol, `[+, -]`.
    pub errors_by_sign: [u64; 2],
    pub trials_by_sign: [u64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerResult {
    pub scheme: Scheme,
    /// Interferers per chip, `(K - 1) / N`.
    pub beta: f64,
    pub iota: usize,
    pub points: Vec<BerPoint>,
}

/// Per-user estimation randomness, drawn once and rescaled per SNR.
#[derive(Debug, Clone)]
enum EstDraw {
    Exact,
    Gaussian(Vec<f64>),
    Training { clean: Vec<f64>, noise: Vec<f64> },
}

struct Interferer {
    d: i64,
    channel: Vec<f64>,
    est: EstDraw,
    sign: f64,
}

struct Trial {
    channel: Vec<f64>,
    est: EstDraw,
    sign: f64,
    interferers: Vec<Interferer>,
    nu: f64,
}

/// Precomputed linear maps for end-to-end training.
enum TrainingPlan {
    None,
    Dl(TrainingSequence),
    Ul(TrainingSequence, UlEstimator),
}

struct Runner<'a> {
    exp: &'a BerExperiment,
    plan: TrainingPlan,
    sqrt_e: f64,
}

impl<'a> Runner<'a> {
    fn new(exp: &'a BerExperiment) -> Result<Self> {
        exp.validate()?;
        let plan = match &exp.csi {
            CsiSource::Training { sequence } => match exp.scheme {
                Scheme::Tr => TrainingPlan::Dl(sequence.clone()),
                Scheme::Ar => {
                    let est =
                        UlEstimator::new(std::slice::from_ref(sequence), EstimatorKind::zf(), &exp.config, false)?;
                    TrainingPlan::Ul(sequence.clone(), est)
                }
            },
            _ => TrainingPlan::None,
        };
        Ok(Runner {
            exp,
            plan,
            sqrt_e: exp.config.symbol_energy.sqrt(),
        })
    }

    fn draw_est<R: Rng + ?Sized>(&self, channel: &[f64], rng: &mut R) -> Result<EstDraw> {
        let cfg = &self.exp.config;
        Ok(match (&self.exp.csi, &self.plan) {
            (CsiSource::Perfect, _) => EstDraw::Exact,
            (CsiSource::Direct { .. } | CsiSource::TrainingDerived { .. }, _) => {
                EstDraw::Gaussian(gaussian_error(channel.len(), 1.0, rng))
            }
            (_, TrainingPlan::Dl(seq)) => {
                let clean = dl_estimate(&dl_training_response(seq, channel, cfg), seq, cfg)?.channel;
                let n = gaussian_error((seq.len() + cfg.channel_chips) * cfg.iota, 1.0, rng);
                let noise = dl_estimate(&n, seq, cfg)?.channel;
                EstDraw::Training { clean, noise }
            }
            (_, TrainingPlan::Ul(seq, est)) => {
                let y = crate::estimation::ul_training_response(seq, channel, cfg);
                let clean = est.estimate(&y)?.channels.remove(0);
                let n = gaussian_error(y.len(), 1.0, rng);
                let noise = est.estimate(&n)?.channels.remove(0);
                EstDraw::Training { clean, noise }
            }
            (CsiSource::Training { .. }, TrainingPlan::None) => unreachable!("plan built from csi"),
        })
    }

    fn estimate(&self, channel: &[f64], est: &EstDraw, noise_sd: f64) -> Vec<f64> {
        match est {
            EstDraw::Exact => channel.to_vec(),
            EstDraw::Gaussian(g) => {
                let sd = match self.exp.csi {
                    CsiSource::Direct { var } => var.sqrt(),
                    CsiSource::TrainingDerived { energy } => noise_sd / energy.sqrt(),
                    _ => 0.0,
                };
                channel.iter().zip(g).map(|(c, e)| c + sd * e).collect()
            }
            EstDraw::Training { clean, noise } => clean.iter().zip(noise).map(|(c, n)| c + noise_sd * n).collect(),
        }
    }

    fn draw_trial(&self, index: u64) -> Result<Trial> {
        let cfg = &self.exp.config;
        let mut r = rng::stream(self.exp.seed, index);
        let channel = self.exp.channel.draw(&mut r)?.into_taps();
        let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
        let est = self.draw_est(&channel, &mut r)?;
        let me = draw_th_code(cfg.chips_per_symbol, cfg.iota, &mut r);
        let taps = cfg.tap_count();
        let mut interferers = Vec::new();
        for _ in 1..cfg.users {
            let code = draw_th_code(cfg.chips_per_symbol, cfg.iota, &mut r);
            let d = relative_delay(me.start(), code.start(), cfg.frame_samples(), cfg.placement);
            if !windows_overlap(d, taps) {
                continue;
            }
            let ch = self.exp.channel.draw(&mut r)?.into_taps();
            let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
            let est = match self.exp.scheme {
                Scheme::Tr => self.draw_est(&ch, &mut r)?,
                Scheme::Ar => EstDraw::Exact,
            };
            interferers.push(Interferer {
                d,
                channel: ch,
                est,
                sign,
            });
        }
        let nu = r.sample(StandardNormal);
        Ok(Trial {
            channel,
            est,
            sign,
            interferers,
            nu,
        })
    }

    /// Noise-free part of the decision statistic.
    fn signal_plus_interference(&self, t: &Trial, noise_sd: f64) -> Result<f64> {
        let est = self.estimate(&t.channel, &t.est, noise_sd);
        let unnormalized = self.exp.scheme == Scheme::Tr && !self.exp.normalize_prefilter;
        let gain = |e: &[f64]| -> f64 {
            if unnormalized {
                e.iter().map(|x| x * x).sum::<f64>().sqrt()
            } else {
                1.0
            }
        };
        let mut z = self_coupling(&t.channel, &est)? * gain(&est) * t.sign;
        for j in &t.interferers {
            let a = match self.exp.scheme {
                Scheme::Ar => ar_cross_coupling(&est, &j.channel, j.d)?,
                Scheme::Tr => {
                    let ej = self.estimate(&j.channel, &j.est, noise_sd);
                    tr_cross_coupling(&j.channel, &ej, j.d)? * gain(&ej)
                }
            };
            z += a * j.sign;
        }
        Ok(self.sqrt_e * z)
    }

    /// Decision statistics at the active SNR points.
    fn run_trial(&self, index: u64, active: &[usize], noise_sd: &[f64]) -> Result<(f64, Vec<f64>)> {
        let t = self.draw_trial(index)?;
        let fixed = if self.exp.csi.depends_on_snr() {
            None
        } else {
            Some(self.signal_plus_interference(&t, 0.0)?)
        };
        let mut zs = Vec::with_capacity(active.len());
        for &p in active {
            let s = match fixed {
                Some(s) => s,
                None => self.signal_plus_interference(&t, noise_sd[p])?,
            };
            zs.push(s + noise_sd[p] * t.nu);
        }
        Ok((t.sign, zs))
    }
}

struct Tally {
    errors: Vec<[u64; 2]>,
    trials: Vec<[u64; 2]>,
    z: Option<Vec<Vec<f64>>>,
}

fn simulate(exp: &BerExperiment, collect_z: bool) -> Result<(BerResult, Option<Vec<Vec<f64>>>)> {
    let runner = Runner::new(exp)?;
    let p = exp.snr_grid_db.len();
    let noise_sd: Vec<f64> = exp.snr_grid_db.iter().map(|&s| exp.noise_var(s).sqrt()).collect();
    let mut tally = Tally {
        errors: vec![[0; 2]; p],
        trials: vec![[0; 2]; p],
        z: collect_z.then(|| vec![Vec::new(); p]),
    };
    let mut active: Vec<usize> = (0..p).collect();
    let mut next = 0u64;
    while next < exp.trials && !active.is_empty() {
        let end = (next + BATCH).min(exp.trials);
        let outs = (next..end)
            .into_par_iter()
            .map(|i| runner.run_trial(i, &active, &noise_sd))
            .collect::<Result<Vec<_>>>()?;
        for (sign, zs) in outs {
            let s = usize::from(sign < 0.0);
            for (&pi, &z) in active.iter().zip(&zs) {
                tally.trials[pi][s] += 1;
                if z * sign <= 0.0 {
                    tally.errors[pi][s] += 1;
                }
                if let Some(store) = tally.z.as_mut() {
                    store[pi].push(z);
                }
            }
        }
        next = end;
        if exp.early_stop {
            active.retain(|&pi| tally.errors[pi].iter().sum::<u64>() < TARGET_ERRORS);
        }
    }
    let points = (0..p)
        .map(|pi| {
            let n: u64 = tally.trials[pi].iter().sum();
            let e: u64 = tally.errors[pi].iter().sum();
            let pe = e as f64 / n as f64;
            BerPoint {
                snr_db: exp.snr_grid_db[pi],
                sigma_xi2: exp.csi.error_var(exp.noise_var(exp.snr_grid_db[pi])),
                pe,
                stderr: (pe * (1.0 - pe) / n as f64).sqrt(),
                trials: n,
                errors: e,
                errors_by_sign: tally.errors[pi],
                trials_by_sign: tally.trials[pi],
            }
        })
        .collect();
    let cfg = &exp.config;
    Ok((
        BerResult {
            scheme: exp.scheme,
            beta: (cfg.users - 1) as f64 / cfg.chips_per_symbol as f64,
            iota: cfg.iota,
            points,
        },
        tally.z,
    ))
}

/// Error probability per SNR point.
pub fn run_ber(exp: &BerExperiment) -> Result<BerResult> {
    Ok(simulate(exp, false)?.0)
}

/// Error probability and every decision statistic (early stopping disabled).
pub fn run_ber_with_statistics(exp: &BerExperiment) -> Result<(BerResult, Vec<Vec<f64>>)> {
    let mut exp = exp.clone();
    exp.early_stop = false;
    let (res, z) = simulate(&exp, true)?;
    Ok((res, z.unwrap_or_default()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalencePoint {
    pub snr_db: f64,
    pub pe_tr: f64,
    pub pe_ar: f64,
    pub stderr_combined: f64,
    pub ks: KsResult,
    /// `|pe_tr - pe_ar| <= 3 * stderr_combined`.
    pub pe_consistent: bool,
    /// KS test not rejected at `alpha`.
    pub ks_consistent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub alpha: f64,
    pub points: Vec<EquivalencePoint>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.points.iter().all(|p| p.pe_consistent && p.ks_consistent)
    }
}

/// Single-user TR/AR comparison. Both schemes run `template`'s settings on
/// independent streams; the TR run honours `normalize_prefilter`.
pub fn equivalence_test(template: &BerExperiment, alpha: f64) -> Result<EquivalenceReport> {
    if template.config.users != 1 {
        return Err(Error::InvalidParameter(format!(
            "equivalence test needs K = 1, got {}",
            template.config.users
        )));
    }
    let mut tr = template.clone();
    tr.scheme = Scheme::Tr;
    tr.seed = rng::derive(template.seed, 1);
    let mut ar = template.clone();
    ar.scheme = Scheme::Ar;
    ar.seed = rng::derive(template.seed, 2);
    ar.normalize_prefilter = true;
    let (rt, zt) = run_ber_with_statistics(&tr)?;
    let (ra, za) = run_ber_with_statistics(&ar)?;
    let points = rt
        .points
        .iter()
        .zip(&ra.points)
        .zip(zt.iter().zip(&za))
        .map(|((pt, pa), (z1, z2))| {
            let se = (pt.stderr.powi(2) + pa.stderr.powi(2)).sqrt();
            let ks = ks_two_sample(z1, z2)?;
            Ok(EquivalencePoint {
                snr_db: pt.snr_db,
                pe_tr: pt.pe,
                pe_ar: pa.pe,
                stderr_combined: se,
                ks,
                pe_consistent: (pt.pe - pa.pe).abs() <= 3.0 * se,
                ks_consistent: ks.passes(alpha),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquivalenceReport { alpha, points })
}

/// Empirical coupling law for one scheme.
#[derive(Debug, Clone)]
pub struct CouplingStats {
    pub scheme: Scheme,
    pub sigma_xi2: f64,
    /// Cross couplings of interferers whose windows overlap the desired one.
    pub cross: Vec<f64>,
    pub self_coupling: Vec<f64>,
    /// Interferer draws rejected for not overlapping.
    pub rejected: u64,
    /// Estimated probability that a cross coupling vanishes by non-overlap.
    pub zero_mass: f64,
    pub zero_mass_stderr: f64,
    /// Fraction of all interferer draws with a cross coupling exactly zero.
    pub exact_zero_fraction: f64,
    pub cross_moments: Moments,
    pub self_moments: Moments,
    pub cross_hist: Histogram,
    pub self_hist: Histogram,
}

/// Bins over `[-1, 1]` used by [`coupling_histogram`].
pub const HIST_BINS: usize = 200;

/// Draws `samples` (desired user, overlapping interferer) pairs. Non-overlapping
/// interferers are rejected and counted towards the zero mass.
pub fn coupling_histogram(
    config: &SystemConfig,
    channel: &ChannelModel,
    scheme: Scheme,
    csi_error_var: f64,
    samples: usize,
    seed: u64,
) -> Result<CouplingStats> {
    config.validate()?;
    channel.validate()?;
    if samples < 10_000 {
        return Err(Error::InvalidParameter(format!("need >= 10^4 samples, got {samples}")));
    }
    if !(csi_error_var >= 0.0) {
        return Err(Error::InvalidParameter("CSI error variance must be >= 0".into()));
    }
    if channel.tap_count() != config.tap_count() {
        return Err(Error::InvalidParameter(
            "channel model and system tap counts differ".into(),
        ));
    }
    let taps = config.tap_count();
    let perturb = |c: &[f64], r: &mut rng::SimRng| -> Vec<f64> {
        if csi_error_var == 0.0 {
            return c.to_vec();
        }
        c.iter()
            .zip(gaussian_error(c.len(), csi_error_var, r))
            .map(|(a, b)| a + b)
            .collect()
    };
    let draws = (0..samples as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64, u64)> {
            let mut r = rng::stream(seed, i);
            let ck = channel.draw(&mut r)?.into_taps();
            let ek = perturb(&ck, &mut r);
            let me = draw_th_code(config.chips_per_symbol, config.iota, &mut r);
            let mut rejected = 0u64;
            let d = loop {
                let x = draw_th_code(config.chips_per_symbol, config.iota, &mut r);
                let d = relative_delay(me.start(), x.start(), config.frame_samples(), config.placement);
                if windows_overlap(d, taps) {
                    break d;
                }
                rejected += 1;
            };
            let cj = channel.draw(&mut r)?.into_taps();
            let a_cross = match scheme {
                Scheme::Ar => ar_cross_coupling(&ek, &cj, d)?,
                Scheme::Tr => {
                    let ej = perturb(&cj, &mut r);
                    tr_cross_coupling(&cj, &ej, d)?
                }
            };
            Ok((self_coupling(&ck, &ek)?, a_cross, rejected))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cross_hist = Histogram::new(-1.0, 1.0, HIST_BINS)?;
    let mut self_hist = Histogram::new(-1.0, 1.0, HIST_BINS)?;
    let mut cross = Vec::with_capacity(samples);
    let mut self_coupling_v = Vec::with_capacity(samples);
    let mut rejected = 0u64;
    let mut exact_zero = 0u64;
    for (s, c, rej) in draws {
        self_hist.add(s);
        cross_hist.add(c);
        self_coupling_v.push(s);
        cross.push(c);
        rejected += rej;
        if c == 0.0 {
            exact_zero += 1;
        }
    }
    let total = rejected + samples as u64;
    let zero_mass = rejected as f64 / total as f64;
    Ok(CouplingStats {
        scheme,
        sigma_xi2: csi_error_var,
        cross_moments: moments(&cross)?,
        self_moments: moments(&self_coupling_v)?,
        cross,
        self_coupling: self_coupling_v,
        rejected,
        zero_mass,
        zero_mass_stderr: (zero_mass * (1.0 - zero_mass) / total as f64).sqrt(),
        exact_zero_fraction: (rejected + exact_zero) as f64 / total as f64,
        cross_hist,
        self_hist,
    })
}

/// `snr_db,scheme,beta,sigma_xi2,iota,pe,stderr,trials` rows.
pub fn write_ber_csv<W: Write>(mut out: W, results: &[BerResult]) -> std::io::Result<()> {
    writeln!(out, "snr_db,scheme,beta,sigma_xi2,iota,pe,stderr,trials")?;
    for r in results {
        for p in &r.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                p.snr_db, r.scheme, r.beta, p.sigma_xi2, r.iota, p.pe, p.stderr, p.trials
            )?;
        }
    }
    Ok(())
}

/// Histogram densities of nonzero cross couplings and self couplings.
pub fn write_coupling_csv<W: Write>(mut out: W, stats: &[CouplingStats]) -> std::io::Result<()> {
    writeln!(out, "scheme,sigma_xi2,kind,bin_center,density")?;
    for s in stats {
        for (kind, h) in [("cross", &s.cross_hist), ("self", &s.self_hist)] {
            for (c, d) in h.centers().iter().zip(h.density()) {
                writeln!(out, "{},{},{},{},{}", s.scheme, s.sigma_xi2, kind, c, d)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::gen_mseq;
    use crate::signal::Placement;
    use crate::stats::q_function;

    fn cfg(n: usize, k: usize, l: usize, iota: usize) -> SystemConfig {
        SystemConfig {
            chips_per_symbol: n,
            users: k,
            iota,
            bandwidth_hz: 1e9,
            channel_chips: l,
            symbol_energy: 1.0,
            noise_var: 0.0,
            csi_error_var: 0.0,
            placement: Placement::Circular,
        }
    }

    fn expo(config: &SystemConfig) -> ChannelModel {
        ChannelModel::ExponentialGaussian {
            taps: config.tap_count(),
            decay_taps: 2.0,
        }
    }

    #[test]
    fn noiseless_single_user_has_no_errors() {
        let config = cfg(16, 1, 3, 1);
        let exp = BerExperiment::new(config.clone(), expo(&config), vec![200.0], 2000, Scheme::Tr, 1);
        let r = run_ber(&exp).unwrap();
        assert_eq!(r.points[0].errors, 0);
        assert_eq!(r.beta, 0.0);
    }

    #[test]
    fn awgn_matches_q_function() {
        let config = cfg(8, 1, 0, 1);
        for scheme in [Scheme::Ar, Scheme::Tr] {
            let mut exp = BerExperiment::new(
                config.clone(),
                ChannelModel::delta(),
                vec![0.0, 4.0],
                200_000,
                scheme,
                3,
            );
            exp.early_stop = false;
            let r = run_ber(&exp).unwrap();
            for p in &r.points {
                let want = q_function(10f64.powf(p.snr_db / 20.0));
                assert!(
                    (p.pe / want - 1.0).abs() < 0.05,
                    "{scheme} {}: {} vs {want}",
                    p.snr_db,
                    p.pe
                );
                assert!((p.stderr - (p.pe * (1.0 - p.pe) / p.trials as f64).sqrt()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let config = cfg(16, 4, 3, 1);
        let mut exp = BerExperiment::new(config.clone(), expo(&config), vec![0.0, 10.0], 10_000, Scheme::Ar, 9);
        exp.csi = CsiSource::Direct { var: 0.05 };
        let a = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_ber(&exp).unwrap());
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_ber(&exp).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn early_stop_respects_target() {
        let config = cfg(8, 1, 0, 1);
        let exp = BerExperiment::new(config, ChannelModel::delta(), vec![0.0], 1_000_000, Scheme::Ar, 2);
        let r = run_ber(&exp).unwrap();
        let p = &r.points[0];
        assert!(p.errors >= TARGET_ERRORS);
        assert!(p.trials < 10_000);
        assert_eq!(p.trials % BATCH, 0);
    }

    #[test]
    fn monotone_in_snr_and_symmetric() {
        let config = cfg(16, 3, 3, 1);
        let mut exp = BerExperiment::new(
            config.clone(),
            expo(&config),
            vec![0.0, 3.0, 6.0, 9.0],
            40_000,
            Scheme::Tr,
            5,
        );
        exp.csi = CsiSource::Direct { var: 0.02 };
        exp.early_stop = false;
        let r = run_ber(&exp).unwrap();
        for w in r.points.windows(2) {
            assert!(w[1].pe <= w[0].pe + 3.0 * w[0].stderr.max(w[1].stderr));
        }
        for p in &r.points {
            let [e0, e1] = p.errors_by_sign;
            let [n0, n1] = p.trials_by_sign;
            let (p0, p1) = (e0 as f64 / n0 as f64, e1 as f64 / n1 as f64);
            let se = (p0 * (1.0 - p0) / n0 as f64 + p1 * (1.0 - p1) / n1 as f64).sqrt();
            assert!((p0 - p1).abs() <= 3.5 * se.max(1e-9), "{p0} vs {p1}");
        }
    }

    #[test]
    fn training_derived_variance_tracks_snr() {
        let config = cfg(8, 1, 1, 1);
        let mut exp = BerExperiment::new(config.clone(), expo(&config), vec![0.0, 10.0], 100, Scheme::Ar, 1);
        exp.csi = CsiSource::TrainingDerived { energy: 20.0 };
        let r = run_ber(&exp).unwrap();
        assert!((r.points[0].sigma_xi2 - 1.0 / 20.0).abs() < 1e-15);
        assert!((r.points[1].sigma_xi2 - 0.1 / 20.0).abs() < 1e-15);
    }

    #[test]
    fn end_to_end_training_runs_for_both_schemes() {
        let config = cfg(16, 2, 3, 1);
        for scheme in [Scheme::Tr, Scheme::Ar] {
            let mut exp = BerExperiment::new(config.clone(), expo(&config), vec![5.0], 2000, scheme, 4);
            exp.csi = CsiSource::Training {
                sequence: gen_mseq(5, 1).unwrap(),
            };
            let r = run_ber(&exp).unwrap();
            assert!(r.points[0].pe > 0.0 && r.points[0].pe < 0.5);
        }
    }

    #[test]
    fn equivalence_and_negative_control() {
        let config = cfg(16, 1, 3, 1);
        let mut exp = BerExperiment::new(config.clone(), expo(&config), vec![0.0, 6.0], 20_000, Scheme::Tr, 6);
        exp.csi = CsiSource::Direct { var: 0.05 };
        let rep = equivalence_test(&exp, 0.01).unwrap();
        assert!(rep.passed(), "{rep:?}");
        exp.normalize_prefilter = false;
        let rep = equivalence_test(&exp, 0.01).unwrap();
        assert!(!rep.passed());
        exp.config.users = 2;
        assert!(equivalence_test(&exp, 0.01).is_err());
    }

    #[test]
    fn coupling_zero_mass_and_atom() {
        // exponential-Gaussian taps are never exactly zero
        let config = cfg(32, 2, 3, 1);
        let model = expo(&config);
        let s = coupling_histogram(&config, &model, Scheme::Tr, 0.0, 20_000, 3).unwrap();
        let f = crate::transceiver::overlap_probability(32, 3, 1);
        assert!((s.zero_mass - (1.0 - f)).abs() < 3.0 * s.zero_mass_stderr);
        assert!((s.exact_zero_fraction - s.zero_mass).abs() < 1e-15);
        let atom = s.cross.iter().filter(|&&a| (a - 1.0).abs() < 1e-9).count() as f64 / s.cross.len() as f64;
        let want = 1.0 / 7.0;
        let se = (want * (1.0 - want) / s.cross.len() as f64).sqrt();
        assert!((atom - want).abs() < 3.0 * se, "{atom}");
        assert!(s.self_coupling.iter().all(|&a| (a - 1.0).abs() < 1e-12));
    }

    #[test]
    fn ar_cross_variance_matches_window_law() {
        // AR with perfect CSI and white channels: Var = 1 / (2T - 1)
        let config = cfg(64, 2, 4, 1);
        let model = ChannelModel::ExponentialGaussian {
            taps: 5,
            decay_taps: 1e9,
        };
        let s = coupling_histogram(&config, &model, Scheme::Ar, 0.0, 40_000, 8).unwrap();
        let want = 1.0 / 9.0;
        assert!(
            (s.cross_moments.variance / want - 1.0).abs() < 0.04,
            "{}",
            s.cross_moments.variance
        );
    }

    #[test]
    fn coupling_needs_enough_samples() {
        let config = cfg(32, 2, 3, 1);
        assert!(coupling_histogram(&config, &expo(&config), Scheme::Ar, 0.0, 100, 1).is_err());
    }

    #[test]
    fn ber_csv_layout() {
        let r = BerResult {
            scheme: Scheme::Ar,
            beta: 0.05,
            iota: 1,
            points: vec![BerPoint {
                snr_db: 10.0,
                sigma_xi2: 0.1,
                pe: 0.25,
                stderr: 0.01,
                trials: 100,
                errors: 25,
                errors_by_sign: [12, 13],
                trials_by_sign: [50, 50],
            }],
        };
        let mut buf = Vec::new();
        write_ber_csv(&mut buf, &[r]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "snr_db,scheme,beta,sigma_xi2,iota,pe,stderr,trials\n10,ar,0.05,0.1,1,0.25,0.01,100\n"
        );
    }
}
