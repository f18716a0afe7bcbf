//! Multipath channel generation.
//!
//! Continuous-time realizations follow the cluster/ray (Saleh-Valenzuela)
//! structure of the IEEE 802.15.3a model: Poisson cluster arrivals, Poisson
//! ray arrivals inside each cluster, doubly exponential mean power decay,
//! lognormal fading and equiprobable polarity. Realizations are then binned
//! onto the system sample grid and energy-normalized.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::{rng, Error, Result};

/// Cluster/ray model parameters. Rates in 1/ns, decay constants in ns,
/// fading standard deviations in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvParams {
    cluster_rate: f64,
    ray_rate: f64,
    cluster_decay: f64,
    ray_decay: f64,
    cluster_fading_db: f64,
    ray_fading_db: f64,
}

impl SvParams {
    /// Line-of-sight 0-4 m parameterization (CM1).
    pub const CM1: SvParams = SvParams {
        cluster_rate: 0.0233,
        ray_rate: 2.5,
        cluster_decay: 7.1,
        ray_decay: 4.3,
        cluster_fading_db: 3.3941,
        ray_fading_db: 3.3941,
    };

    pub fn new(
        cluster_rate: f64,
        ray_rate: f64,
        cluster_decay: f64,
        ray_decay: f64,
        cluster_fading_db: f64,
        ray_fading_db: f64,
    ) -> Result<Self> {
        let p = SvParams {
            cluster_rate,
            ray_rate,
            cluster_decay,
            ray_decay,
            cluster_fading_db,
            ray_fading_db,
        };
        let fields = [
            ("cluster_rate", cluster_rate),
            ("ray_rate", ray_rate),
            ("cluster_decay", cluster_decay),
            ("ray_decay", ray_decay),
            ("cluster_fading_db", cluster_fading_db),
            ("ray_fading_db", ray_fading_db),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(p)
    }

    /// Looks up a named preset. Only `"cm1"` is provided.
    pub fn preset(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "cm1" => Ok(Self::CM1),
            other => Err(Error::InvalidParameter(format!("unknown channel preset `{other}`"))),
        }
    }

    pub fn cluster_rate(&self) -> f64 {
        self.cluster_rate
    }
    pub fn ray_rate(&self) -> f64 {
        self.ray_rate
    }
    pub fn cluster_decay(&self) -> f64 {
        self.cluster_decay
    }
    pub fn ray_decay(&self) -> f64 {
        self.ray_decay
    }
    pub fn cluster_fading_db(&self) -> f64 {
        self.cluster_fading_db
    }
    pub fn ray_fading_db(&self) -> f64 {
        self.ray_fading_db
    }
}

/// Continuous-time multipath realization: `(delay_ns, amplitude)` pairs sorted
/// by delay.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousChannel {
    paths: Vec<(f64, f64)>,
}

impl ContinuousChannel {
    pub fn new(mut paths: Vec<(f64, f64)>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidParameter("channel needs at least one path".into()));
        }
        if paths
            .iter()
            .any(|&(d, a)| !(d.is_finite() && d >= 0.0 && a.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "path delays must be finite and non-negative".into(),
            ));
        }
        paths.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(ContinuousChannel { paths })
    }

    pub fn paths(&self) -> &[(f64, f64)] {
        &self.paths
    }

    /// Power-weighted RMS delay spread in ns.
    pub fn rms_delay_spread(&self) -> f64 {
        let (mut p0, mut p1, mut p2) = (0.0, 0.0, 0.0);
        for &(d, a) in &self.paths {
            let p = a * a;
            p0 += p;
            p1 += p * d;
            p2 += p * d * d;
        }
        if p0 == 0.0 {
            return 0.0;
        }
        let mean = p1 / p0;
        (p2 / p0 - mean * mean).max(0.0).sqrt()
    }
}

/// Draws cluster/ray paths with delays not exceeding `horizon_ns`.
///
/// Clusters stop after `10 * cluster_decay` and rays after `10 * ray_decay`
/// within their cluster, where the mean power is below -43 dB.
pub fn sample_sv_paths<R: Rng + ?Sized>(params: &SvParams, rng: &mut R, horizon_ns: f64) -> Vec<(f64, f64)> {
    let cluster_gap = Exp::new(params.cluster_rate).expect("validated rate");
    let ray_gap = Exp::new(params.ray_rate).expect("validated rate");
    let cluster_end = (10.0 * params.cluster_decay).min(horizon_ns);
    let ray_end = 10.0 * params.ray_decay;
    let ln10 = std::f64::consts::LN_10;
    let var_db = params.cluster_fading_db.powi(2) + params.ray_fading_db.powi(2);
    // mean of the dB exponent so that E[amplitude^2] equals the mean power
    let bias_db = var_db * ln10 / 20.0;

    let mut paths = Vec::new();
    let mut cluster_t = 0.0;
    while cluster_t <= cluster_end {
        let cluster_fade: f64 = params.cluster_fading_db * rng.sample::<f64, _>(StandardNormal);
        let mut ray_t = 0.0;
        while ray_t <= ray_end && cluster_t + ray_t <= horizon_ns {
            let mean_power_db = 10.0 * (-cluster_t / params.cluster_decay - ray_t / params.ray_decay) / ln10;
            let ray_fade: f64 = params.ray_fading_db * rng.sample::<f64, _>(StandardNormal);
            let level_db = mean_power_db - bias_db + cluster_fade + ray_fade;
            let amp = 10f64.powf(level_db / 20.0);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            paths.push((cluster_t + ray_t, sign * amp));
            ray_t += ray_gap.sample(rng);
        }
        cluster_t += cluster_gap.sample(rng);
    }
    paths.sort_by(|a, b| a.0.total_cmp(&b.0));
    paths
}

/// One cluster/ray realization, deterministic in `seed`.
pub fn sample_sv_channel(params: &SvParams, seed: u64) -> ContinuousChannel {
    let mut rng = rng::seeded(seed);
    let paths = sample_sv_paths(params, &mut rng, f64::INFINITY);
    ContinuousChannel { paths }
}

/// Sampled channel impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChannel {
    taps: Vec<f64>,
    tap_spacing: f64,
}

impl DiscreteChannel {
    pub fn new(taps: Vec<f64>, tap_spacing: f64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidParameter("channel needs at least one tap".into()));
        }
        if !(tap_spacing > 0.0) {
            return Err(Error::InvalidParameter("tap spacing must be positive".into()));
        }
        Ok(DiscreteChannel { taps, tap_spacing })
    }

    /// Channel with unit tap spacing, for sample-domain work.
    pub fn from_taps(taps: Vec<f64>) -> Result<Self> {
        Self::new(taps, 1.0)
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn into_taps(self) -> Vec<f64> {
        self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Tap spacing in seconds.
    pub fn tap_spacing(&self) -> f64 {
        self.tap_spacing
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    pub fn norm(&self) -> f64 {
        self.energy().sqrt()
    }

    /// Writes `index,value` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "tap,value")?;
        for (i, v) in self.taps.iter().enumerate() {
            writeln!(out, "{i},{v}")?;
        }
        Ok(())
    }
}

/// Number of channel-length chips `L` for a delay spread and bandwidth.
pub fn channel_chips(bandwidth_hz: f64, delay_spread_s: f64, iota: usize) -> usize {
    ((delay_spread_s * bandwidth_hz) / iota as f64 + 1e-9).floor() as usize
}

/// Bins path amplitudes at resolution `1/W`.
///
/// The tap vector has `(L + 1) * iota` entries with `L = floor(T_d W / iota)`.
/// Tap `l` collects paths in `[l / W, (l + 1) / W)`; taps after `L * iota`
/// (the sample at `T_d`) stay zero.
pub fn discretize(
    ch: &ContinuousChannel,
    bandwidth_hz: f64,
    delay_spread_s: f64,
    iota: usize,
) -> Result<DiscreteChannel> {
    if !(bandwidth_hz > 0.0 && delay_spread_s > 0.0) || iota == 0 {
        return Err(Error::InvalidParameter(
            "discretize needs W > 0, T_d > 0 and iota >= 1".into(),
        ));
    }
    let l = channel_chips(bandwidth_hz, delay_spread_s, iota);
    let per_ns = bandwidth_hz * 1e-9;
    let mut taps = vec![0.0; (l + 1) * iota];
    let mut kept = 0usize;
    for &(delay, amp) in &ch.paths {
        let bin = (delay * per_ns * (1.0 + 1e-12)).floor() as usize;
        if bin <= l * iota {
            taps[bin] += amp;
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::EmptyChannel);
    }
    DiscreteChannel::new(taps, 1.0 / bandwidth_hz)
}

/// Scales taps to unit energy.
pub fn normalize_energy(ch: &DiscreteChannel) -> Result<DiscreteChannel> {
    let norm = ch.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroEnergy);
    }
    Ok(DiscreteChannel {
        taps: ch.taps.iter().map(|t| t / norm).collect(),
        tap_spacing: ch.tap_spacing,
    })
}

/// Full linear autocorrelation, lags `-(n-1)..=(n-1)`; lag 0 sits at index `n-1`.
pub fn autocorrelation(taps: &[f64]) -> Vec<f64> {
    let n = taps.len();
    if n == 0 {
        return Vec::new();
    }
    let mut out = vec![0.0; 2 * n - 1];
    for m in 0..n {
        let v: f64 = (0..n - m).map(|l| taps[l] * taps[l + m]).sum();
        out[n - 1 + m] = v;
        out[n - 1 - m] = v;
    }
    out
}

/// Source of unit-energy channel realizations for simulations.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    /// Cluster/ray model binned at `bandwidth_hz`; the last populated tap is
    /// the one starting at `delay_spread_s`.
    SalehValenzuela {
        params: SvParams,
        bandwidth_hz: f64,
        delay_spread_s: f64,
        iota: usize,
    },
    /// Independent Gaussian taps with power `exp(-l / decay_taps)`; every tap
    /// is nonzero almost surely.
    ExponentialGaussian { taps: usize, decay_taps: f64 },
    /// The same channel every draw (debugging and oracle checks).
    Fixed(DiscreteChannel),
}

impl ChannelModel {
    pub fn cm1(bandwidth_hz: f64, delay_spread_s: f64, iota: usize) -> Self {
        ChannelModel::SalehValenzuela {
            params: SvParams::CM1,
            bandwidth_hz,
            delay_spread_s,
            iota,
        }
    }

    /// Single-tap unit channel.
    pub fn delta() -> Self {
        ChannelModel::Fixed(DiscreteChannel::from_taps(vec![1.0]).expect("nonempty"))
    }

    pub fn tap_count(&self) -> usize {
        match self {
            ChannelModel::SalehValenzuela {
                bandwidth_hz,
                delay_spread_s,
                iota,
                ..
            } => (channel_chips(*bandwidth_hz, *delay_spread_s, *iota) + 1) * iota,
            ChannelModel::ExponentialGaussian { taps, .. } => *taps,
            ChannelModel::Fixed(ch) => ch.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ChannelModel::SalehValenzuela {
                params,
                bandwidth_hz,
                delay_spread_s,
                iota,
            } => {
                SvParams::new(
                    params.cluster_rate,
                    params.ray_rate,
                    params.cluster_decay,
                    params.ray_decay,
                    params.cluster_fading_db,
                    params.ray_fading_db,
                )?;
                if !(*bandwidth_hz > 0.0 && *delay_spread_s > 0.0) || *iota == 0 {
                    return Err(Error::InvalidParameter(
                        "channel needs W > 0, T_d > 0 and iota >= 1".into(),
                    ));
                }
            }
            ChannelModel::ExponentialGaussian { taps, decay_taps } => {
                if *taps == 0 || !(*decay_taps > 0.0) {
                    return Err(Error::InvalidParameter(
                        "exponential channel needs taps >= 1 and decay > 0".into(),
                    ));
                }
            }
            ChannelModel::Fixed(ch) => {
                normalize_energy(ch)?;
            }
        }
        Ok(())
    }

    /// Draws one unit-energy realization.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DiscreteChannel> {
        match self {
            ChannelModel::SalehValenzuela {
                params,
                bandwidth_hz,
                delay_spread_s,
                iota,
            } => {
                let last = channel_chips(*bandwidth_hz, *delay_spread_s, *iota) * iota;
                let horizon_ns = (last + 1) as f64 / bandwidth_hz * 1e9;
                let paths = sample_sv_paths(params, rng, horizon_ns);
                let ch = ContinuousChannel { paths };
                normalize_energy(&discretize(&ch, *bandwidth_hz, *delay_spread_s, *iota)?)
            }
            ChannelModel::ExponentialGaussian { taps, decay_taps } => {
                let v: Vec<f64> = (0..*taps)
                    .map(|l| {
                        let z: f64 = rng.sample(StandardNormal);
                        z * (-(l as f64) / (2.0 * decay_taps)).exp()
                    })
                    .collect();
                normalize_energy(&DiscreteChannel::from_taps(v)?)
            }
            ChannelModel::Fixed(ch) => normalize_energy(ch),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn cm1_preset_values() {
        let p = SvParams::preset("CM1").unwrap();
        assert_eq!(p.cluster_rate(), 0.0233);
        assert_eq!(p.ray_rate(), 2.5);
        assert_eq!(p.cluster_decay(), 7.1);
        assert_eq!(p.ray_decay(), 4.3);
        assert_eq!(p.cluster_fading_db(), 3.3941);
        assert_eq!(p.ray_fading_db(), 3.3941);
        assert!(SvParams::preset("cm4").is_err());
        assert!(SvParams::new(0.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn sv_is_deterministic_and_nonempty() {
        for seed in 0..20 {
            let a = sample_sv_channel(&SvParams::CM1, seed);
            let b = sample_sv_channel(&SvParams::CM1, seed);
            assert_eq!(a, b);
            assert!(!a.paths().is_empty());
            assert_eq!(a.paths()[0].0, 0.0);
            assert!(a.paths().windows(2).all(|w| w[0].0 <= w[1].0));
        }
    }

    #[test]
    fn cm1_mean_rms_delay_spread() {
        // CM1 target RMS delay spread is 5.28 ns; accept 5 ns +/- 20%.
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|s| sample_sv_channel(&SvParams::CM1, s).rms_delay_spread())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 5.0).abs() <= 1.0, "mean rms delay spread {mean}");
    }

    #[test]
    fn discretize_delta_channel() {
        let ch = ContinuousChannel::new(vec![(0.0, 1.0)]).unwrap();
        let d = discretize(&ch, 1e9, 50e-9, 1).unwrap();
        assert_eq!(d.len(), 51);
        assert_eq!(d.taps()[0], 1.0);
        assert!(d.taps()[1..].iter().all(|&t| t == 0.0));
        assert!((d.tap_spacing() - 1e-9).abs() < 1e-21);
    }

    #[test]
    fn discretize_bins_and_truncates() {
        let ch = ContinuousChannel::new(vec![(0.2, 0.6), (0.7, 0.8)]).unwrap();
        let d = discretize(&ch, 1e9, 50e-9, 1).unwrap();
        assert!((d.taps()[0] - 1.4).abs() < 1e-15);

        let ch = ContinuousChannel::new(vec![(3.0, 0.5), (50.5, 2.0), (51.2, 9.0)]).unwrap();
        let d = discretize(&ch, 1e9, 50e-9, 1).unwrap();
        assert_eq!(d.taps()[3], 0.5);
        assert_eq!(d.taps()[50], 2.0);
        assert_eq!(d.energy(), 4.25);

        let ch = ContinuousChannel::new(vec![(51.5, 2.0)]).unwrap();
        assert!(matches!(discretize(&ch, 1e9, 50e-9, 1), Err(Error::EmptyChannel)));
    }

    #[test]
    fn discretize_with_impulsiveness() {
        let ch = ContinuousChannel::new(vec![(0.0, 1.0), (9.5, 0.5)]).unwrap();
        let d = discretize(&ch, 1e9, 10e-9, 2).unwrap();
        // L = 5 chips of 2 samples each, (L + 1) * iota taps
        assert_eq!(d.len(), 12);
        assert_eq!(d.taps()[9], 0.5);
    }

    #[test]
    fn normalize_examples() {
        let d = DiscreteChannel::from_taps(vec![3.0, 4.0]).unwrap();
        let n = normalize_energy(&d).unwrap();
        assert!(close(n.taps(), &[0.6, 0.8], 1e-15));
        let again = normalize_energy(&n).unwrap();
        assert!(close(again.taps(), n.taps(), 1e-15));
        let z = DiscreteChannel::from_taps(vec![0.0, 0.0]).unwrap();
        assert!(matches!(normalize_energy(&z), Err(Error::ZeroEnergy)));
    }

    #[test]
    fn autocorrelation_examples() {
        assert_eq!(autocorrelation(&[1.0]), vec![1.0]);
        assert!(close(&autocorrelation(&[0.6, 0.8]), &[0.48, 1.0, 0.48], 1e-15));
    }

    #[test]
    fn csv_export() {
        let d = DiscreteChannel::from_taps(vec![0.5, -0.25]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "tap,value\n0,0.5\n1,-0.25\n");
    }

    #[test]
    fn model_draws_have_expected_length() {
        let mut r = rng::seeded(1);
        let m = ChannelModel::cm1(1e9, 50e-9, 1);
        assert_eq!(m.tap_count(), 51);
        for _ in 0..50 {
            let c = m.draw(&mut r).unwrap();
            assert_eq!(c.len(), 51);
            assert!((c.energy() - 1.0).abs() < 1e-12);
        }
        let m = ChannelModel::ExponentialGaussian {
            taps: 12,
            decay_taps: 3.0,
        };
        let c = m.draw(&mut r).unwrap();
        assert_eq!(c.len(), 12);
        assert!(c.taps().iter().all(|&t| t != 0.0));
    }

    proptest! {
        #[test]
        fn normalize_matches_direct_norm(v in proptest::collection::vec(-10.0f64..10.0, 1..64)) {
            prop_assume!(v.iter().any(|x| x.abs() > 1e-6));
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let d = DiscreteChannel::from_taps(v.clone()).unwrap();
            let n = normalize_energy(&d).unwrap();
            prop_assert!((n.energy() - 1.0).abs() <= 1e-12);
            for (a, b) in n.taps().iter().zip(&v) {
                prop_assert!((a - b / norm).abs() <= 1e-14);
            }
        }

        #[test]
        fn autocorrelation_is_symmetric_and_peaked(v in proptest::collection::vec(-1.0f64..1.0, 1..40)) {
            let g = autocorrelation(&v);
            let n = v.len();
            prop_assert_eq!(g.len(), 2 * n - 1);
            let e: f64 = v.iter().map(|x| x * x).sum();
            prop_assert_eq!(g[n - 1], e);
            for m in 0..g.len() {
                prop_assert_eq!(g[m], g[g.len() - 1 - m]);
                prop_assert!(g[m].abs() <= g[n - 1] + 1e-12);
            }
        }

        #[test]
        fn each_retained_path_lands_in_one_bin(
            paths in proptest::collection::vec((0.0f64..60.0, -1.0f64..1.0), 1..30)
        ) {
            let ch = ContinuousChannel::new(paths.clone()).unwrap();
            if let Ok(d) = discretize(&ch, 1e9, 50e-9, 1) {
                let kept: f64 = paths.iter().filter(|p| p.0 < 51.0).map(|p| p.1).sum();
                let total: f64 = d.taps().iter().sum();
                prop_assert!((kept - total).abs() < 1e-9);
            }
        }
    }
}
