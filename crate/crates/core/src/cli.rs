//! Batch runner behind the `uwbsim` binary.
//!
//! A run is described by a flat `key = value` file (one experiment per file,
//! lists comma separated, `start:step:stop` ranges accepted). Every CSV
//! written starts with a `#` block holding the fully resolved configuration;
//! stripping the `# ` prefixes gives a config that reproduces the data rows.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::channel::{self, ChannelModel, DiscreteChannel};
use crate::estimation::{
    dl_estimate, gen_mseq, receive_dl_training, receive_ul_training, training_error_var, ul_training_set,
    EstimatorKind, TrainingSequence, UlEstimator,
};
use crate::montecarlo::{
    coupling_histogram, equivalence_test, run_ber, write_ber_csv, write_coupling_csv, BerExperiment, CouplingStats,
    CsiSource,
};
use crate::mutual_info::{
    mutual_information, spectral_efficiency, write_mi_csv, InterferenceMode, LoadParams, MiCurve, MiOptions, MiPoint,
};
use crate::signal::{Placement, SystemConfig};
use crate::{rng, Error, Result, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Ber,
    Equivalence,
    Coupling,
    Mi,
    Estimation,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Ber => "ber",
            Experiment::Equivalence => "equivalence",
            Experiment::Coupling => "coupling",
            Experiment::Mi => "mi",
            Experiment::Estimation => "estimation",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "ber" => Experiment::Ber,
            "equivalence" => Experiment::Equivalence,
            "coupling" => Experiment::Coupling,
            "mi" => Experiment::Mi,
            "estimation" => Experiment::Estimation,
            o => {
                return Err(format!(
                    "unknown experiment `{o}` (ber, equivalence, coupling, mi, estimation)"
                ))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelPreset {
    Cm1,
    /// Unit first tap, zeros elsewhere.
    Delta,
    /// Independent Gaussian taps with exponential power profile.
    Exponential,
}

impl ChannelPreset {
    fn name(self) -> &'static str {
        match self {
            ChannelPreset::Cm1 => "cm1",
            ChannelPreset::Delta => "delta",
            ChannelPreset::Exponential => "exponential",
        }
    }
}

impl FromStr for ChannelPreset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "cm1" => ChannelPreset::Cm1,
            "delta" => ChannelPreset::Delta,
            "exponential" => ChannelPreset::Exponential,
            o => return Err(format!("unknown channel `{o}` (cm1, delta, exponential)")),
        })
    }
}

/// How a training budget turns into CSI errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingMode {
    /// Gaussian errors of variance `sigma_N^2 / (A_t^2 N_t)`.
    Derived,
    /// Actual estimation from a noisy training burst.
    EndToEnd,
}

impl FromStr for TrainingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "derived" => TrainingMode::Derived,
            "end_to_end" => TrainingMode::EndToEnd,
            o => return Err(format!("unknown training_mode `{o}` (derived, end_to_end)")),
        })
    }
}

impl fmt::Display for TrainingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainingMode::Derived => "derived",
            TrainingMode::EndToEnd => "end_to_end",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiMode {
    Asymptotic,
    Finite,
}

impl FromStr for MiMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "asymptotic" => MiMode::Asymptotic,
            "finite" => MiMode::Finite,
            o => return Err(format!("unknown mi_mode `{o}` (asymptotic, finite)")),
        })
    }
}

impl fmt::Display for MiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MiMode::Asymptotic => "asymptotic",
            MiMode::Finite => "finite",
        })
    }
}

/// Pilot amplitude `A_t` and m-sequence length `N_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingBudget {
    pub amplitude: f64,
    pub length: usize,
}

impl TrainingBudget {
    /// Register length `m` with `N_t = 2^m - 1`.
    pub fn register(&self) -> Option<u32> {
        let m = (self.length + 1).trailing_zeros();
        ((self.length + 1).is_power_of_two() && (2..=20).contains(&m)).then_some(m)
    }

    pub fn energy(&self) -> f64 {
        self.amplitude * self.amplitude * self.length as f64
    }

    pub fn sequence(&self) -> Result<TrainingSequence> {
        let m = self
            .register()
            .ok_or_else(|| Error::InvalidParameter(format!("training length {} is not 2^m - 1", self.length)))?;
        gen_mseq(m, 1)?.with_amplitude(self.amplitude)
    }
}

/// CSI error source for one curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CsiSpec {
    Var(f64),
    Training(TrainingBudget, TrainingMode),
}

impl CsiSpec {
    fn source(&self) -> Result<CsiSource> {
        Ok(match *self {
            CsiSpec::Var(v) => CsiSource::from_var(v),
            CsiSpec::Training(b, TrainingMode::Derived) => CsiSource::TrainingDerived { energy: b.energy() },
            CsiSpec::Training(b, TrainingMode::EndToEnd) => CsiSource::Training {
                sequence: b.sequence()?,
            },
        })
    }

    fn var_at(&self, noise_var: f64) -> f64 {
        match *self {
            CsiSpec::Var(v) => v,
            CsiSpec::Training(b, _) => training_error_var(noise_var, b.energy()),
        }
    }
}

/// One `(load, CSI)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case {
    pub users: usize,
    /// Interferers per chip, `(K - 1) / N`.
    pub beta: f64,
    pub csi: CsiSpec,
}

/// Problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub fatal: bool,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.fatal { "error" } else { "warning" };
        match self.line {
            Some(l) => write!(f, "{kind} (line {l}): {}", self.message),
            None => write!(f, "{kind}: {}", self.message),
        }
    }
}

/// Parsed run description. Unset optional keys take experiment-dependent
/// defaults at resolution time.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub schemes: Vec<Scheme>,
    pub channel: ChannelPreset,
    pub decay_taps: f64,
    /// `N`.
    pub chips: usize,
    pub users: Option<Vec<usize>>,
    pub beta: Option<Vec<f64>>,
    pub iota: usize,
    pub chip_time_ns: f64,
    /// Defaults to `iota / T_c`.
    pub bandwidth_hz: Option<f64>,
    pub delay_spread_ns: f64,
    pub placement: Placement,
    pub snr_db: Vec<f64>,
    pub sigma_xi2: Option<Vec<f64>>,
    pub training_amplitude: Option<f64>,
    pub training_length: Option<usize>,
    pub training_mode: TrainingMode,
    pub estimator: String,
    pub rzf_reg: f64,
    pub symbol_energy: f64,
    pub trials: u64,
    pub samples: usize,
    pub seed: u64,
    pub early_stop: bool,
    pub normalize_prefilter: bool,
    pub alpha: f64,
    pub mi_points: usize,
    pub mi_mode: MiMode,
    /// Output file name inside the output directory.
    pub output: Option<String>,
    /// Line of each key in the source text.
    lines: BTreeMap<String, usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: Experiment::Ber,
            schemes: vec![Scheme::Tr, Scheme::Ar],
            channel: ChannelPreset::Cm1,
            decay_taps: 10.0,
            chips: 200,
            users: None,
            beta: None,
            iota: 1,
            chip_time_ns: 1.0,
            bandwidth_hz: None,
            delay_spread_ns: 50.0,
            placement: Placement::Circular,
            snr_db: (0..=8).map(|i| 5.0 * i as f64).collect(),
            sigma_xi2: None,
            training_amplitude: None,
            training_length: None,
            training_mode: TrainingMode::Derived,
            estimator: "zf".into(),
            rzf_reg: 1e-3,
            symbol_energy: 1.0,
            trials: 100_000,
            samples: 100_000,
            seed: 1,
            early_stop: true,
            normalize_prefilter: true,
            alpha: 0.01,
            mi_points: 1 << 16,
            mi_mode: MiMode::Asymptotic,
            output: None,
            lines: BTreeMap::new(),
        }
    }
}

fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

/// Comma list or inclusive `start:step:stop` range.
fn parse_grid(v: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    if parts.len() == 1 {
        return parse_list(v);
    }
    if parts.len() != 3 {
        return Err(format!("`{v}` is neither a list nor start:step:stop"));
    }
    let p: Vec<f64> = parts
        .iter()
        .map(|s| s.parse::<f64>().map_err(|e| format!("`{s}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    let (a, step, b) = (p[0], p[1], p[2]);
    if !(step > 0.0) || b < a {
        return Err(format!("range `{v}` needs step > 0 and start <= stop"));
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    if n > 100_000 {
        return Err(format!("range `{v}` has too many points"));
    }
    Ok((0..=n).map(|i| a + i as f64 * step).collect())
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        o => Err(format!("`{o}` is not a boolean")),
    }
}

fn scalar<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("`{v}`: {e}"))
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Parses config text. All malformed lines are reported together.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut errors = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split(['#', ';']).next().unwrap_or("").trim();
            if body.is_empty() || (body.starts_with('[') && body.ends_with(']')) {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                errors.push(format!("line {line}: expected `key = value`"));
                continue;
            };
            let (k, v) = (k.trim().to_ascii_lowercase(), v.trim());
            if let Some(prev) = cfg.lines.get(&k) {
                errors.push(format!("line {line}: `{k}` already set on line {prev}"));
                continue;
            }
            match cfg.set(&k, v) {
                Ok(()) => {
                    cfg.lines.insert(k, line);
                }
                Err(e) => errors.push(format!("line {line}: {e}")),
            }
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Validation(errors.join("\n")))
        }
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let lower = v.to_ascii_lowercase();
        match key {
            "experiment" => self.experiment = lower.parse()?,
            "schemes" | "scheme" => {
                self.schemes = parse_list::<String>(&lower)?
                    .iter()
                    .map(|s| s.parse::<Scheme>().map_err(|e| e.to_string()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "channel" => self.channel = lower.parse()?,
            "decay_taps" => self.decay_taps = scalar(v)?,
            "chips" => self.chips = scalar(v)?,
            "users" => self.users = Some(parse_list(v)?),
            "beta" => self.beta = Some(parse_list(v)?),
            "iota" => self.iota = scalar(v)?,
            "chip_time_ns" => self.chip_time_ns = scalar(v)?,
            "bandwidth_hz" => self.bandwidth_hz = Some(scalar(v)?),
            "delay_spread_ns" => self.delay_spread_ns = scalar(v)?,
            "placement" => self.placement = lower.parse().map_err(|e: Error| e.to_string())?,
            "snr_db" => self.snr_db = parse_grid(v)?,
            "sigma_xi2" => self.sigma_xi2 = Some(parse_list(v)?),
            "training_amplitude" => self.training_amplitude = Some(scalar(v)?),
            "training_length" => self.training_length = Some(scalar(v)?),
            "training_mode" => self.training_mode = lower.parse()?,
            "estimator" => self.estimator = lower,
            "rzf_reg" => self.rzf_reg = scalar(v)?,
            "symbol_energy" => self.symbol_energy = scalar(v)?,
            "trials" => self.trials = scalar(v)?,
            "samples" => self.samples = scalar(v)?,
            "seed" => self.seed = scalar(v)?,
            "early_stop" => self.early_stop = parse_bool(&lower)?,
            "normalize_prefilter" => self.normalize_prefilter = parse_bool(&lower)?,
            "alpha" => self.alpha = scalar(v)?,
            "mi_points" => self.mi_points = scalar(v)?,
            "mi_mode" => self.mi_mode = lower.parse()?,
            "output" => self.output = Some(v.to_string()),
            other => return Err(format!("unknown key `{other}`")),
        }
        if self.schemes.is_empty() {
            return Err("at least one scheme is required".into());
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Replaces the seed (command-line override).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.lines.get(key).copied()
    }

    fn has(&self, key: &str) -> bool {
        self.lines.contains_key(key)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth_hz.unwrap_or(self.iota as f64 * 1e9 / self.chip_time_ns)
    }

    /// Channel length in chips, `L`.
    pub fn channel_chips(&self) -> usize {
        match self.channel {
            ChannelPreset::Delta => 0,
            _ => channel::channel_chips(self.bandwidth(), self.delay_spread_ns * 1e-9, self.iota),
        }
    }

    pub fn channel_model(&self) -> Result<ChannelModel> {
        let taps = (self.channel_chips() + 1) * self.iota;
        Ok(match self.channel {
            ChannelPreset::Cm1 => ChannelModel::cm1(self.bandwidth(), self.delay_spread_ns * 1e-9, self.iota),
            ChannelPreset::Delta => {
                let mut t = vec![0.0; taps];
                t[0] = 1.0;
                ChannelModel::Fixed(DiscreteChannel::from_taps(t)?)
            }
            ChannelPreset::Exponential => ChannelModel::ExponentialGaussian {
                taps,
                decay_taps: self.decay_taps,
            },
        })
    }

    pub fn training(&self) -> Option<TrainingBudget> {
        match (self.training_amplitude, self.training_length) {
            (None, None) => None,
            (a, n) => Some(TrainingBudget {
                amplitude: a.unwrap_or(1.0),
                length: n.unwrap_or(255),
            }),
        }
    }

    fn uses_default_sweep(&self) -> bool {
        matches!(self.experiment, Experiment::Ber | Experiment::Mi)
            && self.users.is_none()
            && self.beta.is_none()
            && self.sigma_xi2.is_none()
            && self.training().is_none()
    }

    /// Curves to run: loads zipped with CSI settings, length-one lists
    /// broadcast. Loads given as `beta` map to `K = 1 + round(beta N)`.
    pub fn cases(&self) -> std::result::Result<Vec<Case>, String> {
        let n = self.chips.max(1);
        let sweep = [0.0, 0.05, 0.1];
        let loads: Vec<usize> = match (&self.users, &self.beta) {
            (Some(k), None) => k.clone(),
            (None, Some(b)) => b.iter().map(|b| 1 + (b * n as f64).round().max(0.0) as usize).collect(),
            (Some(k), Some(b)) => {
                if k.len() != b.len() {
                    return Err("`users` and `beta` lists differ in length".into());
                }
                for (k, b) in k.iter().zip(b) {
                    if *k != 1 + (b * n as f64).round().max(0.0) as usize {
                        return Err(format!(
                            "users = {k} does not match beta = {b} for N = {n} (K = 1 + round(beta N))"
                        ));
                    }
                }
                k.clone()
            }
            (None, None) if self.uses_default_sweep() => {
                sweep.iter().map(|b| 1 + (b * n as f64).round() as usize).collect()
            }
            (None, None) => vec![1],
        };
        let csi: Vec<CsiSpec> = match (&self.sigma_xi2, self.training()) {
            (Some(_), Some(_)) => return Err("set either sigma_xi2 or a training budget, not both".into()),
            (Some(s), None) => s.iter().map(|v| CsiSpec::Var(*v)).collect(),
            (None, Some(b)) => vec![CsiSpec::Training(b, self.training_mode)],
            (None, None) if self.uses_default_sweep() => sweep.iter().map(|v| CsiSpec::Var(*v)).collect(),
            (None, None) => vec![CsiSpec::Var(0.0)],
        };
        let len = match (loads.len(), csi.len()) {
            (0, _) | (_, 0) => return Err("empty load or CSI list".into()),
            (a, b) if a == b || b == 1 => a,
            (1, b) => b,
            (a, b) => return Err(format!("{a} loads cannot be paired with {b} CSI settings")),
        };
        Ok((0..len)
            .map(|i| {
                let users = loads[i.min(loads.len() - 1)];
                Case {
                    users,
                    beta: users.saturating_sub(1) as f64 / n as f64,
                    csi: csi[i.min(csi.len() - 1)],
                }
            })
            .collect())
    }

    pub fn system(&self, case: &Case) -> SystemConfig {
        SystemConfig {
            chips_per_symbol: self.chips,
            users: case.users,
            iota: self.iota,
            bandwidth_hz: self.bandwidth(),
            channel_chips: self.channel_chips(),
            symbol_energy: self.symbol_energy,
            noise_var: 0.0,
            csi_error_var: match case.csi {
                CsiSpec::Var(v) => v,
                CsiSpec::Training(..) => 0.0,
            },
            placement: self.placement,
        }
    }

    pub fn output_name(&self) -> String {
        self.output
            .clone()
            .unwrap_or_else(|| format!("{}.csv", self.experiment.name()))
    }

    /// Fully resolved config text; parsing it yields the same cases and data.
    pub fn render(&self) -> String {
        let cases = self.cases().unwrap_or_default();
        let mut out = vec![
            format!("experiment = {}", self.experiment.name()),
            format!("schemes = {}", join(&self.schemes)),
            format!("channel = {}", self.channel.name()),
        ];
        if self.channel == ChannelPreset::Exponential {
            out.push(format!("decay_taps = {}", self.decay_taps));
        }
        out.push(format!("chips = {}", self.chips));
        out.push(format!(
            "users = {}",
            join(&cases.iter().map(|c| c.users).collect::<Vec<_>>())
        ));
        out.push(format!("iota = {}", self.iota));
        out.push(format!("chip_time_ns = {}", self.chip_time_ns));
        out.push(format!("bandwidth_hz = {}", self.bandwidth()));
        out.push(format!("delay_spread_ns = {}", self.delay_spread_ns));
        out.push(format!("placement = {}", self.placement));
        out.push(format!("snr_db = {}", join(&self.snr_db)));
        match self.training() {
            Some(b) => {
                out.push(format!("training_amplitude = {}", b.amplitude));
                out.push(format!("training_length = {}", b.length));
                out.push(format!("training_mode = {}", self.training_mode));
            }
            None => {
                let v: Vec<f64> = cases
                    .iter()
                    .map(|c| match c.csi {
                        CsiSpec::Var(v) => v,
                        CsiSpec::Training(..) => 0.0,
                    })
                    .collect();
                out.push(format!("sigma_xi2 = {}", join(&v)));
            }
        }
        out.push(format!("estimator = {}", self.estimator));
        out.push(format!("rzf_reg = {}", self.rzf_reg));
        out.push(format!("symbol_energy = {}", self.symbol_energy));
        out.push(format!("trials = {}", self.trials));
        out.push(format!("samples = {}", self.samples));
        out.push(format!("seed = {}", self.seed));
        out.push(format!("early_stop = {}", self.early_stop));
        out.push(format!("normalize_prefilter = {}", self.normalize_prefilter));
        out.push(format!("alpha = {}", self.alpha));
        out.push(format!("mi_points = {}", self.mi_points));
        out.push(format!("mi_mode = {}", self.mi_mode));
        out.push(format!("output = {}", self.output_name()));
        out.join("\n") + "\n"
    }
}

/// Every problem with `cfg`, fatal or not.
pub fn validate(cfg: &RunConfig) -> Vec<Diagnostic> {
    let mut d = Vec::new();
    let mut push = |fatal: bool, key: &str, message: String| {
        d.push(Diagnostic {
            fatal,
            line: cfg.line(key),
            message,
        })
    };
    if cfg.iota == 0 {
        push(true, "iota", "iota must be >= 1".into());
    }
    if cfg.chips == 0 {
        push(true, "chips", "chips (N) must be >= 1".into());
    }
    if let Some(k) = &cfg.users {
        if k.contains(&0) {
            push(true, "users", "users (K) must be >= 1".into());
        }
        if cfg.chips > 0 && k.iter().any(|&k| k > cfg.chips) {
            push(false, "users", "beta > 1 unusual: more users than chips".into());
        }
    }
    if let Some(b) = &cfg.beta {
        if b.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            push(true, "beta", "beta must be finite and >= 0".into());
        } else if b.iter().any(|b| *b > 1.0) {
            push(false, "beta", "beta > 1 unusual".into());
        }
    }
    if !(cfg.chip_time_ns > 0.0 && cfg.chip_time_ns.is_finite()) {
        push(true, "chip_time_ns", "chip_time_ns must be > 0".into());
    }
    if !(cfg.delay_spread_ns > 0.0 && cfg.delay_spread_ns.is_finite()) {
        push(true, "delay_spread_ns", "delay_spread_ns must be > 0".into());
    }
    if let Some(w) = cfg.bandwidth_hz {
        if !(w > 0.0 && w.is_finite()) {
            push(true, "bandwidth_hz", "bandwidth_hz must be > 0".into());
        } else if cfg.chip_time_ns > 0.0 && cfg.iota > 0 {
            let want = cfg.iota as f64 * 1e9 / cfg.chip_time_ns;
            if ((w - want) / want).abs() > 1e-9 {
                push(
                    true,
                    "bandwidth_hz",
                    format!("bandwidth_hz = {w} disagrees with iota / chip_time = {want}"),
                );
            }
        }
    }
    if cfg.channel == ChannelPreset::Exponential && !(cfg.decay_taps > 0.0) {
        push(true, "decay_taps", "decay_taps must be > 0".into());
    }
    if cfg.snr_db.is_empty() || cfg.snr_db.iter().any(|s| !s.is_finite()) {
        push(
            true,
            "snr_db",
            "snr_db must be a non-empty list of finite values".into(),
        );
    }
    if let Some(s) = &cfg.sigma_xi2 {
        if s.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            push(true, "sigma_xi2", "sigma_xi2 must be finite and >= 0".into());
        }
        if cfg.training().is_some() {
            let key = if cfg.has("training_length") {
                "training_length"
            } else {
                "training_amplitude"
            };
            push(
                true,
                key,
                "both sigma_xi2 and a training budget are set; choose one".into(),
            );
        }
    }
    if let Some(b) = cfg.training() {
        if !(b.amplitude > 0.0 && b.amplitude.is_finite()) {
            push(true, "training_amplitude", "training_amplitude must be > 0".into());
        }
        if b.register().is_none() {
            push(
                true,
                "training_length",
                format!("training_length {} must be 2^m - 1 with 2 <= m <= 20", b.length),
            );
        } else if cfg.iota > 0 && (cfg.channel_chips() + 1) * cfg.iota > b.length * cfg.iota {
            push(
                true,
                "training_length",
                "training sequence shorter than the channel".into(),
            );
        }
    } else if cfg.has("training_mode") {
        push(
            true,
            "training_mode",
            "training_mode needs training_amplitude or training_length".into(),
        );
    }
    if let Err(e) = EstimatorKind::from_name(&cfg.estimator, 1.0, cfg.rzf_reg) {
        push(true, "estimator", e.to_string());
    }
    if !(cfg.symbol_energy > 0.0 && cfg.symbol_energy.is_finite()) {
        push(true, "symbol_energy", "symbol_energy must be > 0".into());
    }
    if cfg.trials == 0 {
        push(true, "trials", "trials must be >= 1".into());
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        push(true, "alpha", "alpha must lie in (0, 1)".into());
    }
    if let Some(o) = &cfg.output {
        if o.is_empty() || o.contains(['/', '\\']) || o.starts_with('.') {
            push(true, "output", format!("output `{o}` must be a plain file name"));
        }
    }
    match cfg.experiment {
        Experiment::Coupling | Experiment::Mi if cfg.samples < 10_000 => {
            push(true, "samples", "samples must be >= 10000".into());
        }
        _ => {}
    }
    if cfg.experiment == Experiment::Mi {
        if cfg.mi_points < 4 || !cfg.mi_points.is_power_of_two() {
            push(true, "mi_points", "mi_points must be a power of two >= 4".into());
        }
        if cfg.training().is_some() && cfg.training_mode == TrainingMode::EndToEnd {
            push(true, "training_mode", "mi supports only derived training".into());
        }
    }
    if cfg.experiment == Experiment::Coupling && cfg.training().is_some() {
        push(
            true,
            "training_length",
            "coupling needs sigma_xi2, not a training budget".into(),
        );
    }
    if cfg.experiment == Experiment::Estimation && cfg.sigma_xi2.is_some() {
        push(
            false,
            "sigma_xi2",
            "sigma_xi2 is ignored by the estimation experiment".into(),
        );
    }
    match cfg.cases() {
        Err(e) => {
            let key = if cfg.has("sigma_xi2") { "sigma_xi2" } else { "users" };
            push(true, key, e);
        }
        Ok(cases) => {
            if cfg.experiment == Experiment::Equivalence && cases.iter().any(|c| c.users != 1) {
                push(true, "users", "equivalence needs a single user (K = 1)".into());
            }
            if let (Experiment::Estimation, Some(b)) = (cfg.experiment, cfg.training()) {
                if cases.iter().any(|c| c.users > b.length) {
                    push(true, "users", "more users than distinct training shifts".into());
                }
            }
            if cfg.iota > 0 && cfg.chips > 0 && cases.iter().all(|c| c.users > 0) {
                let mut seen = Vec::new();
                for c in &cases {
                    match cfg.system(c).validate() {
                        Ok(w) => {
                            for w in w {
                                if !seen.contains(&w) {
                                    seen.push(w.clone());
                                    push(false, "chips", w);
                                }
                            }
                        }
                        Err(e) => push(true, "chips", e.to_string()),
                    }
                }
            }
        }
    }
    d
}

/// Files written and one-line summaries.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
    /// `false` when a pass/fail experiment failed.
    pub passed: bool,
}

/// Writes all files or none: each goes to a temporary sibling first and is
/// renamed only after every file has been written.
pub fn write_atomic(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut staged = Vec::new();
    let result = (|| -> Result<()> {
        for (name, data) in files {
            let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
            staged.push((tmp.clone(), dir.join(name)));
            let mut f = fs::File::create(&tmp)?;
            f.write_all(data)?;
            f.sync_all()?;
        }
        Ok(())
    })();
    if let Err(e) = result {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
        return Err(e);
    }
    for (tmp, dst) in &staged {
        fs::rename(tmp, dst)?;
    }
    Ok(staged.into_iter().map(|(_, d)| d).collect())
}

fn header(cfg: &RunConfig) -> Vec<u8> {
    let mut h = format!("# uwbsim {}\n", env!("CARGO_PKG_VERSION"));
    for l in cfg.render().lines() {
        h.push_str("# ");
        h.push_str(l);
        h.push('\n');
    }
    h.into_bytes()
}

fn case_seed(cfg: &RunConfig, i: usize) -> u64 {
    rng::derive(cfg.seed, i as u64)
}

/// Validates and runs `cfg`, writing CSVs into `out_dir` only on success.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunReport> {
    let fatal: Vec<String> = validate(cfg)
        .iter()
        .filter(|d| d.fatal)
        .map(|d| d.to_string())
        .collect();
    if !fatal.is_empty() {
        return Err(Error::Validation(fatal.join("\n")));
    }
    let cases = cfg.cases().map_err(Error::InvalidParameter)?;
    let name = cfg.output_name();
    let mut report = RunReport {
        passed: true,
        ..Default::default()
    };
    let mut files = Vec::new();
    let mut body = header(cfg);
    match cfg.experiment {
        Experiment::Ber => run_ber_experiment(cfg, &cases, &mut body, &mut report)?,
        Experiment::Equivalence => run_equivalence(cfg, &cases, &mut body, &mut report)?,
        Experiment::Coupling => {
            let stats = run_coupling(cfg, &cases, &mut report)?;
            write_coupling_csv(&mut body, &stats)?;
            let mut summary = header(cfg);
            write_coupling_summary(&mut summary, &stats)?;
            let stem = name.strip_suffix(".csv").unwrap_or(&name);
            files.push((format!("{stem}_summary.csv"), summary));
        }
        Experiment::Mi => run_mi(cfg, &cases, &mut body, &mut report)?,
        Experiment::Estimation => run_estimation(cfg, &cases, &mut body, &mut report)?,
    }
    files.insert(0, (name, body));
    report.files = write_atomic(out_dir, &files)?;
    Ok(report)
}

fn csi_label(c: &Case) -> String {
    match c.csi {
        CsiSpec::Var(v) => format!("sigma_xi2={v}"),
        CsiSpec::Training(b, m) => format!("training A={} N_t={} ({m})", b.amplitude, b.length),
    }
}

fn run_ber_experiment(cfg: &RunConfig, cases: &[Case], out: &mut Vec<u8>, report: &mut RunReport) -> Result<()> {
    let channel = cfg.channel_model()?;
    let mut results = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        for &scheme in &cfg.schemes {
            let mut exp = BerExperiment::new(
                cfg.system(case),
                channel.clone(),
                cfg.snr_db.clone(),
                cfg.trials,
                scheme,
                case_seed(cfg, i),
            );
            exp.csi = case.csi.source()?;
            exp.early_stop = cfg.early_stop;
            exp.normalize_prefilter = cfg.normalize_prefilter;
            let r = run_ber(&exp)?;
            let last = r.points.last().expect("non-empty grid");
            report.summary.push(format!(
                "ber {scheme} K={} beta={} {}: Pe({} dB) = {:.4e} +/- {:.1e}",
                case.users,
                r.beta,
                csi_label(case),
                last.snr_db,
                last.pe,
                last.stderr
            ));
            results.push(r);
        }
    }
    write_ber_csv(out, &results)?;
    Ok(())
}

fn run_equivalence(cfg: &RunConfig, cases: &[Case], out: &mut Vec<u8>, report: &mut RunReport) -> Result<()> {
    let channel = cfg.channel_model()?;
    writeln!(
        out,
        "snr_db,sigma_xi2,pe_tr,pe_ar,stderr_combined,ks_statistic,ks_p_value,pe_consistent,ks_consistent"
    )?;
    for (i, case) in cases.iter().enumerate() {
        let mut exp = BerExperiment::new(
            cfg.system(case),
            channel.clone(),
            cfg.snr_db.clone(),
            cfg.trials,
            Scheme::Tr,
            case_seed(cfg, i),
        );
        exp.csi = case.csi.source()?;
        exp.early_stop = false;
        exp.normalize_prefilter = cfg.normalize_prefilter;
        let rep = equivalence_test(&exp, cfg.alpha)?;
        for p in &rep.points {
            let nv = cfg.symbol_energy * 10f64.powf(-p.snr_db / 10.0);
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                p.snr_db,
                case.csi.var_at(nv),
                p.pe_tr,
                p.pe_ar,
                p.stderr_combined,
                p.ks.statistic,
                p.ks.p_value,
                p.pe_consistent,
                p.ks_consistent
            )?;
        }
        let ok = rep.passed();
        report.passed &= ok;
        report.summary.push(format!(
            "equivalence {}: {} ({} SNR points, alpha = {})",
            csi_label(case),
            if ok { "PASS" } else { "FAIL" },
            rep.points.len(),
            cfg.alpha
        ));
    }
    Ok(())
}

fn run_coupling(cfg: &RunConfig, cases: &[Case], report: &mut RunReport) -> Result<Vec<CouplingStats>> {
    let channel = cfg.channel_model()?;
    let mut stats = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        let CsiSpec::Var(v) = case.csi else {
            return Err(Error::InvalidParameter("coupling needs sigma_xi2".into()));
        };
        for &scheme in &cfg.schemes {
            let s = coupling_histogram(&cfg.system(case), &channel, scheme, v, cfg.samples, case_seed(cfg, i))?;
            report.summary.push(format!(
                "coupling {scheme} sigma_xi2={v}: var = {:.4}, kurtosis = {:.2}, zero mass = {:.4}",
                s.cross_moments.variance, s.cross_moments.kurtosis, s.zero_mass
            ));
            stats.push(s);
        }
    }
    Ok(stats)
}

fn write_coupling_summary<W: Write>(mut out: W, stats: &[CouplingStats]) -> std::io::Result<()> {
    writeln!(
        out,
        "scheme,sigma_xi2,samples,rejected,zero_mass,zero_mass_stderr,exact_zero_fraction,cross_mean,cross_var,cross_kurtosis,self_mean,self_var"
    )?;
    for s in stats {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            s.scheme,
            s.sigma_xi2,
            s.cross.len(),
            s.rejected,
            s.zero_mass,
            s.zero_mass_stderr,
            s.exact_zero_fraction,
            s.cross_moments.mean,
            s.cross_moments.variance,
            s.cross_moments.kurtosis,
            s.self_moments.mean,
            s.self_moments.variance
        )?;
    }
    Ok(())
}

fn run_mi(cfg: &RunConfig, cases: &[Case], out: &mut Vec<u8>, report: &mut RunReport) -> Result<()> {
    let channel = cfg.channel_model()?;
    let e = cfg.symbol_energy;
    let mut curves = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        let sys = cfg.system(case);
        let load = LoadParams::new(case.beta, cfg.channel_chips(), cfg.iota)?;
        let opts = MiOptions {
            points: cfg.mi_points,
            mode: match cfg.mi_mode {
                MiMode::Asymptotic => InterferenceMode::Asymptotic,
                MiMode::Finite => InterferenceMode::Finite {
                    users: case.users,
                    chips: cfg.chips,
                },
            },
            ..MiOptions::default()
        };
        for &scheme in &cfg.schemes {
            let mut cached: Option<(f64, CouplingStats)> = None;
            let mut by_var: Vec<(f64, Vec<MiPoint>)> = Vec::new();
            for &snr in &cfg.snr_db {
                let nv = e * 10f64.powf(-snr / 10.0);
                let v = case.csi.var_at(nv);
                if cached.as_ref().is_none_or(|(cv, _)| *cv != v) {
                    let s = coupling_histogram(&sys, &channel, scheme, v, cfg.samples, case_seed(cfg, i))?;
                    cached = Some((v, s));
                }
                let s = &cached.as_ref().expect("just filled").1;
                let r = mutual_information(&s.self_coupling, &s.cross, e, nv, &load, &opts)?;
                let p = MiPoint {
                    snr_db: snr,
                    mi: r.mi,
                    mi_lower: r.lower_bound,
                    spectral_eff: spectral_efficiency(r.mi, load.beta, load.iota),
                    spectral_eff_lower: spectral_efficiency(r.lower_bound, load.beta, load.iota),
                };
                match by_var.last_mut() {
                    Some((lv, pts)) if *lv == v => pts.push(p),
                    _ => by_var.push((v, vec![p])),
                }
            }
            for (v, points) in by_var {
                let last = points.last().expect("non-empty");
                report.summary.push(format!(
                    "mi {scheme} beta={} sigma_xi2={v}: I({} dB) = {:.4} nats, R = {:.4}",
                    case.beta, last.snr_db, last.mi, last.spectral_eff
                ));
                curves.push(MiCurve {
                    scheme,
                    beta: case.beta,
                    sigma_xi2: v,
                    iota: cfg.iota,
                    points,
                });
            }
        }
    }
    write_mi_csv(out, &curves)?;
    Ok(())
}

fn run_estimation(cfg: &RunConfig, cases: &[Case], out: &mut Vec<u8>, report: &mut RunReport) -> Result<()> {
    let channel = cfg.channel_model()?;
    let budget = cfg.training().unwrap_or(TrainingBudget {
        amplitude: 1.0,
        length: 255,
    });
    let seq = budget.sequence()?;
    let m = budget.register().expect("validated");
    writeln!(
        out,
        "snr_db,link,estimator,users,noise_var,training_energy,mse_per_tap,predicted"
    )?;
    for (i, case) in cases.iter().enumerate() {
        let seed = case_seed(cfg, i);
        let trainings = ul_training_set(m, case.users, budget.amplitude, &mut rng::seeded(seed))?;
        for &snr in &cfg.snr_db {
            let mut sys = cfg.system(case);
            sys.noise_var = cfg.symbol_energy * 10f64.powf(-snr / 10.0);
            let kind = EstimatorKind::from_name(&cfg.estimator, sys.noise_var, cfg.rzf_reg)?;
            let ul = UlEstimator::new(&trainings, kind, &sys, false)?;
            let errs = (0..cfg.trials)
                .into_par_iter()
                .map(|t| -> Result<(f64, f64)> {
                    let mut r = rng::stream(seed, t);
                    let c = channel.draw(&mut r)?.into_taps();
                    let dl = dl_estimate(&receive_dl_training(&seq, &c, &sys, &mut r), &seq, &sys)?;
                    let dl_err: f64 = dl.channel.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum();
                    let chans = (0..case.users)
                        .map(|_| channel.draw(&mut r).map(|c| c.into_taps()))
                        .collect::<Result<Vec<_>>>()?;
                    let y = receive_ul_training(&trainings, &chans, &sys, &mut r)?;
                    let est = ul.estimate(&y)?;
                    let ul_err: f64 = est
                        .channels
                        .iter()
                        .zip(&chans)
                        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)))
                        .sum();
                    Ok((dl_err, ul_err))
                })
                .collect::<Result<Vec<_>>>()?;
            let taps = sys.tap_count() as f64;
            let n = cfg.trials as f64;
            let dl_mse = errs.iter().map(|e| e.0).sum::<f64>() / (n * taps);
            let ul_mse = errs.iter().map(|e| e.1).sum::<f64>() / (n * taps * case.users as f64);
            let pred = training_error_var(sys.noise_var, seq.energy());
            writeln!(out, "{snr},dl,mf,1,{},{},{dl_mse},{pred}", sys.noise_var, seq.energy())?;
            writeln!(
                out,
                "{snr},ul,{},{},{},{},{ul_mse},",
                cfg.estimator,
                case.users,
                sys.noise_var,
                seq.energy()
            )?;
            report.summary.push(format!(
                "estimation K={} {snr} dB: DL MSE/tap = {dl_mse:.4e} (predicted {pred:.4e}), UL {} MSE/tap = {ul_mse:.4e}",
                case.users, cfg.estimator
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> RunConfig {
        RunConfig::parse(s).unwrap()
    }

    fn fatal(cfg: &RunConfig) -> Vec<Diagnostic> {
        validate(cfg).into_iter().filter(|d| d.fatal).collect()
    }

    #[test]
    fn defaults_give_six_ber_curves() {
        let cfg = parse("experiment = ber\n");
        let cases = cfg.cases().unwrap();
        assert_eq!(cases.len(), 3);
        assert_eq!(cases.iter().map(|c| c.users).collect::<Vec<_>>(), vec![1, 11, 21]);
        assert_eq!(cases[1].beta, 0.05);
        assert_eq!(cases[2].csi, CsiSpec::Var(0.1));
        assert_eq!(cases.len() * cfg.schemes.len(), 6);
        assert!(fatal(&cfg).is_empty());
        assert_eq!(cfg.channel_chips(), 50);
    }

    #[test]
    fn parse_lists_ranges_and_comments() {
        let cfg = parse(
            "# comment\n[run]\nexperiment = coupling ; trailing\nschemes = ar\nsnr_db = 0:2:6\nsigma_xi2 = 0, 0.01\n",
        );
        assert_eq!(cfg.experiment, Experiment::Coupling);
        assert_eq!(cfg.schemes, vec![Scheme::Ar]);
        assert_eq!(cfg.snr_db, vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(cfg.sigma_xi2, Some(vec![0.0, 0.01]));
        assert_eq!(cfg.cases().unwrap().len(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = RunConfig::parse("experiment = ber\nbogus = 1\nchips = x\nchips = 3\nnot a pair\n").unwrap_err();
        let msg = err.to_string();
        for l in ["line 2", "line 3", "line 5"] {
            assert!(msg.contains(l), "{msg}");
        }
        assert!(RunConfig::parse("iota = 1\niota = 2\n")
            .unwrap_err()
            .to_string()
            .contains("line 2"));
    }

    #[test]
    fn beta_above_one_warns() {
        let cfg = parse("chips = 100\nusers = 150\n");
        let d = validate(&cfg);
        assert!(d.iter().any(|d| !d.fatal && d.message.contains("beta > 1")));
        assert!(d.iter().all(|d| !d.fatal));
    }

    #[test]
    fn iota_zero_is_fatal() {
        let cfg = parse("iota = 0\n");
        let f = fatal(&cfg);
        assert!(f.iter().any(|d| d.message.contains("iota") && d.line == Some(1)));
    }

    #[test]
    fn sigma_and_training_together_are_fatal() {
        let cfg = parse("sigma_xi2 = 0.1\ntraining_amplitude = 1\ntraining_length = 255\n");
        let f = fatal(&cfg);
        assert!(f.iter().any(|d| d.message.contains("both sigma_xi2")));
    }

    #[test]
    fn validation_reports_every_problem() {
        let cfg = parse("iota = 0\ntrials = 0\nalpha = 2\nsnr_db = \n");
        assert!(fatal(&cfg).len() >= 4);
    }

    #[test]
    fn beta_users_consistency() {
        let ok = parse("chips = 200\nusers = 11\nbeta = 0.05\n");
        assert!(fatal(&ok).is_empty());
        let bad = parse("chips = 200\nusers = 10\nbeta = 0.05\n");
        assert!(!fatal(&bad).is_empty());
    }

    #[test]
    fn bandwidth_must_match_chip_time() {
        let cfg = parse("iota = 2\nchip_time_ns = 1\nbandwidth_hz = 1e9\n");
        assert!(fatal(&cfg).iter().any(|d| d.line == Some(3)));
        let cfg = parse("iota = 2\nchip_time_ns = 1\nbandwidth_hz = 2e9\n");
        assert!(fatal(&cfg).is_empty());
    }

    #[test]
    fn training_budget_resolution() {
        let cfg = parse("training_amplitude = 2\ntraining_length = 127\n");
        let b = cfg.training().unwrap();
        assert_eq!(b.register(), Some(7));
        assert_eq!(b.energy(), 4.0 * 127.0);
        assert_eq!(cfg.cases().unwrap()[0].csi, CsiSpec::Training(b, TrainingMode::Derived));
        assert!((cfg.cases().unwrap()[0].csi.var_at(1.0) - 1.0 / 508.0).abs() < 1e-15);
        let bad = parse("training_length = 100\n");
        assert!(!fatal(&bad).is_empty());
    }

    #[test]
    fn equivalence_rejects_multiuser() {
        assert!(fatal(&parse("experiment = equivalence\n")).is_empty());
        assert!(!fatal(&parse("experiment = equivalence\nusers = 2\n")).is_empty());
    }

    #[test]
    fn render_round_trips() {
        let cfg = parse("experiment = mi\nbeta = 0.1\nsigma_xi2 = 0, 0.02\nsnr_db = 10:10:40\nseed = 9\n");
        let again = RunConfig::parse(&cfg.render()).unwrap();
        assert_eq!(again.render(), cfg.render());
        assert_eq!(again.cases().unwrap(), cfg.cases().unwrap());
        assert!(fatal(&again).is_empty());
    }

    #[test]
    fn atomic_write_leaves_nothing_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let files = vec![
            ("a.csv".to_string(), b"x\n".to_vec()),
            ("b/c.csv".to_string(), b"y\n".to_vec()),
        ];
        assert!(write_atomic(dir.path(), &files).is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
        let ok = write_atomic(dir.path(), &files[..1]).unwrap();
        assert_eq!(fs::read(&ok[0]).unwrap(), b"x\n");
    }

    #[test]
    fn invalid_config_writes_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse("iota = 0\n");
        assert!(matches!(run(&cfg, dir.path()), Err(Error::Validation(_))));
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn small_ber_run_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let text = "experiment = ber\nchips = 16\nusers = 2\nchannel = exponential\ndecay_taps = 2\ndelay_spread_ns = 3\nsnr_db = 0, 10\ntrials = 2000\nsigma_xi2 = 0.05\n";
        let cfg = parse(text);
        let rep = run(&cfg, dir.path()).unwrap();
        let first = fs::read_to_string(&rep.files[0]).unwrap();
        assert!(first.starts_with("# uwbsim"));
        assert_eq!(first.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 2);
        // re-run from the emitted header
        let resolved: String = first
            .lines()
            .skip(1)
            .take_while(|l| l.starts_with("# "))
            .map(|l| format!("{}\n", &l[2..]))
            .collect();
        let dir2 = tempfile::tempdir().unwrap();
        let rep2 = run(&RunConfig::parse(&resolved).unwrap(), dir2.path()).unwrap();
        assert_eq!(fs::read_to_string(&rep2.files[0]).unwrap(), first);
    }
}
