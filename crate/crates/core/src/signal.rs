//! Time-hopping codes, convolution operators, the TR prefilter and the
//! imperfect-CSI perturbation model.
//!
//! Banded Toeplitz channel and prefilter matrices are never built: every
//! product with a time-hopping vector is a shifted convolution, represented by
//! an [`EffectiveChannel`] window.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::DiscreteChannel;
use crate::{rng, Error, Result};

/// How a user's position in the symbol frame relates to other users'.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Placement {
    /// Relative delays are taken modulo the `N * iota` frame, so every
    /// relative offset is equally likely (no border effects).
    #[default]
    Circular,
    /// Windows sit on a linear axis starting at their hop position; users near
    /// opposite frame edges never overlap.
    Linear,
}

impl std::str::FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "circular" | "modular" => Ok(Placement::Circular),
            "linear" => Ok(Placement::Linear),
            other => Err(Error::InvalidParameter(format!("unknown placement `{other}`"))),
        }
    }
}

impl std::fmt::Display for Placement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Placement::Circular => "circular",
            Placement::Linear => "linear",
        })
    }
}

/// Scalar system parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Chips per symbol, `N`.
    pub chips_per_symbol: usize,
    /// Number of users, `K`.
    pub users: usize,
    /// Impulsiveness index: samples per chip.
    pub iota: usize,
    /// System bandwidth `W` in Hz.
    pub bandwidth_hz: f64,
    /// Channel length in chips, `L`.
    pub channel_chips: usize,
    pub symbol_energy: f64,
    /// Noise variance per real sample (two-sided `N0/2`).
    pub noise_var: f64,
    /// Per-tap variance of the CSI error.
    pub csi_error_var: f64,
    pub placement: Placement,
}

impl SystemConfig {
    /// Chip duration `T_c = iota / W` in seconds.
    pub fn chip_time(&self) -> f64 {
        self.iota as f64 / self.bandwidth_hz
    }

    /// Samples per symbol frame, `N * iota`.
    pub fn frame_samples(&self) -> usize {
        self.chips_per_symbol * self.iota
    }

    /// Channel taps per user, `(L + 1) * iota`.
    pub fn tap_count(&self) -> usize {
        (self.channel_chips + 1) * self.iota
    }

    /// Load `beta = K / N`.
    pub fn load(&self) -> f64 {
        self.users as f64 / self.chips_per_symbol as f64
    }

    /// Checks hard constraints and returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut fatal = Vec::new();
        if self.chips_per_symbol == 0 {
            fatal.push("N must be >= 1".to_string());
        }
        if self.users == 0 {
            fatal.push("K must be >= 1".to_string());
        }
        if self.iota == 0 {
            fatal.push("iota must be >= 1".to_string());
        }
        if !(self.bandwidth_hz > 0.0) {
            fatal.push("W must be > 0".to_string());
        }
        for (name, v) in [
            ("symbol energy", self.symbol_energy),
            ("noise variance", self.noise_var),
            ("CSI error variance", self.csi_error_var),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                fatal.push(format!("{name} must be finite and >= 0"));
            }
        }
        if !fatal.is_empty() {
            return Err(Error::InvalidParameter(fatal.join("; ")));
        }
        let mut warnings = Vec::new();
        if self.chips_per_symbol < 2 * self.channel_chips {
            warnings.push(format!(
                "N = {} < 2L = {}: channel windows wrap over a large part of the frame",
                self.chips_per_symbol,
                2 * self.channel_chips
            ));
        }
        Ok(warnings)
    }
}

/// Time-hopping code with sub-chip offset, `x = s (x) e_l^iota`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpreadingVector {
    hop: usize,
    offset: usize,
    chips: usize,
    iota: usize,
}

impl SpreadingVector {
    /// `hop` in `1..=chips`, `offset` in `1..=iota`.
    pub fn new(hop: usize, offset: usize, chips: usize, iota: usize) -> Result<Self> {
        if hop == 0 || hop > chips || offset == 0 || offset > iota {
            return Err(Error::InvalidParameter(format!(
                "hop {hop} / offset {offset} out of range for N = {chips}, iota = {iota}"
            )));
        }
        Ok(SpreadingVector {
            hop,
            offset,
            chips,
            iota,
        })
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// One-based index of the nonzero sample, `(hop - 1) * iota + offset`.
    pub fn position(&self) -> usize {
        (self.hop - 1) * self.iota + self.offset
    }

    /// Zero-based index of the nonzero sample.
    pub fn start(&self) -> usize {
        self.position() - 1
    }

    pub fn frame_samples(&self) -> usize {
        self.chips * self.iota
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.frame_samples()];
        v[self.start()] = 1.0;
        v
    }
}

/// Uniform hop and offset draw.
pub fn draw_th_code<R: Rng + ?Sized>(chips: usize, iota: usize, rng: &mut R) -> SpreadingVector {
    let hop = rng.random_range(1..=chips);
    let offset = rng.random_range(1..=iota);
    SpreadingVector {
        hop,
        offset,
        chips,
        iota,
    }
}

pub fn make_th_code(chips: usize, iota: usize, seed: u64) -> Result<SpreadingVector> {
    if chips == 0 || iota == 0 {
        return Err(Error::InvalidParameter("N and iota must be >= 1".into()));
    }
    Ok(draw_th_code(chips, iota, &mut rng::seeded(seed)))
}

/// Full linear convolution.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Single output sample `(a * b)[n]` of the full linear convolution.
pub fn convolve_at(a: &[f64], b: &[f64], n: usize) -> f64 {
    let lo = n.saturating_sub(b.len() - 1);
    let hi = n.min(a.len() - 1);
    if lo > hi {
        return 0.0;
    }
    (lo..=hi).map(|i| a[i] * b[n - i]).sum()
}

/// I.i.d. `N(0, var)` error vector.
pub fn gaussian_error<R: Rng + ?Sized>(len: usize, var: f64, rng: &mut R) -> Vec<f64> {
    let sd = var.sqrt();
    (0..len).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Adds an error vector to the taps. The result is not renormalized.
pub fn perturb_with<R: Rng + ?Sized>(c: &DiscreteChannel, error_var: f64, rng: &mut R) -> Result<DiscreteChannel> {
    if !(error_var >= 0.0) {
        return Err(Error::InvalidParameter("error variance must be >= 0".into()));
    }
    if error_var == 0.0 {
        return Ok(c.clone());
    }
    let xi = gaussian_error(c.len(), error_var, rng);
    let taps = c.taps().iter().zip(&xi).map(|(a, b)| a + b).collect();
    DiscreteChannel::new(taps, c.tap_spacing())
}

/// Estimated channel `c + xi`, `xi ~ N(0, error_var I)`.
pub fn perturb_channel(c: &DiscreteChannel, error_var: f64, seed: u64) -> Result<DiscreteChannel> {
    perturb_with(c, error_var, &mut rng::seeded(seed))
}

/// Unit-energy time-reversed prefilter built from a channel estimate.
pub fn tr_prefilter(estimate: &[f64]) -> Result<Vec<f64>> {
    let norm = estimate.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroEnergy);
    }
    Ok(estimate.iter().rev().map(|x| x / norm).collect())
}

/// Nonzero window of `C x` or `C T x` in the symbol frame.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    pub samples: Vec<f64>,
    /// Zero-based frame index of `samples[0]`.
    pub window_start: usize,
}

impl EffectiveChannel {
    /// Value at absolute frame index `n` (zero outside the window).
    pub fn at(&self, n: usize) -> f64 {
        n.checked_sub(self.window_start)
            .and_then(|i| self.samples.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }
}

/// Effective channel for code `x`: the channel itself (AR) or the channel
/// convolved with a prefilter (TR). For a TR prefilter matched to a
/// `T`-tap channel, the 1Rake samples at `x.start() + T - 1`.
pub fn effective_channel(c: &DiscreteChannel, prefilter: Option<&[f64]>, x: &SpreadingVector) -> EffectiveChannel {
    let samples = match prefilter {
        Some(t) => convolve(c.taps(), t),
        None => c.taps().to_vec(),
    };
    EffectiveChannel {
        samples,
        window_start: x.start(),
    }
}

/// Sample offset of user `j`'s window relative to user `k`'s, `s_j - s_k`.
/// Circular placement maps it into `(-M/2, M/2]` for a frame of `M` samples.
pub fn relative_delay(start_k: usize, start_j: usize, frame: usize, placement: Placement) -> i64 {
    let d = start_j as i64 - start_k as i64;
    match placement {
        Placement::Linear => d,
        Placement::Circular => {
            let m = frame as i64;
            let mut r = d.rem_euclid(m);
            if r > m / 2 {
                r -= m;
            }
            r
        }
    }
}
