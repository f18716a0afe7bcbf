//! Characteristic-function route to the mutual information of the matched
//! filter output `z = a_kk b + S + nu` with Gaussian symbols `b ~ N(0, E)`.
//!
//! Grids follow one convention: `u_k = (k - n/2) du` for `k = 0..n`, with `n`
//! a multiple of four, so the inversion is a single FFT with alternating signs
//! and the density lands on `z_m = (m - n/2) dz`, `dz = 2 pi / (n du)`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::stats::gauss_hermite_normal;
use crate::{Error, Result, Scheme};

/// Default number of grid points.
pub const DEFAULT_POINTS: usize = 1 << 16;
/// Required cf magnitude at the grid edge.
pub const EDGE_TOL: f64 = 1e-8;
/// Largest tolerated negative ripple mass before clipping becomes an error.
pub const MAX_CLIPPED_MASS: f64 = 1e-4;
/// Smoothing variance, relative to `E`, used when the noise variance is zero.
pub const SMOOTHING_VAR: f64 = 1e-6;
const MAX_POINTS: usize = 1 << 24;

/// Characteristic function sampled on `u_k = (k - n/2) du`.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedCf {
    du: f64,
    values: Vec<Complex64>,
}

fn check_grid(points: usize, du: f64) -> Result<()> {
    if points < 4 || !points.is_multiple_of(4) {
        return Err(Error::InvalidParameter(format!(
            "grid size {points} must be a positive multiple of 4"
        )));
    }
    if !(du > 0.0 && du.is_finite()) {
        return Err(Error::InvalidParameter(format!("grid step {du} must be > 0")));
    }
    Ok(())
}

impl GriddedCf {
    pub fn new(du: f64, values: Vec<Complex64>) -> Result<Self> {
        check_grid(values.len(), du)?;
        Ok(GriddedCf { du, values })
    }

    pub fn ones(points: usize, du: f64) -> Result<Self> {
        Self::new(du, vec![Complex64::new(1.0, 0.0); points])
    }

    pub fn from_fn(points: usize, du: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        check_grid(points, du)?;
        let h = (points / 2) as f64;
        Ok(GriddedCf {
            du,
            values: (0..points).map(|k| f((k as f64 - h) * du)).collect(),
        })
    }

    /// Even real function from its samples at `u = k du`, `k = 0..=n/2`.
    fn from_even_half(du: f64, half: &[f64]) -> Self {
        let h = half.len() - 1;
        let values = (0..2 * h).map(|k| Complex64::new(half[k.abs_diff(h)], 0.0)).collect();
        GriddedCf { du, values }
    }

    /// Hermitian function from its samples at `u = k du`, `k = 0..=n/2`.
    fn from_hermitian_half(du: f64, half: &[Complex64]) -> Self {
        let h = half.len() - 1;
        let values = (0..2 * h)
            .map(|k| if k >= h { half[k - h] } else { half[h - k].conj() })
            .collect();
        GriddedCf { du, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn du(&self) -> f64 {
        self.du
    }

    pub fn u(&self, k: usize) -> f64 {
        (k as f64 - (self.len() / 2) as f64) * self.du
    }

    /// Half-width `U = n du / 2`.
    pub fn u_max(&self) -> f64 {
        (self.len() / 2) as f64 * self.du
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Value at `u = 0`.
    pub fn at_zero(&self) -> Complex64 {
        self.values[self.len() / 2]
    }

    /// Linear interpolation; `None` outside the grid.
    pub fn value_at(&self, u: f64) -> Option<Complex64> {
        let x = u / self.du + (self.len() / 2) as f64;
        if x < 0.0 || x > (self.len() - 1) as f64 {
            return None;
        }
        let i = (x.floor() as usize).min(self.len() - 2);
        let t = x - i as f64;
        Some(self.values[i] * (1.0 - t) + self.values[i + 1] * t)
    }

    /// Largest magnitude at the two grid edges.
    pub fn edge_magnitude(&self) -> f64 {
        self.values[0].norm().max(self.values[self.len() - 1].norm())
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() || self.du != other.du {
            return Err(Error::InvalidParameter(
                "characteristic functions on different grids".into(),
            ));
        }
        Ok(())
    }

    /// Pointwise product (law of the sum of independent variables).
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        Ok(GriddedCf {
            du: self.du,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    /// `max_k |phi(-u_k) - conj(phi(u_k))|` over the symmetric part of the grid.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.len();
        (1..n)
            .map(|k| (self.values[n - k] - self.values[k].conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// Density on `z_m = z0 + m dz`.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedPdf {
    pub z0: f64,
    pub dz: f64,
    pub density: Vec<f64>,
    /// Negative ripple mass removed before renormalization.
    pub clipped_mass: f64,
}

impl GriddedPdf {
    pub fn z(&self, m: usize) -> f64 {
        self.z0 + m as f64 * self.dz
    }

    pub fn integral(&self) -> f64 {
        let n = self.density.len();
        let s: f64 = self.density.iter().sum();
        (s - 0.5 * (self.density[0] + self.density[n - 1])) * self.dz
    }

    /// `E[z^p]` by the rectangle rule.
    pub fn moment(&self, p: i32) -> f64 {
        self.density
            .iter()
            .enumerate()
            .map(|(m, d)| d * self.z(m).powi(p))
            .sum::<f64>()
            * self.dz
    }

    /// `int P(z) exp(i u z) dz`.
    pub fn cf_at(&self, u: f64) -> Complex64 {
        self.density
            .iter()
            .enumerate()
            .map(|(m, d)| Complex64::from_polar(*d, u * self.z(m)))
            .sum::<Complex64>()
            * self.dz
    }
}

/// Discrete law with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EmpiricalLaw {
    /// Samples compressed to at most `max_bins` equal-count groups, each
    /// represented by its centroid.
    pub fn from_samples(samples: &[f64], max_bins: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        if max_bins == 0 {
            return Err(Error::InvalidParameter("max_bins must be >= 1".into()));
        }
        let n = samples.len();
        if n <= max_bins {
            return Ok(EmpiricalLaw {
                values: samples.to_vec(),
                weights: vec![1.0 / n as f64; n],
            });
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let mut values = Vec::with_capacity(max_bins);
        let mut weights = Vec::with_capacity(max_bins);
        for b in 0..max_bins {
            let (lo, hi) = (b * n / max_bins, (b + 1) * n / max_bins);
            if hi > lo {
                values.push(s[lo..hi].iter().sum::<f64>() / (hi - lo) as f64);
                weights.push((hi - lo) as f64 / n as f64);
            }
        }
        Ok(EmpiricalLaw { values, weights })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn squared(&self) -> Self {
        EmpiricalLaw {
            values: self.values.iter().map(|v| v * v).collect(),
            weights: self.weights.clone(),
        }
    }
}

/// Load `beta = K / N` and the overlap window `2 (L + 1) iota - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadParams {
    pub beta: f64,
    pub window: usize,
    pub iota: usize,
}

impl LoadParams {
    pub fn new(beta: f64, channel_chips: usize, iota: usize) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) || iota == 0 {
            return Err(Error::InvalidParameter(format!(
                "load needs beta >= 0 and iota >= 1 (got {beta}, {iota})"
            )));
        }
        Ok(LoadParams {
            beta,
            window: 2 * (channel_chips + 1) * iota - 1,
            iota,
        })
    }

    /// `beta (2 (L + 1) iota - 1) / iota`.
    pub fn beta_eff(&self) -> f64 {
        self.beta * self.window as f64 / self.iota as f64
    }

    /// Overlap probability for `N` chips.
    pub fn overlap_probability(&self, chips: usize) -> f64 {
        self.window as f64 / (chips * self.iota) as f64
    }
}

/// Finite system or its large-system limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterferenceMode {
    Asymptotic,
    Finite { users: usize, chips: usize },
}

impl InterferenceMode {
    /// Mean number of overlapping interferers.
    fn mean_overlaps(&self, load: &LoadParams) -> f64 {
        match *self {
            InterferenceMode::Asymptotic => load.beta_eff(),
            InterferenceMode::Finite { users, chips } => {
                users.saturating_sub(1) as f64 * load.overlap_probability(chips)
            }
        }
    }
}

/// Empirical cf `mean_i exp(i u s_i)`.
pub fn cf_of_samples(samples: &[f64], points: usize, du: f64) -> Result<GriddedCf> {
    check_grid(points, du)?;
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let h = points / 2;
    let mut acc = vec![Complex64::new(0.0, 0.0); h + 1];
    for &s in samples {
        let step = Complex64::from_polar(1.0, s * du);
        let mut z = Complex64::new(1.0, 0.0);
        for (k, a) in acc.iter_mut().enumerate() {
            if k % 1024 == 0 {
                z = Complex64::from_polar(1.0, s * du * k as f64);
            }
            *a += z;
            z *= step;
        }
    }
    let n = samples.len() as f64;
    let half: Vec<Complex64> = acc.into_iter().map(|a| a / n).collect();
    Ok(GriddedCf::from_hermitian_half(du, &half))
}

/// `sum_j w_j exp(-c_j u^2)` at `u = k du`, `k = 0..=h`, by a multiplicative
/// recurrence resynchronized every 512 steps.
fn gaussian_mixture_half(coeffs: &EmpiricalLaw, scale: f64, du: f64, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; h + 1];
    for (&v, &w) in coeffs.values.iter().zip(&coeffs.weights) {
        let c = scale * v * du * du;
        if c == 0.0 {
            out.iter_mut().for_each(|o| *o += w);
            continue;
        }
        let q2 = (-2.0 * c).exp();
        let (mut g, mut r) = (1.0, (-c).exp());
        for (k, o) in out.iter_mut().enumerate() {
            if k % 512 == 0 {
                let kf = k as f64;
                g = (-c * kf * kf).exp();
                r = (-c * (2.0 * kf + 1.0)).exp();
            }
            if g < 1e-300 {
                break;
            }
            *o += w * g;
            g *= r;
            r *= q2;
        }
    }
    out
}

/// `phi_bar(u) = E_b[phi_hat(b u)]`, `b ~ N(0, E)`, by Gauss-Hermite quadrature
/// on a gridded `phi_hat` (linear interpolation). The output grid is
/// `points` samples of step `du`; arguments beyond `phi_hat`'s grid are
/// treated as zero only if `phi_hat` has decayed there.
pub fn symbol_average_cf(phi_hat: &GriddedCf, energy: f64, nodes: usize, points: usize, du: f64) -> Result<GriddedCf> {
    check_grid(points, du)?;
    if !(energy >= 0.0) {
        return Err(Error::InvalidParameter("symbol energy must be >= 0".into()));
    }
    let (x, w) = gauss_hermite_normal(nodes)?;
    let sd = energy.sqrt();
    let decayed = phi_hat.edge_magnitude() < EDGE_TOL;
    let needed = sd * x.iter().fold(0.0f64, |m, v| m.max(v.abs())) * (points / 2) as f64 * du;
    if needed > phi_hat.u_max() && !decayed {
        return Err(Error::GridTooNarrow {
            magnitude: phi_hat.edge_magnitude(),
            u_max: phi_hat.u_max(),
            suggested_u: needed,
        });
    }
    GriddedCf::from_fn(points, du, |u| {
        x.iter()
            .zip(&w)
            .map(|(xi, wi)| *wi * phi_hat.value_at(sd * xi * u).unwrap_or_default())
            .sum()
    })
}

/// Closed form of the symbol average for the law of `a^2`:
/// `E_a[exp(-E a^2 u^2 / 2)]`.
pub fn symbol_average_cf_exact(squares: &EmpiricalLaw, energy: f64, points: usize, du: f64) -> Result<GriddedCf> {
    check_grid(points, du)?;
    let half = gaussian_mixture_half(squares, 0.5 * energy, du, points / 2);
    Ok(GriddedCf::from_even_half(du, &half))
}

/// Interference cf: `{1 - f (1 - phi_bar)}^(K-1)` or `exp(-beta_eff (1 - phi_bar))`.
pub fn interference_cf(phi_bar: &GriddedCf, load: &LoadParams, mode: InterferenceMode) -> GriddedCf {
    let one = Complex64::new(1.0, 0.0);
    let values = match mode {
        InterferenceMode::Asymptotic => {
            let b = load.beta_eff();
            phi_bar.values.iter().map(|p| (-(one - p) * b).exp()).collect()
        }
        InterferenceMode::Finite { users, chips } => {
            let f = load.overlap_probability(chips);
            let e = users.saturating_sub(1) as i32;
            phi_bar.values.iter().map(|p| (one - (one - p) * f).powi(e)).collect()
        }
    };
    GriddedCf { du: phi_bar.du, values }
}

/// Multiplies by the Gaussian noise cf `exp(-sigma^2 u^2 / 2)`.
pub fn add_noise_cf(phi: &GriddedCf, noise_var: f64) -> GriddedCf {
    let mut out = phi.clone();
    if noise_var > 0.0 {
        for (k, v) in out.values.iter_mut().enumerate() {
            let u = phi.u(k);
            *v *= (-0.5 * noise_var * u * u).exp();
        }
    }
    out
}

fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

fn invert_with(phi: &GriddedCf, fft: &dyn Fft<f64>) -> Result<GriddedPdf> {
    let n = phi.len();
    let mag = phi.edge_magnitude();
    if !(mag < EDGE_TOL) {
        let u = phi.u_max();
        let suggested_u = if mag > 0.0 && mag < 1.0 {
            1.1 * u * (EDGE_TOL.ln() / mag.ln()).sqrt()
        } else {
            2.0 * u
        };
        return Err(Error::GridTooNarrow {
            magnitude: mag,
            u_max: u,
            suggested_u,
        });
    }
    let mut buf: Vec<Complex64> = phi
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| if k % 2 == 0 { *v } else { -v })
        .collect();
    fft.process(&mut buf);
    let dz = 2.0 * PI / (n as f64 * phi.du);
    let scale = phi.du / (2.0 * PI);
    let mut density: Vec<f64> = buf
        .iter()
        .enumerate()
        .map(|(m, v)| scale * if m % 2 == 0 { v.re } else { -v.re })
        .collect();
    let mut clipped = 0.0;
    for d in density.iter_mut() {
        if *d < 0.0 {
            clipped -= *d;
            *d = 0.0;
        }
    }
    clipped *= dz;
    if clipped > MAX_CLIPPED_MASS {
        return Err(Error::PdfRipple(clipped));
    }
    let mut pdf = GriddedPdf {
        z0: -((n / 2) as f64) * dz,
        dz,
        density,
        clipped_mass: clipped,
    };
    let total = pdf.integral();
    pdf.density.iter_mut().for_each(|d| *d /= total);
    Ok(pdf)
}

/// Density by discrete Fourier inversion.
pub fn pdf_from_cf(phi: &GriddedCf) -> Result<GriddedPdf> {
    invert_with(phi, inverse_plan(phi.len()).as_ref())
}

/// `-int P ln P dz` with `0 ln 0 = 0`.
pub fn differential_entropy(p: &GriddedPdf) -> f64 {
    -p.density.iter().filter(|&&d| d > 0.0).map(|d| d * d.ln()).sum::<f64>() * p.dz
}

/// `E_a[0.5 ln(1 + E a^2 / (Var S + sigma^2))]`.
pub fn gaussian_lower_bound(self_samples: &[f64], var_s: f64, noise_var: f64, energy: f64) -> Result<f64> {
    if self_samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(var_s >= 0.0 && noise_var >= 0.0 && energy >= 0.0) {
        return Err(Error::InvalidParameter("variances and energy must be >= 0".into()));
    }
    let den = var_s + noise_var;
    Ok(self_samples
        .iter()
        .map(|a| 0.5 * (energy * a * a / den).ln_1p())
        .sum::<f64>()
        / self_samples.len() as f64)
}

/// `R = (beta / iota) I` in nats/s/Hz.
pub fn spectral_efficiency(mi: f64, beta: f64, iota: usize) -> f64 {
    beta / iota as f64 * mi
}

/// Sum rate `W R` in nats/s.
pub fn sum_rate(mi: f64, beta: f64, iota: usize, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * spectral_efficiency(mi, beta, iota)
}

/// Numerical settings for [`mutual_information`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiOptions {
    /// Minimum grid size; doubled while the density range is too short.
    pub points: usize,
    pub gh_nodes: usize,
    pub self_bins: usize,
    pub cross_bins: usize,
    pub mode: InterferenceMode,
}

impl Default for MiOptions {
    fn default() -> Self {
        MiOptions {
            points: DEFAULT_POINTS,
            gh_nodes: 64,
            self_bins: 256,
            cross_bins: 2048,
            mode: InterferenceMode::Asymptotic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiResult {
    /// `I(z; b)` in nats per channel use.
    pub mi: f64,
    pub lower_bound: f64,
    pub h_z: f64,
    pub h_z_given_b: f64,
    /// Interference variance from the cross-coupling mixture.
    pub var_s: f64,
    /// Noise variance actually used (smoothed when the input was zero).
    pub noise_var: f64,
    pub smoothing_injected: bool,
    pub points: usize,
    pub u_max: f64,
}

/// Mutual information from self-coupling samples and the nonzero
/// cross-coupling samples.
pub fn mutual_information(
    self_samples: &[f64],
    cross_samples: &[f64],
    energy: f64,
    noise_var: f64,
    load: &LoadParams,
    opts: &MiOptions,
) -> Result<MiResult> {
    if !(energy >= 0.0 && energy.is_finite()) || !(noise_var >= 0.0) {
        return Err(Error::InvalidParameter("energy and noise variance must be >= 0".into()));
    }
    let self_law = EmpiricalLaw::from_samples(self_samples, opts.self_bins)?;
    let overlaps = opts.mode.mean_overlaps(load);
    let (cross_sq, e_a2, max_c2) = if overlaps > 0.0 {
        let sq: Vec<f64> = cross_samples.iter().map(|a| a * a).collect();
        let law = EmpiricalLaw::from_samples(&sq, opts.cross_bins)?;
        let e = sq.iter().sum::<f64>() / sq.len() as f64;
        let m = sq.iter().fold(0.0f64, |m, v| m.max(*v));
        (law, e, m)
    } else {
        (
            EmpiricalLaw {
                values: vec![0.0],
                weights: vec![1.0],
            },
            0.0,
            0.0,
        )
    };
    let var_s = overlaps * energy * e_a2;
    let (sigma2, injected) = if noise_var > 0.0 {
        (noise_var, false)
    } else {
        (SMOOTHING_VAR * energy.max(f64::MIN_POSITIVE), true)
    };
    if energy == 0.0 {
        return Ok(MiResult {
            mi: 0.0,
            lower_bound: 0.0,
            h_z: 0.5 * (2.0 * PI * std::f64::consts::E * sigma2).ln(),
            h_z_given_b: 0.5 * (2.0 * PI * std::f64::consts::E * sigma2).ln(),
            var_s,
            noise_var: sigma2,
            smoothing_injected: injected,
            points: 0,
            u_max: 0.0,
        });
    }

    // u range from the noise decay, z range from the widest law involved
    let u_max = 1.05 * (2.0 * (1.0 / EDGE_TOL).ln() / sigma2).sqrt();
    let (x, w) = gauss_hermite_normal(opts.gh_nodes)?;
    let x_max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let r_max = if overlaps > 0.0 {
        overlaps + 6.0 * overlaps.sqrt() + 6.0
    } else {
        0.0
    };
    let center = self_law.mean();
    let dev = self_law.values.iter().fold(0.0f64, |m, a| m.max((a - center).abs()));
    let interf = energy * r_max * max_c2 + sigma2;
    let spread = (energy * self_law.max_abs().powi(2) + interf)
        .max(energy * x_max * x_max * dev * dev + interf)
        .sqrt();
    let need = 10.0 * spread;
    let mut n = opts.points.max(4).next_power_of_two();
    while (n as f64) * PI / (2.0 * u_max) < need {
        n *= 2;
        if n > MAX_POINTS {
            return Err(Error::InvalidParameter(format!(
                "density range {need:.3e} needs more than {MAX_POINTS} grid points"
            )));
        }
    }
    let h = n / 2;
    let du = u_max / h as f64;
    let fft = inverse_plan(n);

    let phi_bar = symbol_average_cf_exact(&cross_sq, energy, n, du)?;
    let phi_sn = add_noise_cf(&interference_cf(&phi_bar, load, opts.mode), sigma2);

    let phi_z = phi_sn.mul(&symbol_average_cf_exact(&self_law.squared(), energy, n, du)?)?;
    let h_z = differential_entropy(&invert_with(&phi_z, fft.as_ref())?);

    // h(z | b) is even in b: use the non-negative nodes with doubled weights
    let sd = energy.sqrt();
    let terms: Vec<(f64, f64)> = x
        .iter()
        .zip(&w)
        .filter(|(xi, _)| **xi >= 0.0)
        .map(|(xi, wi)| (*xi, if *xi > 0.0 { 2.0 * wi } else { *wi }))
        .collect();
    let h_cond = terms
        .par_iter()
        .map(|&(xi, wi)| -> Result<f64> {
            let b = sd * xi;
            let cf = phi_sn.mul(&shifted_self_cf(&self_law, b, center, du, h))?;
            Ok(wi * differential_entropy(&invert_with(&cf, fft.as_ref())?))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<f64>();

    let mut mi = h_z - h_cond;
    if mi < 0.0 && mi > -1e-9 {
        mi = 0.0;
    }
    Ok(MiResult {
        mi,
        lower_bound: gaussian_lower_bound(self_samples, var_s, sigma2, energy)?,
        h_z,
        h_z_given_b: h_cond,
        var_s,
        noise_var: sigma2,
        smoothing_injected: injected,
        points: n,
        u_max,
    })
}

/// cf of `(a - center) b` for the law of `a`.
fn shifted_self_cf(law: &EmpiricalLaw, b: f64, center: f64, du: f64, h: usize) -> GriddedCf {
    let mut half = vec![Complex64::new(0.0, 0.0); h + 1];
    for (&a, &w) in law.values.iter().zip(&law.weights) {
        let theta = b * (a - center) * du;
        let step = Complex64::from_polar(1.0, theta);
        let mut z = Complex64::new(w, 0.0);
        for (k, o) in half.iter_mut().enumerate() {
            if k % 1024 == 0 {
                z = Complex64::from_polar(w, theta * k as f64);
            }
            *o += z;
            z *= step;
        }
    }
    GriddedCf::from_hermitian_half(du, &half)
}

/// One point of an MI curve.
#[derive(Debug, Clone, PartialEq)]
pub struct MiPoint {
    pub snr_db: f64,
    pub mi: f64,
    pub mi_lower: f64,
    pub spectral_eff: f64,
    pub spectral_eff_lower: f64,
}

/// MI curve for one scheme and CSI error level.
#[derive(Debug, Clone, PartialEq)]
pub struct MiCurve {
    pub scheme: Scheme,
    pub beta: f64,
    pub sigma_xi2: f64,
    pub iota: usize,
    pub points: Vec<MiPoint>,
}

/// Evaluates [`mutual_information`] over an SNR grid with `E` fixed.
pub fn mi_curve(
    self_samples: &[f64],
    cross_samples: &[f64],
    energy: f64,
    load: &LoadParams,
    opts: &MiOptions,
    snr_grid_db: &[f64],
) -> Result<Vec<MiPoint>> {
    snr_grid_db
        .iter()
        .map(|&snr| {
            let noise_var = energy * 10f64.powf(-snr / 10.0);
            let r = mutual_information(self_samples, cross_samples, energy, noise_var, load, opts)?;
            Ok(MiPoint {
                snr_db: snr,
                mi: r.mi,
                mi_lower: r.lower_bound,
                spectral_eff: spectral_efficiency(r.mi, load.beta, load.iota),
                spectral_eff_lower: spectral_efficiency(r.lower_bound, load.beta, load.iota),
            })
        })
        .collect()
}

/// `snr_db,scheme,beta,sigma_xi2,iota,mi_nats,mi_lower_nats,spectral_eff,spectral_eff_lower` rows.
pub fn write_mi_csv<W: Write>(mut out: W, curves: &[MiCurve]) -> std::io::Result<()> {
    writeln!(
        out,
        "snr_db,scheme,beta,sigma_xi2,iota,mi_nats,mi_lower_nats,spectral_eff,spectral_eff_lower"
    )?;
    for c in curves {
        for p in &c.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                p.snr_db, c.scheme, c.beta, c.sigma_xi2, c.iota, p.mi, p.mi_lower, p.spectral_eff, p.spectral_eff_lower
            )?;
        }
    }
    Ok(())
}
