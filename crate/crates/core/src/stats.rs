//! Sample statistics, the two-sample Kolmogorov-Smirnov test, the Gaussian
//! tail function and Gauss-Hermite quadrature.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// First four sample moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    /// Unbiased variance.
    pub variance: f64,
    /// Pearson kurtosis `m4 / m2^2` (3 for a Gaussian).
    pub kurtosis: f64,
}

pub fn moments(xs: &[f64]) -> Result<Moments> {
    if xs.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &x in xs {
        let d2 = (x - mean) * (x - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    let variance = if xs.len() > 1 { m2 / (n - 1.0) } else { 0.0 };
    let kurtosis = if m2 > 0.0 { n * m4 / (m2 * m2) } else { f64::NAN };
    Ok(Moments {
        count: xs.len(),
        mean,
        variance,
        kurtosis,
    })
}

/// Result of a two-sample KS test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

impl KsResult {
    /// True when the null hypothesis survives at level `alpha`.
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// Kolmogorov distribution tail `Q_KS(lambda)`.
fn q_ks(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let a = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut prev = 0.0f64;
    for j in 1..=100 {
        let jf = j as f64;
        let term = sign * 2.0 * (a * jf * jf).exp();
        sum += term;
        if term.abs() <= 1e-12 * prev || term.abs() <= 1e-300 {
            return sum.clamp(0.0, 1.0);
        }
        prev = term.abs();
        sign = -sign;
    }
    1.0
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    let p_value = q_ks((ne + 0.12 + 0.11 / ne) * d);
    Ok(KsResult { statistic: d, p_value })
}

/// Gaussian tail `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Gauss-Hermite rule for `E[f(b)]`, `b ~ N(0, 1)`: returns `(nodes, weights)`
/// with weights summing to one.
pub fn gauss_hermite_normal(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidParameter("quadrature needs at least one node".into()));
    }
    // Golub-Welsch on the probabilists' Hermite recurrence.
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    // symmetrize to remove eigensolver round-off
    for i in 0..n / 2 {
        let (lo, hi) = (pairs[i], pairs[n - 1 - i]);
        let x = 0.5 * (hi.0 - lo.0);
        let w = 0.5 * (hi.1 + lo.1);
        pairs[i] = (-x, w);
        pairs[n - 1 - i] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    Ok(pairs.into_iter().map(|(x, w)| (x, w / total)).unzip())
}

/// Fixed-width histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    /// Samples outside `[lo, hi]`.
    pub outside: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(hi > lo) || bins == 0 {
            return Err(Error::InvalidParameter("histogram needs lo < hi and bins > 0".into()));
        }
        Ok(Histogram {
            lo,
            hi,
            counts: vec![0; bins],
            outside: 0,
        })
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn add(&mut self, x: f64) {
        if !(self.lo..=self.hi).contains(&x) {
            self.outside += 1;
            return;
        }
        let last = self.counts.len() - 1;
        let i = ((x - self.lo) / self.bin_width()) as usize;
        self.counts[i.min(last)] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.outside
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.counts.len()).map(|i| self.lo + (i as f64 + 0.5) * w).collect()
    }

    /// Density estimate per bin (integrates to the in-range fraction).
    pub fn density(&self) -> Vec<f64> {
        let norm = self.total().max(1) as f64 * self.bin_width();
        self.counts.iter().map(|&c| c as f64 / norm).collect()
    }
}
