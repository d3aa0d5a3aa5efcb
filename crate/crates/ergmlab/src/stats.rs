//! Numerical utilities shared across modules: stable summation, discrete
//! laws with exact distances to the standard normal, empirical distance
//! estimators, and small-sample summary statistics.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::{ErgmError, Result};

/// log(Σ exp(x_i)) with the usual max shift. Empty input yields -inf.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Compensated (Kahan) accumulator; used where 1e-12 agreement between two
/// summation orders is asserted.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn normal_pdf(x: f64) -> f64 {
    std_normal().pdf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Antiderivative of the standard normal CDF: ∫_{-∞}^t Φ = tΦ(t) + φ(t).
fn cdf_antiderivative(t: f64) -> f64 {
    t * normal_cdf(t) + normal_pdf(t)
}

/// A finitely supported probability law with strictly increasing support.
#[derive(Debug, Clone)]
pub struct DiscreteLaw {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() || support.is_empty() {
            return Err(ErgmError::BadArgument(
                "law needs equal-length, non-empty support and probabilities".into(),
            ));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ErgmError::BadArgument("support must be strictly increasing".into()));
        }
        if probs.iter().any(|&p| !(0.0..=1.0 + 1e-9).contains(&p)) {
            return Err(ErgmError::BadArgument("probabilities outside [0, 1]".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ErgmError::BadArgument(format!("probabilities sum to {total}, not 1")));
        }
        Ok(DiscreteLaw { support, probs })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.probs).map(|(x, p)| x * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.support.iter().zip(&self.probs).map(|(x, p)| (x - m).powi(2) * p).sum()
    }

    /// The law of (X - shift) / scale on the transformed support.
    pub fn affine(&self, shift: f64, scale: f64) -> Result<Self> {
        if scale <= 0.0 {
            return Err(ErgmError::BadArgument("scale must be positive".into()));
        }
        let support = self.support.iter().map(|x| (x - shift) / scale).collect();
        DiscreteLaw::new(support, self.probs.clone())
    }

    /// Exact Kolmogorov distance to the standard normal. The supremum of
    /// |F - Φ| is attained in the limit at an atom, from one side or the
    /// other, so checking both one-sided values at every atom is exact.
    pub fn kolmogorov_vs_std_normal(&self) -> f64 {
        let mut best = 0.0f64;
        let mut cum = 0.0;
        for (&x, &p) in self.support.iter().zip(&self.probs) {
            let phi = normal_cdf(x);
            best = best.max((cum - phi).abs());
            cum += p;
            best = best.max((cum - phi).abs());
        }
        best
    }

    /// Exact Wasserstein-1 distance to the standard normal, i.e.
    /// ∫ |F(t) - Φ(t)| dt, computed in closed form segment by segment.
    pub fn wasserstein_vs_std_normal(&self) -> f64 {
        let first = self.support[0];
        let last = *self.support.last().unwrap();
        // Left tail: F = 0.
        let mut total = cdf_antiderivative(first);
        // Right tail: F = 1; ∫_w^∞ (1 - Φ) = φ(w) - w(1 - Φ(w)).
        total += normal_pdf(last) - last * (1.0 - normal_cdf(last));
        let mut cum = 0.0;
        for (i, &p) in self.probs.iter().enumerate().take(self.probs.len() - 1) {
            cum += p;
            let a = self.support[i];
            let b = self.support[i + 1];
            total += segment_area(a, b, cum);
        }
        total
    }

    /// Draws by inversion of the CDF.
    pub fn sample_index(&self, u: f64) -> usize {
        let mut cum = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            cum += p;
            if u < cum {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

/// ∫_a^b |c - Φ(t)| dt for constant c, splitting at the crossing Φ^{-1}(c).
fn segment_area(a: f64, b: f64, c: f64) -> f64 {
    let u = if c <= normal_cdf(a) {
        a
    } else if c >= normal_cdf(b) {
        b
    } else {
        normal_quantile(c).clamp(a, b)
    };
    c * (2.0 * u - a - b) + cdf_antiderivative(a) + cdf_antiderivative(b)
        - 2.0 * cdf_antiderivative(u)
}

/// ½ Σ |p_i - q_i| over aligned probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(ErgmError::BadArgument("TV needs aligned supports".into()));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Kolmogorov–Smirnov statistic of a sample against the standard normal.
/// Sorts a copy; both one-sided gaps are checked at every order statistic.
pub fn ks_vs_std_normal(sample: &[f64]) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let m = xs.len() as f64;
    let mut best = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let phi = normal_cdf(x);
        best = best.max((i as f64 / m - phi).abs());
        best = best.max(((i + 1) as f64 / m - phi).abs());
    }
    best
}

/// Wasserstein-1 estimate against the standard normal from order statistics
/// matched to the quantiles at plotting positions (i - ½)/m.
pub fn wasserstein_vs_std_normal_empirical(sample: &[f64]) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let m = xs.len();
    xs.iter()
        .enumerate()
        .map(|(i, &x)| (x - normal_quantile((i as f64 + 0.5) / m as f64)).abs())
        .sum::<f64>()
        / m as f64
}

/// Half-width of the Dvoretzky–Kiefer–Wolfowitz confidence band at level
/// 1 - alpha: sqrt(ln(2/alpha) / (2m)).
pub fn dkw_band(m: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * m as f64)).sqrt()
}

/// Sample mean with its standard error (i.i.d. assumption).
pub fn mean_with_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample standard deviation with a delta-method standard error based on the
/// fourth central moment: Var(s²) ≈ (μ₄ - σ⁴)/n, se(s) ≈ se(s²) / (2s).
pub fn sd_with_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    // Constant input has zero spread exactly; skip the accumulation, whose
    // rounding would otherwise report a spurious ulp-sized deviation.
    if !xs.is_empty() && xs.iter().all(|&x| x == xs[0]) {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 4 {
        return (0.0, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let mu4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var_of_var = ((mu4 - var * var) / n).max(0.0);
    let se = if sd > 0.0 { var_of_var.sqrt() / (2.0 * sd) } else { f64::INFINITY };
    (sd, se)
}

/// Mean with a batch-means standard error, for serially correlated draws.
/// Uses ⌊√n⌋ batches of equal length, dropping any remainder.
pub fn mean_with_batch_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let b = (n as f64).sqrt().floor() as usize;
    if b < 2 {
        return mean_with_se(xs);
    }
    let len = n / b;
    let means: Vec<f64> =
        (0..b).map(|k| xs[k * len..(k + 1) * len].iter().sum::<f64>() / len as f64).collect();
    mean_with_se(&means)
}

/// Least-squares line y = intercept + slope * x.
/// Returns (slope, intercept, se_slope).
pub fn ols_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(ErgmError::BadArgument("OLS needs at least 3 aligned points".into()));
    }
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ErgmError::BadArgument("OLS x values are constant".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 =
        xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    Ok((slope, intercept, se))
}

/// Effective sample size of self-normalized importance weights:
/// (Σw)² / Σw².
pub fn importance_ess(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}
