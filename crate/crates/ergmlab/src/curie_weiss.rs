//! Mean-field spin model in its high-temperature phase: the exactly
//! solvable benchmark. The total magnetization carries the whole tilt, so
//! its law, all distances to the normal limit, and every Stein-method
//! summary are computable in closed form and serve as ground truth for the
//! generic estimators.

use std::sync::Arc;

use statrs::function::gamma::ln_gamma;

use crate::rng::CounterRng;
use crate::stats::{log_sum_exp, DiscreteLaw, KahanSum};
use crate::stein::{RoughnessProfile, TiltedFamily};
use crate::{ErgmError, Result};

/// Exact law of the total magnetization s ∈ {−N, −N+2, …, N} under the
/// quadratic exponential tilt of independent uniform signs.
#[derive(Debug, Clone)]
pub struct CwMeasure {
    site_count: usize,
    coupling: f64,
    /// Magnetization values, ascending.
    support: Vec<f64>,
    probs: Vec<f64>,
    cum: Vec<f64>,
}

impl CwMeasure {
    /// High-temperature phase only: coupling strictly inside (0, 1).
    pub fn build(site_count: usize, coupling: f64) -> Result<Self> {
        if site_count == 0 {
            return Err(ErgmError::BadArgument("need at least one site".into()));
        }
        if !(coupling > 0.0 && coupling < 1.0) {
            return Err(ErgmError::BadSpec(format!(
                "coupling {coupling} outside the high-temperature interval (0, 1)"
            )));
        }
        let n = site_count;
        let nf = n as f64;
        let ln_n_fact = ln_gamma(nf + 1.0);
        let mut log_weights = vec![0.0; n + 1];
        // Fill the lower half and mirror it: the weight is symmetric in
        // k ↔ n−k, and mirroring makes the symmetry exact in floating point.
        for k in 0..=n / 2 {
            let kf = k as f64;
            let s = 2.0 * kf - nf;
            let lw = ln_n_fact - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0)
                + coupling * s * s / (2.0 * nf);
            log_weights[k] = lw;
            log_weights[n - k] = lw;
        }
        let log_z = log_sum_exp(&log_weights);
        let probs: Vec<f64> = log_weights.iter().map(|lw| (lw - log_z).exp()).collect();
        let mut norm = KahanSum::default();
        for &p in &probs {
            norm.add(p);
        }
        debug_assert!((norm.value() - 1.0).abs() <= 1e-12);
        let support: Vec<f64> = (0..=n).map(|k| 2.0 * k as f64 - nf).collect();
        let mut cum = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cum.push(acc);
        }
        Ok(CwMeasure { site_count, coupling, support, probs, cum })
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// Standard deviation of the normal limit: sqrt(N / (1 − coupling)).
    pub fn scale(&self) -> f64 {
        (self.site_count as f64 / (1.0 - self.coupling)).sqrt()
    }

    pub fn magnetization_law(&self) -> Result<DiscreteLaw> {
        DiscreteLaw::new(self.support.clone(), self.probs.clone())
    }

    pub fn mean_magnetization(&self) -> f64 {
        self.support.iter().zip(&self.probs).map(|(s, p)| s * p).sum()
    }

    pub fn magnetization_variance(&self) -> f64 {
        let m = self.mean_magnetization();
        self.support.iter().zip(&self.probs).map(|(s, p)| (s - m) * (s - m) * p).sum()
    }

    /// Exact (Kolmogorov, Wasserstein) distances of s / scale to N(0, 1).
    pub fn exact_distances(&self) -> Result<(f64, f64)> {
        let law = self.magnetization_law()?.affine(0.0, self.scale())?;
        Ok((law.kolmogorov_vs_std_normal(), law.wasserstein_vs_std_normal()))
    }

    /// Inverse-CDF draw of the magnetization.
    pub fn sample_magnetization(&self, rng: &mut CounterRng) -> i64 {
        let u = rng.next_f64();
        let idx = self.cum.partition_point(|&c| c <= u).min(self.site_count);
        self.support[idx] as i64
    }

    /// Exact draw of a full sign configuration: the tilt depends on the
    /// state only through s, so conditional on s the configuration is a
    /// uniformly random arrangement of (N+s)/2 plus signs.
    pub fn sample_state(&self, rng: &mut CounterRng) -> Vec<i8> {
        let s = self.sample_magnetization(rng);
        let n = self.site_count;
        let plus = ((n as i64 + s) / 2) as usize;
        let mut positions: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut positions);
        let mut state = vec![-1i8; n];
        for &pos in positions.iter().take(plus) {
            state[pos] = 1;
        }
        state
    }
}

/// The spin model as a tilted family: baseline = independent uniform signs,
/// statistic = magnetization over its limiting scale.
pub struct CwFamily {
    measure: Arc<CwMeasure>,
    scale: f64,
}

impl CwFamily {
    pub fn new(site_count: usize, coupling: f64) -> Result<Self> {
        let measure = Arc::new(CwMeasure::build(site_count, coupling)?);
        let scale = measure.scale();
        Ok(CwFamily { measure, scale })
    }

    pub fn measure(&self) -> &CwMeasure {
        &self.measure
    }

    fn magnetization(x: &[i8]) -> f64 {
        x.iter().map(|&v| v as i64).sum::<i64>() as f64
    }
}

impl TiltedFamily for CwFamily {
    type State = Vec<i8>;

    fn dim(&self) -> usize {
        self.measure.site_count()
    }

    fn draw_baseline(&self, rng: &mut CounterRng) -> Vec<i8> {
        (0..self.dim()).map(|_| if rng.next_f64() < 0.5 { -1 } else { 1 }).collect()
    }

    fn copy_coord(&self, dst: &mut Vec<i8>, src: &Vec<i8>, i: usize) {
        dst[i] = src[i];
    }

    fn centered_stat(&self, x: &Vec<i8>) -> f64 {
        Self::magnetization(x) / self.scale
    }

    fn log_tilt(&self, x: &Vec<i8>) -> f64 {
        let s = Self::magnetization(x);
        self.measure.coupling() * s * s / (2.0 * self.dim() as f64)
    }

    fn draw_targets(&self, count: usize, seed: u64) -> Result<Vec<Vec<i8>>> {
        let mut rng = CounterRng::new(seed, 1);
        Ok((0..count).map(|_| self.measure.sample_state(&mut rng)).collect())
    }

    fn increment_bound(&self) -> f64 {
        2.0 / self.scale
    }

    fn stat_influence_closed(&self, _x: &Vec<i8>, _i: usize) -> Option<f64> {
        // A refreshed sign changes s by ±2 with probability ½, and the point
        // and interpolation differences coincide for an additive statistic.
        Some(1.0 / (self.scale * self.scale))
    }

    fn tilt_influence_closed(&self, x: &Vec<i8>, i: usize) -> Option<f64> {
        let s = Self::magnetization(x);
        let n = self.dim() as f64;
        Some(self.measure.coupling() * (s - x[i] as f64) / (n * self.scale))
    }

    fn roughness_closed(&self, x: &Vec<i8>) -> Option<RoughnessProfile> {
        let n = self.dim() as f64;
        let s = Self::magnetization(x);
        let sigma = self.scale;
        let coupling = self.measure.coupling();
        let move_size = 2.0 / sigma;
        let mut profile = RoughnessProfile {
            wass_smooth: n * 0.5 * move_size * move_size * move_size,
            ..RoughnessProfile::default()
        };
        // Only the sign of x_i enters the flipped tilt difference, so group
        // the sites by sign instead of sweeping them.
        let plus = (n + s) / 2.0;
        for (sign, count) in [(1.0, plus), (-1.0, n - plus)] {
            if count == 0.0 {
                continue;
            }
            let dg = 2.0 * coupling * (sign * s - 1.0) / n;
            let weight = dg.abs().exp();
            profile.wass_tilt +=
                count * 0.5 * weight * dg * dg * (dg.abs() + move_size) * move_size;
            profile.kol_mixed +=
                count * 0.5 * weight * move_size * move_size * dg.abs();
        }
        profile.kol_drift = move_size * (s / sigma).abs();
        Some(profile)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean_with_se, ols_line, total_variation};
    use crate::stein::{
        estimate_residual_spread, roughness_diagnostic, stat_influence_mc, stein_report,
        tilt_influence_mc,
    };
    use approx::assert_abs_diff_eq;

    #[test]
    fn build_rejects_bad_parameters() {
        assert!(CwMeasure::build(0, 0.5).is_err());
        assert!(CwMeasure::build(10, 0.0).is_err());
        assert!(CwMeasure::build(10, 1.0).is_err());
        assert!(CwMeasure::build(10, -0.3).is_err());
    }

    #[test]
    fn two_site_weights() {
        // Four configurations: s = ±2 each once with tilt e^{1/2}, s = 0
        // twice with tilt 1.
        let m = CwMeasure::build(2, 0.5).unwrap();
        let z = 2.0 * 0.5f64.exp() + 2.0;
        assert_abs_diff_eq!(m.probs[0], 0.5f64.exp() / z, epsilon = 1e-12);
        assert_abs_diff_eq!(m.probs[1], 2.0 / z, epsilon = 1e-12);
        assert_abs_diff_eq!(m.probs[2], 0.5f64.exp() / z, epsilon = 1e-12);
        assert_eq!(m.support, vec![-2.0, 0.0, 2.0]);
    }

    #[test]
    fn law_is_exactly_symmetric() {
        let m = CwMeasure::build(31, 0.7).unwrap();
        for k in 0..=31 {
            assert_eq!(m.probs[k], m.probs[31 - k], "asymmetry at {k}");
        }
        assert_abs_diff_eq!(m.mean_magnetization(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn weak_coupling_limit_is_binomial() {
        let n = 30;
        let m = CwMeasure::build(n, 1e-12).unwrap();
        let binom: Vec<f64> = (0..=n)
            .map(|k| {
                (ln_gamma(n as f64 + 1.0)
                    - ln_gamma(k as f64 + 1.0)
                    - ln_gamma((n - k) as f64 + 1.0)
                    - n as f64 * 2.0f64.ln())
                .exp()
            })
            .collect();
        let tv = total_variation(&m.probs, &binom).unwrap();
        assert!(tv < 1e-9, "tv {tv}");
    }

    #[test]
    fn frozen_exact_distances() {
        // Regression fixtures from an independent enumeration.
        let cases = [
            (64usize, 0.035256514638, 0.046290631970),
            (128, 0.024932915544, 0.032065089913),
            (256, 0.017630748544, 0.022400791941),
            (512, 0.012466914863, 0.015735146603),
            (1024, 0.008815456665, 0.011087918176),
        ];
        for (n, dk_expect, dw_expect) in cases {
            let m = CwMeasure::build(n, 0.5).unwrap();
            let (dk, dw) = m.exact_distances().unwrap();
            assert_abs_diff_eq!(dk, dk_expect, epsilon = 1e-9);
            assert_abs_diff_eq!(dw, dw_expect, epsilon = 1e-7);
            assert!((0.0..=1.0).contains(&dk) && dw >= 0.0);
            // Square-root rate: dK · sqrt(N) sits in a narrow band.
            let scaled = dk * (n as f64).sqrt();
            assert!((0.2..0.4).contains(&scaled), "scaled {scaled}");
        }
    }

    #[test]
    fn kolmogorov_distance_shrinks_along_doublings() {
        let mut previous = f64::INFINITY;
        let mut inversions = 0;
        for n in [64, 128, 256, 512, 1024] {
            let (dk, _) = CwMeasure::build(n, 0.5).unwrap().exact_distances().unwrap();
            if dk >= previous {
                inversions += 1;
            }
            previous = dk;
        }
        assert!(inversions <= 1, "{inversions} inversions");
    }

    #[test]
    fn rate_regression_recovers_square_root() {
        let ns: Vec<usize> = (6..=12).map(|j| 1usize << j).collect();
        let logs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let dks: Vec<f64> = ns
            .iter()
            .map(|&n| CwMeasure::build(n, 0.5).unwrap().exact_distances().unwrap().0.ln())
            .collect();
        let (slope, _, _) = ols_line(&logs, &dks).unwrap();
        assert_abs_diff_eq!(slope, -0.499972118, epsilon = 1e-6);
        assert!((-0.6..-0.4).contains(&slope));
    }

    #[test]
    fn variance_approaches_limit_scale() {
        let m = CwMeasure::build(1024, 0.5).unwrap();
        let ratio = m.magnetization_variance() / (m.scale() * m.scale());
        assert_abs_diff_eq!(ratio, 0.998055714443, epsilon = 1e-9);
        assert!((ratio - 1.0).abs() < 0.1);
    }

    #[test]
    fn sampler_sites_are_exchangeable_by_enumeration() {
        // Enumerate all sign vectors at N=10: the tilted measure's per-site
        // marginals are equal, and match the sampler's analytic marginal
        // Σ_s P(s)(N+s)/(2N).
        let n = 10;
        let m = CwMeasure::build(n, 0.5).unwrap();
        let mut weight_sum = 0.0;
        let mut site_plus = vec![0.0; n];
        for mask in 0u32..(1 << n) {
            let s: i64 = (0..n).map(|i| if mask >> i & 1 == 1 { 1i64 } else { -1 }).sum();
            let w = (0.5 * (s * s) as f64 / n as f64).exp();
            weight_sum += w;
            for (i, acc) in site_plus.iter_mut().enumerate() {
                if mask >> i & 1 == 1 {
                    *acc += w;
                }
            }
        }
        let marginals: Vec<f64> = site_plus.iter().map(|v| v / weight_sum).collect();
        let from_law: f64 = m
            .support
            .iter()
            .zip(&m.probs)
            .map(|(s, p)| p * (n as f64 + s) / (2.0 * n as f64))
            .sum();
        for &marg in &marginals {
            assert_abs_diff_eq!(marg, from_law, epsilon = 1e-12);
            assert_abs_diff_eq!(marg, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn state_sampler_tracks_the_magnetization_law() {
        let m = CwMeasure::build(16, 0.5).unwrap();
        let mut rng = CounterRng::new(21, 0);
        let draws = 50_000;
        let mut freq = vec![0.0; 17];
        let mut site_means = vec![0.0; 16];
        for _ in 0..draws {
            let x = m.sample_state(&mut rng);
            let s: i64 = x.iter().map(|&v| v as i64).sum();
            freq[((s + 16) / 2) as usize] += 1.0;
            for (acc, &v) in site_means.iter_mut().zip(&x) {
                *acc += v as f64;
            }
        }
        for f in &mut freq {
            *f /= draws as f64;
        }
        let tv = total_variation(&freq, &m.probs).unwrap();
        assert!(tv < 0.02, "tv {tv}");
        // Exchangeability in practice: all site means near 0 within MC error.
        let band = 4.0 / (draws as f64).sqrt();
        for (i, acc) in site_means.iter().enumerate() {
            let mean = acc / draws as f64;
            assert!(mean.abs() < band, "site {i}: {mean}");
        }
    }

    #[test]
    fn closed_influences_match_hand_values() {
        let family = CwFamily::new(20, 0.5).unwrap();
        let sigma = family.measure().scale();
        let ones = vec![1i8; 20];
        assert_abs_diff_eq!(
            family.stat_influence_closed(&ones, 3).unwrap(),
            1.0 / (sigma * sigma),
            epsilon = 1e-15
        );
        // All-ones state: coupling (N−1)/(N σ).
        assert_abs_diff_eq!(
            family.tilt_influence_closed(&ones, 3).unwrap(),
            0.5 * 19.0 / (20.0 * sigma),
            epsilon = 1e-15
        );
    }

    #[test]
    fn generic_mc_agrees_with_closed_influences() {
        let family = CwFamily::new(12, 0.5).unwrap();
        let mut rng = CounterRng::new(5, 0);
        let x = family.draw_baseline(&mut rng);
        let inner = 60_000;
        for i in [0usize, 5, 11] {
            let closed_stat = family.stat_influence_closed(&x, i).unwrap();
            let mc_stat = stat_influence_mc(&family, &x, i, inner, &mut rng);
            let closed_tilt = family.tilt_influence_closed(&x, i).unwrap();
            let mc_tilt = tilt_influence_mc(&family, &x, i, inner, &mut rng);
            // Per-replicate terms are bounded by small constants; crude se.
            let se = 4.0 / (family.measure().scale() * (inner as f64).sqrt());
            assert!((mc_stat - closed_stat).abs() < 3.0 * se, "{mc_stat} vs {closed_stat}");
            assert!((mc_tilt - closed_tilt).abs() < 3.0 * se, "{mc_tilt} vs {closed_tilt}");
        }
    }

    #[test]
    fn stein_triple_matches_theory() {
        // (linearity, influence spread, residual spread) = (1−coupling, 0, O(1/N)).
        let frozen = [
            (25usize, 0.019305859501),
            (100, 0.004951950016),
            (400, 0.001246906996),
        ];
        let mut values = Vec::new();
        for (n, residual_expect) in frozen {
            let family = CwFamily::new(n, 0.5).unwrap();
            let report = stein_report(&family, 4_000, 1, 31).unwrap();
            assert_abs_diff_eq!(report.linearity.value, 0.5, epsilon = 1e-12);
            assert_eq!(report.influence_spread.value, 0.0);
            assert!(report.warnings.is_empty(), "{:?}", report.warnings);
            let residual =
                estimate_residual_spread(&family, 0.5, 4_000, 1, 31).unwrap();
            assert!(
                residual.covers(residual_expect, 3.0),
                "N={n}: {residual:?} vs {residual_expect}"
            );
            values.push(residual.value);
        }
        // 1/N trend: a 16-fold N increase shrinks the residual accordingly.
        assert!(values[0] / values[2] > 8.0);
        assert!(values[1] < 0.05);
    }

    #[test]
    fn roughness_diagnostic_scales_like_inverse_square_root() {
        // Moderate coupling keeps the importance weights light-tailed; at
        // couplings ≥ 1/2 their variance diverges and the diagnostic only
        // reports (with an effective-sample-size warning).
        let coupling = 0.3;
        let sizes = [25usize, 100, 400];
        let exact_first = 0.523991941943;
        let mut logs = Vec::new();
        let mut log_sizes = Vec::new();
        for (k, &n) in sizes.iter().enumerate() {
            let family = CwFamily::new(n, coupling).unwrap();
            let report = roughness_diagnostic(&family, 30_000, 1, 17).unwrap();
            assert!(report.warnings.is_empty(), "{:?}", report.warnings);
            assert!(report.effective_sample_size > 0.8 * 30_000.0);
            if k == 0 {
                assert_abs_diff_eq!(report.wass_total, exact_first, epsilon = 0.02);
            }
            assert!(report.kol_total > 0.0);
            logs.push(report.wass_total.ln());
            log_sizes.push((n as f64).ln());
        }
        let (slope, _, _) = ols_line(&log_sizes, &logs).unwrap();
        assert!((-0.65..-0.35).contains(&slope), "slope {slope}");
    }

    #[test]
    fn small_weight_budget_triggers_reliability_warning() {
        // The effective sample size can never exceed the draw count, so a
        // tiny budget forces the unreliability warning deterministically.
        let family = CwFamily::new(50, 0.5).unwrap();
        let report = roughness_diagnostic(&family, 30, 1, 3).unwrap();
        assert!(report.effective_sample_size <= 30.0);
        assert!(
            report.warnings.iter().any(|w| w.contains("below 50")),
            "{:?}",
            report.warnings
        );
    }

    #[test]
    fn magnetization_sampler_mean_is_centered() {
        let m = CwMeasure::build(64, 0.5).unwrap();
        let mut rng = CounterRng::new(9, 0);
        let values: Vec<f64> =
            (0..20_000).map(|_| m.sample_magnetization(&mut rng) as f64).collect();
        let (mean, se) = mean_with_se(&values);
        assert!(mean.abs() < 4.0 * se, "mean {mean} se {se}");
    }
}
