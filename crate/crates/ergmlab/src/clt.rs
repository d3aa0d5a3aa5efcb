//! Normal-approximation experiments for the standardized edge count and for
//! general subgraph counts: Kolmogorov and Wasserstein distances against the
//! standard normal (exact on small hosts, empirical otherwise), log-log rate
//! scans across host sizes, and the scaled law-of-large-numbers residual of
//! the edge density.

use std::sync::Arc;

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::curie_weiss::CwMeasure;
use crate::graph::count::HomPlan;
use crate::graph::{pair_count, Template};
use crate::model::{ErgmSpec, RegionReport, SpecContext};
use crate::oracle::ExactMeasure;
use crate::rng::CounterRng;
use crate::sampler::{er_graph, sample_stat_chains};
use crate::stats::{
    dkw_band, ks_vs_std_normal, mean_with_batch_se, ols_line,
    wasserstein_vs_std_normal_empirical, DiscreteLaw,
};
use crate::{ErgmError, Result};

/// Confidence level of every distribution-free band in this module.
pub const BAND_ALPHA: f64 = 0.05;
/// Resamples behind the Wasserstein standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 50;
/// Hosts up to this size are enumerated instead of sampled.
pub const EXACT_HOST_LIMIT: usize = 6;

/// Chain settings for the sampled experiments, plus an optional externally
/// supplied centering constant for the standardization (the default is the
/// same-run plug-in mean, whose standard error is part of the report).
#[derive(Debug, Clone, Copy)]
pub struct ChainKnobs {
    pub burn_in_sweeps: u64,
    pub thin_sweeps: u64,
    pub chains: usize,
    pub center_override: Option<f64>,
}

impl Default for ChainKnobs {
    fn default() -> Self {
        ChainKnobs { burn_in_sweeps: 50, thin_sweeps: 2, chains: 4, center_override: None }
    }
}

/// Distances of one standardized statistic to the standard normal.
///
/// `var_hat` is the variance of the raw statistic and `sigma_sq` the square
/// of the closed-form normalization applied to it, so their ratio estimates
/// the variance of the standardized statistic. On exact reports (small hosts)
/// `samples` is zero and every sampling band collapses to zero.
#[derive(Debug, Clone, Serialize)]
pub struct DistanceReport {
    pub n: usize,
    pub samples: usize,
    pub mu_hat: f64,
    pub mu_se: f64,
    pub var_hat: f64,
    pub sigma_sq: f64,
    pub d_kol: f64,
    /// Distribution-free band on the empirical CDF at level 1 - 0.05.
    pub dkw_band: f64,
    pub d_wass: f64,
    pub d_wass_se: f64,
    /// |edge density - fixed point| * sqrt(n).
    pub lln_scaled: f64,
    pub exact: bool,
    pub warnings: Vec<String>,
}

/// Subgraph-count experiment result: the distance report of the normalized
/// count plus its relation to the edge statistic from the same draws.
#[derive(Debug, Clone, Serialize)]
pub struct SubgraphReport {
    pub template: String,
    pub report: DistanceReport,
    pub corr_with_edge_stat: f64,
    pub edge_d_kol: f64,
}

/// One host size in a rate scan.
#[derive(Debug, Clone, Serialize)]
pub struct RatePoint {
    pub n: usize,
    pub d_kol: f64,
    /// Sampling band of this point; zero when the distance is exact.
    pub band: f64,
    pub exact: bool,
}

/// Log-log fit of distance against host size. Empirical distances sit on a
/// noise floor of order samples^(-1/2), so the fitted slope is indicative
/// once the distances approach `noise_floor`.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub points: Vec<RatePoint>,
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub noise_floor: f64,
}

/// One host size of the law-of-large-numbers table.
#[derive(Debug, Clone, Serialize)]
pub struct LlnRow {
    pub n: usize,
    pub samples: usize,
    pub density: f64,
    pub scaled: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LlnReport {
    pub fixed_point: f64,
    pub rows: Vec<LlnRow>,
    /// Max scaled residual within a factor 3 of the min across sizes.
    pub bounded: bool,
}

/// Standardized edge-count distances; enumerates hosts up to
/// [`EXACT_HOST_LIMIT`] vertices and samples otherwise.
pub fn edge_clt_experiment(
    spec: &ErgmSpec,
    n: usize,
    samples: usize,
    seed: u64,
    knobs: &ChainKnobs,
) -> Result<DistanceReport> {
    if n <= EXACT_HOST_LIMIT {
        edge_clt_experiment_exact(spec, n)
    } else {
        edge_clt_experiment_sampled(spec, n, samples, seed, knobs)
    }
}

/// Exact route: the full edge-count law against the standard normal.
pub fn edge_clt_experiment_exact(spec: &ErgmSpec, n: usize) -> Result<DistanceReport> {
    let region = subcritical_region(spec)?;
    let sigma_sq = region.sigma_sq(n)?;
    let ctx = SpecContext::new(spec.clone(), n)?;
    let measure = ExactMeasure::build(&ctx)?;
    let mu = measure.mean_edge_count();
    let law = measure.standardized_edge_law(sigma_sq.sqrt())?;
    let p = region.fixed_point()?;
    let density = mu / pair_count(n) as f64;
    let report = DistanceReport {
        n,
        samples: 0,
        mu_hat: mu,
        mu_se: 0.0,
        var_hat: measure.edge_count_variance(),
        sigma_sq,
        d_kol: law.kolmogorov_vs_std_normal(),
        dkw_band: 0.0,
        d_wass: law.wasserstein_vs_std_normal(),
        d_wass_se: 0.0,
        lln_scaled: (density - p).abs() * (n as f64).sqrt(),
        exact: true,
        warnings: Vec::new(),
    };
    debug_assert!((0.0..=1.0).contains(&report.d_kol));
    Ok(report)
}

/// Sampled route, public so small hosts can be forced through it and checked
/// against the exact route.
pub fn edge_clt_experiment_sampled(
    spec: &ErgmSpec,
    n: usize,
    samples: usize,
    seed: u64,
    knobs: &ChainKnobs,
) -> Result<DistanceReport> {
    let region = subcritical_region(spec)?;
    let counts = draw_stats(spec, n, samples, seed, knobs, |g| g.edge_count() as f64)?;
    let sigma_sq = region.sigma_sq(n)?;
    let p = region.fixed_point()?;
    standardized_report(n, &counts, sigma_sq, p, seed, knobs)
}

fn standardized_report(
    n: usize,
    counts: &[f64],
    sigma_sq: f64,
    fixed_point: f64,
    seed: u64,
    knobs: &ChainKnobs,
) -> Result<DistanceReport> {
    let (mu_hat, mu_se) = mean_with_batch_se(counts);
    let center = knobs.center_override.unwrap_or(mu_hat);
    let sigma = sigma_sq.sqrt();
    let ws: Vec<f64> = counts.iter().map(|&m| (m - center) / sigma).collect();
    let var_hat = sample_variance(counts);
    let d_kol = ks_vs_std_normal(&ws);
    let d_wass = wasserstein_vs_std_normal_empirical(&ws);
    let d_wass_se = bootstrap_wass_se(&ws, seed);
    let density = mu_hat / pair_count(n) as f64;
    let mut warnings = Vec::new();
    let ess = autocorrelation_adjusted_ess(counts, mu_se);
    if ess < 0.05 * counts.len() as f64 {
        warnings.push(format!(
            "effective sample size {ess:.0} below 5% of {} draws; increase thinning",
            counts.len()
        ));
    }
    let report = DistanceReport {
        n,
        samples: counts.len(),
        mu_hat,
        mu_se,
        var_hat,
        sigma_sq,
        d_kol,
        dkw_band: dkw_band(counts.len(), BAND_ALPHA),
        d_wass,
        d_wass_se,
        lln_scaled: (density - fixed_point).abs() * (n as f64).sqrt(),
        exact: false,
        warnings,
    };
    debug_assert!((0.0..=1.0).contains(&report.d_kol));
    Ok(report)
}

/// Normalized subgraph-count distances, with the edge statistic computed
/// from the same draws for comparison.
pub fn subgraph_clt_experiment(
    spec: &ErgmSpec,
    template: &Template,
    n: usize,
    samples: usize,
    seed: u64,
    knobs: &ChainKnobs,
) -> Result<SubgraphReport> {
    if template.edge_count() == 0 {
        return Err(ErgmError::BadTemplate("statistic needs a template with edges".into()));
    }
    if n < template.vertex_count() {
        return Err(ErgmError::HostTooSmall { host: n, needed: template.vertex_count() });
    }
    let region = subcritical_region(spec)?;
    let p = region.fixed_point()?;
    let sigma_sq = region.sigma_sq(n)?;
    let plan = HomPlan::new(template);
    let pairs = draw_stats(spec, n, samples, seed, knobs, |g| {
        (plan.count(g) as f64, g.edge_count() as f64)
    })?;
    let homs: Vec<f64> = pairs.iter().map(|&(h, _)| h).collect();
    let edges: Vec<f64> = pairs.iter().map(|&(_, m)| m).collect();
    // Normalization: rooted copies at a typical pair times the edge scale.
    let scale = 2.0
        * (n as f64).powi(template.vertex_count() as i32 - 2)
        * template.edge_count() as f64
        * p.powi(template.edge_count() as i32 - 1)
        * sigma_sq.sqrt();
    let mut report = standardized_report(n, &homs, scale * scale, p, seed, knobs)?;
    // lln_scaled belongs to the edge density regardless of the statistic.
    let (edge_mu, _) = mean_with_batch_se(&edges);
    report.lln_scaled = (edge_mu / pair_count(n) as f64 - p).abs() * (n as f64).sqrt();
    let edge_ws: Vec<f64> =
        edges.iter().map(|&m| (m - edge_mu) / sigma_sq.sqrt()).collect();
    Ok(SubgraphReport {
        template: template.to_string(),
        report,
        corr_with_edge_stat: correlation(&homs, &edges)?,
        edge_d_kol: ks_vs_std_normal(&edge_ws),
    })
}

/// Standardized draws behind the sampled experiment, with the same plug-in
/// centering; intended for offline plotting.
pub fn edge_standardized_draws(
    spec: &ErgmSpec,
    n: usize,
    samples: usize,
    seed: u64,
    knobs: &ChainKnobs,
) -> Result<Vec<f64>> {
    let region = subcritical_region(spec)?;
    let counts = draw_stats(spec, n, samples, seed, knobs, |g| g.edge_count() as f64)?;
    let (mu_hat, _) = mean_with_batch_se(&counts);
    let center = knobs.center_override.unwrap_or(mu_hat);
    let sigma = region.sigma_sq(n)?.sqrt();
    Ok(counts.iter().map(|&m| (m - center) / sigma).collect())
}

/// Exact standardized edge-count law on a small host, for offline plotting.
pub fn edge_standardized_law(spec: &ErgmSpec, n: usize) -> Result<DiscreteLaw> {
    let region = subcritical_region(spec)?;
    let ctx = SpecContext::new(spec.clone(), n)?;
    let measure = ExactMeasure::build(&ctx)?;
    measure.standardized_edge_law(region.sigma_sq(n)?.sqrt())
}

/// Log-log rate of the Kolmogorov distance across host sizes. Single-edge
/// specs get exact binomial distances at every size; otherwise sizes up to
/// [`EXACT_HOST_LIMIT`] are enumerated and the rest sampled.
pub fn rate_scan(
    spec: &ErgmSpec,
    sizes: &[usize],
    samples: usize,
    seed: u64,
    knobs: &ChainKnobs,
) -> Result<RateReport> {
    check_scan_sizes(sizes)?;
    let region = subcritical_region(spec)?;
    let p = region.fixed_point()?;
    let single_template = spec.betas().len() == 1;
    let mut points = Vec::with_capacity(sizes.len());
    for (k, &n) in sizes.iter().enumerate() {
        let point = if single_template {
            let law = standardized_binomial_law(pair_count(n), p)?;
            RatePoint { n, d_kol: law.kolmogorov_vs_std_normal(), band: 0.0, exact: true }
        } else {
            let report =
                edge_clt_experiment(spec, n, samples, seed.wrapping_add(k as u64), knobs)?;
            RatePoint {
                n,
                d_kol: report.d_kol,
                band: report.dkw_band,
                exact: report.exact,
            }
        };
        points.push(point);
    }
    fit_rate(points)
}

/// Rate scan for the mean-field spin family, where every distance is exact.
pub fn cw_rate_scan(coupling: f64, sizes: &[usize]) -> Result<RateReport> {
    check_scan_sizes(sizes)?;
    let mut points = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let measure = CwMeasure::build(n, coupling)?;
        let (d_kol, _) = measure.exact_distances()?;
        points.push(RatePoint { n, d_kol, band: 0.0, exact: true });
    }
    fit_rate(points)
}

fn check_scan_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 4 {
        return Err(ErgmError::BadArgument("rate scan needs at least 4 sizes".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ErgmError::BadArgument("sizes must be strictly increasing".into()));
    }
    Ok(())
}

fn fit_rate(points: Vec<RatePoint>) -> Result<RateReport> {
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.d_kol.ln()).collect();
    let (slope, intercept, slope_se) = ols_line(&xs, &ys)?;
    let noise_floor = points.iter().map(|p| p.band).fold(0.0, f64::max);
    Ok(RateReport { points, slope, slope_se, intercept, noise_floor })
}

/// Scaled residual of the edge density across sizes, always sampled: the
/// point is to watch the simulation, not the enumeration.
///
/// The density is estimated by the conditional-mean statistic, the average
/// over pairs of P(pair present | rest of the graph). It has the same
/// expectation as the raw density by the tower property but sheds the
/// per-pair indicator noise, so the scaled residuals resolve the genuine
/// finite-size bias instead of Monte-Carlo error.
pub fn lln_check(
    spec: &ErgmSpec,
    sizes: &[usize],
    samples: usize,
    seed: u64,
    knobs: &ChainKnobs,
) -> Result<LlnReport> {
    let region = subcritical_region(spec)?;
    let p = region.fixed_point()?;
    if sizes.is_empty() {
        return Err(ErgmError::BadArgument("need at least one size".into()));
    }
    if samples == 0 || knobs.chains == 0 {
        return Err(ErgmError::BadArgument("need samples and chains".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for (k, &n) in sizes.iter().enumerate() {
        let size_seed = seed.wrapping_add(k as u64);
        let ctx = Arc::new(SpecContext::new(spec.clone(), n)?);
        let mut init_rng = CounterRng::new(size_seed, u64::MAX);
        let initial = er_graph(n, p, &mut init_rng)?;
        let per_chain = samples.div_ceil(knobs.chains);
        let pairs = pair_count(n);
        let ctx_ref = &ctx;
        let densities = sample_stat_chains(
            &ctx,
            &initial,
            knobs.chains,
            per_chain,
            knobs.burn_in_sweeps,
            knobs.thin_sweeps,
            size_seed,
            move |g| {
                let mut acc = 0.0;
                for idx in 0..pairs {
                    let s = crate::graph::EdgeId::from_index(n, idx);
                    acc += crate::model::sigmoid(ctx_ref.cond_log_odds(g, s));
                }
                acc / pairs as f64
            },
        )?;
        let (density, _) = mean_with_batch_se(&densities);
        rows.push(LlnRow {
            n,
            samples: densities.len(),
            density,
            scaled: (density - p).abs() * (n as f64).sqrt(),
        });
    }
    let max = rows.iter().map(|r| r.scaled).fold(0.0, f64::max);
    let min = rows.iter().map(|r| r.scaled).fold(f64::INFINITY, f64::min);
    Ok(LlnReport { fixed_point: p, rows, bounded: max <= 3.0 * min })
}

/// Law of (B - trials*p) / sqrt(trials*p*(1-p)) for B binomial.
pub fn standardized_binomial_law(trials: usize, p: f64) -> Result<DiscreteLaw> {
    if !(0.0..1.0).contains(&p) || p <= 0.0 {
        return Err(ErgmError::BadArgument("success probability must be in (0,1)".into()));
    }
    let t = trials as f64;
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let probs: Vec<f64> = (0..=trials)
        .map(|k| {
            let kf = k as f64;
            (ln_gamma(t + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(t - kf + 1.0)
                + kf * lp
                + (t - kf) * lq)
                .exp()
        })
        .collect();
    let mean = t * p;
    let sd = (t * p * (1.0 - p)).sqrt();
    DiscreteLaw::new((0..=trials).map(|k| k as f64).collect(), probs)?.affine(mean, sd)
}

fn subcritical_region(spec: &ErgmSpec) -> Result<RegionReport> {
    let region = spec.solve_fixed_point(1e-12)?;
    if !region.is_subcritical() {
        return Err(ErgmError::NotSubcritical(region.region.to_string()));
    }
    Ok(region)
}

fn draw_stats<T: Send>(
    spec: &ErgmSpec,
    n: usize,
    samples: usize,
    seed: u64,
    knobs: &ChainKnobs,
    stat: impl Fn(&crate::graph::EdgeGraph) -> T + Sync,
) -> Result<Vec<T>> {
    if samples == 0 || knobs.chains == 0 {
        return Err(ErgmError::BadArgument("need samples and chains".into()));
    }
    let region = subcritical_region(spec)?;
    let p = region.fixed_point()?;
    let ctx = Arc::new(SpecContext::new(spec.clone(), n)?);
    let mut init_rng = CounterRng::new(seed, u64::MAX);
    let initial = er_graph(n, p, &mut init_rng)?;
    let per_chain = samples.div_ceil(knobs.chains);
    sample_stat_chains(
        &ctx,
        &initial,
        knobs.chains,
        per_chain,
        knobs.burn_in_sweeps,
        knobs.thin_sweeps,
        seed,
        stat,
    )
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

fn correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(ErgmError::BadArgument("correlation needs paired data".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Bootstrap standard error of the empirical Wasserstein distance.
fn bootstrap_wass_se(ws: &[f64], seed: u64) -> f64 {
    let m = ws.len();
    let mut replicates = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for b in 0..BOOTSTRAP_RESAMPLES {
        let mut rng = CounterRng::new(seed ^ 0xb007_57a9, b as u64);
        let resample: Vec<f64> =
            (0..m).map(|_| ws[rng.next_below(m as u64) as usize]).collect();
        replicates.push(wasserstein_vs_std_normal_empirical(&resample));
    }
    let mean = replicates.iter().sum::<f64>() / BOOTSTRAP_RESAMPLES as f64;
    (replicates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
        / (BOOTSTRAP_RESAMPLES - 1) as f64)
        .sqrt()
}

/// Draws / (batch se / iid se)^2: a crude autocorrelation-adjusted count of
/// independent-equivalent samples.
fn autocorrelation_adjusted_ess(xs: &[f64], batch_se: f64) -> f64 {
    if batch_se == 0.0 {
        return xs.len() as f64;
    }
    let iid_var = sample_variance(xs) / xs.len() as f64;
    (iid_var / (batch_se * batch_se) * xs.len() as f64).min(xs.len() as f64)
}
