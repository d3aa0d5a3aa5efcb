//! Stein-method error estimators for exponentially tilted product measures.
//!
//! A family supplies a product baseline X with independent coordinates, a
//! log-tilt g, and a centered statistic f; the tilted target Y has density
//! proportional to exp(g) against the baseline. The estimators below measure
//! how far f(Y) is from normal through three summaries: the mean total
//! coordinate influence (the linearity coefficient), its spread, and the
//! spread of the tilt-induced residual. All three feed the abstract CLT
//! error bound; here they are estimated, not certified.

use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

use crate::graph::{pair_count, EdgeGraph, EdgeId};
use crate::model::{RegionReport, SpecContext};
use crate::oracle::ExactMeasure;
use crate::rng::CounterRng;
use crate::sampler::{er_graph, sample_visit};
use crate::stats::{importance_ess, log_sum_exp, mean_with_batch_se, sd_with_se};
use crate::{ErgmError, Result};

pub const DEFAULT_INNER_DRAWS: usize = 32;

/// Product baseline plus exponential tilt, the raw material of the CLT
/// error estimators. Coordinates of the baseline must be independent and
/// `copy_coord` must preserve the i-th marginal exactly.
pub trait TiltedFamily: Sync {
    type State: Clone + Send + Sync;

    fn dim(&self) -> usize;

    /// One draw from the untilted product measure.
    fn draw_baseline(&self, rng: &mut CounterRng) -> Self::State;

    /// Overwrites coordinate `i` of `dst` with coordinate `i` of `src`.
    fn copy_coord(&self, dst: &mut Self::State, src: &Self::State, i: usize);

    /// The centered statistic f whose law is compared to the normal.
    fn centered_stat(&self, x: &Self::State) -> f64;

    /// The log-tilt g; the target measure reweights the baseline by exp(g).
    fn log_tilt(&self, x: &Self::State) -> f64;

    /// Draws from the tilted target measure.
    fn draw_targets(&self, count: usize, seed: u64) -> Result<Vec<Self::State>>;

    /// Uniform bound on the interpolation increment |f(X^{[i]}) − f(X^{[i−1]})|.
    fn increment_bound(&self) -> f64;

    /// Closed form of the coordinate-i statistic influence, when available.
    fn stat_influence_closed(&self, _x: &Self::State, _i: usize) -> Option<f64> {
        None
    }

    /// Closed form of the coordinate-i tilt influence, when available.
    fn tilt_influence_closed(&self, _x: &Self::State, _i: usize) -> Option<f64> {
        None
    }

    /// Closed form of the summed roughness integrands, when available.
    fn roughness_closed(&self, _x: &Self::State) -> Option<RoughnessProfile> {
        None
    }
}

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn covers(&self, truth: f64, multiple: f64) -> bool {
        (self.value - truth).abs() <= multiple * self.se
    }
}

/// The three estimated error summaries plus bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct SteinReport {
    /// Mean over target draws of the total statistic influence.
    pub linearity: Estimate,
    /// Standard deviation of the total statistic influence.
    pub influence_spread: Estimate,
    /// Standard deviation of the tilt residual, centered with `linearity`.
    pub residual_spread: Estimate,
    pub outer_draws: usize,
    pub inner_draws: usize,
    pub warnings: Vec<String>,
}

/// Coordinate-i influence of refreshing one coordinate on the statistic:
/// half the conditional covariance of the point difference f(X) − f(X^{(i)})
/// with the interpolation increment, given X = x. Closed form when the
/// family declares one, nested Monte Carlo otherwise.
pub fn stat_influence<F: TiltedFamily>(
    family: &F,
    x: &F::State,
    i: usize,
    inner_draws: usize,
    rng: &mut CounterRng,
) -> f64 {
    family
        .stat_influence_closed(x, i)
        .unwrap_or_else(|| stat_influence_mc(family, x, i, inner_draws, rng))
}

/// Same covariance with the log-tilt g in place of f in the point difference.
pub fn tilt_influence<F: TiltedFamily>(
    family: &F,
    x: &F::State,
    i: usize,
    inner_draws: usize,
    rng: &mut CounterRng,
) -> f64 {
    family
        .tilt_influence_closed(x, i)
        .unwrap_or_else(|| tilt_influence_mc(family, x, i, inner_draws, rng))
}

/// Generic nested-MC path, also used to validate the closed forms.
///
/// One primed copy is drawn jointly per inner replicate: the point
/// difference replaces only coordinate i, while the interpolation increment
/// compares the states that keep coordinates 0..=i original versus 0..i
/// original, with all later coordinates primed in both.
pub fn stat_influence_mc<F: TiltedFamily>(
    family: &F,
    x: &F::State,
    i: usize,
    inner_draws: usize,
    rng: &mut CounterRng,
) -> f64 {
    influence_mc(family, x, i, inner_draws, rng, |f, s| f.centered_stat(s))
}

pub fn tilt_influence_mc<F: TiltedFamily>(
    family: &F,
    x: &F::State,
    i: usize,
    inner_draws: usize,
    rng: &mut CounterRng,
) -> f64 {
    influence_mc(family, x, i, inner_draws, rng, |f, s| f.log_tilt(s))
}

fn influence_mc<F: TiltedFamily>(
    family: &F,
    x: &F::State,
    i: usize,
    inner_draws: usize,
    rng: &mut CounterRng,
    point_fn: impl Fn(&F, &F::State) -> f64,
) -> f64 {
    assert!(inner_draws >= 1, "need at least one inner draw");
    let n = family.dim();
    let point_at_x = point_fn(family, x);
    let mut acc = 0.0;
    for _ in 0..inner_draws {
        let primed = family.draw_baseline(rng);
        let mut point_state = x.clone();
        family.copy_coord(&mut point_state, &primed, i);
        let point_diff = point_at_x - point_fn(family, &point_state);

        let mut interp = x.clone();
        for j in (i + 1)..n {
            family.copy_coord(&mut interp, &primed, j);
        }
        let upper = family.centered_stat(&interp);
        family.copy_coord(&mut interp, &primed, i);
        let increment = upper - family.centered_stat(&interp);

        acc += point_diff * increment;
    }
    0.5 * acc / inner_draws as f64
}

fn total_influences<F: TiltedFamily>(
    family: &F,
    x: &F::State,
    inner_draws: usize,
    rng: &mut CounterRng,
) -> (f64, f64) {
    let mut stat_total = 0.0;
    let mut tilt_total = 0.0;
    for i in 0..family.dim() {
        stat_total += stat_influence(family, x, i, inner_draws, rng);
        tilt_total += tilt_influence(family, x, i, inner_draws, rng);
    }
    (stat_total, tilt_total)
}

/// Estimates the linearity coefficient: the mean over target draws of the
/// total statistic influence. Near-zero values void the CLT bound, hence
/// the degeneracy warning.
pub fn estimate_linearity<F: TiltedFamily>(
    family: &F,
    outer_draws: usize,
    inner_draws: usize,
    seed: u64,
) -> Result<(Estimate, Vec<String>)> {
    let report = stein_report(family, outer_draws, inner_draws, seed)?;
    Ok((report.linearity, report.warnings))
}

/// Estimates the spread (standard deviation) of the total statistic
/// influence across target draws.
pub fn estimate_influence_spread<F: TiltedFamily>(
    family: &F,
    outer_draws: usize,
    inner_draws: usize,
    seed: u64,
) -> Result<Estimate> {
    Ok(stein_report(family, outer_draws, inner_draws, seed)?.influence_spread)
}

/// Estimates the spread of the tilt residual with an externally supplied
/// linearity coefficient (for example an exact one from enumeration).
pub fn estimate_residual_spread<F: TiltedFamily>(
    family: &F,
    linearity: f64,
    outer_draws: usize,
    inner_draws: usize,
    seed: u64,
) -> Result<Estimate> {
    let parts = influence_parts(family, outer_draws, inner_draws, seed)?;
    Ok(residual_spread_from_parts(&parts, linearity))
}

struct InfluenceParts {
    stat_totals: Vec<f64>,
    tilt_totals: Vec<f64>,
    stats: Vec<f64>,
}

fn influence_parts<F: TiltedFamily>(
    family: &F,
    outer_draws: usize,
    inner_draws: usize,
    seed: u64,
) -> Result<InfluenceParts> {
    if outer_draws < 16 {
        return Err(ErgmError::BadArgument(
            "need at least 16 outer draws for batch-means errors".into(),
        ));
    }
    let targets = family.draw_targets(outer_draws, seed)?;
    let rows: Vec<(f64, f64, f64)> = targets
        .par_iter()
        .enumerate()
        .map(|(k, y)| {
            let mut rng = CounterRng::new(seed ^ 0x5e1f_0a11, k as u64);
            let (stat_total, tilt_total) = total_influences(family, y, inner_draws, &mut rng);
            (stat_total, tilt_total, family.centered_stat(y))
        })
        .collect();
    let mut parts = InfluenceParts {
        stat_totals: Vec::with_capacity(outer_draws),
        tilt_totals: Vec::with_capacity(outer_draws),
        stats: Vec::with_capacity(outer_draws),
    };
    for (s, t, f) in rows {
        parts.stat_totals.push(s);
        parts.tilt_totals.push(t);
        parts.stats.push(f);
    }
    Ok(parts)
}

fn residual_spread_from_parts(parts: &InfluenceParts, linearity: f64) -> Estimate {
    let residuals: Vec<f64> = parts
        .tilt_totals
        .iter()
        .zip(&parts.stats)
        .map(|(t, f)| t - (1.0 - linearity) * f)
        .collect();
    let (sd, se) = sd_with_se(&residuals);
    Estimate { value: sd, se }
}

/// One shared pass over target draws producing all three estimates. The
/// residual spread is centered with the estimated linearity; callers with
/// an exact coefficient should use `estimate_residual_spread`.
pub fn stein_report<F: TiltedFamily>(
    family: &F,
    outer_draws: usize,
    inner_draws: usize,
    seed: u64,
) -> Result<SteinReport> {
    let parts = influence_parts(family, outer_draws, inner_draws, seed)?;
    let (b_hat, b_se) = mean_with_batch_se(&parts.stat_totals);
    let linearity = Estimate { value: b_hat, se: b_se };
    let (spread, spread_se) = sd_with_se(&parts.stat_totals);
    let influence_spread = Estimate { value: spread, se: spread_se };
    let residual_spread = residual_spread_from_parts(&parts, b_hat);
    let mut warnings = Vec::new();
    if b_hat.abs() <= 2.0 * b_se {
        warnings.push(format!(
            "linearity {b_hat:.3e} within 2 se ({b_se:.3e}) of 0: normal-approximation bound degenerates"
        ));
    }
    Ok(SteinReport {
        linearity,
        influence_spread,
        residual_spread,
        outer_draws,
        inner_draws,
        warnings,
    })
}

/// Summed roughness integrands of one baseline state, the inner conditional
/// expectations of the smoothness diagnostic. `wass_tilt` doubles as the
/// final Kolmogorov term.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct RoughnessProfile {
    /// Σ_i E[(f − f^{(i)})² |increment|], the additive-statistic term.
    pub wass_smooth: f64,
    /// Σ_i E[e^{|Δg|} Δg² (|Δg| + |Δf|) |increment|], the tilt term.
    pub wass_tilt: f64,
    /// Σ_i E[e^{|Δg|} D* |Δf| |Δg|], the mixed Kolmogorov term.
    pub kol_mixed: f64,
    /// D* |Σ_i E[f − f^{(i)}]|, the drift Kolmogorov term.
    pub kol_drift: f64,
}

/// Order-of-magnitude smoothness diagnostic, estimated under the baseline
/// measure and transferred to the target by self-normalized importance
/// reweighting with weights exp(g). Reported, never certified: the CLT
/// bound's absolute constant is unknown.
#[derive(Debug, Clone, Serialize)]
pub struct RoughnessReport {
    pub wass_smooth: Estimate,
    pub wass_tilt: Estimate,
    pub kol_mixed: Estimate,
    pub kol_drift: Estimate,
    /// Wasserstein-side total: smooth + tilt.
    pub wass_total: f64,
    /// Kolmogorov-side total: mixed + drift + tilt.
    pub kol_total: f64,
    pub effective_sample_size: f64,
    pub outer_draws: usize,
    pub warnings: Vec<String>,
}

pub fn roughness_diagnostic<F: TiltedFamily>(
    family: &F,
    outer_draws: usize,
    inner_draws: usize,
    seed: u64,
) -> Result<RoughnessReport> {
    if outer_draws < 2 {
        return Err(ErgmError::BadArgument("need at least 2 outer draws".into()));
    }
    let rows: Vec<(f64, RoughnessProfile)> = (0..outer_draws as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = CounterRng::new(seed, k);
            let x = family.draw_baseline(&mut rng);
            let profile = family
                .roughness_closed(&x)
                .unwrap_or_else(|| roughness_mc(family, &x, inner_draws, &mut rng));
            (family.log_tilt(&x), profile)
        })
        .collect();
    let log_weights: Vec<f64> = rows.iter().map(|(lw, _)| *lw).collect();
    let shift = log_sum_exp(&log_weights);
    let weights: Vec<f64> = log_weights.iter().map(|lw| (lw - shift).exp()).collect();
    let ess = importance_ess(&weights);

    let ratio = |pick: &dyn Fn(&RoughnessProfile) -> f64| -> Estimate {
        let value: f64 =
            rows.iter().zip(&weights).map(|((_, p), w)| w * pick(p)).sum();
        let var: f64 = rows
            .iter()
            .zip(&weights)
            .map(|((_, p), w)| (w * (pick(p) - value)).powi(2))
            .sum();
        Estimate { value, se: var.sqrt() }
    };
    let wass_smooth = ratio(&|p| p.wass_smooth);
    let wass_tilt = ratio(&|p| p.wass_tilt);
    let kol_mixed = ratio(&|p| p.kol_mixed);
    let kol_drift = ratio(&|p| p.kol_drift);

    let mut warnings = Vec::new();
    if ess < 50.0 {
        warnings.push(format!(
            "importance-weight effective sample size {ess:.1} below 50: diagnostic unreliable"
        ));
    }
    Ok(RoughnessReport {
        wass_smooth,
        wass_tilt,
        kol_mixed,
        kol_drift,
        wass_total: wass_smooth.value + wass_tilt.value,
        kol_total: kol_mixed.value + kol_drift.value + wass_tilt.value,
        effective_sample_size: ess,
        outer_draws,
        warnings,
    })
}

/// Generic inner-MC fallback for the roughness profile; one joint primed
/// copy per replicate, interpolation increments collected in a single
/// downward sweep.
pub fn roughness_mc<F: TiltedFamily>(
    family: &F,
    x: &F::State,
    inner_draws: usize,
    rng: &mut CounterRng,
) -> RoughnessProfile {
    assert!(inner_draws >= 1);
    let n = family.dim();
    let bound = family.increment_bound();
    let f_at_x = family.centered_stat(x);
    let g_at_x = family.log_tilt(x);
    let mut profile = RoughnessProfile::default();
    let mut drift_sum = 0.0;
    let mut increments = vec![0.0_f64; n];
    for _ in 0..inner_draws {
        let primed = family.draw_baseline(rng);
        let mut interp = x.clone();
        let mut upper = f_at_x;
        for i in (0..n).rev() {
            family.copy_coord(&mut interp, &primed, i);
            let lower = family.centered_stat(&interp);
            increments[i] = (upper - lower).abs();
            upper = lower;
        }
        for i in 0..n {
            let mut point = x.clone();
            family.copy_coord(&mut point, &primed, i);
            let df = f_at_x - family.centered_stat(&point);
            let dg = g_at_x - family.log_tilt(&point);
            profile.wass_smooth += df * df * increments[i];
            let tilt_factor =
                dg.abs().exp() * dg * dg * (dg.abs() + df.abs()) * increments[i];
            profile.wass_tilt += tilt_factor;
            profile.kol_mixed += dg.abs().exp() * bound * df.abs() * dg.abs();
            drift_sum += df;
        }
    }
    let scale = 1.0 / inner_draws as f64;
    profile.wass_smooth *= scale;
    profile.wass_tilt *= scale;
    profile.kol_mixed *= scale;
    profile.kol_drift = bound * (drift_sum * scale).abs();
    profile
}

/// How the graph family draws from the target measure.
#[derive(Debug, Clone, Copy)]
pub enum TargetDraws {
    /// Inverse-CDF sampling from full enumeration (small hosts only).
    Exact,
    /// Heat-bath chain started from an independent-edge graph at the
    /// fixed-point density.
    Chain { burn_in_sweeps: u64, thin_sweeps: u64 },
}

/// The graph model as a tilted family: baseline = independent edges at the
/// fixed-point density, statistic = standardized edge count.
pub struct ErgmFamily {
    ctx: Arc<SpecContext>,
    target: TargetDraws,
    edge_probability: f64,
    stat_center: f64,
    stat_scale: f64,
}

impl ErgmFamily {
    pub fn new(
        ctx: Arc<SpecContext>,
        report: &RegionReport,
        target: TargetDraws,
        stat_center: f64,
        stat_scale: f64,
    ) -> Result<Self> {
        if !(stat_scale > 0.0) {
            return Err(ErgmError::BadArgument("statistic scale must be positive".into()));
        }
        Ok(ErgmFamily {
            ctx,
            target,
            edge_probability: report.fixed_point()?,
            stat_center,
            stat_scale,
        })
    }

    /// Small-host constructor: exact target sampler, exact mean edge count,
    /// scale from the asymptotic variance formula.
    pub fn enumerated(ctx: Arc<SpecContext>, report: &RegionReport) -> Result<Self> {
        let measure = ExactMeasure::build(&ctx)?;
        let sigma_sq = report.sigma_sq(ctx.vertex_count())?;
        ErgmFamily::new(
            ctx,
            report,
            TargetDraws::Exact,
            measure.mean_edge_count(),
            sigma_sq.sqrt(),
        )
    }

    pub fn edge_probability(&self) -> f64 {
        self.edge_probability
    }

    /// Large-n linearity limit: N p (1−p) / σ².
    pub fn asymptotic_linearity(&self) -> f64 {
        let p = self.edge_probability;
        let n_pairs = pair_count(self.ctx.vertex_count()) as f64;
        n_pairs * p * (1.0 - p) / (self.stat_scale * self.stat_scale)
    }

    /// Refresh probability of one coordinate: chance an independent
    /// resample changes it.
    fn flip_probability(&self, present: bool) -> f64 {
        if present {
            1.0 - self.edge_probability
        } else {
            self.edge_probability
        }
    }
}

impl TiltedFamily for ErgmFamily {
    type State = EdgeGraph;

    fn dim(&self) -> usize {
        pair_count(self.ctx.vertex_count())
    }

    fn draw_baseline(&self, rng: &mut CounterRng) -> EdgeGraph {
        er_graph(self.ctx.vertex_count(), self.edge_probability, rng)
            .expect("valid probability")
    }

    fn copy_coord(&self, dst: &mut EdgeGraph, src: &EdgeGraph, i: usize) {
        let s = EdgeId::from_index(self.ctx.vertex_count(), i);
        dst.set_edge(s, src.has_edge(s));
    }

    fn centered_stat(&self, x: &EdgeGraph) -> f64 {
        (x.edge_count() as f64 - self.stat_center) / self.stat_scale
    }

    fn log_tilt(&self, x: &EdgeGraph) -> f64 {
        self.ctx.centered_tilt_at(self.edge_probability, x)
    }

    fn draw_targets(&self, count: usize, seed: u64) -> Result<Vec<EdgeGraph>> {
        match self.target {
            TargetDraws::Exact => {
                let sampler = ExactMeasure::build(&self.ctx)?.sampler();
                let mut rng = CounterRng::new(seed, 0);
                Ok((0..count).map(|_| sampler.sample_graph(&mut rng)).collect())
            }
            TargetDraws::Chain { burn_in_sweeps, thin_sweeps } => {
                let mut rng = CounterRng::new(seed, u64::MAX);
                let initial =
                    er_graph(self.ctx.vertex_count(), self.edge_probability, &mut rng)?;
                let mut out = Vec::with_capacity(count);
                sample_visit(
                    &self.ctx,
                    initial,
                    burn_in_sweeps,
                    thin_sweeps,
                    count,
                    seed,
                    0,
                    |g| out.push(g.clone()),
                )?;
                Ok(out)
            }
        }
    }

    fn increment_bound(&self) -> f64 {
        1.0 / self.stat_scale
    }

    fn stat_influence_closed(&self, x: &EdgeGraph, i: usize) -> Option<f64> {
        let s = EdgeId::from_index(self.ctx.vertex_count(), i);
        let q = self.flip_probability(x.has_edge(s));
        Some(q / (2.0 * self.stat_scale * self.stat_scale))
    }

    fn tilt_influence_closed(&self, x: &EdgeGraph, i: usize) -> Option<f64> {
        let s = EdgeId::from_index(self.ctx.vertex_count(), i);
        let q = self.flip_probability(x.has_edge(s));
        let tilt_step =
            self.ctx.centered_tilt_increment(self.edge_probability, x, s);
        Some(q * tilt_step / (2.0 * self.stat_scale))
    }

    fn roughness_closed(&self, x: &EdgeGraph) -> Option<RoughnessProfile> {
        let n = self.ctx.vertex_count();
        let sigma = self.stat_scale;
        let bound = self.increment_bound();
        let mut profile = RoughnessProfile::default();
        for i in 0..self.dim() {
            let s = EdgeId::from_index(n, i);
            let q = self.flip_probability(x.has_edge(s));
            let dg = self.ctx.centered_tilt_increment(self.edge_probability, x, s);
            profile.wass_smooth += q / (sigma * sigma * sigma);
            profile.wass_tilt +=
                q * dg.abs().exp() * dg * dg * (dg.abs() + 1.0 / sigma) / sigma;
            profile.kol_mixed += q * dg.abs().exp() * bound * dg.abs() / sigma;
        }
        let drift = (x.edge_count() as f64
            - self.edge_probability * self.dim() as f64)
            / sigma;
        profile.kol_drift = bound * drift.abs();
        Some(profile)
    }
}
