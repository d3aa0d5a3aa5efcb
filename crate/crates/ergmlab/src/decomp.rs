//! Projection building blocks for dependent edge indicators: centered
//! partition sums over small index sets, the exact product-expansion
//! identity over centered monomials, and Monte-Carlo scans showing that
//! subtracting the linear edge-count projection strictly reduces the
//! variance growth of subgraph counts.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::graph::count::HomPlan;
use crate::graph::{pair_count, EdgeGraph, EdgeId, Template};
use crate::model::SpecContext;
use crate::oracle::ExactMeasure;
use crate::sampler::sample_stat_chains;
use crate::stats::ols_line;
use crate::{ErgmError, Result};

pub const MAX_INDEX_SIZE: usize = 4;

/// Which weight the no-singleton partitions carry. The amended form counts
/// the multi-element blocks, which is what makes the terms centered; the
/// original form from the concentration literature is kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Multiplicity {
    Amended,
    Original,
}

/// Where the joint centered moments came from.
#[derive(Debug, Clone, Serialize)]
pub enum MomentSource {
    Enumeration,
    MonteCarlo { samples: usize },
}

/// Everything needed to evaluate partition terms over a fixed index pool:
/// the common marginal mean of one indicator and the joint centered moments
/// of every subset (of size at least two) of the pool.
#[derive(Debug, Clone)]
pub struct MomentContext {
    base_rate: f64,
    moments: BTreeMap<Vec<usize>, f64>,
    source: MomentSource,
}

impl MomentContext {
    /// Exact moments by full enumeration (small hosts).
    pub fn from_enumeration(measure: &ExactMeasure, pool: &[usize]) -> Result<Self> {
        check_pool(pool, measure.vertex_count())?;
        let n = measure.vertex_count();
        let base_rate =
            measure.expect(|g| g.has_edge(EdgeId::from_index(n, pool[0])) as u8 as f64);
        let mut moments = BTreeMap::new();
        for subset in subsets_of_size_at_least(pool, 2) {
            let ids: Vec<EdgeId> =
                subset.iter().map(|&l| EdgeId::from_index(n, l)).collect();
            let value = measure.expect(|g| {
                ids.iter()
                    .map(|&s| g.has_edge(s) as u8 as f64 - base_rate)
                    .product()
            });
            moments.insert(subset, value);
        }
        Ok(MomentContext { base_rate, moments, source: MomentSource::Enumeration })
    }

    /// Moments estimated from draws of the target measure.
    pub fn from_samples(graphs: &[EdgeGraph], pool: &[usize]) -> Result<Self> {
        if graphs.is_empty() {
            return Err(ErgmError::BadArgument("need at least one sample".into()));
        }
        let n = graphs[0].vertex_count();
        check_pool(pool, n)?;
        let count = graphs.len() as f64;
        // Exchangeable marginals: average over the pool coordinates too.
        let mut base = 0.0;
        for g in graphs {
            for &l in pool {
                base += g.has_edge(EdgeId::from_index(n, l)) as u8 as f64;
            }
        }
        let base_rate = base / (count * pool.len() as f64);
        let mut moments = BTreeMap::new();
        for subset in subsets_of_size_at_least(pool, 2) {
            let ids: Vec<EdgeId> =
                subset.iter().map(|&l| EdgeId::from_index(n, l)).collect();
            let mut acc = 0.0;
            for g in graphs {
                acc += ids
                    .iter()
                    .map(|&s| g.has_edge(s) as u8 as f64 - base_rate)
                    .product::<f64>();
            }
            moments.insert(subset, acc / count);
        }
        Ok(MomentContext {
            base_rate,
            moments,
            source: MomentSource::MonteCarlo { samples: graphs.len() },
        })
    }

    pub fn base_rate(&self) -> f64 {
        self.base_rate
    }

    pub fn source(&self) -> &MomentSource {
        &self.source
    }

    pub fn moment(&self, subset: &[usize]) -> Result<f64> {
        let mut key = subset.to_vec();
        key.sort_unstable();
        self.moments
            .get(&key)
            .copied()
            .ok_or(ErgmError::MissingMoment(key))
    }
}

fn check_pool(pool: &[usize], n: usize) -> Result<()> {
    let pairs = pair_count(n);
    let mut sorted = pool.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != pool.len() {
        return Err(ErgmError::BadArgument("index pool has repeats".into()));
    }
    if pool.is_empty() || pool.iter().any(|&l| l >= pairs) {
        return Err(ErgmError::BadArgument("index pool out of range".into()));
    }
    Ok(())
}

fn subsets_of_size_at_least(pool: &[usize], min: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << pool.len()) {
        if (mask.count_ones() as usize) < min {
            continue;
        }
        let mut subset: Vec<usize> = pool
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &l)| l)
            .collect();
        subset.sort_unstable();
        out.push(subset);
    }
    out
}

/// All set partitions of {0, …, d−1}, each partition a list of blocks.
pub fn set_partitions(d: usize) -> Vec<Vec<Vec<usize>>> {
    assert!(d >= 1 && d <= MAX_INDEX_SIZE);
    let mut out = Vec::new();
    let mut assignment = vec![0usize; d];
    grow_partition(1, d, &mut assignment, &mut out);
    out
}

fn grow_partition(
    next: usize,
    d: usize,
    assignment: &mut Vec<usize>,
    out: &mut Vec<Vec<Vec<usize>>>,
) {
    if next == d {
        let blocks = *assignment.iter().max().unwrap() + 1;
        let mut partition = vec![Vec::new(); blocks];
        for (element, &block) in assignment.iter().enumerate() {
            partition[block].push(element);
        }
        out.push(partition);
        return;
    }
    // Restricted growth: element `next` joins an existing block or opens the
    // next fresh one, enumerating every partition exactly once.
    let max_used = assignment[..next].iter().copied().max().unwrap();
    for block in 0..=max_used + 1 {
        assignment[next] = block;
        grow_partition(next + 1, d, assignment, out);
    }
}

/// One centered partition sum over a fixed index set (at most four edges).
#[derive(Debug, Clone)]
pub struct HoeffdingTerm {
    coords: Vec<usize>,
    multiplicity: Multiplicity,
}

impl HoeffdingTerm {
    pub fn new(coords: Vec<usize>, multiplicity: Multiplicity) -> Result<Self> {
        let mut sorted = coords.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != coords.len() || coords.is_empty() {
            return Err(ErgmError::BadArgument("index set must be distinct and nonempty".into()));
        }
        if coords.len() > MAX_INDEX_SIZE {
            return Err(ErgmError::BadArgument(format!(
                "index set of size {} exceeds the supported {}",
                coords.len(),
                MAX_INDEX_SIZE
            )));
        }
        Ok(HoeffdingTerm { coords, multiplicity })
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    /// Signed partition sum: every set partition contributes the product of
    /// its block moments, carrying either the centered singleton indicators
    /// (when singletons exist) or the multiplicity weight (when none do).
    pub fn evaluate(&self, ctx: &MomentContext, y: &EdgeGraph) -> Result<f64> {
        let d = self.coords.len();
        let n = y.vertex_count();
        let values: Vec<f64> = self
            .coords
            .iter()
            .map(|&l| y.has_edge(EdgeId::from_index(n, l)) as u8 as f64 - ctx.base_rate())
            .collect();
        let mut total = 0.0;
        for partition in set_partitions(d) {
            let singletons: Vec<usize> = partition
                .iter()
                .filter(|b| b.len() == 1)
                .map(|b| b[0])
                .collect();
            let big_blocks: Vec<&Vec<usize>> =
                partition.iter().filter(|b| b.len() > 1).collect();
            let sign = if big_blocks.len() % 2 == 0 { 1.0 } else { -1.0 };
            let random_part = if singletons.is_empty() {
                match self.multiplicity {
                    Multiplicity::Amended => big_blocks.len() as f64,
                    Multiplicity::Original => 1.0,
                }
            } else {
                singletons.iter().map(|&e| values[e]).product()
            };
            let mut moment_part = 1.0;
            for block in &big_blocks {
                let subset: Vec<usize> =
                    block.iter().map(|&e| self.coords[e]).collect();
                moment_part *= ctx.moment(&subset)?;
            }
            total += sign * random_part * moment_part;
        }
        Ok(total)
    }
}

/// Coefficient list of the centered product identity: the product of raw
/// indicators minus its mean equals the sum over nonempty subsets J of
/// base_rate^(m−|J|) times the centered monomial on J minus its mean.
#[derive(Debug, Clone)]
pub struct ProductExpansion {
    coords: Vec<usize>,
    /// (subset, coefficient), subsets sorted, all nonempty.
    terms: Vec<(Vec<usize>, f64)>,
}

pub fn expand_product(coords: &[usize], base_rate: f64) -> Result<ProductExpansion> {
    let mut sorted = coords.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != coords.len() {
        return Err(ErgmError::BadArgument("repeated edges in product".into()));
    }
    if coords.is_empty() || coords.len() > MAX_INDEX_SIZE {
        return Err(ErgmError::BadArgument(format!(
            "product length must be 1..={MAX_INDEX_SIZE}"
        )));
    }
    let m = coords.len();
    let mut terms = Vec::new();
    for mask in 1u32..(1 << m) {
        let subset: Vec<usize> = coords
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &l)| l)
            .collect();
        let coefficient = base_rate.powi((m - subset.len()) as i32);
        terms.push((subset, coefficient));
    }
    Ok(ProductExpansion { coords: coords.to_vec(), terms })
}

impl ProductExpansion {
    pub fn terms(&self) -> &[(Vec<usize>, f64)] {
        &self.terms
    }

    /// Left side at a concrete state: product of raw indicators minus the
    /// model mean of that product (reassembled from the centered moments).
    pub fn product_minus_mean(&self, ctx: &MomentContext, y: &EdgeGraph) -> Result<f64> {
        let n = y.vertex_count();
        let raw: f64 = self
            .coords
            .iter()
            .map(|&l| y.has_edge(EdgeId::from_index(n, l)) as u8 as f64)
            .product();
        let mut mean = ctx.base_rate().powi(self.coords.len() as i32);
        for (subset, coefficient) in &self.terms {
            if subset.len() >= 2 {
                mean += coefficient * ctx.moment(subset)?;
            }
        }
        Ok(raw - mean)
    }

    /// Right side at a concrete state: the coefficient-weighted centered
    /// monomials, each recentered by its model mean.
    pub fn centered_sum(&self, ctx: &MomentContext, y: &EdgeGraph) -> Result<f64> {
        let n = y.vertex_count();
        let mut total = 0.0;
        for (subset, coefficient) in &self.terms {
            let monomial: f64 = subset
                .iter()
                .map(|&l| y.has_edge(EdgeId::from_index(n, l)) as u8 as f64 - ctx.base_rate())
                .product();
            let mean = if subset.len() >= 2 { ctx.moment(subset)? } else { 0.0 };
            total += coefficient * (monomial - mean);
        }
        Ok(total)
    }
}

/// One size of the residual-variance scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub n: usize,
    pub samples: usize,
    pub raw_variance: f64,
    pub residual_variance: f64,
    pub variance_ratio: f64,
    /// Central third absolute moment of the residual, reported without a
    /// slope fit: desk-scale sizes cannot resolve its exponent.
    pub residual_third_moment: f64,
}

/// Log-log slopes of raw and projected subgraph-count variances.
#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub template: String,
    pub rows: Vec<ScanRow>,
    pub raw_slope: f64,
    pub raw_slope_se: f64,
    pub residual_slope: f64,
    pub residual_slope_se: f64,
}

/// Chain settings for the scan draws.
#[derive(Debug, Clone, Copy)]
pub struct ScanKnobs {
    pub burn_in_sweeps: u64,
    pub thin_sweeps: u64,
    pub chains: usize,
}

impl Default for ScanKnobs {
    fn default() -> Self {
        ScanKnobs { burn_in_sweeps: 50, thin_sweeps: 2, chains: 4 }
    }
}

/// Monte-Carlo variance of the projected subgraph count across sizes.
///
/// The projection subtracts the best linear edge-count predictor with the
/// closed-form weight (rooted copies at a typical pair), so the residual
/// variance grows strictly slower than the raw count's.
pub fn residual_variance_scan(
    spec: &crate::model::ErgmSpec,
    template: &Template,
    sizes: &[usize],
    samples: usize,
    seed: u64,
    knobs: &ScanKnobs,
) -> Result<ScanReport> {
    if sizes.len() < 3 {
        return Err(ErgmError::BadArgument("need at least 3 sizes for a slope".into()));
    }
    if template.edge_count() == 0 {
        return Err(ErgmError::BadTemplate("scan needs a template with edges".into()));
    }
    let region = spec.solve_fixed_point(1e-12)?;
    if !region.is_subcritical() {
        return Err(ErgmError::NotSubcritical(format!("{}", region.region)));
    }
    let p = region.fixed_point()?;
    let plan = HomPlan::new(template);
    let mut rows = Vec::with_capacity(sizes.len());
    for (size_index, &n) in sizes.iter().enumerate() {
        if n < template.vertex_count() {
            return Err(ErgmError::HostTooSmall { host: n, needed: template.vertex_count() });
        }
        let ctx = Arc::new(SpecContext::new(spec.clone(), n)?);
        let weight = projection_weight(template, n, p);
        let mut init_rng = crate::rng::CounterRng::new(seed, 1_000 + size_index as u64);
        let initial = crate::sampler::er_graph(n, p, &mut init_rng)?;
        let per_chain = samples.div_ceil(knobs.chains);
        let pairs = sample_stat_chains(
            &ctx,
            &initial,
            knobs.chains,
            per_chain,
            knobs.burn_in_sweeps,
            knobs.thin_sweeps,
            seed.wrapping_add(size_index as u64),
            |g| (plan.count(g) as f64, g.edge_count() as f64),
        )?;
        let raw: Vec<f64> = pairs.iter().map(|&(h, _)| h).collect();
        let resid: Vec<f64> = pairs.iter().map(|&(h, m)| h - weight * m).collect();
        let raw_variance = sample_variance(&raw);
        let residual_variance = sample_variance(&resid);
        let residual_third_moment = central_third_abs_moment(&resid);
        rows.push(ScanRow {
            n,
            samples: pairs.len(),
            raw_variance,
            residual_variance,
            variance_ratio: residual_variance / raw_variance,
            residual_third_moment,
        });
    }
    let logs_n: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let raw_logs: Vec<f64> = rows.iter().map(|r| r.raw_variance.ln()).collect();
    let resid_logs: Vec<f64> = rows.iter().map(|r| r.residual_variance.ln()).collect();
    let (raw_slope, _, raw_slope_se) = ols_line(&logs_n, &raw_logs)?;
    let (residual_slope, _, residual_slope_se) = ols_line(&logs_n, &resid_logs)?;
    Ok(ScanReport {
        template: template.to_string(),
        rows,
        raw_slope,
        raw_slope_se,
        residual_slope,
        residual_slope_se,
    })
}

/// Closed-form weight of the linear projection: rooted copies of the
/// template at one pair in the independent-edge limit.
pub fn projection_weight(template: &Template, n: usize, p: f64) -> f64 {
    2.0 * (n as f64).powi(template.vertex_count() as i32 - 2)
        * template.edge_count() as f64
        * p.powi(template.edge_count() as i32 - 1)
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

fn central_third_abs_moment(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).abs().powi(3)).sum::<f64>() / n
}

/// Mean of a partition term under full enumeration; the centering check.
pub fn enumerated_term_mean(
    measure: &ExactMeasure,
    term: &HoeffdingTerm,
    ctx: &MomentContext,
) -> Result<f64> {
    let states = measure.state_count();
    let mut acc = 0.0;
    for mask in 0..states as u64 {
        let g = measure.graph(mask);
        acc += measure.prob(mask) * term.evaluate(ctx, &g)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{edge_only_spec, edge_triangle_spec};
    use crate::rng::CounterRng;
    use approx::assert_abs_diff_eq;

    fn enumerated_context(pool: &[usize]) -> (ExactMeasure, MomentContext) {
        let spec = edge_triangle_spec(-0.2, 0.1).unwrap();
        let ctx = Arc::new(SpecContext::new(spec, 4).unwrap());
        let measure = ExactMeasure::build(&ctx).unwrap();
        let moments = MomentContext::from_enumeration(&measure, pool).unwrap();
        (measure, moments)
    }

    #[test]
    fn partition_counts_match_bell_numbers() {
        assert_eq!(set_partitions(1).len(), 1);
        assert_eq!(set_partitions(2).len(), 2);
        assert_eq!(set_partitions(3).len(), 5);
        assert_eq!(set_partitions(4).len(), 15);
    }

    #[test]
    fn singleton_term_is_centered_indicator() {
        let (_, ctx) = enumerated_context(&[0]);
        let term = HoeffdingTerm::new(vec![0], Multiplicity::Amended).unwrap();
        let mut g = EdgeGraph::empty(4).unwrap();
        assert_abs_diff_eq!(
            term.evaluate(&ctx, &g).unwrap(),
            -ctx.base_rate(),
            epsilon = 1e-15
        );
        g.set_edge(EdgeId::from_index(4, 0), true);
        assert_abs_diff_eq!(
            term.evaluate(&ctx, &g).unwrap(),
            1.0 - ctx.base_rate(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn pair_term_under_independence_is_pure_product() {
        // Single-parameter model: edges independent, cross-moments vanish.
        let spec = edge_only_spec(0.2).unwrap();
        let ctx = Arc::new(SpecContext::new(spec, 4).unwrap());
        let measure = ExactMeasure::build(&ctx).unwrap();
        let moments = MomentContext::from_enumeration(&measure, &[0, 3]).unwrap();
        assert!(moments.moment(&[0, 3]).unwrap().abs() < 1e-14);
        let term = HoeffdingTerm::new(vec![0, 3], Multiplicity::Amended).unwrap();
        let mut g = EdgeGraph::empty(4).unwrap();
        g.set_edge(EdgeId::from_index(4, 0), true);
        let p = moments.base_rate();
        assert_abs_diff_eq!(
            term.evaluate(&moments, &g).unwrap(),
            (1.0 - p) * (0.0 - p),
            epsilon = 1e-12
        );
    }

    #[test]
    fn terms_are_centered_under_enumeration() {
        let pool = [0usize, 1, 2, 4];
        let (measure, ctx) = enumerated_context(&pool);
        for subset in subsets_of_size_at_least(&pool, 1) {
            if subset.len() > 3 {
                continue;
            }
            let term = HoeffdingTerm::new(subset.clone(), Multiplicity::Amended).unwrap();
            let mean = enumerated_term_mean(&measure, &term, &ctx).unwrap();
            assert!(mean.abs() < 1e-12, "subset {subset:?}: mean {mean}");
        }
    }

    #[test]
    fn multiplicity_amendment_first_matters_at_size_four() {
        let pool = [0usize, 1, 2, 4];
        let (measure, ctx) = enumerated_context(&pool);
        // Size ≤ 3: both forms coincide (no partition has two big blocks).
        for subset in subsets_of_size_at_least(&pool, 1) {
            if subset.len() > 3 {
                continue;
            }
            let amended =
                HoeffdingTerm::new(subset.clone(), Multiplicity::Amended).unwrap();
            let original =
                HoeffdingTerm::new(subset.clone(), Multiplicity::Original).unwrap();
            let g = measure.graph(0b010110);
            assert_eq!(
                amended.evaluate(&ctx, &g).unwrap(),
                original.evaluate(&ctx, &g).unwrap()
            );
        }
        // Size 4: the pair+pair partitions get weight 2 versus 1, and only
        // the amended form stays centered.
        let amended = HoeffdingTerm::new(pool.to_vec(), Multiplicity::Amended).unwrap();
        let original = HoeffdingTerm::new(pool.to_vec(), Multiplicity::Original).unwrap();
        let amended_mean = enumerated_term_mean(&measure, &amended, &ctx).unwrap();
        let original_mean = enumerated_term_mean(&measure, &original, &ctx).unwrap();
        assert!(amended_mean.abs() < 1e-12, "amended mean {amended_mean}");
        assert!(original_mean.abs() > 1e-9, "original mean {original_mean}");
    }

    #[test]
    fn missing_moment_is_reported_with_subset() {
        let (_, ctx) = enumerated_context(&[0, 1]);
        let term = HoeffdingTerm::new(vec![0, 1, 2], Multiplicity::Amended).unwrap();
        let g = EdgeGraph::empty(4).unwrap();
        match term.evaluate(&ctx, &g) {
            Err(ErgmError::MissingMoment(subset)) => assert!(subset.contains(&2)),
            other => panic!("expected missing moment, got {other:?}"),
        }
    }

    #[test]
    fn term_rejects_bad_index_sets() {
        assert!(HoeffdingTerm::new(vec![], Multiplicity::Amended).is_err());
        assert!(HoeffdingTerm::new(vec![1, 1], Multiplicity::Amended).is_err());
        assert!(HoeffdingTerm::new(vec![0, 1, 2, 3, 4], Multiplicity::Amended).is_err());
    }

    #[test]
    fn expansion_rejects_repeats() {
        assert!(expand_product(&[2, 2], 0.5).is_err());
    }

    #[test]
    fn two_factor_expansion_matches_hand_form() {
        let expansion = expand_product(&[0, 3], 0.4).unwrap();
        // Terms: {0} and {3} with coefficient p, {0,3} with coefficient 1.
        let mut coeffs: Vec<(usize, f64)> = expansion
            .terms()
            .iter()
            .map(|(s, c)| (s.len(), *c))
            .collect();
        coeffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(coeffs.len(), 3);
        assert_abs_diff_eq!(coeffs[0].1, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(coeffs[1].1, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(coeffs[2].1, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn expansion_identity_holds_pointwise() {
        let pool = [0usize, 2, 5];
        let (measure, ctx) = enumerated_context(&pool);
        let expansion = expand_product(&pool, ctx.base_rate()).unwrap();
        for mask in 0..measure.state_count() as u64 {
            let g = measure.graph(mask);
            let lhs = expansion.product_minus_mean(&ctx, &g).unwrap();
            let rhs = expansion.centered_sum(&ctx, &g).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn expansion_identity_on_random_states_size_four() {
        let pool = [0usize, 1, 3, 5];
        let (_, ctx) = enumerated_context(&pool);
        let expansion = expand_product(&pool, ctx.base_rate()).unwrap();
        let mut rng = CounterRng::new(11, 0);
        for _ in 0..200 {
            let g = crate::sampler::er_graph(4, 0.5, &mut rng).unwrap();
            let lhs = expansion.product_minus_mean(&ctx, &g).unwrap();
            let rhs = expansion.centered_sum(&ctx, &g).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn monte_carlo_moments_approach_enumeration() {
        let spec = edge_triangle_spec(-0.2, 0.1).unwrap();
        let ctx = Arc::new(SpecContext::new(spec, 4).unwrap());
        let measure = ExactMeasure::build(&ctx).unwrap();
        let sampler = measure.sampler();
        let mut rng = CounterRng::new(3, 0);
        let graphs: Vec<EdgeGraph> =
            (0..40_000).map(|_| sampler.sample_graph(&mut rng)).collect();
        let pool = [0usize, 1];
        let exact = MomentContext::from_enumeration(&measure, &pool).unwrap();
        let mc = MomentContext::from_samples(&graphs, &pool).unwrap();
        assert!((mc.base_rate() - exact.base_rate()).abs() < 0.01);
        assert!(
            (mc.moment(&[0, 1]).unwrap() - exact.moment(&[0, 1]).unwrap()).abs() < 0.01
        );
        assert!(matches!(mc.source(), MomentSource::MonteCarlo { samples: 40_000 }));
    }

    #[test]
    fn edge_template_projection_is_exact() {
        // Raw hom count of one edge is twice the edge count; the projection
        // removes it entirely.
        let spec = edge_triangle_spec(-0.2, 0.1).unwrap();
        let report = residual_variance_scan(
            &spec,
            &Template::single_edge(),
            &[8, 12, 16],
            400,
            5,
            &ScanKnobs { burn_in_sweeps: 20, thin_sweeps: 1, chains: 2 },
        )
        .unwrap();
        for row in &report.rows {
            assert!(row.raw_variance > 0.0);
            assert!(row.residual_variance < 1e-20, "{row:?}");
        }
    }

    #[test]
    fn scan_requires_subcritical_spec_and_enough_sizes() {
        let bad = edge_triangle_spec(-1.2, 1.0).unwrap();
        let err = residual_variance_scan(
            &bad,
            &Template::two_star(),
            &[8, 12, 16],
            100,
            1,
            &ScanKnobs::default(),
        );
        assert!(matches!(err, Err(ErgmError::NotSubcritical(_))));
        let good = edge_triangle_spec(-0.2, 0.1).unwrap();
        assert!(residual_variance_scan(
            &good,
            &Template::two_star(),
            &[8, 12],
            100,
            1,
            &ScanKnobs::default()
        )
        .is_err());
    }

    #[test]
    fn projection_cuts_variance_growth_for_two_star() {
        let spec = edge_triangle_spec(-0.1, 0.05).unwrap();
        let report = residual_variance_scan(
            &spec,
            &Template::two_star(),
            &[12, 20, 32],
            3_000,
            7,
            &ScanKnobs { burn_in_sweeps: 40, thin_sweeps: 2, chains: 4 },
        )
        .unwrap();
        for row in &report.rows {
            assert!(
                row.residual_variance < row.raw_variance,
                "no reduction at n={}",
                row.n
            );
        }
        assert!(
            report.residual_slope < report.raw_slope - 0.4,
            "raw {} vs residual {}",
            report.raw_slope,
            report.residual_slope
        );
    }
}
