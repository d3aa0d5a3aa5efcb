//! Markov chain samplers for the model measure: single-edge heat-bath
//! dynamics, a monotone grand coupling, perfect sampling by coupling from
//! the past, and an independent-edge baseline sampler.

use std::sync::Arc;

use rayon::prelude::*;

use crate::graph::{pair_count, EdgeGraph, EdgeId};
use crate::model::{sigmoid, SpecContext};
use crate::rng::{CounterRng, SlotRng};
use crate::{ErgmError, Result};

/// Burn-in believed safe in the fast-mixing regime; deliberately
/// conservative and always overridable by the caller.
pub fn default_burn_in_sweeps(n: usize) -> u64 {
    ((n * n) as f64 * (n as f64).ln()).ceil() as u64
}

pub const DEFAULT_CFTP_MAX_SWEEPS: u64 = 1 << 20;

/// Heat-bath dynamics: each step freshens one uniformly chosen edge from its
/// conditional law given the rest of the graph.
#[derive(Debug, Clone)]
pub struct GlauberChain {
    ctx: Arc<SpecContext>,
    state: EdgeGraph,
    rng: CounterRng,
    steps: u64,
}

impl GlauberChain {
    pub fn new(ctx: Arc<SpecContext>, initial: EdgeGraph, seed: u64, stream: u64) -> Result<Self> {
        if initial.vertex_count() != ctx.vertex_count() {
            return Err(ErgmError::BadArgument(format!(
                "initial state has {} vertices, context expects {}",
                initial.vertex_count(),
                ctx.vertex_count()
            )));
        }
        Ok(GlauberChain { ctx, state: initial, rng: CounterRng::new(seed, stream), steps: 0 })
    }

    pub fn from_empty(ctx: Arc<SpecContext>, seed: u64, stream: u64) -> Result<Self> {
        let initial = EdgeGraph::empty(ctx.vertex_count())?;
        GlauberChain::new(ctx, initial, seed, stream)
    }

    #[inline]
    pub fn step(&mut self) {
        let pairs = self.ctx.pair_count() as u64;
        let idx = self.rng.next_below(pairs) as usize;
        let u = self.rng.next_f64();
        let s = EdgeId::from_index(self.ctx.vertex_count(), idx);
        let q = sigmoid(self.ctx.cond_log_odds(&self.state, s));
        self.state.set_edge(s, u <= q);
        self.steps += 1;
    }

    /// One sweep = (number of pairs) single-edge steps.
    pub fn sweep(&mut self) {
        for _ in 0..self.ctx.pair_count() {
            self.step();
        }
    }

    pub fn run_sweeps(&mut self, sweeps: u64) {
        for _ in 0..sweeps {
            self.sweep();
        }
    }

    pub fn state(&self) -> &EdgeGraph {
        &self.state
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }
}

/// Metadata-carrying result of a sampling run.
#[derive(Debug, Clone)]
pub struct SampleRun {
    pub graphs: Vec<EdgeGraph>,
    pub burn_in_sweeps: u64,
    pub thin_sweeps: u64,
    pub seed: u64,
    pub stream: u64,
}

/// Single-chain sampling from the empty graph with the conservative default
/// applied only when the caller passes it explicitly; burn-in and thinning
/// are knobs, both at least one sweep.
pub fn sample(
    ctx: &Arc<SpecContext>,
    burn_in_sweeps: u64,
    thin_sweeps: u64,
    count: usize,
    seed: u64,
) -> Result<SampleRun> {
    let initial = EdgeGraph::empty(ctx.vertex_count())?;
    sample_with(ctx, initial, burn_in_sweeps, thin_sweeps, count, seed, 0)
}

pub fn sample_with(
    ctx: &Arc<SpecContext>,
    initial: EdgeGraph,
    burn_in_sweeps: u64,
    thin_sweeps: u64,
    count: usize,
    seed: u64,
    stream: u64,
) -> Result<SampleRun> {
    let mut graphs = Vec::with_capacity(count);
    sample_visit(ctx, initial, burn_in_sweeps, thin_sweeps, count, seed, stream, |g| {
        graphs.push(g.clone())
    })?;
    Ok(SampleRun { graphs, burn_in_sweeps, thin_sweeps, seed, stream })
}

/// Streaming variant: hands each thinned state to the visitor without
/// retaining it. The workhorse for long runs.
#[allow(clippy::too_many_arguments)]
pub fn sample_visit(
    ctx: &Arc<SpecContext>,
    initial: EdgeGraph,
    burn_in_sweeps: u64,
    thin_sweeps: u64,
    count: usize,
    seed: u64,
    stream: u64,
    mut visit: impl FnMut(&EdgeGraph),
) -> Result<()> {
    if burn_in_sweeps < 1 || thin_sweeps < 1 {
        return Err(ErgmError::BadArgument(
            "burn-in and thinning must be at least one sweep".into(),
        ));
    }
    let mut chain = GlauberChain::new(Arc::clone(ctx), initial, seed, stream)?;
    chain.run_sweeps(burn_in_sweeps);
    for _ in 0..count {
        chain.run_sweeps(thin_sweeps);
        visit(chain.state());
    }
    Ok(())
}

/// Runs several independent chains (one rayon task each) and returns the
/// per-sample values of `stat`, concatenated in chain order so the result
/// does not depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn sample_stat_chains<T: Send>(
    ctx: &Arc<SpecContext>,
    initial: &EdgeGraph,
    chains: usize,
    per_chain: usize,
    burn_in_sweeps: u64,
    thin_sweeps: u64,
    seed: u64,
    stat: impl Fn(&EdgeGraph) -> T + Sync,
) -> Result<Vec<T>> {
    let runs: Result<Vec<Vec<T>>> = (0..chains as u64)
        .into_par_iter()
        .map(|chain_id| {
            let mut out = Vec::with_capacity(per_chain);
            sample_visit(
                ctx,
                initial.clone(),
                burn_in_sweeps,
                thin_sweeps,
                per_chain,
                seed,
                chain_id,
                |g| out.push(stat(g)),
            )?;
            Ok(out)
        })
        .collect();
    Ok(runs?.into_iter().flatten().collect())
}

/// Independent-edge baseline: every pair present with probability p.
pub fn er_sample(n: usize, p: f64, count: usize, seed: u64) -> Result<Vec<EdgeGraph>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ErgmError::BadArgument(format!("edge probability {p} outside [0, 1]")));
    }
    let mut rng = CounterRng::new(seed, 0);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(er_graph(n, p, &mut rng)?);
    }
    Ok(out)
}

pub fn er_graph(n: usize, p: f64, rng: &mut CounterRng) -> Result<EdgeGraph> {
    let mut g = EdgeGraph::empty(n)?;
    for idx in 0..pair_count(n) {
        if rng.next_f64() < p {
            g.set_edge(EdgeId::from_index(n, idx), true);
        }
    }
    Ok(g)
}

/// Perfect sampling by coupling from the past.
///
/// The two extreme chains (empty and complete graph) are driven by shared
/// slot randomness; when all interaction parameters are nonnegative the
/// update is monotone, the extremes sandwich every other start, and their
/// coalescence certifies the merged state as an exact draw. Horizons double
/// until coalescence; slot t always replays identical randomness, which is
/// what makes the output exact rather than approximately mixed.
pub fn cftp_sample(
    ctx: &SpecContext,
    seed: u64,
    stream: u64,
    max_sweeps: u64,
) -> Result<EdgeGraph> {
    if !ctx.spec().is_monotone() {
        return Err(ErgmError::UnsupportedRegime(
            "negative interaction parameters break the monotone coupling".into(),
        ));
    }
    let n = ctx.vertex_count();
    let pairs = pair_count(n) as u64;
    let slots = SlotRng::new(seed, stream);
    let mut horizon_sweeps: u64 = 1;
    loop {
        let mut lower = EdgeGraph::empty(n)?;
        let mut upper = EdgeGraph::complete(n)?;
        let total_steps = horizon_sweeps * pairs;
        // Slot k is the randomness of the k-th step before the present, so
        // growing the horizon only prepends older steps.
        for k in (1..=total_steps).rev() {
            let (idx, u) = slots.edge_and_uniform(k, pairs);
            let s = EdgeId::from_index(n, idx);
            let q_low = sigmoid(ctx.cond_log_odds(&lower, s));
            let q_up = sigmoid(ctx.cond_log_odds(&upper, s));
            lower.set_edge(s, u <= q_low);
            upper.set_edge(s, u <= q_up);
            if k % pairs == 0 {
                debug_assert!(lower.is_subgraph_of(&upper), "monotone coupling violated");
            }
        }
        if lower == upper {
            return Ok(lower);
        }
        if horizon_sweeps >= max_sweeps {
            let gap = upper.edge_count() - lower.edge_count();
            return Err(ErgmError::CftpTimeout { max_sweeps, gap });
        }
        horizon_sweeps *= 2;
    }
}

/// Independent perfect draws, one slot stream per draw.
pub fn cftp_many(
    ctx: &SpecContext,
    count: usize,
    seed: u64,
    max_sweeps: u64,
) -> Result<Vec<EdgeGraph>> {
    (0..count as u64).map(|draw| cftp_sample(ctx, seed, draw, max_sweeps)).collect()
}

/// Dense one-step transition matrix of the dynamics, for hosts small enough
/// to enumerate. Row = from-state mask, column = to-state mask.
pub fn transition_matrix(ctx: &SpecContext) -> Result<Vec<Vec<f64>>> {
    let n = ctx.vertex_count();
    let pairs = pair_count(n);
    if pairs > 20 {
        return Err(ErgmError::EnumerationTooLarge(n));
    }
    let states = 1usize << pairs;
    let mut matrix = vec![vec![0.0; states]; states];
    for from in 0..states {
        let g = EdgeGraph::from_pair_mask(n, from as u64)?;
        for idx in 0..pairs {
            let s = EdgeId::from_index(n, idx);
            let q = sigmoid(ctx.cond_log_odds(&g, s));
            let on = from | (1 << idx);
            let off = from & !(1 << idx);
            matrix[from][on] += q / pairs as f64;
            matrix[from][off] += (1.0 - q) / pairs as f64;
        }
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{edge_only_spec, edge_triangle_spec, ErgmSpec};
    use crate::oracle::{mask_of, ExactMeasure};
    use crate::stats::total_variation;
    use crate::graph::Template;

    fn ctx(n: usize, b1: f64, b2: f64) -> Arc<SpecContext> {
        Arc::new(SpecContext::new(edge_triangle_spec(b1, b2).unwrap(), n).unwrap())
    }

    #[test]
    fn default_burn_in_grows_superquadratically() {
        assert_eq!(default_burn_in_sweeps(4), 23);
        assert!(default_burn_in_sweeps(80) > 6400);
    }

    #[test]
    fn knobs_must_be_positive() {
        let c = ctx(4, -0.2, 0.1);
        assert!(sample(&c, 0, 1, 1, 7).is_err());
        assert!(sample(&c, 1, 0, 1, 7).is_err());
    }

    #[test]
    fn chain_is_deterministic_in_seed_and_stream() {
        let c = ctx(5, -0.2, 0.1);
        let a = sample(&c, 5, 2, 10, 99).unwrap();
        let b = sample(&c, 5, 2, 10, 99).unwrap();
        assert_eq!(a.graphs, b.graphs);
        let other = sample(&c, 5, 2, 10, 100).unwrap();
        assert_ne!(a.graphs, other.graphs);
    }

    #[test]
    fn single_parameter_edge_density_matches_closed_form() {
        // Independent edges: density sigmoid(2 β₁).
        let spec = edge_only_spec(0.4).unwrap();
        let p = sigmoid(0.8);
        let c = Arc::new(SpecContext::new(spec, 10).unwrap());
        let run = sample(&c, 20, 1, 4000, 3).unwrap();
        let pairs = pair_count(10) as f64;
        let mean: f64 =
            run.graphs.iter().map(|g| g.edge_count() as f64 / pairs).sum::<f64>() / 4000.0;
        let se = (p * (1.0 - p) / (4000.0 * pairs)).sqrt();
        // Generous multiple: thinned single-chain draws stay correlated.
        assert!((mean - p).abs() < 12.0 * se, "density {mean} vs {p} (se {se})");
    }

    #[test]
    fn glauber_edge_count_law_approaches_enumeration() {
        let c = ctx(4, -0.2, 0.1);
        let exact = ExactMeasure::build(&c).unwrap().edge_count_law();
        let mut law = vec![0.0; pair_count(4) + 1];
        let count = 60_000;
        sample_visit(
            &c,
            EdgeGraph::empty(4).unwrap(),
            50,
            1,
            count,
            11,
            0,
            |g| law[g.edge_count()] += 1.0,
        )
        .unwrap();
        for v in &mut law {
            *v /= count as f64;
        }
        let tv = total_variation(&law, &exact).unwrap();
        assert!(tv < 0.03, "tv {tv}");
    }

    #[test]
    fn detailed_balance_against_enumeration() {
        let c = ctx(3, -0.2, 0.1);
        let measure = ExactMeasure::build(&c).unwrap();
        let kernel = transition_matrix(&c).unwrap();
        let states = measure.state_count();
        for x in 0..states {
            let row_sum: f64 = kernel[x].iter().sum();
            assert!((row_sum - 1.0).abs() < 1e-12, "row {x} sums to {row_sum}");
            for y in 0..states {
                let fwd = measure.prob(x as u64) * kernel[x][y];
                let bwd = measure.prob(y as u64) * kernel[y][x];
                assert!(
                    (fwd - bwd).abs() < 1e-12,
                    "detailed balance fails at ({x}, {y}): {fwd} vs {bwd}"
                );
            }
        }
    }

    #[test]
    fn cftp_requires_monotone_spec() {
        let spec = ErgmSpec::with_signed_interactions(
            vec![0.1, -0.05],
            vec![Template::single_edge(), Template::triangle()],
        )
        .unwrap();
        let c = SpecContext::new(spec, 4).unwrap();
        assert!(matches!(
            cftp_sample(&c, 1, 0, 1024),
            Err(ErgmError::UnsupportedRegime(_))
        ));
    }

    #[test]
    fn cftp_times_out_when_capped() {
        let c = ctx(4, -0.2, 0.1);
        // A one-sweep cap cannot coalesce every stream; find one that fails.
        let mut saw_timeout = false;
        for stream in 0..50 {
            if let Err(ErgmError::CftpTimeout { max_sweeps, .. }) =
                cftp_sample(&c, 5, stream, 1)
            {
                assert_eq!(max_sweeps, 1);
                saw_timeout = true;
                break;
            }
        }
        assert!(saw_timeout);
    }

    #[test]
    fn cftp_draw_is_reproducible() {
        let c = ctx(4, -0.2, 0.1);
        let a = cftp_sample(&c, 42, 7, DEFAULT_CFTP_MAX_SWEEPS).unwrap();
        let b = cftp_sample(&c, 42, 7, DEFAULT_CFTP_MAX_SWEEPS).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cftp_matches_enumeration_in_tv() {
        let c = ctx(4, -0.2, 0.1);
        let measure = ExactMeasure::build(&c).unwrap();
        let draws = 20_000;
        let mut counts = vec![0.0; measure.state_count()];
        for g in cftp_many(&c, draws, 77, DEFAULT_CFTP_MAX_SWEEPS).unwrap() {
            counts[mask_of(&g) as usize] += 1.0;
        }
        for v in &mut counts {
            *v /= draws as f64;
        }
        let probs: Vec<f64> = (0..measure.state_count()).map(|m| measure.prob(m as u64)).collect();
        let tv = total_variation(&counts, &probs).unwrap();
        assert!(tv < 0.03, "tv {tv}");
    }

    #[test]
    fn independent_edge_sampler_density() {
        let draws = er_sample(50, 0.3, 2_000, 5).unwrap();
        let pairs = pair_count(50) as f64;
        let mean: f64 =
            draws.iter().map(|g| g.edge_count() as f64).sum::<f64>() / draws.len() as f64;
        let expect = pairs * 0.3;
        let sd = (pairs * 0.3 * 0.7).sqrt();
        let se = sd / (draws.len() as f64).sqrt();
        assert!((mean - expect).abs() < 4.0 * se, "mean {mean} vs {expect}");
        assert!(er_sample(5, 1.2, 1, 0).is_err());
    }

    #[test]
    fn chain_stat_runs_are_chain_order_deterministic() {
        let c = ctx(5, -0.2, 0.1);
        let init = EdgeGraph::empty(5).unwrap();
        let a =
            sample_stat_chains(&c, &init, 3, 5, 2, 1, 13, |g| g.edge_count()).unwrap();
        let b =
            sample_stat_chains(&c, &init, 3, 5, 2, 1, 13, |g| g.edge_count()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 15);
    }
}
