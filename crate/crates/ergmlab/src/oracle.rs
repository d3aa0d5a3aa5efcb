//! Brute-force enumeration of the model measure for hosts small enough to
//! list every graph (n ≤ 6, at most 2^15 states). Everything stochastic in
//! this workspace is ultimately tested against this module.

use crate::graph::{pair_count, EdgeGraph, EdgeId};
use crate::model::{sigmoid, SpecContext};
use crate::rng::CounterRng;
use crate::stats::{log_sum_exp, DiscreteLaw, KahanSum};
use crate::{ErgmError, Result};

pub const MAX_ENUM_VERTICES: usize = 6;

/// The fully enumerated measure: one probability per edge-set bitmask in
/// lexicographic pair order.
#[derive(Debug, Clone)]
pub struct ExactMeasure {
    n: usize,
    pairs: usize,
    log_z: f64,
    log_weights: Vec<f64>,
    probs: Vec<f64>,
    edge_counts: Vec<u8>,
}

impl ExactMeasure {
    pub fn build(ctx: &SpecContext) -> Result<Self> {
        let n = ctx.vertex_count();
        if n > MAX_ENUM_VERTICES {
            return Err(ErgmError::EnumerationTooLarge(n));
        }
        let pairs = pair_count(n);
        let states = 1usize << pairs;
        let mut log_weights = Vec::with_capacity(states);
        let mut edge_counts = Vec::with_capacity(states);
        for mask in 0..states as u64 {
            let g = EdgeGraph::from_pair_mask(n, mask)?;
            log_weights.push(ctx.log_weight(&g));
            edge_counts.push(g.edge_count() as u8);
        }
        let log_z = log_sum_exp(&log_weights);

        // Independent second route to the partition sum: ascending order
        // with compensated accumulation. Guards the normalization that every
        // downstream exact test relies on.
        let shift = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut terms: Vec<f64> = log_weights.iter().map(|lw| (lw - shift).exp()).collect();
        terms.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let mut kahan = KahanSum::default();
        for t in terms {
            kahan.add(t);
        }
        let log_z_again = shift + kahan.value().ln();
        assert!(
            (log_z - log_z_again).abs() <= 1e-12,
            "partition accumulation routes disagree: {log_z} vs {log_z_again}"
        );

        let probs: Vec<f64> = log_weights.iter().map(|lw| (lw - log_z).exp()).collect();
        let total: f64 = probs.iter().sum();
        assert!((total - 1.0).abs() <= 1e-12, "probabilities sum to {total}");

        Ok(ExactMeasure { n, pairs, log_z, log_weights, probs, edge_counts })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn state_count(&self) -> usize {
        self.probs.len()
    }

    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    pub fn prob(&self, mask: u64) -> f64 {
        self.probs[mask as usize]
    }

    pub fn log_weight(&self, mask: u64) -> f64 {
        self.log_weights[mask as usize]
    }

    pub fn graph(&self, mask: u64) -> EdgeGraph {
        EdgeGraph::from_pair_mask(self.n, mask).expect("mask within enumeration range")
    }

    /// Exact expectation of an arbitrary graph statistic by full sweep.
    pub fn expect(&self, mut f: impl FnMut(&EdgeGraph) -> f64) -> f64 {
        let mut acc = 0.0;
        for mask in 0..self.probs.len() as u64 {
            let p = self.probs[mask as usize];
            if p > 0.0 {
                acc += p * f(&self.graph(mask));
            }
        }
        acc
    }

    pub fn mean_edge_count(&self) -> f64 {
        self.probs.iter().zip(&self.edge_counts).map(|(p, &m)| p * m as f64).sum()
    }

    pub fn edge_count_variance(&self) -> f64 {
        let mu = self.mean_edge_count();
        self.probs
            .iter()
            .zip(&self.edge_counts)
            .map(|(p, &m)| p * (m as f64 - mu).powi(2))
            .sum()
    }

    /// Probability vector of the edge count, index m = 0..=pairs.
    pub fn edge_count_law(&self) -> Vec<f64> {
        let mut law = vec![0.0; self.pairs + 1];
        for (p, &m) in self.probs.iter().zip(&self.edge_counts) {
            law[m as usize] += p;
        }
        law
    }

    /// Law of (edge count - exact mean) / scale on its discrete support.
    pub fn standardized_edge_law(&self, scale: f64) -> Result<DiscreteLaw> {
        let mu = self.mean_edge_count();
        let support = (0..=self.pairs).map(|m| (m as f64 - mu) / scale).collect();
        DiscreteLaw::new(support, self.edge_count_law())
    }

    /// P(edge s present | all other edges as in g), computed from the
    /// enumerated measure rather than from rooted counts.
    pub fn conditional_present(&self, g: &EdgeGraph, s: EdgeId) -> f64 {
        let mut on = g.clone();
        on.set_edge(s, true);
        let mut off = g.clone();
        off.set_edge(s, false);
        let (lw_on, lw_off) =
            (self.log_weights[mask_of(&on) as usize], self.log_weights[mask_of(&off) as usize]);
        sigmoid(lw_on - lw_off)
    }

    pub fn sampler(&self) -> ExactSampler {
        let mut cum = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for &p in &self.probs {
            acc += p;
            cum.push(acc);
        }
        ExactSampler { n: self.n, cum }
    }
}

/// Lexicographic pair-order bitmask of a small graph.
pub fn mask_of(g: &EdgeGraph) -> u64 {
    let n = g.vertex_count();
    let mut mask = 0u64;
    for idx in 0..pair_count(n) {
        if g.has_edge(EdgeId::from_index(n, idx)) {
            mask |= 1 << idx;
        }
    }
    mask
}

/// Inverse-CDF sampler over the enumerated states.
#[derive(Debug, Clone)]
pub struct ExactSampler {
    n: usize,
    cum: Vec<f64>,
}

impl ExactSampler {
    pub fn sample_mask(&self, rng: &mut CounterRng) -> u64 {
        let u = rng.next_f64();
        self.cum.partition_point(|&c| c <= u) as u64
    }

    pub fn sample_graph(&self, rng: &mut CounterRng) -> EdgeGraph {
        EdgeGraph::from_pair_mask(self.n, self.sample_mask(rng))
            .expect("mask within enumeration range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{edge_only_spec, edge_triangle_spec};
    use crate::stats::total_variation;
    use approx::assert_abs_diff_eq;

    fn measure(n: usize, b1: f64, b2: f64) -> ExactMeasure {
        let ctx = SpecContext::new(edge_triangle_spec(b1, b2).unwrap(), n).unwrap();
        ExactMeasure::build(&ctx).unwrap()
    }

    #[test]
    fn refuses_large_hosts() {
        let ctx = SpecContext::new(edge_triangle_spec(-0.2, 0.1).unwrap(), 7).unwrap();
        assert!(matches!(ExactMeasure::build(&ctx), Err(ErgmError::EnumerationTooLarge(7))));
    }

    #[test]
    fn reference_partition_and_mean_edge_triangle_n4() {
        // Values frozen from an independent permutation-based enumerator.
        let m = measure(4, -0.2, 0.1);
        assert_eq!(m.state_count(), 64);
        assert_abs_diff_eq!(m.log_partition(), 3.120718025863128, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mean_edge_count(), 2.484828781118926, epsilon = 1e-12);
        let expect_law = [
            0.044125473811,
            0.177469137817,
            0.297402801579,
            0.274410072891,
            0.150932639801,
            0.048365982338,
            0.007293891763,
        ];
        for (got, want) in m.edge_count_law().iter().zip(expect_law) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn reference_partition_without_edge_term() {
        let m = measure(4, 0.0, 0.1);
        assert_abs_diff_eq!(m.log_partition(), 4.241479539883768, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mean_edge_count(), 3.123818102371690, epsilon = 1e-12);
    }

    #[test]
    fn five_vertex_standardized_distance_fixture() {
        let spec = edge_triangle_spec(-0.2, 0.1).unwrap();
        let report = spec.solve_fixed_point(1e-12).unwrap();
        let sigma = report.sigma_sq(5).unwrap().sqrt();
        let ctx = SpecContext::new(spec, 5).unwrap();
        let m = ExactMeasure::build(&ctx).unwrap();
        assert_abs_diff_eq!(m.mean_edge_count(), 4.168193566640777, epsilon = 1e-11);
        let law = m.standardized_edge_law(sigma).unwrap();
        assert_abs_diff_eq!(
            law.kolmogorov_vs_std_normal(),
            0.130244831915712,
            epsilon = 1e-9
        );
    }

    #[test]
    fn flat_parameters_give_uniform_measure() {
        let ctx = SpecContext::new(edge_only_spec(0.0).unwrap(), 4).unwrap();
        let m = ExactMeasure::build(&ctx).unwrap();
        for mask in 0..64 {
            assert_abs_diff_eq!(m.prob(mask), 1.0 / 64.0, epsilon = 1e-15);
        }
        // Edge-count law is Binomial(6, 1/2).
        let law = m.edge_count_law();
        for (k, &p) in law.iter().enumerate() {
            let binom = [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0][k] / 64.0;
            assert_abs_diff_eq!(p, binom, epsilon = 1e-15);
        }
    }

    #[test]
    fn expect_recovers_moments() {
        let m = measure(4, -0.2, 0.1);
        let mu = m.expect(|g| g.edge_count() as f64);
        assert_abs_diff_eq!(mu, m.mean_edge_count(), epsilon = 1e-13);
        let var = m.expect(|g| (g.edge_count() as f64 - mu).powi(2));
        assert_abs_diff_eq!(var, m.edge_count_variance(), epsilon = 1e-13);
    }

    #[test]
    fn conditional_matches_rooted_log_odds() {
        let ctx = SpecContext::new(edge_triangle_spec(-0.2, 0.1).unwrap(), 4).unwrap();
        let m = ExactMeasure::build(&ctx).unwrap();
        for mask in [0u64, 7, 21, 63, 40] {
            let g = m.graph(mask);
            for idx in 0..pair_count(4) {
                let s = EdgeId::from_index(4, idx);
                assert_abs_diff_eq!(
                    m.conditional_present(&g, s),
                    sigmoid(ctx.cond_log_odds(&g, s)),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn mask_round_trip() {
        let m = measure(4, -0.2, 0.1);
        for mask in 0..64 {
            assert_eq!(mask_of(&m.graph(mask)), mask);
        }
    }

    #[test]
    fn inverse_cdf_sampler_tracks_the_law() {
        let m = measure(4, -0.2, 0.1);
        let sampler = m.sampler();
        let mut rng = CounterRng::new(31, 0);
        let draws = 200_000;
        let mut counts = vec![0.0; m.state_count()];
        for _ in 0..draws {
            counts[sampler.sample_mask(&mut rng) as usize] += 1.0;
        }
        for c in &mut counts {
            *c /= draws as f64;
        }
        let tv = total_variation(&counts, &m.probs).unwrap();
        assert!(tv < 0.01, "tv {tv}");
    }
}
