//! Injective homomorphism counting: plain counts by backtracking over
//! adjacency masks, and edge-rooted counts by two routes that must agree:
//!
//! - the defining toggle difference hom(G with s on) - hom(G with s off);
//! - anchored enumeration over (template edge, orientation) pairs.
//!
//! The two are equal because an injective map sends distinct template edges
//! to distinct host pairs, so a map counted by the toggle difference covers
//! the flipped pair with exactly one template edge. The anchored route is
//! what the sampler runs per step; the toggle route is the reference, and
//! the identity suite checks them against each other on random inputs.

use std::time::Instant;

use serde::Serialize;

use crate::graph::{pair_count, EdgeGraph, EdgeId, Template, VertexMask};
use crate::rng::CounterRng;
use crate::{ErgmError, Result};

#[derive(Debug, Clone)]
struct Step {
    /// Positions of earlier steps whose image constrains this vertex.
    reqs: Vec<usize>,
}

/// Precomputed placement order for counting injective maps of one template.
#[derive(Debug, Clone)]
pub struct HomPlan {
    template: Template,
    steps: Vec<Step>,
    isolated: usize,
}

impl HomPlan {
    pub fn new(template: &Template) -> Self {
        let v = template.vertex_count();
        let degrees: Vec<usize> = (0..v).map(|u| template.degree(u)).collect();
        let isolated = degrees.iter().filter(|&&d| d == 0).count();
        let mut placed: Vec<Option<usize>> = vec![None; v];
        let mut steps = Vec::with_capacity(v - isolated);
        while steps.len() + isolated < v {
            // Most constrained first: maximize placed neighbors, then degree.
            let next = (0..v)
                .filter(|&u| degrees[u] > 0 && placed[u].is_none())
                .max_by_key(|&u| {
                    let anchored = template
                        .edges()
                        .iter()
                        .filter(|&&(a, b)| {
                            (a == u && placed[b].is_some()) || (b == u && placed[a].is_some())
                        })
                        .count();
                    (anchored, degrees[u], usize::MAX - u)
                })
                .expect("active vertex remains");
            let reqs: Vec<usize> = template
                .edges()
                .iter()
                .filter_map(|&(a, b)| {
                    if a == next {
                        placed[b]
                    } else if b == next {
                        placed[a]
                    } else {
                        None
                    }
                })
                .collect();
            placed[next] = Some(steps.len());
            steps.push(Step { reqs });
        }
        HomPlan { template: template.clone(), steps, isolated }
    }

    pub fn template(&self) -> &Template {
        &self.template
    }

    /// Number of injective maps of the template into the host with every
    /// template edge landing on a host edge.
    pub fn count(&self, g: &EdgeGraph) -> u64 {
        let n = g.vertex_count();
        let v = self.template.vertex_count();
        if v > n {
            return 0;
        }
        let base = if self.steps.is_empty() {
            1
        } else {
            let mut images = [0usize; 8];
            self.descend(g, 0, VertexMask::default(), &mut images)
        };
        // Isolated template vertices take any of the leftover host vertices.
        let mut total = base;
        let active = v - self.isolated;
        for k in 0..self.isolated {
            total *= (n - active - k) as u64;
        }
        total
    }

    fn descend(
        &self,
        g: &EdgeGraph,
        level: usize,
        used: VertexMask,
        images: &mut [usize; 8],
    ) -> u64 {
        let step = &self.steps[level];
        let mut cand = match step.reqs.split_first() {
            None => VertexMask::full(g.vertex_count()),
            Some((&first, rest)) => {
                let mut c = g.row(images[first]);
                for &r in rest {
                    c = c.and(g.row(images[r]));
                }
                c
            }
        };
        cand = cand.and_not(used);
        if level + 1 == self.steps.len() {
            return cand.count() as u64;
        }
        let mut total = 0;
        cand.for_each(|w| {
            images[level] = w;
            let mut next_used = used;
            next_used.set(w);
            total += self.descend(g, level + 1, next_used, images);
        });
        total
    }
}

pub fn hom_count(template: &Template, g: &EdgeGraph) -> u64 {
    HomPlan::new(template).count(g)
}

/// Reference edge-rooted count: the toggle difference of plain counts.
/// Restores the host state before returning.
pub fn rooted_hom_count_toggle(template: &Template, g: &mut EdgeGraph, s: EdgeId) -> u64 {
    let had = g.has_edge(s);
    g.set_edge(s, true);
    let on = hom_count(template, g);
    g.set_edge(s, false);
    let off = hom_count(template, g);
    g.set_edge(s, had);
    on - off
}

/// Second difference across two distinct pairs, by four toggled counts.
/// Can be negative.
pub fn rooted_pair_hom_count(
    template: &Template,
    g: &mut EdgeGraph,
    s: EdgeId,
    t: EdgeId,
) -> Result<i64> {
    if s == t {
        return Err(ErgmError::BadArgument("pair-rooted count needs distinct pairs".into()));
    }
    let had_s = g.has_edge(s);
    let had_t = g.has_edge(t);
    let read = |on_s: bool, on_t: bool, g: &mut EdgeGraph| {
        g.set_edge(s, on_s);
        g.set_edge(t, on_t);
        hom_count(template, g) as i64
    };
    let val = read(true, true, g) - read(true, false, g) - read(false, true, g)
        + read(false, false, g);
    g.set_edge(s, had_s);
    g.set_edge(t, had_t);
    Ok(val)
}

#[derive(Debug, Clone)]
enum AnchorReq {
    First,
    Second,
    Placed(usize),
}

#[derive(Debug, Clone)]
struct AnchoredStep {
    reqs: Vec<AnchorReq>,
}

#[derive(Debug, Clone)]
struct AnchoredPlan {
    steps: Vec<AnchoredStep>,
    isolated: usize,
}

/// Edge-rooted counter with one precomputed plan per template edge; the two
/// orientations reuse the plan with anchors swapped. This is the sampler's
/// per-step workhorse: for the triangle it degenerates to six popcounts of
/// row intersections.
#[derive(Debug, Clone)]
pub struct RootedCounter {
    template: Template,
    plans: Vec<AnchoredPlan>,
}

impl RootedCounter {
    pub fn new(template: &Template) -> Self {
        let v = template.vertex_count();
        let plans = template
            .edges()
            .iter()
            .map(|&(ea, eb)| {
                let degrees: Vec<usize> = (0..v).map(|u| template.degree(u)).collect();
                let isolated = degrees.iter().filter(|&&d| d == 0).count();
                // Anchors occupy pseudo-positions; remaining active vertices
                // are ordered most-constrained-first.
                let mut placed: Vec<Option<AnchorReq>> = vec![None; v];
                placed[ea] = Some(AnchorReq::First);
                placed[eb] = Some(AnchorReq::Second);
                let mut steps = Vec::new();
                while steps.len() + isolated + 2 < v {
                    let next = (0..v).filter(|&u| degrees[u] > 0 && placed[u].is_none()).max_by_key(
                        |&u| {
                            let anchored = template
                                .edges()
                                .iter()
                                .filter(|&&(a, b)| {
                                    (a == u && placed[b].is_some())
                                        || (b == u && placed[a].is_some())
                                })
                                .count();
                            (anchored, degrees[u], usize::MAX - u)
                        },
                    );
                    let Some(next) = next else { break };
                    let reqs: Vec<AnchorReq> = template
                        .edges()
                        .iter()
                        .filter_map(|&(a, b)| {
                            let other = if a == next {
                                b
                            } else if b == next {
                                a
                            } else {
                                return None;
                            };
                            placed[other].clone()
                        })
                        .collect();
                    placed[next] = Some(AnchorReq::Placed(steps.len()));
                    steps.push(AnchoredStep { reqs });
                }
                AnchoredPlan { steps, isolated }
            })
            .collect();
        RootedCounter { template: template.clone(), plans }
    }

    pub fn template(&self) -> &Template {
        &self.template
    }

    /// Number of injective maps covering the pair s, all other template
    /// edges present in g. Equals the toggle difference regardless of the
    /// current state of s.
    pub fn count(&self, g: &EdgeGraph, s: EdgeId) -> u64 {
        let (i, j) = s.endpoints();
        let n = g.vertex_count();
        let v = self.template.vertex_count();
        if v > n {
            return 0;
        }
        let mut total = 0;
        for plan in &self.plans {
            for (x, y) in [(i, j), (j, i)] {
                let mut used = VertexMask::default();
                used.set(x);
                used.set(y);
                let base = if plan.steps.is_empty() {
                    1
                } else {
                    let mut images = [0usize; 8];
                    Self::descend(plan, g, x, y, 0, used, &mut images)
                };
                let mut val = base;
                let active = v - plan.isolated;
                for k in 0..plan.isolated {
                    val *= (n - active - k) as u64;
                }
                total += val;
            }
        }
        total
    }

    fn descend(
        plan: &AnchoredPlan,
        g: &EdgeGraph,
        x: usize,
        y: usize,
        level: usize,
        used: VertexMask,
        images: &mut [usize; 8],
    ) -> u64 {
        let step = &plan.steps[level];
        let mut cand = match step.reqs.split_first() {
            None => VertexMask::full(g.vertex_count()),
            Some((first, rest)) => {
                let row_of = |r: &AnchorReq| match r {
                    AnchorReq::First => g.row(x),
                    AnchorReq::Second => g.row(y),
                    AnchorReq::Placed(p) => g.row(images[*p]),
                };
                let mut c = row_of(first);
                for r in rest {
                    c = c.and(row_of(r));
                }
                c
            }
        };
        cand = cand.and_not(used);
        if level + 1 == plan.steps.len() {
            return cand.count() as u64;
        }
        let mut total = 0;
        cand.for_each(|w| {
            images[level] = w;
            let mut next_used = used;
            next_used.set(w);
            total += Self::descend(plan, g, x, y, level + 1, next_used, images);
        });
        total
    }
}

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

/// Outcome of the combinatorial identity sweep over random hosts.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub trials: usize,
    pub vertex_count: usize,
    pub checks: usize,
    pub failures: Vec<String>,
    pub elapsed_ms: u64,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks, on random hosts at a sweep of densities, that the two rooted
/// routes agree and that the exact summation identities hold:
///
/// - toggle difference == anchored enumeration;
/// - Σ over present edges of rooted == (template edge count) × plain count;
/// - Σ over all pairs of rooted == Σ over template edges of the count of
///   the template with that edge deleted (vertices kept);
/// - count into the complete host on v vertices == v!;
/// - appending an isolated template vertex multiplies the count by n - v;
/// - plain count divisible by the automorphism count.
pub fn run_identity_suite(n: usize, trials: usize, seed: u64) -> Result<IdentityReport> {
    if n < 6 {
        return Err(ErgmError::BadArgument("identity suite wants n >= 6".into()));
    }
    let started = Instant::now();
    let pool = [
        Template::single_edge(),
        Template::two_star(),
        Template::triangle(),
        Template::path(4)?,
        Template::cycle(4)?,
        Template::complete(4)?,
    ];
    let counters: Vec<RootedCounter> = pool.iter().map(RootedCounter::new).collect();
    let plans: Vec<HomPlan> = pool.iter().map(HomPlan::new).collect();
    let np = pair_count(n);
    let mut checks = 0;
    let mut failures = Vec::new();
    let fail = |failures: &mut Vec<String>, msg: String| {
        if failures.len() < 20 {
            failures.push(msg);
        }
    };

    for trial in 0..trials {
        let mut rng = CounterRng::new(seed, trial as u64);
        let density = 0.1 + 0.8 * rng.next_f64();
        let mut g = EdgeGraph::empty(n)?;
        for idx in 0..np {
            if rng.next_f64() < density {
                g.set_edge(EdgeId::from_index(n, idx), true);
            }
        }
        let which = trial % pool.len();
        let tpl = &pool[which];
        let rooted = &counters[which];
        let hom = plans[which].count(&g);

        // Route agreement on a few random pairs.
        for _ in 0..4 {
            let s = EdgeId::from_index(n, rng.next_below(np as u64) as usize);
            let fast = rooted.count(&g, s);
            let slow = rooted_hom_count_toggle(tpl, &mut g, s);
            checks += 1;
            if fast != slow {
                fail(&mut failures, format!(
                    "trial {trial}: rooted routes disagree on {tpl} at {s:?}: {fast} vs {slow}"
                ));
            }
        }

        // Edge-weighted identity over present edges.
        let weighted: u64 = g.edges().iter().map(|&s| rooted.count(&g, s)).sum();
        checks += 1;
        if weighted != tpl.edge_count() as u64 * hom {
            fail(&mut failures, format!(
                "trial {trial}: edge-weighted identity fails for {tpl}: {weighted} vs {} * {hom}",
                tpl.edge_count()
            ));
        }

        // Deletion sum over all pairs.
        let all_pairs: u64 =
            (0..np).map(|idx| rooted.count(&g, EdgeId::from_index(n, idx))).sum();
        let deleted: u64 = (0..tpl.edge_count())
            .map(|k| hom_count(&tpl.delete_edge(k).expect("edge index in range"), &g))
            .sum();
        checks += 1;
        if all_pairs != deleted {
            fail(&mut failures, format!(
                "trial {trial}: deletion-sum identity fails for {tpl}: {all_pairs} vs {deleted}"
            ));
        }

        // Complete host gives v!.
        let kv = EdgeGraph::complete(tpl.vertex_count())?;
        checks += 1;
        if plans[which].count(&kv) != factorial(tpl.vertex_count()) {
            fail(&mut failures, format!("trial {trial}: complete-host count wrong for {tpl}"));
        }

        // Isolated vertex multiplies by n - v.
        let padded = Template::new(tpl.vertex_count() + 1, tpl.edges())?;
        checks += 1;
        if hom_count(&padded, &g) != (n - tpl.vertex_count()) as u64 * hom {
            fail(&mut failures, format!("trial {trial}: isolated-vertex factor fails for {tpl}"));
        }

        // Automorphism divisibility.
        checks += 1;
        if hom % tpl.automorphism_count() as u64 != 0 {
            fail(&mut failures, format!("trial {trial}: count not divisible by |Aut| for {tpl}"));
        }
    }

    Ok(IdentityReport {
        trials,
        vertex_count: n,
        checks,
        failures,
        elapsed_ms: started.elapsed().as_millis() as u64,
    })
}
