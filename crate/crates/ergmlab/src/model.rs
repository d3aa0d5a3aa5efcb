//! Model parameters and everything that follows from them in closed form:
//! log-weights, conditional log-odds, the fixed-point analysis of the edge
//! density, region classification, and the asymptotic edge-count variance.
//!
//! The weight of a graph G on n vertices is
//!   exp{ Σ_j β_j n^(2-v_j) hom_j(G) }
//! up to normalization, where hom_j is the injective copy count of the j-th
//! template (v_j vertices, e_j edges) and the first template is always the
//! single edge. Single-edge dynamics only ever needs the rooted counts, and
//! the large-n edge density is governed by the scalar map
//!   a ↦ sigmoid(2 Σ_j β_j e_j a^(e_j - 1)).

use serde::{Deserialize, Serialize};

use crate::graph::count::{HomPlan, RootedCounter};
use crate::graph::{EdgeGraph, EdgeId, Template};
use crate::{ErgmError, Result};

/// Strictness margin for calling a fixed point contractive.
const CONTRACTION_MARGIN: f64 = 1e-9;
/// Roots closer than this are treated as one (tangency robustness).
const ROOT_MERGE_WIDTH: f64 = 1e-8;
const GRID_POINTS: usize = 10_000;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Parameter vector plus templates. Interaction parameters (all but the
/// first) must be strictly positive through [`ErgmSpec::new`]; the escape
/// hatch [`ErgmSpec::with_signed_interactions`] lifts that but marks the
/// spec non-monotone, which disables the coupling-based samplers.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgmSpec {
    betas: Vec<f64>,
    templates: Vec<Template>,
    monotone: bool,
}

impl ErgmSpec {
    pub fn new(betas: Vec<f64>, templates: Vec<Template>) -> Result<Self> {
        if let Some(j) = betas.iter().skip(1).position(|&b| b <= 0.0) {
            return Err(ErgmError::BadSpec(format!(
                "interaction parameter {} is {} but must be positive \
                 (use with_signed_interactions to override)",
                j + 2,
                betas[j + 1]
            )));
        }
        Self::build(betas, templates)
    }

    /// Accepts interaction parameters of any sign. Monotone-coupling
    /// features (grand coupling, perfect sampling) refuse to run when any
    /// interaction parameter is negative.
    pub fn with_signed_interactions(betas: Vec<f64>, templates: Vec<Template>) -> Result<Self> {
        Self::build(betas, templates)
    }

    fn build(betas: Vec<f64>, templates: Vec<Template>) -> Result<Self> {
        if betas.is_empty() || betas.len() != templates.len() {
            return Err(ErgmError::BadSpec(format!(
                "{} parameters vs {} templates",
                betas.len(),
                templates.len()
            )));
        }
        if betas.iter().any(|b| !b.is_finite()) {
            return Err(ErgmError::BadSpec("non-finite parameter".into()));
        }
        if templates[0] != Template::single_edge() {
            return Err(ErgmError::BadSpec("first template must be the single edge".into()));
        }
        for (j, t) in templates.iter().enumerate() {
            if t.edge_count() == 0 {
                return Err(ErgmError::BadSpec(format!("template {} has no edges", j + 1)));
            }
            if t.has_isolated_vertex() {
                return Err(ErgmError::BadSpec(format!(
                    "template {} has an isolated vertex",
                    j + 1
                )));
            }
        }
        let monotone = betas.iter().skip(1).all(|&b| b >= 0.0);
        Ok(ErgmSpec { betas, templates, monotone })
    }

    pub fn term_count(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    /// True when all interaction parameters are nonnegative, so the
    /// single-edge dynamics admits a monotone grand coupling.
    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    /// Mean-field strength at edge density a: Σ_j β_j e_j a^(e_j - 1).
    pub fn mean_field(&self, a: f64) -> f64 {
        self.betas
            .iter()
            .zip(&self.templates)
            .map(|(b, t)| {
                let e = t.edge_count() as i32;
                b * e as f64 * a.powi(e - 1)
            })
            .sum()
    }

    /// d/da of [`Self::mean_field`].
    pub fn mean_field_deriv(&self, a: f64) -> f64 {
        self.betas
            .iter()
            .zip(&self.templates)
            .map(|(b, t)| {
                let e = t.edge_count() as i32;
                if e < 2 {
                    0.0
                } else {
                    b * (e * (e - 1)) as f64 * a.powi(e - 2)
                }
            })
            .sum()
    }

    /// The density self-consistency map a ↦ sigmoid(2 · mean_field(a)).
    pub fn update_map(&self, a: f64) -> f64 {
        sigmoid(2.0 * self.mean_field(a))
    }

    pub fn update_map_deriv(&self, a: f64) -> f64 {
        let m = self.update_map(a);
        2.0 * m * (1.0 - m) * self.mean_field_deriv(a)
    }

    /// Per-edge coefficient of the leading (linear) term of the log-weight
    /// around independent edges at density p: 2 Σ_j β_j e_j p^(e_j - 1).
    pub fn edge_tilt_slope(&self, p: f64) -> f64 {
        2.0 * self.mean_field(p)
    }

    /// Locates all fixed points of the update map in (0, 1) by sign-change
    /// scan and bisection, then classifies the parameter region.
    pub fn solve_fixed_point(&self, tol: f64) -> Result<RegionReport> {
        if !(tol > 0.0) {
            return Err(ErgmError::BadArgument("solver tolerance must be positive".into()));
        }
        let gap = |a: f64| self.update_map(a) - a;
        let values: Vec<f64> =
            (0..=GRID_POINTS).map(|k| gap(k as f64 / GRID_POINTS as f64)).collect();

        let mut roots: Vec<f64> = Vec::new();
        let mut tangency = false;
        // Roots sitting exactly on grid points would slip through the strict
        // sign-change test below.
        for (k, &v) in values.iter().enumerate() {
            if v == 0.0 {
                roots.push(k as f64 / GRID_POINTS as f64);
            }
        }
        for k in 0..GRID_POINTS {
            let (lo, hi) = (values[k], values[k + 1]);
            if lo > 0.0 && hi < 0.0 || lo < 0.0 && hi > 0.0 {
                let mut a = k as f64 / GRID_POINTS as f64;
                let mut b = (k + 1) as f64 / GRID_POINTS as f64;
                let mut fa = lo;
                // Bisect to machine width; the identity residual check below
                // needs far better than the requested tolerance at skewed
                // densities, and 100 halvings are cheap.
                for _ in 0..100 {
                    let mid = 0.5 * (a + b);
                    if mid <= a || mid >= b {
                        break;
                    }
                    let fm = gap(mid);
                    if fm == 0.0 {
                        a = mid;
                        b = mid;
                        break;
                    }
                    if (fa > 0.0) == (fm > 0.0) {
                        a = mid;
                        fa = fm;
                    } else {
                        b = mid;
                    }
                }
                roots.push(0.5 * (a + b));
            }
        }
        // A grid value inside the tolerance with no sign change on either
        // side smells like a double root; refuse to classify.
        for k in 1..GRID_POINTS {
            if values[k].abs() < tol
                && (values[k - 1] > 0.0) == (values[k] > 0.0)
                && (values[k] > 0.0) == (values[k + 1] > 0.0)
            {
                tangency = true;
            }
        }
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        roots.dedup_by(|b, a| (*b - *a).abs() < ROOT_MERGE_WIDTH);

        // Every accepted root must satisfy the log-odds identity
        // 2 · mean_field(p) = logit(p).
        for &p in &roots {
            let residual = (2.0 * self.mean_field(p) - (p / (1.0 - p)).ln()).abs();
            if residual >= 10.0 * tol {
                return Err(ErgmError::BadArgument(format!(
                    "root {p} fails the log-odds identity (residual {residual:.3e})"
                )));
            }
        }

        let roots: Vec<RootInfo> = roots
            .into_iter()
            .map(|p| RootInfo { location: p, map_derivative: self.update_map_deriv(p) })
            .collect();
        let dobrushin_coefficient = self.mean_field_deriv(1.0);

        let region = if tangency {
            Region::Indeterminate
        } else if roots.len() == 1 {
            let d = roots[0].map_derivative;
            if d < 1.0 - CONTRACTION_MARGIN {
                if dobrushin_coefficient < 2.0 {
                    Region::SubcriticalAndDobrushin
                } else {
                    Region::Subcritical
                }
            } else {
                Region::Indeterminate
            }
        } else {
            Region::NotSubcritical
        };

        let fixed_point = match region {
            Region::Subcritical | Region::SubcriticalAndDobrushin => Some(roots[0].location),
            _ => None,
        };
        let variance_denominator = fixed_point.map(|p| 1.0 - self.update_map_deriv(p));
        Ok(RegionReport {
            region,
            roots,
            fixed_point,
            dobrushin_coefficient,
            variance_denominator,
            tol,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Subcritical,
    SubcriticalAndDobrushin,
    NotSubcritical,
    Indeterminate,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Region::Subcritical => "Subcritical",
            Region::SubcriticalAndDobrushin => "SubcriticalAndDobrushin",
            Region::NotSubcritical => "NotSubcritical",
            Region::Indeterminate => "Indeterminate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RootInfo {
    pub location: f64,
    pub map_derivative: f64,
}

/// Outcome of the fixed-point analysis.
#[derive(Debug, Clone, Serialize)]
pub struct RegionReport {
    pub region: Region,
    pub roots: Vec<RootInfo>,
    /// The unique contractive root, present only in the subcritical regions.
    pub fixed_point: Option<f64>,
    /// Mean-field derivative at density 1; below 2 is the Dobrushin zone.
    pub dobrushin_coefficient: f64,
    variance_denominator: Option<f64>,
    tol: f64,
}

impl RegionReport {
    pub fn is_subcritical(&self) -> bool {
        matches!(self.region, Region::Subcritical | Region::SubcriticalAndDobrushin)
    }

    pub fn fixed_point(&self) -> Result<f64> {
        self.fixed_point.ok_or_else(|| ErgmError::NotSubcritical(self.region.to_string()))
    }

    /// Asymptotic variance of the edge count at size n, using the stored
    /// denominator 1 - (update map derivative at the fixed point).
    pub fn sigma_sq(&self, n: usize) -> Result<f64> {
        let p = self.fixed_point()?;
        let den = self.variance_denominator.expect("set alongside fixed_point");
        let pairs = crate::graph::pair_count(n) as f64;
        Ok(pairs * p * (1.0 - p) / den)
    }
}

/// Asymptotic variance of the edge count via the explicit interaction sum in
/// the denominator; asserts agreement with the update-map route to 1e-10
/// relative before returning.
pub fn asymptotic_edge_variance(spec: &ErgmSpec, report: &RegionReport, n: usize) -> Result<f64> {
    let p = report.fixed_point()?;
    let explicit: f64 = spec
        .betas()
        .iter()
        .zip(spec.templates())
        .skip(1)
        .map(|(b, t)| {
            let e = t.edge_count() as i32;
            b * (e * (e - 1)) as f64 * 2.0 * p.powi(e - 1) * (1.0 - p)
        })
        .sum();
    let den = 1.0 - explicit;
    let via_map = 1.0 - spec.update_map_deriv(p);
    assert!(
        (den - via_map).abs() <= 1e-10 * den.abs().max(1.0),
        "variance denominator routes disagree: {den} vs {via_map}"
    );
    if den <= 0.0 {
        return Err(ErgmError::NotSubcritical(format!(
            "variance denominator {den} is not positive"
        )));
    }
    let pairs = crate::graph::pair_count(n) as f64;
    Ok(pairs * p * (1.0 - p) / den)
}

/// A spec bound to a host size, with counting plans precomputed. This is the
/// object the sampler and the estimators evaluate against.
#[derive(Debug, Clone)]
pub struct SpecContext {
    spec: ErgmSpec,
    n: usize,
    /// β_j n^(2 - v_j), the per-template scale of log-weight contributions.
    scales: Vec<f64>,
    plans: Vec<HomPlan>,
    rooted: Vec<RootedCounter>,
}

impl SpecContext {
    pub fn new(spec: ErgmSpec, n: usize) -> Result<Self> {
        let max_v = spec.templates().iter().map(Template::vertex_count).max().unwrap();
        if n < max_v {
            return Err(ErgmError::HostTooSmall { host: n, needed: max_v });
        }
        let scales = spec
            .betas()
            .iter()
            .zip(spec.templates())
            .map(|(b, t)| b * (n as f64).powi(2 - t.vertex_count() as i32))
            .collect();
        let plans = spec.templates().iter().map(HomPlan::new).collect();
        let rooted = spec.templates().iter().map(RootedCounter::new).collect();
        Ok(SpecContext { spec, n, scales, plans, rooted })
    }

    pub fn spec(&self) -> &ErgmSpec {
        &self.spec
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn pair_count(&self) -> usize {
        crate::graph::pair_count(self.n)
    }

    pub fn hom_counts(&self, g: &EdgeGraph) -> Vec<u64> {
        self.plans.iter().map(|p| p.count(g)).collect()
    }

    /// Log of the unnormalized weight of g.
    pub fn log_weight(&self, g: &EdgeGraph) -> f64 {
        self.scales.iter().zip(&self.plans).map(|(s, p)| s * p.count(g) as f64).sum()
    }

    /// Log-odds of the edge s being present given the rest of g; equals the
    /// log-weight difference between the graph with s on and with s off.
    pub fn cond_log_odds(&self, g: &EdgeGraph, s: EdgeId) -> f64 {
        self.scales.iter().zip(&self.rooted).map(|(c, r)| c * r.count(g, s) as f64).sum()
    }

    /// Log-weight with the leading per-edge linear term at density p removed:
    /// Σ_j [β_j n^(2-v_j) hom_j(g) - 2 β_j e_j p^(e_j-1) m(g)].
    /// The single-edge term cancels itself exactly.
    pub fn centered_tilt_at(&self, p: f64, g: &EdgeGraph) -> f64 {
        self.log_weight(g) - self.spec.edge_tilt_slope(p) * g.edge_count() as f64
    }

    /// Same, taking the density from a subcritical region report.
    pub fn centered_tilt(&self, report: &RegionReport, g: &EdgeGraph) -> Result<f64> {
        Ok(self.centered_tilt_at(report.fixed_point()?, g))
    }

    /// cond_log_odds minus the per-edge linear coefficient: the increment of
    /// the centered tilt when s flips from absent to present.
    pub fn centered_tilt_increment(&self, p: f64, g: &EdgeGraph, s: EdgeId) -> f64 {
        self.cond_log_odds(g, s) - self.spec.edge_tilt_slope(p)
    }
}

/// On-disk model description (JSON). Template vertices are 1-based in the
/// file, matching the text format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecFile {
    /// Default host size for commands that need one; flags override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub betas: Vec<f64>,
    pub templates: Vec<TemplateFile>,
    #[serde(default)]
    pub allow_signed_interactions: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateFile {
    pub v: usize,
    pub edges: Vec<(usize, usize)>,
}

impl SpecFile {
    pub fn to_spec(&self) -> Result<ErgmSpec> {
        let templates: Result<Vec<Template>> = self
            .templates
            .iter()
            .map(|t| {
                let edges: Result<Vec<(usize, usize)>> = t
                    .edges
                    .iter()
                    .map(|&(a, b)| {
                        if a == 0 || b == 0 {
                            Err(ErgmError::Parse("template vertices are 1-based".into()))
                        } else {
                            Ok((a - 1, b - 1))
                        }
                    })
                    .collect();
                Template::new(t.v, &edges?)
            })
            .collect();
        if self.allow_signed_interactions {
            ErgmSpec::with_signed_interactions(self.betas.clone(), templates?)
        } else {
            ErgmSpec::new(self.betas.clone(), templates?)
        }
    }

    pub fn from_spec(spec: &ErgmSpec) -> Self {
        SpecFile {
            n: None,
            betas: spec.betas().to_vec(),
            templates: spec
                .templates()
                .iter()
                .map(|t| TemplateFile {
                    v: t.vertex_count(),
                    edges: t.edges().iter().map(|&(a, b)| (a + 1, b + 1)).collect(),
                })
                .collect(),
            allow_signed_interactions: !spec.is_monotone(),
        }
    }
}

/// Convenience constructor for the instance used throughout the experiments.
pub fn edge_triangle_spec(beta1: f64, beta2: f64) -> Result<ErgmSpec> {
    ErgmSpec::new(vec![beta1, beta2], vec![Template::single_edge(), Template::triangle()])
}

pub fn edge_only_spec(beta1: f64) -> Result<ErgmSpec> {
    ErgmSpec::new(vec![beta1], vec![Template::single_edge()])
}

pub fn edge_two_star_spec(beta1: f64, beta2: f64) -> Result<ErgmSpec> {
    ErgmSpec::new(vec![beta1, beta2], vec![Template::single_edge(), Template::two_star()])
}
