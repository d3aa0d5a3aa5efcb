//! Simulation and verification toolkit for exponential random graph models
//! (ERGMs) at desk scale.
//!
//! The crate is organized around a few load-bearing pieces:
//!
//! - [`graph`]: bit-packed simple graphs, small edge templates, and injective
//!   homomorphism counting (plain, edge-rooted, pair-rooted) with the
//!   combinatorial identities that everything downstream leans on.
//! - [`model`]: ERGM parameter sets, log-weights, conditional log-odds, the
//!   fixed-point solver with region classification, and the closed-form
//!   asymptotic variance of the edge count.
//! - [`sampler`]: single-edge heat-bath dynamics, the monotone grand
//!   coupling, perfect sampling via coupling from the past, and an
//!   Erdős–Rényi baseline.
//! - [`oracle`]: brute-force enumeration of the measure for n ≤ 6; the ground
//!   truth for every stochastic test in the workspace.
//! - [`stein`]: exchangeable-pair style error estimators (b, δ₂, δ₃ and the
//!   δ₁ diagnostics) for exponentially tilted product measures.
//! - [`curie_weiss`]: the exactly solvable mean-field spin instance.
//! - [`decomp`]: Hoeffding-decomposition building blocks and residual
//!   variance scaling scans.
//! - [`clt`]: the headline normal-approximation experiments and rate scans.
//!
//! All randomness flows through the counter-based streams in [`rng`]; no
//! module touches global RNG state, so every run is replayable from a seed.

pub mod clt;
pub mod curie_weiss;
pub mod decomp;
pub mod graph;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod stein;

use thiserror::Error;

/// Unified error type for precondition violations and runtime failures.
#[derive(Debug, Error)]
pub enum ErgmError {
    #[error("invalid template: {0}")]
    BadTemplate(String),
    #[error("template has {v} vertices but limit is 8, or {e} edges but limit is 12")]
    TemplateTooLarge { v: usize, e: usize },
    #[error("host graph has {host} vertices, template needs {needed}")]
    HostTooSmall { host: usize, needed: usize },
    #[error("edge endpoints must differ")]
    DegenerateEdge,
    #[error("edge ({i}, {j}) does not fit in a graph on {n} vertices")]
    EdgeOutOfRange { i: usize, j: usize, n: usize },
    #[error("invalid model spec: {0}")]
    BadSpec(String),
    #[error("operation requires a subcritical spec; classification is {0}")]
    NotSubcritical(String),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
    #[error("coupling from the past did not coalesce within {max_sweeps} sweeps (bounds still differ on {gap} edges)")]
    CftpTimeout { max_sweeps: u64, gap: usize },
    #[error("exact enumeration capped at n = 6, got n = {0}")]
    EnumerationTooLarge(usize),
    #[error("contradictory or malformed condition: {0}")]
    BadCondition(String),
    #[error("missing joint moment for index subset {0:?}")]
    MissingMoment(Vec<usize>),
    #[error("invalid argument: {0}")]
    BadArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, ErgmError>;
