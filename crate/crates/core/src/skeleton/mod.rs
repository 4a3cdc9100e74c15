//! Heteroclinic connections, case classification and the skeleton graph
//! of complete bounded solutions.

mod classify;
mod connection;
pub mod extinction;

pub use classify::{case_letter, classify_initial, Classification, ClassifyConfig, Outcome};
pub use connection::{detect_backward_unbounded, seed_direction, trace_connection, unstable_seed, AlphaAttempt, Connection};

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::conditions::{ConditionError, Regime, RegimeCertificate};
use crate::dichotomy::{DichotomyConfig, DichotomyError};
use crate::model::{SupportSet, SystemSpec};
use crate::odeint::IntegrationError;
use crate::trajectories::{list_complete_solutions, CompleteSolution, PullbackConfig, TrajectoryError};

/// Largest dimension for which graphs are assembled.
pub const MAX_SKELETON_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SkeletonError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no unstable direction at the solution on {base}")]
    NoSeed { base: SupportSet },
    #[error("seed with amplitude {alpha:e} makes species {species} nonpositive")]
    SeedNotPositive { alpha: f64, species: usize },
    #[error("regime inconsistency at t = {t}: {detail}")]
    RegimeInconsistency { t: f64, detail: String },
    #[error("no connection {from} -> {target}: {}", summarize(attempts))]
    ConnectionNotFound { from: SupportSet, target: SupportSet, attempts: Vec<AlphaAttempt> },
    #[error("skeleton incomplete: missing nodes {missing_nodes:?}, missing edges {}", edge_list(missing_edges))]
    Incomplete { missing_nodes: Vec<(SupportSet, String)>, missing_edges: Vec<(SupportSet, SupportSet, String)>, graph: Box<SkeletonGraph> },
    #[error("theory violation: {}", alarms.join("; "))]
    TheoryViolation { alarms: Vec<String>, graph: Box<SkeletonGraph> },
    #[error("skeleton graphs are assembled for n <= {MAX_SKELETON_DIM}, got n = {0}")]
    Unsupported(usize),
    #[error("no regime is certified")]
    Uncertified,
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Dichotomy(#[from] DichotomyError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
}

fn summarize(attempts: &[AlphaAttempt]) -> String {
    attempts.iter().map(|a| format!("alpha {:e}: {}", a.alpha, a.outcome)).collect::<Vec<_>>().join("; ")
}

fn edge_list(edges: &[(SupportSet, SupportSet, String)]) -> String {
    edges.iter().map(|(s, t, why)| format!("{s} -> {t} ({why})")).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonConfig {
    pub window: (f64, f64),
    pub t0: f64,
    pub t_fwd: f64,
    pub t_bwd: f64,
    pub tol_fwd: f64,
    pub tol_bwd: f64,
    /// Seed amplitudes, tried in order.
    pub alphas: Vec<f64>,
    pub rtol: f64,
    pub pullback: PullbackConfig,
    pub dichotomy: DichotomyConfig,
    pub classify: ClassifyConfig,
    pub annotation_samples: usize,
    pub seed: u64,
}

impl Default for SkeletonConfig {
    fn default() -> Self {
        SkeletonConfig {
            window: (-70.0, 80.0),
            t0: 0.0,
            t_fwd: 40.0,
            t_bwd: 30.0,
            tol_fwd: 1e-5,
            tol_bwd: 1e-4,
            alphas: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8],
            rtol: 1e-10,
            pullback: PullbackConfig::default(),
            dichotomy: DichotomyConfig::default(),
            classify: ClassifyConfig::default(),
            annotation_samples: 20,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeRecord {
    pub support: SupportSet,
    pub label: String,
    pub certified_bounds: Vec<(f64, f64)>,
    pub pullback_horizon: f64,
    pub convergence_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Annotation {
    pub u0: Vec<f64>,
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkeletonGraph {
    pub regime: Regime,
    pub regime_label: String,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<Connection>,
    /// Whether sampled positive data escape backward; only set for
    /// extinction regimes.
    pub unbounded_note: Option<bool>,
    pub annotations: Vec<Annotation>,
    #[serde(skip)]
    pub solutions: Vec<CompleteSolution>,
}

impl SkeletonGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn solution(&self, s: &SupportSet) -> Option<&CompleteSolution> {
        self.solutions.iter().find(|x| x.support == *s)
    }

    /// Violations of the expected shape: the zero solution is the only
    /// source, the largest node is the only sink, and the edges are exactly
    /// the strict inclusions between node supports.
    pub fn shape_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let Some(top) = self.nodes.iter().map(|x| x.support).max_by_key(|s| s.len()) else {
            return vec!["no nodes".into()];
        };
        for e in &self.edges {
            if e.target.is_empty() {
                out.push(format!("edge into the zero solution from {}", e.source));
            }
            if e.source == top {
                out.push(format!("edge out of the stable node {top}"));
            }
        }
        let expected = expected_edges(&self.nodes.iter().map(|x| x.support).collect::<Vec<_>>());
        let mut got: Vec<_> = self.edges.iter().map(|e| (e.source, e.target)).collect();
        got.sort();
        if got != expected {
            out.push(format!("edge set {got:?} differs from the inclusions {expected:?}"));
        }
        out
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph skeleton {\n  rankdir=BT;\n");
        let _ = writeln!(s, "  label=\"{}\";", self.regime_label);
        for node in &self.nodes {
            let _ = writeln!(s, "  \"{}\";", node.label);
        }
        for e in &self.edges {
            let _ = writeln!(s, "  \"{}\" -> \"{}\" [label=\"{:e}\"];", e.source.label(), e.target.label(), e.seed_amplitude);
        }
        s.push_str("}\n");
        s
    }
}

/// All strict inclusions between the given supports, sorted.
pub fn expected_edges(supports: &[SupportSet]) -> Vec<(SupportSet, SupportSet)> {
    let mut out: Vec<_> = supports
        .iter()
        .flat_map(|s| supports.iter().filter(move |t| s.is_strict_subset_of(t)).map(move |t| (*s, *t)))
        .collect();
    out.sort();
    out
}

fn sort_key(s: &SupportSet) -> (usize, u32) {
    (s.len(), s.mask())
}

/// Nodes, connections and regime annotations for a certified regime.
pub fn build_skeleton(spec: &SystemSpec, cert: &RegimeCertificate, cfg: &SkeletonConfig) -> Result<SkeletonGraph, SkeletonError> {
    let n = spec.n();
    if n > MAX_SKELETON_DIM {
        return Err(SkeletonError::Unsupported(n));
    }
    let persistent = cert.regime.persistent(n).ok_or(SkeletonError::Uncertified)?;
    let (mut solutions, failures) = list_complete_solutions(spec, cert, cfg.window, &cfg.pullback)?;
    solutions.sort_by_key(|s| sort_key(&s.support));

    let mut missing_nodes = failures;
    for s in persistent.subsets() {
        if !solutions.iter().any(|x| x.support == s) && !missing_nodes.iter().any(|(m, _)| *m == s) {
            missing_nodes.push((s, "no witness for this support".into()));
        }
    }

    let pairs = expected_edges(&solutions.iter().map(|s| s.support).collect::<Vec<_>>());
    let results: Vec<_> = pairs
        .par_iter()
        .map(|(s, t)| {
            let src = solutions.iter().find(|x| x.support == *s).expect("node");
            let dst = solutions.iter().find(|x| x.support == *t).expect("node");
            trace_connection(spec, src, dst, cfg)
        })
        .collect();
    let mut edges = Vec::new();
    let mut missing_edges = Vec::new();
    for ((s, t), r) in pairs.iter().zip(results) {
        match r {
            Ok(c) => edges.push(c),
            Err(e @ SkeletonError::RegimeInconsistency { .. }) => return Err(e),
            Err(e) => missing_edges.push((*s, *t, e.to_string())),
        }
    }
    // edges whose endpoints could not be computed
    for (m, why) in &missing_nodes {
        for s in persistent.subsets() {
            if s.is_strict_subset_of(m) {
                missing_edges.push((s, *m, format!("node {m} missing: {why}")));
            } else if m.is_strict_subset_of(&s) {
                missing_edges.push((*m, s, format!("node {m} missing: {why}")));
            }
        }
    }
    missing_edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    missing_edges.dedup_by(|a, b| (a.0, a.1) == (b.0, b.1));

    let mut graph = SkeletonGraph {
        regime: cert.regime,
        regime_label: cert.regime.label(),
        nodes: solutions
            .iter()
            .map(|s| NodeRecord {
                support: s.support,
                label: s.support.label(),
                certified_bounds: s.certified_bounds.clone(),
                pullback_horizon: s.pullback_horizon,
                convergence_residual: s.convergence_residual,
            })
            .collect(),
        edges,
        unbounded_note: None,
        annotations: Vec::new(),
        solutions,
    };

    let mut alarms = Vec::new();
    if !persistent.is_full() {
        let scale = cert.witness.d.clone().unwrap_or_else(|| vec![1.0; n]);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let starts: Vec<Vec<f64>> = (0..cfg.annotation_samples)
            .map(|_| scale.iter().map(|d| 2.0 * d * (1.0 - rng.random::<f64>())).collect())
            .collect();
        let classified: Vec<_> = starts
            .par_iter()
            .map(|u0| classify_initial(spec, cert.regime, u0, cfg.t0, &graph.solutions, &cfg.classify))
            .collect();
        let mut all_escape = true;
        for (u0, c) in starts.into_iter().zip(classified) {
            let c = c?;
            if c.backward_escape.is_none() {
                all_escape = false;
                if c.forward_limit.is_some() {
                    alarms.push(format!("positive start {u0:?} stays bounded backward ({})", c.description));
                }
            }
            graph.annotations.push(Annotation { u0, classification: c });
        }
        graph.unbounded_note = Some(all_escape);
    }

    if !missing_nodes.is_empty() || !missing_edges.is_empty() {
        return Err(SkeletonError::Incomplete { missing_nodes, missing_edges, graph: Box::new(graph) });
    }
    if !alarms.is_empty() {
        return Err(SkeletonError::TheoryViolation { alarms, graph: Box::new(graph) });
    }
    Ok(graph)
}
