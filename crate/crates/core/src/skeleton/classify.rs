//! Case labels for single initial conditions.

use serde::Serialize;

use super::connection::detect_backward_unbounded;
use super::SkeletonError;
use crate::conditions::Regime;
use crate::model::{SupportSet, SystemSpec};
use crate::odeint::integrate;
use crate::trajectories::CompleteSolution;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyConfig {
    /// Distance to a node that counts as the forward limit.
    pub tol: f64,
    /// Distance at `t0` that counts as lying on a node.
    pub on_tol: f64,
    /// Distance to a node at the end of the backward leg.
    pub backward_tol: f64,
    pub forward_horizon: f64,
    pub backward_horizon: f64,
    pub backward_check: f64,
    pub escape_norm: f64,
    pub rtol: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            tol: 1e-5,
            on_tol: 1e-8,
            backward_tol: 1e-6,
            forward_horizon: 60.0,
            backward_horizon: 500.0,
            backward_check: 60.0,
            escape_norm: 1e3,
            rtol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    Zero,
    OnSolution { support: SupportSet },
    Connecting { from: SupportSet, to: SupportSet },
    BackwardUnbounded { escape_time: f64, support: SupportSet, to: SupportSet },
    Unclassified { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub support: SupportSet,
    pub regime: Regime,
    pub outcome: Outcome,
    /// Item letter in the case list of the regime, when the regime has one.
    pub case: Option<char>,
    pub description: String,
    pub forward_limit: Option<SupportSet>,
    pub forward_distance: f64,
    pub backward_escape: Option<f64>,
    /// Backward limit distance, when the backward leg stays bounded.
    pub backward_distance: Option<f64>,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Closest node with support inside `within` at time `t`.
fn nearest<'a>(nodes: &'a [CompleteSolution], u: &[f64], t: f64, keep: impl Fn(&SupportSet) -> bool) -> Option<(&'a CompleteSolution, f64)> {
    nodes
        .iter()
        .filter(|s| keep(&s.support))
        .filter_map(|s| s.at(t).map(|x| (s, dist(u, &x))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Classify the solution through `(t0, u0)` against the complete solutions
/// of a certified regime.
pub fn classify_initial(
    spec: &SystemSpec,
    regime: Regime,
    u0: &[f64],
    t0: f64,
    solutions: &[CompleteSolution],
    cfg: &ClassifyConfig,
) -> Result<Classification, SkeletonError> {
    let n = spec.n();
    if u0.len() != n {
        return Err(SkeletonError::Precondition(format!("initial state has length {}, expected {n}", u0.len())));
    }
    if u0.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(SkeletonError::Precondition("initial state must be finite and nonnegative".into()));
    }
    let support = SupportSet::of_state(u0);
    let mut out = Classification {
        support,
        regime,
        outcome: Outcome::Zero,
        case: None,
        description: String::new(),
        forward_limit: None,
        forward_distance: 0.0,
        backward_escape: None,
        backward_distance: None,
    };
    if support.is_empty() {
        out.forward_limit = Some(support);
        out.case = case_letter(n, regime, &out.outcome);
        out.description = "the zero solution".into();
        return Ok(out);
    }
    let (lo, hi) = solutions
        .iter()
        .find(|s| !s.support.is_empty())
        .map_or((f64::NEG_INFINITY, f64::INFINITY), |s| s.window);

    // forward limit
    let t_f = t0 + cfg.forward_horizon.min(hi - t0);
    if !(t_f > t0) {
        return Err(SkeletonError::Precondition(format!("t0 = {t0} is not inside the stored window")));
    }
    let fwd = integrate(spec, t0, u0, t_f, cfg.rtol, cfg.rtol * 1e-4)?;
    let end = fwd.last().to_vec();
    let Some((limit, fdist)) = nearest(solutions, &end, t_f, |s| s.is_subset_of(&support)) else {
        out.outcome = Outcome::Unclassified { reason: "no node with a support inside the initial support".into() };
        return Ok(out);
    };
    out.forward_distance = fdist;
    if fdist > cfg.tol {
        out.outcome = Outcome::Unclassified {
            reason: format!("forward state at t = {t_f} is {fdist:e} from the nearest node {} (tolerance {:e})", limit.support, cfg.tol),
        };
        out.description = "ambiguous forward limit".into();
        return Ok(out);
    }
    out.forward_limit = Some(limit.support);

    // on a node
    if let Some((node, d)) = nearest(solutions, u0, t0, |s| *s == support) {
        if d <= cfg.on_tol {
            out.outcome = Outcome::OnSolution { support: node.support };
            out.backward_distance = Some(d);
            out.case = case_letter(n, regime, &out.outcome);
            out.description = format!("the complete solution on {}", node.support);
            return Ok(out);
        }
    }

    // backward behavior
    if let Some(t) = detect_backward_unbounded(spec, u0, t0, cfg.escape_norm, cfg.backward_horizon)? {
        out.backward_escape = Some(t);
        out.outcome = Outcome::BackwardUnbounded { escape_time: t, support, to: limit.support };
        out.case = case_letter(n, regime, &out.outcome);
        out.description = format!("backward unbounded on {support}, forward limit {}", limit.support);
        return Ok(out);
    }
    let t_b = t0 - cfg.backward_check.min(t0 - lo);
    let bwd = integrate(spec, t0, u0, t_b, cfg.rtol, cfg.rtol * 1e-4)?;
    let start = bwd.first().to_vec();
    match nearest(solutions, &start, t_b, |s| s.is_strict_subset_of(&support)) {
        Some((from, d)) if d <= cfg.backward_tol => {
            out.backward_distance = Some(d);
            out.outcome = Outcome::Connecting { from: from.support, to: limit.support };
            out.case = case_letter(n, regime, &out.outcome);
            out.description = format!("connection from {} to {}", from.support, limit.support);
        }
        other => {
            let d = other.map_or(f64::INFINITY, |p| p.1);
            out.backward_distance = Some(d);
            out.outcome = Outcome::Unclassified {
                reason: format!("bounded backward leg is {d:e} from every smaller node at t = {t_b} and did not escape"),
            };
            out.description = "ambiguous backward limit".into();
        }
    }
    Ok(out)
}

/// Relabel so that the persistent species come first; within each group
/// the original order is kept.
fn canonical(s: &SupportSet, persistent: &SupportSet) -> SupportSet {
    let n = s.n();
    let order: Vec<usize> = persistent.present().into_iter().chain(persistent.absent()).collect();
    SupportSet::from_present(n, (0..n).filter(|&k| s.contains(order[k])))
}

fn set(n: usize, xs: &[usize]) -> SupportSet {
    SupportSet::from_present(n, xs.iter().copied())
}

/// Item letter of the case list that governs the regime. Regimes without a
/// case list (total extinction) and cases outside it give `None`.
pub fn case_letter(n: usize, regime: Regime, outcome: &Outcome) -> Option<char> {
    let persistent = match regime {
        Regime::Permanence => SupportSet::full(n),
        Regime::Extinction { persistent } => persistent,
        Regime::TotalExtinction | Regime::Uncertified => return None,
    };
    let c = |s: &SupportSet| canonical(s, &persistent);
    let k = persistent.len();
    match (n, k, outcome) {
        (_, _, Outcome::Zero) => Some('a'),
        (_, _, Outcome::Unclassified { .. }) => None,

        (1, 1, Outcome::OnSolution { .. }) => Some('b'),
        (1, 1, Outcome::Connecting { .. }) => Some('c'),
        (1, 1, Outcome::BackwardUnbounded { .. }) => Some('d'),

        (2, 2, Outcome::OnSolution { support }) => Some(if support.len() == 1 { 'b' } else { 'd' }),
        (2, 2, Outcome::Connecting { from, to }) => Some(match (to.len(), from.len()) {
            (1, _) => 'c',
            (_, 0) => 'e',
            _ => 'f',
        }),

        (2, 1, Outcome::OnSolution { .. }) => Some('b'),
        (2, 1, Outcome::Connecting { .. }) => Some('c'),
        (2, 1, Outcome::BackwardUnbounded { support, .. }) => {
            let s = c(support);
            if s.is_full() {
                Some('d')
            } else if s == set(2, &[1]) {
                Some('e')
            } else {
                Some('f')
            }
        }

        (3, 3, Outcome::OnSolution { support }) => Some(match support.len() {
            1 => 'b',
            2 => 'd',
            _ => 'i',
        }),
        (3, 3, Outcome::Connecting { from, to }) => Some(match (to.len(), from.len()) {
            (1, _) => 'c',
            (2, 0) => 'e',
            (2, _) if *to == set(3, &[0, 1]) => 'f',
            (2, _) if *to == set(3, &[0, 2]) => 'g',
            (2, _) => 'h',
            (_, 0) => 'j',
            (_, 2) => 'k',
            _ => 'l',
        }),

        (3, 2, Outcome::OnSolution { support }) => Some(if support.len() == 1 { 'b' } else { 'd' }),
        (3, 2, Outcome::Connecting { from, to }) => Some(match (to.len(), from.len()) {
            (1, _) => 'c',
            (_, 0) => 'e',
            _ => 'f',
        }),
        (3, 2, Outcome::BackwardUnbounded { support, .. }) => {
            let s = c(support);
            if s.is_full() {
                Some('g')
            } else if s == set(3, &[2]) {
                Some('h')
            } else if s == set(3, &[0]) || s == set(3, &[1]) {
                Some('i')
            } else if s == set(3, &[0, 2]) || s == set(3, &[1, 2]) {
                Some('j')
            } else {
                None
            }
        }

        (3, 1, Outcome::OnSolution { .. }) => Some('b'),
        (3, 1, Outcome::Connecting { .. }) => Some('c'),
        (3, 1, Outcome::BackwardUnbounded { support, .. }) => {
            let s = c(support);
            Some(if s.is_full() {
                'd'
            } else if s == set(3, &[1]) || s == set(3, &[2]) {
                'e'
            } else if s == set(3, &[0]) {
                'f'
            } else if s == set(3, &[1, 2]) {
                'g'
            } else {
                'h'
            })
        }
        _ => None,
    }
}
