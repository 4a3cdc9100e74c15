//! Shooting along unstable directions of a complete solution.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{SkeletonConfig, SkeletonError};
use crate::dichotomy::{linearize, projection_at, DichotomyConfig, LinearSystem, LinearizedSystem};
use crate::model::{SupportSet, SystemSpec};
use crate::odeint::{integrate_with, LvOptions, Status, TrajectoryGrid};
use crate::trajectories::{linear_fit, CompleteSolution};

/// Distances below this are treated as the linear regime when checking the
/// backward decay of a connection.
const LINEAR_REGIME: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Connection {
    pub source: SupportSet,
    pub target: SupportSet,
    pub seed_time: f64,
    pub seed_amplitude: f64,
    /// `|z - target|` at the end of the forward leg.
    pub forward_error: f64,
    /// `|z - source|` at the start of the trajectory.
    pub backward_error: f64,
    /// Fitted exponential rate of `|z - source|` near the source.
    pub backward_rate: f64,
    pub unstable_dim: usize,
    pub t_end: f64,
    #[serde(skip)]
    pub trajectory: TrajectoryGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaAttempt {
    pub alpha: f64,
    pub outcome: String,
}

/// Unit direction in `range(I - P(t))` for the linearization, returned in
/// full coordinates. The block of species absent from the base has unit
/// norm and equal positive entries.
pub fn seed_direction(lin: &LinearizedSystem, t: f64, cfg: &DichotomyConfig) -> Result<Vec<f64>, SkeletonError> {
    let (_, sub) = projection_at(lin, t, cfg)?;
    let u = sub.unstable_dim();
    let support = lin.base().support;
    if u == 0 {
        return Err(SkeletonError::NoSeed { base: support });
    }
    let coords = lin.coords();
    let absent: Vec<usize> = (0..coords.len()).filter(|&p| !support.contains(coords[p])).collect();
    if absent.len() != u {
        return Err(SkeletonError::Precondition(format!(
            "unstable dimension {u} differs from the {} species absent from {support}",
            absent.len()
        )));
    }
    let block = DMatrix::from_fn(u, u, |r, c| sub.unstable[(absent[r], c)]);
    let rhs = nalgebra::DVector::from_element(u, 1.0 / (u as f64).sqrt());
    let x = block.lu().solve(&rhs).ok_or_else(|| SkeletonError::Precondition("unstable space is tangent to the face".into()))?;
    let v = &sub.unstable * x;
    let mut out = vec![0.0; lin.spec().n()];
    for (p, &i) in coords.iter().enumerate() {
        out[i] = v[p];
    }
    Ok(out)
}

/// `base(t) + alpha v`, rejected unless every species of the ambient support
/// is positive.
pub fn unstable_seed(base: &CompleteSolution, ambient: &SupportSet, direction: &[f64], t: f64, alpha: f64) -> Result<Vec<f64>, SkeletonError> {
    if !(alpha > 0.0) {
        return Err(SkeletonError::Precondition(format!("seed amplitude must be positive, got {alpha}")));
    }
    let u = base.at(t).ok_or_else(|| SkeletonError::Precondition(format!("seed time {t} outside the stored window")))?;
    let seed: Vec<f64> = u.iter().zip(direction).map(|(a, v)| a + alpha * v).collect();
    for i in ambient.present() {
        if !(seed[i] > 0.0) {
            return Err(SkeletonError::SeedNotPositive { alpha, species: i + 1 });
        }
    }
    Ok(seed.iter().enumerate().map(|(i, &x)| if ambient.contains(i) { x } else { 0.0 }).collect())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Check that `|z - source|` grows monotonically from the seed and fit its
/// exponential rate, over the part of the first half of the backward
/// window where the distance stays in the linear regime.
fn backward_decay(z: &TrajectoryGrid, source: &CompleteSolution, t_s: f64, half: f64) -> Result<f64, String> {
    let k = 4000;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..=k {
        let t = t_s + half * i as f64 / k as f64;
        let (Some(a), Some(b)) = (z.at(t), source.at(t)) else { break };
        let d = dist(&a, &b);
        if d > LINEAR_REGIME {
            break;
        }
        if let Some(&prev) = ys.last() {
            if d.ln() <= prev {
                return Err(format!("distance to the source is not monotone at t = {t}"));
            }
        }
        xs.push(t);
        ys.push(d.ln());
    }
    if xs.len() < 10 {
        return Err(format!("only {} samples in the linear regime", xs.len()));
    }
    let (slope, _, _) = linear_fit(&xs, &ys);
    if slope > 0.0 {
        Ok(slope)
    } else {
        Err(format!("fitted rate {slope} is not positive"))
    }
}

/// Shoot from the linear unstable seed of `source` at `t0 - t_bwd` to
/// `t0 + t_fwd` inside the subsystem of the target support.
pub fn trace_connection(
    spec: &SystemSpec,
    source: &CompleteSolution,
    target: &CompleteSolution,
    cfg: &SkeletonConfig,
) -> Result<Connection, SkeletonError> {
    if !source.support.is_strict_subset_of(&target.support) {
        return Err(SkeletonError::Precondition(format!(
            "source {} must be a strict subset of target {}",
            source.support, target.support
        )));
    }
    let ambient = target.support;
    let lin = linearize(spec, source, &ambient)?;
    let t_s = cfg.t0 - cfg.t_bwd;
    let t_f = cfg.t0 + cfg.t_fwd;
    let direction = seed_direction(&lin, t_s, &cfg.dichotomy)?;
    let target_end = target.at(t_f).ok_or_else(|| SkeletonError::Precondition(format!("target window does not reach {t_f}")))?;
    let source_start = source.at(t_s).ok_or_else(|| SkeletonError::Precondition(format!("source window does not reach {t_s}")))?;

    // the schedule runs from large to small amplitudes; the smallest one
    // that passes is kept
    let mut attempts = Vec::new();
    let mut best = None;
    for &alpha in &cfg.alphas {
        let seed = match unstable_seed(source, &ambient, &direction, t_s, alpha) {
            Ok(s) => s,
            Err(e) => {
                attempts.push(AlphaAttempt { alpha, outcome: e.to_string() });
                continue;
            }
        };
        let backward_error = dist(&seed, &source_start);
        if backward_error > cfg.tol_bwd {
            attempts.push(AlphaAttempt { alpha, outcome: format!("backward error {backward_error:e} above {:e}", cfg.tol_bwd) });
            continue;
        }
        let sol = integrate_with(spec, t_s, &seed, t_f, &LvOptions::tol(cfg.rtol, cfg.rtol * 1e-4), |_, _| true)?;
        if let Status::BlowUp { t } = sol.status {
            return Err(SkeletonError::RegimeInconsistency { t, detail: format!("connection {} -> {} diverges", source.support, target.support) });
        }
        let forward_error = dist(sol.grid.last(), &target_end);
        if forward_error > cfg.tol_fwd {
            attempts.push(AlphaAttempt { alpha, outcome: format!("forward error {forward_error:e} above {:e}", cfg.tol_fwd) });
            continue;
        }
        match backward_decay(&sol.grid, source, t_s, 0.5 * cfg.t_bwd) {
            Ok(rate) => {
                attempts.push(AlphaAttempt { alpha, outcome: "accepted".into() });
                best = Some(Connection {
                    source: source.support,
                    target: target.support,
                    seed_time: t_s,
                    seed_amplitude: alpha,
                    forward_error,
                    backward_error,
                    backward_rate: rate,
                    unstable_dim: lin.dim() - lin.present_dim(),
                    t_end: t_f,
                    trajectory: sol.grid,
                });
            }
            Err(msg) => attempts.push(AlphaAttempt { alpha, outcome: msg }),
        }
    }
    if let Some(c) = best {
        return Ok(c);
    }
    Err(SkeletonError::ConnectionNotFound { from: source.support, target: target.support, attempts })
}

/// Integrate backward from `(t0, u0)` until the norm exceeds `escape_norm`
/// or `horizon` is used up. Returns the escape time; `None` is
/// inconclusive.
pub fn detect_backward_unbounded(spec: &SystemSpec, u0: &[f64], t0: f64, escape_norm: f64, horizon: f64) -> Result<Option<f64>, SkeletonError> {
    let opts = LvOptions { escape_norm: Some(escape_norm), ..LvOptions::tol(1e-9, 1e-12) };
    let sol = integrate_with(spec, t0, u0, t0 - horizon, &opts, |_, _| true)?;
    Ok(match sol.status {
        Status::Escaped { t } | Status::BlowUp { t } => Some(t),
        _ => None,
    })
}
