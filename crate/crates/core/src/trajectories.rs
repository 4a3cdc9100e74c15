//! Complete bounded trajectories by pullback integration, and empirical
//! contraction rates between pairs of solutions.

use serde::Serialize;
use thiserror::Error;

use crate::conditions::{ConditionError, RegimeCertificate, Checker};
use crate::model::{SupportSet, SystemSpec};
use crate::odeint::{integrate, IntegrationError, TrajectoryGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("pullback did not converge up to horizon {horizon}; residuals {history:?}")]
    NoConvergence { horizon: f64, history: Vec<f64> },
    #[error("species {species} leaves its certified range [{lo}, {hi}] at t = {t} (value {value})")]
    BoundViolation { species: usize, t: f64, value: f64, lo: f64, hi: f64 },
    #[error("witness for support {0} needs d and dbar")]
    MissingWitness(SupportSet),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackConfig {
    pub t0: f64,
    pub max_horizon: f64,
    /// Sup-norm convergence tolerance.
    pub tol: f64,
    /// Spacing of the comparison grid on the window.
    pub dt: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for PullbackConfig {
    fn default() -> Self {
        PullbackConfig { t0: 20.0, max_horizon: 1280.0, tol: 1e-8, dt: 0.01, rtol: 1e-11, atol: 1e-14 }
    }
}

/// A complete trajectory of one support, stored on a window.
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteSolution {
    pub support: SupportSet,
    pub window: (f64, f64),
    /// Integration from `window.0 - pullback_horizon` to `window.1`; only
    /// the window part is the converged solution.
    pub grid: TrajectoryGrid,
    /// `[dbar_i, d_i]` for present species, `[0, 0]` for absent ones.
    pub certified_bounds: Vec<(f64, f64)>,
    pub pullback_horizon: f64,
    pub convergence_residual: f64,
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSidecar {
    pub support: SupportSet,
    pub label: String,
    pub window: (f64, f64),
    pub certified_bounds: Vec<(f64, f64)>,
    pub pullback_horizon: f64,
    pub convergence_residual: f64,
    pub residual_history: Vec<f64>,
}

impl CompleteSolution {
    pub fn zero(n: usize, window: (f64, f64)) -> Self {
        CompleteSolution {
            support: SupportSet::empty(n),
            window,
            grid: TrajectoryGrid::constant(window.0, window.1, vec![0.0; n]),
            certified_bounds: vec![(0.0, 0.0); n],
            pullback_horizon: 0.0,
            convergence_residual: 0.0,
            residual_history: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.support.n()
    }

    /// State at `t`, inside the window only. The zero solution is defined
    /// everywhere.
    pub fn at(&self, t: f64) -> Option<Vec<f64>> {
        if self.support.is_empty() {
            return Some(vec![0.0; self.n()]);
        }
        if t < self.window.0 - 1e-12 || t > self.window.1 + 1e-12 {
            return None;
        }
        self.grid.at(t.clamp(self.window.0, self.window.1))
    }

    pub fn sample_times(&self, dt: f64) -> Vec<f64> {
        let (lo, hi) = self.window;
        let k = ((hi - lo) / dt).round() as usize;
        (0..=k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect()
    }

    pub fn sidecar(&self) -> SolutionSidecar {
        SolutionSidecar {
            support: self.support,
            label: self.support.label(),
            window: self.window,
            certified_bounds: self.certified_bounds.clone(),
            pullback_horizon: self.pullback_horizon,
            convergence_residual: self.convergence_residual,
            residual_history: self.residual_history.clone(),
        }
    }
}

fn sup_distance(a: &TrajectoryGrid, b: &TrajectoryGrid, times: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &t in times {
        let (Some(x), Some(y)) = (a.at(t), b.at(t)) else { return f64::INFINITY };
        for (p, q) in x.iter().zip(&y) {
            worst = worst.max((p - q).abs());
        }
    }
    worst
}

/// Pull back from the witness data `d` and `dbar` (vectors of length n,
/// entries outside the support ignored) until both runs and successive
/// horizons agree on the window.
pub fn compute_star(
    spec: &SystemSpec,
    support: &SupportSet,
    d: &[f64],
    dbar: &[f64],
    window: (f64, f64),
    cfg: &PullbackConfig,
) -> Result<CompleteSolution, TrajectoryError> {
    let n = spec.n();
    if support.n() != n || d.len() != n || dbar.len() != n {
        return Err(TrajectoryError::Argument("dimension mismatch".into()));
    }
    if !(window.0 < window.1) {
        return Err(TrajectoryError::Argument(format!("empty window [{}, {}]", window.0, window.1)));
    }
    if support.is_empty() {
        return Ok(CompleteSolution::zero(n, window));
    }
    let upper: Vec<f64> = (0..n).map(|i| if support.contains(i) { d[i] } else { 0.0 }).collect();
    let lower: Vec<f64> = (0..n).map(|i| if support.contains(i) { dbar[i] } else { 0.0 }).collect();
    let times = {
        let k = ((window.1 - window.0) / cfg.dt).round().max(1.0) as usize;
        (0..=k).map(|i| window.0 + (window.1 - window.0) * i as f64 / k as f64).collect::<Vec<_>>()
    };

    let mut history = Vec::new();
    let mut prev: Option<TrajectoryGrid> = None;
    let mut horizon = cfg.t0;
    while horizon <= cfg.max_horizon {
        let start = window.0 - horizon;
        let hi = integrate(spec, start, &upper, window.1, cfg.rtol, cfg.atol)?;
        let lo = integrate(spec, start, &lower, window.1, cfg.rtol, cfg.atol)?;
        let spread = sup_distance(&hi, &lo, &times);
        let change = prev.as_ref().map_or(f64::INFINITY, |p| sup_distance(&hi, p, &times));
        history.push(spread.max(change));
        if spread <= cfg.tol && change <= cfg.tol {
            let sol = CompleteSolution {
                support: *support,
                window,
                grid: hi,
                certified_bounds: (0..n).map(|i| if support.contains(i) { (dbar[i], d[i]) } else { (0.0, 0.0) }).collect(),
                pullback_horizon: horizon,
                convergence_residual: change,
                residual_history: history,
            };
            check_bounds(&sol, &times, cfg.tol)?;
            return Ok(sol);
        }
        prev = Some(hi);
        horizon *= 2.0;
    }
    Err(TrajectoryError::NoConvergence { horizon: horizon / 2.0, history })
}

fn check_bounds(sol: &CompleteSolution, times: &[f64], tol: f64) -> Result<(), TrajectoryError> {
    for &t in times {
        let u = sol.grid.at(t).expect("window inside grid");
        for i in sol.support.present() {
            let (lo, hi) = sol.certified_bounds[i];
            if u[i] < lo - tol || u[i] > hi + tol {
                return Err(TrajectoryError::BoundViolation { species: i + 1, t, value: u[i], lo, hi });
            }
        }
    }
    Ok(())
}

/// Complete solution for every support the certificate covers, plus the
/// zero solution. Failures are recorded next to the successes.
pub fn list_complete_solutions(
    spec: &SystemSpec,
    cert: &RegimeCertificate,
    window: (f64, f64),
    cfg: &PullbackConfig,
) -> Result<(Vec<CompleteSolution>, Vec<(SupportSet, String)>), TrajectoryError> {
    use rayon::prelude::*;

    let n = spec.n();
    let checker = Checker::new(spec)?;
    let mut work = Vec::new();
    let mut failures = Vec::new();
    for s in SupportSet::full(n).subsets() {
        match cert.node_witness(&checker, &s)? {
            Some(w) => work.push((s, w)),
            None if s.is_empty() => work.push((s, Default::default())),
            None => {}
        }
    }
    let results: Vec<_> = work
        .par_iter()
        .map(|(s, w)| {
            if s.is_empty() {
                return Ok(CompleteSolution::zero(n, window));
            }
            let d = w.d.as_ref().ok_or(TrajectoryError::MissingWitness(*s))?;
            let dbar = w.dbar.as_ref().ok_or(TrajectoryError::MissingWitness(*s))?;
            compute_star(spec, s, d, dbar, window, cfg)
        })
        .collect();
    let mut out = Vec::new();
    for ((s, _), r) in work.iter().zip(results) {
        match r {
            Ok(sol) => out.push(sol),
            Err(e) => failures.push((*s, e.to_string())),
        }
    }
    Ok((out, failures))
}

/// Empirical contraction between two solutions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionEstimate {
    /// Largest observed growth exponent `ln(|u - v|(t) / |u - v|(t0)) / (t - t0)`.
    pub kappa: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Minus the least-squares slope of `ln |u - v|`.
    pub fitted_decay: f64,
    /// RMS residual of that regression.
    pub regression_residual: f64,
    /// `delta * sigma1 / max(cbar)` when the (H2) constants are known.
    pub predicted_decay: Option<f64>,
    pub fit_interval: (f64, f64),
    /// Too few usable points for a fit (e.g. identical data).
    pub degenerate: bool,
}

/// Least-squares line through `(x, y)`; returns slope and RMS residual.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum::<f64>() / k).sqrt();
    (slope, icpt, rms)
}

pub fn estimate_contraction(
    spec: &SystemSpec,
    u0a: &[f64],
    u0b: &[f64],
    t0: f64,
    horizon: f64,
    h2: Option<(&[f64], f64)>,
    rtol: f64,
) -> Result<ContractionEstimate, TrajectoryError> {
    if u0a.iter().chain(u0b).any(|&x| !(x > 0.0)) {
        return Err(TrajectoryError::Argument("initial data must be strictly positive".into()));
    }
    if !(horizon > 0.0) {
        return Err(TrajectoryError::Argument("horizon must be positive".into()));
    }
    let atol = rtol * 1e-3;
    let ga = integrate(spec, t0, u0a, t0 + horizon, rtol, atol)?;
    let gb = integrate(spec, t0, u0b, t0 + horizon, rtol, atol)?;
    let k = 400;
    let ts: Vec<f64> = (0..=k).map(|i| t0 + horizon * i as f64 / k as f64).collect();
    let mut dist = Vec::with_capacity(ts.len());
    let mut scale: f64 = 0.0;
    let mut pairs = Vec::with_capacity(ts.len());
    for &t in &ts {
        let a = ga.at(t).unwrap();
        let b = gb.at(t).unwrap();
        scale = scale.max(a.iter().chain(&b).fold(0.0f64, |m, x| m.max(x.abs())));
        dist.push(a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt());
        pairs.push((a, b));
    }
    let floor = (1e-14f64).max(100.0 * rtol * scale);
    // usable prefix: before the distance first drops under the noise floor
    let usable = dist.iter().position(|&d| d <= floor).unwrap_or(dist.len());
    let kappa = (1..usable)
        .map(|i| (dist[i] / dist[0]).ln() / (ts[i] - t0))
        .fold(f64::NEG_INFINITY, f64::max);
    let half = ts.len() / 2;
    let (lo, hi) = if usable > half + 2 { (half, usable) } else { (usable / 2, usable) };
    let degenerate = hi < lo + 3;
    let (fitted_decay, regression_residual, fit_interval, sigma1, sigma2) = if degenerate {
        (f64::NAN, f64::NAN, (t0, t0), f64::NAN, f64::NAN)
    } else {
        let x = &ts[lo..hi];
        let y: Vec<f64> = dist[lo..hi].iter().map(|d| d.ln()).collect();
        let (slope, _, rms) = linear_fit(x, &y);
        let comps = pairs[lo..hi].iter().flat_map(|(a, b)| a.iter().chain(b.iter()).copied().collect::<Vec<_>>());
        let (s1, s2) = comps.fold((f64::INFINITY, 0.0f64), |(m, mm), v| (m.min(v), mm.max(v)));
        (-slope, rms, (x[0], *x.last().unwrap()), s1, s2)
    };
    let predicted_decay = match h2 {
        Some((cbar, delta)) if !degenerate => {
            let top = cbar.iter().copied().fold(0.0, f64::max);
            Some(delta * sigma1 / top)
        }
        _ => None,
    };
    Ok(ContractionEstimate {
        kappa: if kappa.is_finite() { kappa } else { f64::NAN },
        sigma1,
        sigma2,
        fitted_decay,
        regression_residual,
        predicted_decay,
        fit_interval,
        degenerate,
    })
}
