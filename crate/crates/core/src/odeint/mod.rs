//! Integration of the Lotka–Volterra system and of linear matrix equations.
//!
//! Species that start at exactly zero are removed from the state and stay
//! bit-exactly zero. Positive species are integrated in `v = ln u`, which
//! keeps them positive whatever the step error.

pub mod dopri;

use std::io::{self, Write};

use nalgebra::DMatrix;
use thiserror::Error;

pub use dopri::{DenseStep, Flow, Options};

use crate::expr::EvalError;
use crate::model::{SupportSet, SystemSpec};

/// Components above this value stop the integration.
pub const BLOW_UP: f64 = 1e12;
/// Cap on the absolute tolerance seen by a log coordinate, so species near
/// extinction are still tracked to this relative accuracy.
const LOG_ATOL_CAP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("solution left every bounded set (component above {BLOW_UP:e}) at t = {t}")]
    Divergence { t: f64 },
    #[error("step size underflow (h = {h:e}) at t = {t}: problem too stiff")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step limit reached at t = {t}")]
    MaxSteps { t: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// How an integration ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status {
    Completed,
    /// Norm exceeded the requested escape level at `t`.
    Escaped { t: f64 },
    /// A component exceeded [`BLOW_UP`] at `t`.
    BlowUp { t: f64 },
    /// The observer asked to stop at `t`.
    Stopped { t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LvOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Stop once the Euclidean norm of the state exceeds this value.
    pub escape_norm: Option<f64>,
    pub max_steps: usize,
    pub h_max: f64,
    pub fixed_step: Option<f64>,
}

impl Default for LvOptions {
    fn default() -> Self {
        LvOptions { rtol: 1e-9, atol: 1e-12, escape_norm: None, max_steps: 5_000_000, h_max: f64::INFINITY, fixed_step: None }
    }
}

impl LvOptions {
    pub fn tol(rtol: f64, atol: f64) -> Self {
        LvOptions { rtol, atol, ..Default::default() }
    }

    fn core(&self) -> Options {
        Options { rtol: self.rtol, atol: self.atol, max_steps: self.max_steps, h_max: self.h_max, fixed_step: self.fixed_step }
    }
}

/// A computed solution with continuous extension. Times are increasing
/// regardless of the integration direction.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryGrid {
    support: SupportSet,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    /// Dense steps in log coordinates of the present species, ordered by
    /// time.
    steps: Vec<DenseStep>,
}

impl TrajectoryGrid {
    /// A trajectory that is a single point (used for the zero solution and
    /// zero-length integrations).
    pub fn constant(t0: f64, t1: f64, u: Vec<f64>) -> Self {
        let support = SupportSet::of_state(&u);
        assert!(support.is_empty(), "only the zero state is constant in general");
        let (lo, hi) = (t0.min(t1), t0.max(t1));
        let times = if hi > lo { vec![lo, hi] } else { vec![lo] };
        let states = times.iter().map(|_| u.clone()).collect();
        TrajectoryGrid { support, times, states, steps: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.support.n()
    }

    pub fn support(&self) -> SupportSet {
        self.support
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn covers(&self, t: f64) -> bool {
        t >= self.t_start() && t <= self.t_end()
    }

    /// State at `t` from the continuous extension, or `None` outside the
    /// integrated interval.
    pub fn at(&self, t: f64) -> Option<Vec<f64>> {
        if !self.covers(t) {
            return None;
        }
        let n = self.n();
        let present = self.support.present();
        if present.is_empty() {
            return Some(vec![0.0; n]);
        }
        // steps are ordered by their lower end
        let k = self.steps.partition_point(|s| s.t.min(s.t_end()) <= t).saturating_sub(1);
        let step = &self.steps[k];
        let mut v = vec![0.0; present.len()];
        step.eval(t, &mut v);
        let mut u = vec![0.0; n];
        for (j, &i) in present.iter().enumerate() {
            u[i] = v[j].exp();
        }
        Some(u)
    }

    pub fn first(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// Uniformly spaced sample times covering the trajectory.
    pub fn uniform_times(&self, dt: f64) -> Vec<f64> {
        let (lo, hi) = (self.t_start(), self.t_end());
        let k = ((hi - lo) / dt).floor() as usize;
        let mut ts: Vec<f64> = (0..=k).map(|i| lo + i as f64 * dt).collect();
        if hi - ts[k] > 1e-9 * dt {
            ts.push(hi);
        }
        ts
    }

    /// CSV with header `t,u1,...,un`, 17 significant digits. Without
    /// `times`, the step points are written.
    pub fn write_csv<W: Write>(&self, mut w: W, times: Option<&[f64]>) -> io::Result<()> {
        let n = self.n();
        let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=n).map(|i| format!("u{i}"))).collect();
        writeln!(w, "{}", header.join(","))?;
        let mut row = |t: f64, u: &[f64]| -> io::Result<()> {
            write!(w, "{t:.16e}")?;
            for x in u {
                write!(w, ",{x:.16e}")?;
            }
            writeln!(w)
        };
        match times {
            Some(ts) => {
                for &t in ts {
                    if let Some(u) = self.at(t) {
                        row(t, &u)?;
                    }
                }
            }
            None => {
                for (t, u) in self.times.iter().zip(&self.states) {
                    row(*t, u)?;
                }
            }
        }
        Ok(())
    }
}

/// Result of [`integrate_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub grid: TrajectoryGrid,
    pub status: Status,
}

fn norm(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Bisection for the first time in `step` where `phi` becomes positive,
/// assuming `phi` is non-positive at the start of the step.
fn refine_crossing(step: &DenseStep, m: usize, phi: impl Fn(&[f64]) -> f64) -> f64 {
    let mut v = vec![0.0; m];
    let (mut a, mut b) = (step.t, step.t_end());
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        step.eval(mid, &mut v);
        if phi(&v) > 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    b
}

/// Integrate (LV-n) from `(t0, u0)` to `t1` with full control. The observer
/// sees `(t, u)` after every accepted step and returns `false` to stop.
pub fn integrate_with(
    spec: &SystemSpec,
    t0: f64,
    u0: &[f64],
    t1: f64,
    opts: &LvOptions,
    mut observer: impl FnMut(f64, &[f64]) -> bool,
) -> Result<Solution, IntegrationError> {
    let n = spec.n();
    if u0.len() != n {
        return Err(IntegrationError::Argument(format!("initial state has length {}, expected {n}", u0.len())));
    }
    if let Some(x) = u0.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(IntegrationError::Argument(format!("initial state must be finite and nonnegative, got {x}")));
    }
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(IntegrationError::Argument("non-finite time".into()));
    }
    let support = SupportSet::of_state(u0);
    let present = support.present();
    let m = present.len();
    if m == 0 {
        return Ok(Solution { grid: TrajectoryGrid::constant(t0, t1, vec![0.0; n]), status: Status::Completed });
    }

    let sub = spec.subcommunity(&support);
    let v0: Vec<f64> = present.iter().map(|&i| u0[i].ln()).collect();
    let embed = |v: &[f64]| {
        let mut u = vec![0.0; n];
        for (j, &i) in present.iter().enumerate() {
            u[i] = v[j].exp();
        }
        u
    };

    let mut a = vec![0.0; m];
    let mut b = vec![0.0; m * m];
    let mut us = vec![0.0; m];
    let rhs = |t: f64, v: &[f64], dv: &mut [f64]| -> Result<(), IntegrationError> {
        sub.coefficients_into(t, &mut a, &mut b)?;
        for j in 0..m {
            us[j] = v[j].exp();
        }
        for i in 0..m {
            let mut g = a[i];
            for j in 0..m {
                g -= b[i * m + j] * us[j];
            }
            dv[i] = g;
        }
        Ok(())
    };
    let (rtol, atol) = (opts.rtol, opts.atol);
    let scale = move |_i: usize, v0: f64, v1: f64| {
        let u = v0.max(v1).exp();
        rtol + (atol / u).min(LOG_ATOL_CAP)
    };

    let log_blow = BLOW_UP.ln();
    let mut times = vec![t0];
    let mut states = vec![u0.to_vec()];
    let mut steps: Vec<DenseStep> = Vec::new();
    let mut status = Status::Completed;
    let escape = opts.escape_norm;
    let core = dopri::solve(rhs, scale, t0, &v0, t1, &opts.core(), |step, v| {
        if v.iter().any(|&x| x > log_blow) {
            let tc = refine_crossing(step, m, |w| w.iter().copied().fold(f64::NEG_INFINITY, f64::max) - log_blow);
            let mut w = vec![0.0; m];
            step.eval(tc, &mut w);
            times.push(tc);
            states.push(embed(&w));
            steps.push(step.clone());
            status = Status::BlowUp { t: tc };
            return Flow::Stop;
        }
        let u = embed(v);
        if let Some(level) = escape {
            if norm(&u) > level {
                let tc = refine_crossing(step, m, |w| norm(&embed(w)) - level);
                let mut w = vec![0.0; m];
                step.eval(tc, &mut w);
                times.push(tc);
                states.push(embed(&w));
                steps.push(step.clone());
                status = Status::Escaped { t: tc };
                return Flow::Stop;
            }
        }
        let t = step.t_end();
        times.push(t);
        states.push(u);
        steps.push(step.clone());
        if !observer(t, states.last().unwrap()) {
            status = Status::Stopped { t };
            return Flow::Stop;
        }
        Flow::Continue
    })?;
    debug_assert!(core.stopped || status == Status::Completed);

    if t1 < t0 {
        times.reverse();
        states.reverse();
        steps.reverse();
    }
    Ok(Solution { grid: TrajectoryGrid { support, times, states, steps }, status })
}

/// Integrate (LV-n) from `(t0, u0)` to `t1`. Hitting the blow-up guard is
/// an error.
pub fn integrate(spec: &SystemSpec, t0: f64, u0: &[f64], t1: f64, rtol: f64, atol: f64) -> Result<TrajectoryGrid, IntegrationError> {
    let sol = integrate_with(spec, t0, u0, t1, &LvOptions::tol(rtol, atol), |_, _| true)?;
    match sol.status {
        Status::BlowUp { t } => Err(IntegrationError::Divergence { t }),
        _ => Ok(sol.grid),
    }
}

/// Solve `X' = D(t) X` from `X(t0) = x0` to `t1`.
pub fn propagate_linear<F>(mut d: F, t0: f64, t1: f64, x0: &DMatrix<f64>, rtol: f64, atol: f64) -> Result<DMatrix<f64>, IntegrationError>
where
    F: FnMut(f64) -> Result<DMatrix<f64>, IntegrationError>,
{
    let (r, c) = x0.shape();
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), IntegrationError> {
        let dm = d(t)?;
        let x = DMatrix::from_column_slice(r, c, y);
        dy.copy_from_slice((dm * x).as_slice());
        Ok(())
    };
    let scale = move |_i: usize, a: f64, b: f64| atol + rtol * a.abs().max(b.abs());
    let res = dopri::solve(rhs, scale, t0, x0.as_slice(), t1, &Options::tol(rtol, atol), |_, _| Flow::Continue)?;
    Ok(DMatrix::from_column_slice(r, c, &res.y))
}

/// Fundamental matrix `M(t1, t0)` of `x' = D(t) x`.
pub fn integrate_matrix<F>(d: F, t0: f64, t1: f64, rtol: f64) -> Result<DMatrix<f64>, IntegrationError>
where
    F: FnMut(f64) -> Result<DMatrix<f64>, IntegrationError>,
{
    let mut d = d;
    let n = d(t0)?.nrows();
    propagate_linear(d, t0, t1, &DMatrix::identity(n, n), rtol, rtol * 1e-3)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logistic() -> SystemSpec {
        SystemSpec::parse(&["1"], &[&["1"]]).unwrap()
    }

    #[test]
    fn logistic_fixed_point_and_closed_form() {
        let g = integrate(&logistic(), 0.0, &[1.0], 10.0, 1e-9, 1e-12).unwrap();
        assert!((g.last()[0] - 1.0).abs() < 1e-9);

        let g = integrate(&logistic(), 0.0, &[0.5], 5.0, 1e-9, 1e-12).unwrap();
        let exact = 1.0 / (1.0 + (-5.0f64).exp());
        assert!((g.last()[0] - exact).abs() < 1e-8);
        assert!((g.last()[0] - 0.9933071).abs() < 1e-7);
        // dense output between steps
        for &t in &[0.37, 1.91, 4.444] {
            let u = g.at(t).unwrap()[0];
            assert!((u - 1.0 / (1.0 + (-t).exp())).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_is_pinned() {
        let g = integrate(&logistic(), 0.0, &[0.0], 10.0, 1e-9, 1e-12).unwrap();
        assert!(g.states().iter().all(|u| u[0] == 0.0));
        let s = SystemSpec::parse(&["1", "1"], &[&["1", "-0.5"], &["-0.5", "1"]]).unwrap();
        let g = integrate(&s, 0.0, &[0.0, 0.3], 20.0, 1e-9, 1e-12).unwrap();
        assert!(g.states().iter().all(|u| u[0].to_bits() == 0 && u[1] > 0.0));
        assert!((g.last()[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn backward_blow_up_is_reported() {
        // u(t) = 1 / (1 - 0.5 e^{-t}) blows up at t = -ln 2
        let sol = integrate_with(&logistic(), 0.0, &[2.0], -5.0, &LvOptions::default(), |_, _| true).unwrap();
        let Status::BlowUp { t } = sol.status else { panic!("{:?}", sol.status) };
        assert!((t - (-(2.0f64.ln()))).abs() < 1e-6, "{t}");
        assert!(matches!(integrate(&logistic(), 0.0, &[2.0], -5.0, 1e-9, 1e-12), Err(IntegrationError::Divergence { .. })));
        // times are increasing after a backward run
        assert!(sol.grid.times().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn escape_time_is_refined() {
        let spec = SystemSpec::parse(&["0-1"], &[&["1"]]).unwrap();
        let opts = LvOptions { escape_norm: Some(1e3), ..Default::default() };
        let sol = integrate_with(&spec, 0.0, &[0.5], -500.0, &opts, |_, _| true).unwrap();
        let Status::Escaped { t } = sol.status else { panic!() };
        // u(t) = 1 / ((1 + 1/u0) e^{t} - 1): 1/u = 3 e^{t} - 1 = 1e-3
        let exact = ((1.0 + 1e-3) / 3.0f64).ln();
        assert!((t - exact).abs() < 1e-7, "{t} vs {exact}");
        assert!(t > -8.0);
    }

    #[test]
    fn matrix_examples() {
        let m = integrate_matrix(|_| Ok(DMatrix::from_element(1, 1, -1.0)), 0.0, 1.0, 1e-10).unwrap();
        assert!((m[(0, 0)] - (-1.0f64).exp()).abs() < 1e-9);

        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 1.0]));
        let m = integrate_matrix(|_| Ok(d.clone()), 0.0, 3.0, 1e-10).unwrap();
        assert!((m[(0, 0)] - (-3.0f64).exp()).abs() < 1e-9);
        assert!((m[(1, 1)] / 3.0f64.exp() - 1.0).abs() < 1e-9);
        assert!(m[(0, 1)].abs() < 1e-14);

        let rot = |_t: f64| Ok(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let m10 = integrate_matrix(rot, 0.0, 1.0, 1e-10).unwrap();
        let m21 = integrate_matrix(rot, 1.0, 2.0, 1e-10).unwrap();
        let m20 = integrate_matrix(rot, 0.0, 2.0, 1e-10).unwrap();
        assert!((&m21 * &m10 - &m20).norm() < 1e-8);
        let exact = DMatrix::from_row_slice(2, 2, &[2.0f64.cos(), 2.0f64.sin(), -(2.0f64.sin()), 2.0f64.cos()]);
        assert!((m20 - exact).norm() < 1e-8);
        // backward is the inverse
        let m01 = integrate_matrix(rot, 1.0, 0.0, 1e-10).unwrap();
        assert!((m01 * m10 - DMatrix::identity(2, 2)).norm() < 1e-8);
    }

    #[test]
    fn csv_format() {
        let g = integrate(&logistic(), 0.0, &[0.5], 1.0, 1e-9, 1e-12).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf, Some(&[0.0, 1.0])).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,u1");
        assert_eq!(lines[1], "0.0000000000000000e0,5.0000000000000000e-1");
        let v: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn spec2() -> SystemSpec {
            SystemSpec::parse(&["2+sin(t)", "1+0.5*cos(t)"], &[&["1.5", "-0.3"], &["-0.4", "1.2+0.2*sin(2*t)"]]).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn cocycle(u1 in 0.01f64..5.0, u2 in 0.0f64..5.0, t0 in -10.0f64..10.0, d1 in 0.1f64..8.0, d2 in 0.1f64..8.0) {
                let s = spec2();
                let rtol = 1e-9;
                let u0 = [u1, if u2 < 0.5 { 0.0 } else { u2 }];
                let direct = integrate(&s, t0, &u0, t0 + d1 + d2, rtol, 1e-12).unwrap();
                let mid = integrate(&s, t0, &u0, t0 + d1, rtol, 1e-12).unwrap();
                let two = integrate(&s, t0 + d1, mid.last(), t0 + d1 + d2, rtol, 1e-12).unwrap();
                for i in 0..2 {
                    let (a, b) = (direct.last()[i], two.last()[i]);
                    prop_assert!((a - b).abs() <= 10.0 * rtol * a.abs().max(1.0), "{} vs {}", a, b);
                }
                prop_assert_eq!(direct.last()[1] == 0.0, u0[1] == 0.0);
            }

            #[test]
            fn positivity(u in prop::collection::vec(1e-8f64..10.0, 2), t0 in -5.0f64..5.0) {
                let g = integrate(&spec2(), t0, &u, t0 + 30.0, 1e-8, 1e-12).unwrap();
                prop_assert!(g.states().iter().all(|x| x.iter().all(|&v| v > 0.0)));
            }
        }
    }
}
