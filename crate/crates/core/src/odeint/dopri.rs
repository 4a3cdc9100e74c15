//! Dormand–Prince 5(4) with PI step control and Hairer's dense output.

use super::IntegrationError;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Largest step magnitude.
    pub h_max: f64,
    /// Take steps of exactly this size (last one shortened), no error control.
    pub fixed_step: Option<f64>,
}

impl Default for Options {
    fn default() -> Self {
        Options { rtol: 1e-9, atol: 1e-12, max_steps: 5_000_000, h_max: f64::INFINITY, fixed_step: None }
    }
}

impl Options {
    pub fn tol(rtol: f64, atol: f64) -> Self {
        Options { rtol, atol, ..Default::default() }
    }
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep {
    pub t: f64,
    pub h: f64,
    /// Five blocks of `m` coefficients.
    pub coef: Vec<f64>,
}

impl DenseStep {
    pub fn t_end(&self) -> f64 {
        self.t + self.h
    }

    pub fn dim(&self) -> usize {
        self.coef.len() / 5
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let m = self.dim();
        let th = (t - self.t) / self.h;
        let th1 = 1.0 - th;
        let r = |k: usize, i: usize| self.coef[k * m + i];
        for (i, o) in out.iter_mut().enumerate().take(m) {
            *o = r(0, i) + th * (r(1, i) + th1 * (r(2, i) + th * (r(3, i) + th1 * r(4, i))));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreResult {
    pub t: f64,
    pub y: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
    pub stopped: bool,
}

fn err_norm(e: &[f64], w: &[f64]) -> f64 {
    if e.is_empty() {
        return 0.0;
    }
    (e.iter().zip(w).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / e.len() as f64).sqrt()
}

/// Integrate `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// `scale(i, y_old, y_new)` returns the error weight of component `i`.
/// `on_step` sees every accepted step and the new state, and may stop the
/// integration.
pub fn solve<F, S, O>(mut f: F, scale: S, t0: f64, y0: &[f64], t1: f64, opts: &Options, mut on_step: O) -> Result<CoreResult, IntegrationError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), IntegrationError>,
    S: Fn(usize, f64, f64) -> f64,
    O: FnMut(&DenseStep, &[f64]) -> Flow,
{
    let m = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut res = CoreResult { t, y: y.clone(), accepted: 0, rejected: 0, stopped: false };
    if t1 == t0 {
        return Ok(res);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut k1 = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    let mut k5 = vec![0.0; m];
    let mut k6 = vec![0.0; m];
    let mut k7 = vec![0.0; m];
    let mut ys = vec![0.0; m];
    let mut y1 = vec![0.0; m];
    let mut e = vec![0.0; m];
    let mut w = vec![0.0; m];
    f(t, &y, &mut k1)?;

    let h_max = opts.h_max.min(span);
    let mut h = match opts.fixed_step {
        Some(hf) => hf.abs().min(span),
        None => initial_step(&mut f, &scale, t, &y, &k1, dir, h_max, opts)?,
    };
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let h_floor = 1e-14 * t0.abs().max(t1.abs()).max(1.0);

    loop {
        if res.accepted + res.rejected >= opts.max_steps {
            return Err(IntegrationError::MaxSteps { t });
        }
        let remaining = (t1 - t).abs();
        let mut last = false;
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
            last = true;
        }
        if h < h_floor && !last {
            return Err(IntegrationError::StepUnderflow { t, h });
        }
        let hs = dir * h;

        for i in 0..m {
            ys[i] = y[i] + hs * A21 * k1[i];
        }
        f(t + C2 * hs, &ys, &mut k2)?;
        for i in 0..m {
            ys[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * hs, &ys, &mut k3)?;
        for i in 0..m {
            ys[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * hs, &ys, &mut k4)?;
        for i in 0..m {
            ys[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * hs, &ys, &mut k5)?;
        for i in 0..m {
            ys[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t1 } else { t + hs };
        f(t + hs, &ys, &mut k6)?;
        for i in 0..m {
            y1[i] = y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t_new, &y1, &mut k7)?;

        let err = if opts.fixed_step.is_some() {
            0.0
        } else {
            for i in 0..m {
                e[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                w[i] = scale(i, y[i], y1[i]);
            }
            err_norm(&e, &w)
        };
        if !err.is_finite() {
            res.rejected += 1;
            h *= FAC_MIN;
            last_rejected = true;
            continue;
        }

        let fac11 = err.powf(0.2 - BETA * 0.75);
        if err <= 1.0 {
            // accepted
            let mut coef = vec![0.0; 5 * m];
            for i in 0..m {
                let ydiff = y1[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                coef[i] = y[i];
                coef[m + i] = ydiff;
                coef[2 * m + i] = bspl;
                coef[3 * m + i] = ydiff - hs * k7[i] - bspl;
                coef[4 * m + i] = hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let step = DenseStep { t, h: t_new - t, coef };
            res.accepted += 1;
            t = t_new;
            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut k1, &mut k7);
            let flow = on_step(&step, &y);
            if flow == Flow::Stop {
                res.stopped = true;
                break;
            }
            if last {
                break;
            }
            if let Some(hf) = opts.fixed_step {
                h = hf.abs();
                continue;
            }
            let mut fac = fac11 / facold.powf(BETA);
            fac = (1.0 / FAC_MAX).max((1.0 / FAC_MIN).min(fac / SAFE));
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            facold = err.max(1e-4);
            last_rejected = false;
            h = h_new.min(h_max);
        } else {
            res.rejected += 1;
            h /= (1.0 / FAC_MIN).min(fac11 / SAFE);
            last_rejected = true;
        }
    }
    res.t = t;
    res.y = y;
    Ok(res)
}

/// Starting step size after Hairer & Wanner.
fn initial_step<F, S>(f: &mut F, scale: &S, t: f64, y: &[f64], f0: &[f64], dir: f64, h_max: f64, _opts: &Options) -> Result<f64, IntegrationError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), IntegrationError>,
    S: Fn(usize, f64, f64) -> f64,
{
    let m = y.len();
    if m == 0 {
        return Ok(h_max);
    }
    let w: Vec<f64> = (0..m).map(|i| scale(i, y[i], y[i])).collect();
    let d0 = err_norm(y, &w);
    let d1 = err_norm(f0, &w);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(h_max);
    let y1: Vec<f64> = (0..m).map(|i| y[i] + dir * h0 * f0[i]).collect();
    let mut f1 = vec![0.0; m];
    f(t + dir * h0, &y1, &mut f1)?;
    let df: Vec<f64> = (0..m).map(|i| f1[i] - f0[i]).collect();
    let d2 = err_norm(&df, &w) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / dm).powf(0.2) };
    Ok((100.0 * h0).min(h1).min(h_max))
}
