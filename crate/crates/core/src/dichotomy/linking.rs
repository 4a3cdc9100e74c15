//! Linking operators of a block upper-triangular system whose diagonal
//! blocks have the dichotomy projections `P^A = I` and `P^B = 0`.

use nalgebra::DMatrix;

use super::{DichotomyConfig, DichotomyError, LinearSystem, LinearizedSystem};
use crate::odeint::dopri::{self, Flow, Options};
use crate::odeint::IntegrationError;
use crate::trajectories::linear_fit;

#[derive(Debug, Clone, PartialEq)]
pub struct LinkingOperators {
    pub t0: f64,
    /// Vanishes because `I - P^A = 0`.
    pub l_plus: DMatrix<f64>,
    pub l_minus: DMatrix<f64>,
    pub tail_plus: f64,
    /// Estimate of the truncated part of the `L^-` integral.
    pub tail_minus: f64,
    pub horizon: f64,
}

impl LinkingOperators {
    /// The projection `[[I, L^-], [0, 0]]` in triangular coordinates.
    pub fn projection(&self) -> DMatrix<f64> {
        let (k, m) = self.l_minus.shape();
        let mut p = DMatrix::zeros(k + m, k + m);
        p.view_mut((0, 0), (k, k)).fill_with_identity();
        p.view_mut((0, k), (k, m)).copy_from(&self.l_minus);
        p
    }
}

/// A linearized system viewed with the base support first.
pub(crate) struct Permuted<'a>(pub &'a LinearizedSystem);

impl LinearSystem for Permuted<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn matrix(&self, t: f64) -> Result<DMatrix<f64>, DichotomyError> {
        self.0.permuted(t)
    }

    fn domain(&self) -> (f64, f64) {
        self.0.domain()
    }
}

/// `L^- = -∫_{-∞}^0 M_A(s)^{-1} C(s) M_B(s) ds` about `t0`, for a system
/// whose first `k` coordinates form the `A` block. The improper integral
/// is truncated at `-H`, with `H` doubled until the fitted exponential tail
/// is below `1e-9`.
pub fn linking_operators(sys: &dyn LinearSystem, k: usize, t0: f64, cfg: &DichotomyConfig) -> Result<LinkingOperators, DichotomyError> {
    let n = sys.dim();
    if k > n {
        return Err(DichotomyError::Argument(format!("block size {k} exceeds dimension {n}")));
    }
    let m = n - k;
    let zero = |h| LinkingOperators {
        t0,
        l_plus: DMatrix::zeros(k, m),
        l_minus: DMatrix::zeros(k, m),
        tail_plus: 0.0,
        tail_minus: 0.0,
        horizon: h,
    };
    if k == 0 || m == 0 {
        return Ok(zero(0.0));
    }
    let (lo, _) = sys.domain();
    let available = t0 - lo;
    let mut h = cfg.horizon.min(available);
    loop {
        let (y, tail) = truncated(sys, k, t0, h, cfg.rtol)?;
        let can_grow = h < available && 2.0 * h <= cfg.max_horizon;
        if tail < 1e-9 || !can_grow {
            let mut out = zero(h);
            out.l_minus = -y;
            out.tail_minus = tail;
            return Ok(out);
        }
        h = (2.0 * h).min(available);
    }
}

fn truncated(sys: &dyn LinearSystem, k: usize, t0: f64, h: f64, rtol: f64) -> Result<(DMatrix<f64>, f64), DichotomyError> {
    let n = sys.dim();
    let m = n - k;
    // state: Z = M_A(s)^{-1} (k x k), W = M_B(s) (m x m), Y = ∫_s^0 Z C W (k x m)
    let (nz, nw) = (k * k, m * m);
    let unpack = |y: &[f64]| {
        (
            DMatrix::from_column_slice(k, k, &y[..nz]),
            DMatrix::from_column_slice(m, m, &y[nz..nz + nw]),
        )
    };
    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| -> Result<(), IntegrationError> {
        let d = sys.matrix(t0 + s).map_err(|e| IntegrationError::Argument(e.to_string()))?;
        let a = d.view((0, 0), (k, k));
        let b = d.view((k, k), (m, m));
        let c = d.view((0, k), (k, m));
        let (z, w) = unpack(y);
        let dz = -(&z * a);
        let dw = b * &w;
        let dyy = -(&z * c * &w);
        dy[..nz].copy_from_slice(dz.as_slice());
        dy[nz..nz + nw].copy_from_slice(dw.as_slice());
        dy[nz + nw..].copy_from_slice(dyy.as_slice());
        Ok(())
    };
    let mut y0 = vec![0.0; nz + nw + k * m];
    y0[..nz].copy_from_slice(DMatrix::<f64>::identity(k, k).as_slice());
    y0[nz..nz + nw].copy_from_slice(DMatrix::<f64>::identity(m, m).as_slice());

    let mut trace: Vec<(f64, f64)> = Vec::new();
    let atol = rtol * 1e-3;
    let scale = move |_i: usize, a: f64, b: f64| atol + rtol * a.abs().max(b.abs());
    let res = dopri::solve(rhs, scale, 0.0, &y0, -h, &Options::tol(rtol, atol), |step, y| {
        let (z, w) = unpack(y);
        if let Ok(d) = sys.matrix(t0 + step.t_end()) {
            let c = d.view((0, k), (k, m)).into_owned();
            trace.push((step.t_end(), super::norm2(&(z * c * w))));
        }
        Flow::Continue
    })?;
    let y = DMatrix::from_column_slice(k, m, &res.y[nz + nw..]);

    // exponential fit of the integrand over the far half
    let far: Vec<&(f64, f64)> = trace.iter().filter(|(s, x)| *s <= -h / 2.0 && *x > 0.0).collect();
    let tail = if far.len() >= 3 {
        let xs: Vec<f64> = far.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = far.iter().map(|p| p.1.ln()).collect();
        let (slope, _, _) = linear_fit(&xs, &ys);
        if slope <= 0.0 {
            return Err(DichotomyError::Divergence { exponent: -slope });
        }
        trace.last().map_or(0.0, |p| p.1) / slope
    } else {
        // integrand vanishes identically
        0.0
    };
    Ok((y, tail))
}
