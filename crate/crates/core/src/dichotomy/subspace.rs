//! Stable and unstable subspaces from QR sweeps of frames.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DichotomyConfig, DichotomyError, LinearSystem};

/// Splitting of the state space at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspaces {
    pub t: f64,
    /// Orthonormal basis of the stable space.
    pub stable: DMatrix<f64>,
    /// Orthonormal basis of the unstable space.
    pub unstable: DMatrix<f64>,
    /// Growth exponents of the forward sweep that ends at `t`.
    pub forward_exponents: Vec<f64>,
    /// Growth exponents of the backward sweep that ends at `t`.
    pub backward_exponents: Vec<f64>,
    pub horizon: f64,
}

impl Subspaces {
    pub fn stable_dim(&self) -> usize {
        self.stable.ncols()
    }

    pub fn unstable_dim(&self) -> usize {
        self.unstable.ncols()
    }
}

/// A fixed orthonormal frame in general position. Coordinate frames are
/// not: for triangular systems a coordinate axis can be invariant and then
/// never turns towards the dominant direction.
fn generic_frame(n: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1f2e_3d4c);
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

/// Carry an orthonormal frame from `from` to `to` with QR every `chunk`.
/// Returns the final frame and the average log growth of each column.
fn sweep(sys: &dyn LinearSystem, from: f64, to: f64, chunk: f64, rtol: f64) -> Result<(DMatrix<f64>, Vec<f64>), DichotomyError> {
    let n = sys.dim();
    let total = (to - from).abs();
    let steps = (total / chunk).ceil().max(1.0) as usize;
    let mut q = generic_frame(n);
    let mut sums = vec![0.0; n];
    for k in 0..steps {
        let ta = from + (to - from) * k as f64 / steps as f64;
        let tb = from + (to - from) * (k + 1) as f64 / steps as f64;
        let x = sys.propagate(ta, tb, &q, rtol)?;
        let qr = x.qr();
        let (mut qm, mut r) = (qr.q(), qr.r());
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                qm.column_mut(j).neg_mut();
                r.row_mut(j).neg_mut();
            }
            sums[j] += r[(j, j)].abs().ln();
        }
        q = qm;
    }
    Ok((q, sums.into_iter().map(|s| s / total).collect()))
}

/// Stable and unstable subspaces at `t0`. The forward sweep over
/// `[t0 - H, t0]` aligns a frame with the unstable space, the backward sweep
/// over `[t0, t0 + H]` (run from the right) with the stable one. `H` is
/// doubled while the exponents are ambiguous or the subspaces are not yet
/// resolved to `cfg.resolution`.
pub fn subspaces(sys: &dyn LinearSystem, t0: f64, cfg: &DichotomyConfig) -> Result<Subspaces, DichotomyError> {
    let n = sys.dim();
    let (lo, hi) = sys.domain();
    let available = (t0 - lo).min(hi - t0);
    if !(available > 0.0) {
        return Err(DichotomyError::OutsideWindow { t: t0, lo, hi });
    }
    let thr = cfg.gap_threshold;
    let mut h = cfg.horizon.min(available);
    loop {
        let (qf, ef) = sweep(sys, t0 - h, t0, cfg.chunk, cfg.rtol)?;
        let (qb, eb) = sweep(sys, t0 + h, t0, cfg.chunk, cfg.rtol)?;
        let u = ef.iter().filter(|&&x| x > thr).count();
        let s = eb.iter().filter(|&&x| x > thr).count();
        let ambiguous = ef.iter().chain(&eb).any(|x| x.abs() < thr);
        // convergence rate of each frame: distance between the exponents
        // kept and the ones discarded
        let spread = |e: &[f64], keep: usize| {
            if keep == 0 || keep == n {
                f64::INFINITY
            } else {
                let kept = e.iter().copied().filter(|&x| x > thr).fold(f64::INFINITY, f64::min);
                let rest = e.iter().copied().filter(|&x| x <= thr).fold(f64::NEG_INFINITY, f64::max);
                kept - rest
            }
        };
        let rate = spread(&ef, u).min(spread(&eb, s));
        let consistent = !ambiguous && u + s == n;
        let resolved = (-rate * h).exp() <= cfg.resolution;
        let can_grow = h < available && 2.0 * h <= cfg.max_horizon;
        if consistent && (resolved || !can_grow) {
            return Ok(Subspaces {
                t: t0,
                stable: qb.columns(0, s).into_owned(),
                unstable: qf.columns(0, u).into_owned(),
                forward_exponents: ef,
                backward_exponents: eb,
                horizon: h,
            });
        }
        if !can_grow {
            if ambiguous {
                let mut exponents = ef.clone();
                exponents.extend(eb.iter().map(|x| -x));
                return Err(DichotomyError::SpectralGap { t: t0, exponents, threshold: thr });
            }
            return Err(DichotomyError::DimensionMismatch { t: t0, stable: s, unstable: u, n });
        }
        h = (2.0 * h).min(available);
    }
}

/// The projection with range `stable` and kernel `unstable`.
pub fn projection_from(sub: &Subspaces) -> Result<DMatrix<f64>, DichotomyError> {
    let n = sub.stable.nrows();
    let s = sub.stable_dim();
    let mut w = DMatrix::zeros(n, n);
    w.columns_mut(0, s).copy_from(&sub.stable);
    w.columns_mut(s, n - s).copy_from(&sub.unstable);
    let svd = w.clone().svd(false, false);
    let smin = svd.singular_values.min();
    if !(smin > 1e-10) {
        return Err(DichotomyError::IllConditioned { residual: smin });
    }
    let inv = w.try_inverse().ok_or(DichotomyError::IllConditioned { residual: 0.0 })?;
    Ok(&sub.stable * inv.rows(0, s))
}

pub fn projection_at(sys: &dyn LinearSystem, t0: f64, cfg: &DichotomyConfig) -> Result<(DMatrix<f64>, Subspaces), DichotomyError> {
    let sub = subspaces(sys, t0, cfg)?;
    Ok((projection_from(&sub)?, sub))
}

/// Largest principal angle between the column spans of two matrices of
/// equal rank.
pub fn principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let resid = &qb - &qa * (qa.transpose() * &qb);
    super::norm2(&resid).min(1.0).asin()
}

#[cfg(test)]
mod tests {
    use super::super::MatrixFn;
    use super::*;

    fn cfg() -> DichotomyConfig {
        DichotomyConfig::default()
    }

    #[test]
    fn scalar_decay() {
        let sys = MatrixFn::constant(DMatrix::from_element(1, 1, -1.0));
        let sub = subspaces(&sys, 0.0, &cfg()).unwrap();
        assert_eq!((sub.stable_dim(), sub.unstable_dim()), (1, 0));
        let p = projection_from(&sub).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn triangular_example() {
        // x' = -x + y, y' = y
        let sys = MatrixFn::constant(DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, 1.0]));
        let sub = subspaces(&sys, 0.0, &cfg()).unwrap();
        let p = projection_from(&sub).unwrap();
        assert_eq!((sub.stable_dim(), sub.unstable_dim()), (1, 1));
        assert!(principal_angle(&sub.stable, &DMatrix::from_column_slice(2, 1, &[1.0, 0.0])) < 1e-10);
        assert!(principal_angle(&sub.unstable, &DMatrix::from_column_slice(2, 1, &[0.5, 1.0])) < 1e-10);
        let want = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 0.0, 0.0]);
        assert!((p - want).abs().max() < 1e-10);
    }

    #[test]
    fn diagonal_counts() {
        let sys = MatrixFn::constant(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 1.0, 2.0])));
        let sub = subspaces(&sys, 3.0, &cfg()).unwrap();
        assert_eq!((sub.stable_dim(), sub.unstable_dim()), (1, 2));
    }

    #[test]
    fn periodic_coefficients() {
        // x' = (-1 + 2 sin t) x: exponent -1 on average
        let sys = MatrixFn::new(1, |t| DMatrix::from_element(1, 1, -1.0 + 2.0 * t.sin()));
        let sub = subspaces(&sys, 0.0, &cfg()).unwrap();
        assert_eq!(sub.stable_dim(), 1);
    }

    #[test]
    fn zero_exponent_is_ambiguous() {
        let sys = MatrixFn::constant(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]));
        let err = subspaces(&sys, 0.0, &DichotomyConfig { max_horizon: 40.0, ..cfg() }).unwrap_err();
        assert!(matches!(err, DichotomyError::SpectralGap { .. }), "{err}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn triangular_projection(l1 in 0.3f64..3.0, l2 in 0.3f64..3.0, c in -2.0f64..2.0) {
                // x' = -l1 x + c y, y' = l2 y: unstable eigenvector (c / (l1 + l2), 1)
                let a = DMatrix::from_row_slice(2, 2, &[-l1, c, 0.0, l2]);
                let sub = subspaces(&MatrixFn::constant(a.clone()), 0.0, &cfg()).unwrap();
                let p = projection_from(&sub).unwrap();
                let want = DMatrix::from_row_slice(2, 2, &[1.0, -c / (l1 + l2), 0.0, 0.0]);
                prop_assert!((&p - want).abs().max() < 1e-8, "{}", p);
                prop_assert!((&p * &p - &p).abs().max() < 1e-8);
                prop_assert!((&p * &a - &a * &p).abs().max() < 1e-7);
            }
        }
    }
}
