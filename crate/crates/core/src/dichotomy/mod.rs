//! Linearization around complete solutions and numerical certificates of
//! exponential dichotomy.

mod certificate;
mod linking;
mod subspace;

pub use certificate::{build_certificate, certify, DichotomyCertificate, LinkingCheck, ProjectionSample};
pub use linking::{linking_operators, LinkingOperators};
pub use subspace::{principal_angle, projection_at, projection_from, subspaces, Subspaces};

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expr::EvalError;
use crate::model::{SupportSet, SystemSpec};
use crate::odeint::{propagate_linear, IntegrationError};
use crate::trajectories::CompleteSolution;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DichotomyError {
    #[error("no spectral gap at t = {t}: exponents {exponents:?} (threshold {threshold})")]
    SpectralGap { t: f64, exponents: Vec<f64>, threshold: f64 },
    #[error("stable dimension {stable} and unstable dimension {unstable} do not add up to {n} at t = {t}")]
    DimensionMismatch { t: f64, stable: usize, unstable: usize, n: usize },
    #[error("dimensions change along the grid: {0}")]
    DimensionJump(String),
    #[error("ill-conditioned splitting: projector residual {residual:e}")]
    IllConditioned { residual: f64 },
    #[error("time {t} needs the base solution outside its window [{lo}, {hi}]")]
    OutsideWindow { t: f64, lo: f64, hi: f64 },
    #[error("linking integrand does not decay (fitted tail exponent {exponent})")]
    Divergence { exponent: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DichotomyConfig {
    /// Spacing of the independently computed projections.
    pub sample_dt: f64,
    /// Spacing of the verification grid; must divide `sample_dt`.
    pub fine_dt: f64,
    pub gaps: Vec<f64>,
    pub horizon: f64,
    pub max_horizon: f64,
    pub gap_threshold: f64,
    /// Re-orthonormalization interval of the QR sweeps.
    pub chunk: f64,
    pub rtol: f64,
    /// Target accuracy of the computed subspaces.
    pub resolution: f64,
    /// Fitted exponents are multiplied by this before `k` is fitted.
    pub shrink: f64,
    /// Factor on `k` used by the fine-grid verification.
    pub slack: f64,
    pub invariance_tol: f64,
    pub projector_tol: f64,
    pub linking: bool,
}

impl Default for DichotomyConfig {
    fn default() -> Self {
        DichotomyConfig {
            sample_dt: 0.5,
            fine_dt: 0.1,
            gaps: vec![0.5, 1.0, 2.0, 5.0, 10.0],
            horizon: 20.0,
            max_horizon: 160.0,
            gap_threshold: 0.05,
            chunk: 0.5,
            rtol: 1e-11,
            resolution: 1e-12,
            shrink: 0.9,
            slack: 1.05,
            invariance_tol: 1e-6,
            projector_tol: 1e-8,
            linking: true,
        }
    }
}

/// A linear system `x' = D(t) x`.
pub trait LinearSystem: Sync {
    fn dim(&self) -> usize;
    fn matrix(&self, t: f64) -> Result<DMatrix<f64>, DichotomyError>;

    /// Times on which `matrix` is available.
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn check_domain(&self, lo: f64, hi: f64) -> Result<(), DichotomyError> {
        let (a, b) = self.domain();
        for t in [lo, hi] {
            if t < a - 1e-9 || t > b + 1e-9 {
                return Err(DichotomyError::OutsideWindow { t, lo: a, hi: b });
            }
        }
        Ok(())
    }

    /// `M(t1, t0) x0`.
    fn propagate(&self, t0: f64, t1: f64, x0: &DMatrix<f64>, rtol: f64) -> Result<DMatrix<f64>, DichotomyError> {
        self.check_domain(t0.min(t1), t0.max(t1))?;
        let f = |t: f64| self.matrix(t).map_err(|e| IntegrationError::Argument(e.to_string()));
        Ok(propagate_linear(f, t0, t1, x0, rtol, rtol * 1e-3)?)
    }

    fn fundamental(&self, t: f64, s: f64, rtol: f64) -> Result<DMatrix<f64>, DichotomyError> {
        let m = self.dim();
        self.propagate(s, t, &DMatrix::identity(m, m), rtol)
    }
}

type MatrixFnBox = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// A linear system given by a closure, defined for all times.
#[derive(Clone)]
pub struct MatrixFn {
    dim: usize,
    f: MatrixFnBox,
}

impl MatrixFn {
    pub fn new(dim: usize, f: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        MatrixFn { dim, f: Arc::new(f) }
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        MatrixFn::new(m.nrows(), move |_| m.clone())
    }
}

impl LinearSystem for MatrixFn {
    fn dim(&self) -> usize {
        self.dim
    }

    fn matrix(&self, t: f64) -> Result<DMatrix<f64>, DichotomyError> {
        Ok((self.f)(t))
    }
}

/// Variational equation of (LV-n) along a complete solution, restricted to
/// the species of an ambient support.
#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    spec: SystemSpec,
    base: CompleteSolution,
    /// Ambient species (0-based, ascending); matrices use this order.
    coords: Vec<usize>,
    /// Positions in `coords`: species of the base support first.
    order: Vec<usize>,
    k: usize,
    pub warnings: Vec<String>,
}

/// Linearize around `base` in the coordinates of `ambient`, which must
/// contain the support of `base`.
pub fn linearize(spec: &SystemSpec, base: &CompleteSolution, ambient: &SupportSet) -> Result<LinearizedSystem, DichotomyError> {
    if ambient.n() != spec.n() || base.n() != spec.n() {
        return Err(DichotomyError::Argument("dimension mismatch".into()));
    }
    if !base.support.is_subset_of(ambient) || ambient.is_empty() {
        return Err(DichotomyError::Argument(format!("support {} is not inside ambient {}", base.support, ambient)));
    }
    let coords = ambient.present();
    let mut order: Vec<usize> = (0..coords.len()).filter(|&p| base.support.contains(coords[p])).collect();
    let k = order.len();
    order.extend((0..coords.len()).filter(|&p| !base.support.contains(coords[p])));

    let mut warnings = Vec::new();
    if let Ok(bounds) = spec.coefficient_bounds() {
        for &i in &base.support.present() {
            for &j in &coords {
                if !base.support.contains(j) {
                    let b = bounds.b(i, j);
                    if !(b.inf.is_finite() && b.sup.is_finite()) {
                        warnings.push(format!("coupling {} is unbounded", spec.coefficient_name(i, Some(j))));
                    }
                }
            }
        }
    }
    Ok(LinearizedSystem { spec: spec.clone(), base: base.clone(), coords, order, k, warnings })
}

impl LinearizedSystem {
    /// Number of present species of the base solution.
    pub fn present_dim(&self) -> usize {
        self.k
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn base(&self) -> &CompleteSolution {
        &self.base
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    /// Coefficient matrix with present species first.
    pub fn permuted(&self, t: f64) -> Result<DMatrix<f64>, DichotomyError> {
        let d = self.matrix(t)?;
        let m = self.dim();
        Ok(DMatrix::from_fn(m, m, |r, c| d[(self.order[r], self.order[c])]))
    }

    /// The blocks `A` (present), `B` (absent) and `C` (coupling) of the
    /// triangular form.
    pub fn blocks(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>), DichotomyError> {
        let p = self.permuted(t)?;
        let (k, m) = (self.k, self.dim() - self.k);
        Ok((p.view((0, 0), (k, k)).into_owned(), p.view((k, k), (m, m)).into_owned(), p.view((0, k), (k, m)).into_owned()))
    }

    /// Map a matrix in permuted coordinates back to ambient ones.
    pub fn unpermute(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.dim();
        let mut out = DMatrix::zeros(m, m);
        for r in 0..m {
            for c in 0..m {
                out[(self.order[r], self.order[c])] = p[(r, c)];
            }
        }
        out
    }
}

impl LinearSystem for LinearizedSystem {
    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn domain(&self) -> (f64, f64) {
        if self.base.support.is_empty() {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            self.base.window
        }
    }

    /// Coefficient matrix in ambient coordinates.
    fn matrix(&self, t: f64) -> Result<DMatrix<f64>, DichotomyError> {
        let u = self.base.at(t).ok_or_else(|| {
            let (lo, hi) = self.domain();
            DichotomyError::OutsideWindow { t, lo, hi }
        })?;
        let jac = self.spec.jacobian(t, &u)?;
        let m = self.dim();
        Ok(DMatrix::from_fn(m, m, |r, c| jac[(self.coords[r], self.coords[c])]))
    }
}

/// Spectral norm.
pub fn norm2(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectories::{compute_star, PullbackConfig};

    fn quick() -> PullbackConfig {
        PullbackConfig { dt: 0.1, ..Default::default() }
    }

    #[test]
    fn logistic_linearization() {
        let spec = SystemSpec::parse(&["2+sin(t)"], &[&["1"]]).unwrap();
        let full = SupportSet::full(1);
        let star = compute_star(&spec, &full, &[4.0], &[0.5], (-5.0, 5.0), &quick()).unwrap();
        let lin = linearize(&spec, &star, &full).unwrap();
        for t in [-3.0, 0.0, 2.5] {
            let u = star.at(t).unwrap()[0];
            let want = 2.0 + t.sin() - 2.0 * u;
            assert!((lin.matrix(t).unwrap()[(0, 0)] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn semitrivial_and_zero_blocks() {
        let spec = SystemSpec::parse(&["3", "3"], &[&["2", "-1"], &["-1", "2"]]).unwrap();
        let full = SupportSet::full(2);
        let one = SupportSet::from_present(2, [0]);
        let hat = compute_star(&spec, &one, &[4.0, 4.0], &[1.0, 1.0], (-5.0, 5.0), &quick()).unwrap();
        let lin = linearize(&spec, &hat, &full).unwrap();
        let d = lin.matrix(0.0).unwrap();
        // [[a1 - 2 b11 u1, -b12 u1], [0, a2 - b21 u1]] with u1 = 1.5
        let want = DMatrix::from_row_slice(2, 2, &[3.0 - 6.0, 1.5, 0.0, 3.0 + 1.5]);
        assert!((d - want).abs().max() < 1e-9);

        let zero = CompleteSolution::zero(2, (-5.0, 5.0));
        let lin = linearize(&spec, &zero, &full).unwrap();
        assert_eq!(lin.matrix(100.0).unwrap(), DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 3.0]));

        let two = SupportSet::from_present(2, [1]);
        let hat2 = compute_star(&spec, &two, &[4.0, 4.0], &[1.0, 1.0], (-5.0, 5.0), &quick()).unwrap();
        let lin = linearize(&spec, &hat2, &full).unwrap();
        assert_eq!(lin.order(), &[1, 0]);
        let (a, b, c) = lin.blocks(0.0).unwrap();
        assert!((a[(0, 0)] + 3.0).abs() < 1e-9 && (b[(0, 0)] - 4.5).abs() < 1e-9 && (c[(0, 0)] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn ambient_must_contain_support() {
        let spec = SystemSpec::parse(&["3", "3"], &[&["2", "-1"], &["-1", "2"]]).unwrap();
        let one = SupportSet::from_present(2, [0]);
        let hat = compute_star(&spec, &one, &[4.0, 4.0], &[1.0, 1.0], (-5.0, 5.0), &quick()).unwrap();
        assert!(linearize(&spec, &hat, &SupportSet::from_present(2, [1])).is_err());
    }
}
