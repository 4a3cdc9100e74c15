//! Cooperative Lotka–Volterra systems
//! `u_i' = u_i (a_i(t) - sum_j b_ij(t) u_j)` with `b_ij <= 0` off the diagonal.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::expr::{uniform_grid, Bounds, BoundsError, EvalError, TimeFn};

pub const MAX_DIM: usize = 8;
pub const COOPERATIVE_TOL: f64 = 1e-12;
pub const DEFAULT_WINDOW: (f64, f64) = (-200.0, 200.0);
pub const DEFAULT_SAMPLES: usize = 40_001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `b_ij > 0` for some `i != j`.
    NotCooperative,
    /// `b_ii <= 0`.
    DiagonalNotPositive,
}

/// One failed sign check; indices are 1-based as in the model equations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub i: usize,
    pub j: usize,
    pub t: f64,
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::NotCooperative => "positive off-diagonal interaction",
            ViolationKind::DiagonalNotPositive => "non-positive self-interaction",
        };
        write!(f, "{what} b{}{} = {} at t = {}", self.i, self.j, self.value, self.t)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension {0} is outside the supported range 1..={MAX_DIM}")]
    Dimension(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid check window [{0}, {1}]")]
    Window(f64, f64),
    #[error("{} sign violation(s), first: {}", .0.len(), .0[0])]
    Violations(Vec<Violation>),
    #[error("coefficient {name}: {source}")]
    Coefficient { name: String, source: BoundsError },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Split of the species into present (`I`) and absent (`J`) indices.
///
/// Stored as a bit mask over `0..n`; labels and serialized forms are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SupportSet {
    n: usize,
    mask: u32,
}

impl SupportSet {
    pub fn full(n: usize) -> Self {
        SupportSet { n, mask: if n == 0 { 0 } else { (1u32 << n) - 1 } }
    }

    pub fn empty(n: usize) -> Self {
        SupportSet { n, mask: 0 }
    }

    pub fn from_mask(n: usize, mask: u32) -> Self {
        debug_assert!(n <= 31);
        SupportSet { n, mask: mask & Self::full(n).mask }
    }

    /// Build from 0-based present indices.
    pub fn from_present(n: usize, present: impl IntoIterator<Item = usize>) -> Self {
        let mut mask = 0;
        for i in present {
            assert!(i < n, "index {i} out of range for n = {n}");
            mask |= 1 << i;
        }
        SupportSet { n, mask }
    }

    /// Support of a state vector: exact zeros are absent.
    pub fn of_state(u: &[f64]) -> Self {
        Self::from_present(u.len(), u.iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(i, _)| i))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask >> i & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn is_full(&self) -> bool {
        *self == Self::full(self.n)
    }

    pub fn present(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.contains(i)).collect()
    }

    pub fn absent(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| !self.contains(i)).collect()
    }

    pub fn complement(&self) -> Self {
        SupportSet { n: self.n, mask: !self.mask & Self::full(self.n).mask }
    }

    pub fn is_subset_of(&self, other: &SupportSet) -> bool {
        self.n == other.n && self.mask & !other.mask == 0
    }

    pub fn is_strict_subset_of(&self, other: &SupportSet) -> bool {
        self.is_subset_of(other) && self.mask != other.mask
    }

    /// All subsets of `self`, ordered by mask.
    pub fn subsets(&self) -> Vec<SupportSet> {
        (0..=self.mask)
            .filter(|m| m & !self.mask == 0)
            .map(|m| SupportSet { n: self.n, mask: m })
            .collect()
    }

    /// Re-express a support of the parent system in the coordinates of the
    /// subsystem restricted to `self`. Entries outside `self` are dropped.
    pub fn relative_to(&self, outer: &SupportSet) -> SupportSet {
        let idx = outer.present();
        SupportSet::from_present(idx.len(), idx.iter().enumerate().filter(|(_, &g)| self.contains(g)).map(|(k, _)| k))
    }

    /// Inverse of [`relative_to`](Self::relative_to).
    pub fn lift(&self, outer: &SupportSet) -> SupportSet {
        let idx = outer.present();
        SupportSet::from_present(outer.n, self.present().into_iter().map(|k| idx[k]))
    }

    /// Human label such as `{1,3}`; the empty set is `{}`.
    pub fn label(&self) -> String {
        let items: Vec<String> = self.present().iter().map(|i| (i + 1).to_string()).collect();
        format!("{{{}}}", items.join(","))
    }
}

impl fmt::Display for SupportSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Serialize, Deserialize)]
struct SupportRepr {
    n: usize,
    present: Vec<usize>,
}

impl Serialize for SupportSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SupportRepr { n: self.n, present: self.present().iter().map(|i| i + 1).collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SupportSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = SupportRepr::deserialize(d)?;
        if r.n > MAX_DIM || r.present.iter().any(|&i| i == 0 || i > r.n) {
            return Err(serde::de::Error::custom("support index out of range"));
        }
        Ok(SupportSet::from_present(r.n, r.present.iter().map(|i| i - 1)))
    }
}

/// An n-species cooperative Lotka–Volterra system together with the finite
/// window on which its global properties are checked.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    n: usize,
    a: Vec<TimeFn>,
    /// Row-major `n x n`.
    b: Vec<TimeFn>,
    window: (f64, f64),
    samples: usize,
    /// Original (0-based) species index of each coordinate.
    species: Vec<usize>,
}

impl SystemSpec {
    pub fn new(a: Vec<TimeFn>, b: Vec<Vec<TimeFn>>) -> Result<Self, ModelError> {
        let n = a.len();
        if n == 0 || n > MAX_DIM {
            return Err(ModelError::Dimension(n));
        }
        if b.len() != n || b.iter().any(|row| row.len() != n) {
            return Err(ModelError::Shape(format!("b must be {n}x{n}")));
        }
        Ok(SystemSpec {
            n,
            a,
            b: b.into_iter().flatten().collect(),
            window: DEFAULT_WINDOW,
            samples: DEFAULT_SAMPLES,
            species: (0..n).collect(),
        })
    }

    /// Convenience constructor from expression sources.
    pub fn parse(a: &[&str], b: &[&[&str]]) -> Result<Self, crate::Error> {
        let a = a.iter().map(|s| TimeFn::parse(s)).collect::<Result<Vec<_>, _>>()?;
        let b = b
            .iter()
            .map(|row| row.iter().map(|s| TimeFn::parse(s)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SystemSpec::new(a, b)?)
    }

    pub fn with_window(mut self, lo: f64, hi: f64) -> Result<Self, ModelError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(ModelError::Window(lo, hi));
        }
        self.window = (lo, hi);
        Ok(self)
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples.max(2);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn species(&self) -> &[usize] {
        &self.species
    }

    pub fn a(&self, i: usize) -> &TimeFn {
        &self.a[i]
    }

    pub fn b(&self, i: usize, j: usize) -> &TimeFn {
        &self.b[i * self.n + j]
    }

    pub fn a_mut(&mut self, i: usize) -> &mut TimeFn {
        &mut self.a[i]
    }

    pub fn b_mut(&mut self, i: usize, j: usize) -> &mut TimeFn {
        let n = self.n;
        &mut self.b[i * n + j]
    }

    /// Evaluate all coefficients at `t` into `a` (len n) and `b` (len n*n).
    pub fn coefficients_into(&self, t: f64, a: &mut [f64], b: &mut [f64]) -> Result<(), EvalError> {
        for (dst, f) in a.iter_mut().zip(&self.a) {
            *dst = f.eval(t)?;
        }
        for (dst, f) in b.iter_mut().zip(&self.b) {
            *dst = f.eval(t)?;
        }
        Ok(())
    }

    pub fn coefficients(&self, t: f64) -> Result<(DVector<f64>, DMatrix<f64>), EvalError> {
        let mut a = vec![0.0; self.n];
        let mut b = vec![0.0; self.n * self.n];
        self.coefficients_into(t, &mut a, &mut b)?;
        Ok((DVector::from_vec(a), DMatrix::from_row_slice(self.n, self.n, &b)))
    }

    /// Per-capita growth `a_i(t) - sum_j b_ij(t) u_j` for every i.
    pub fn per_capita(&self, t: f64, u: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let n = self.n;
        for i in 0..n {
            let mut g = self.a[i].eval(t)?;
            for j in 0..n {
                if u[j] != 0.0 {
                    g -= self.b[i * n + j].eval(t)? * u[j];
                }
            }
            out[i] = g;
        }
        Ok(())
    }

    pub fn vector_field(&self, t: f64, u: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        self.per_capita(t, u, out)?;
        for (o, &x) in out.iter_mut().zip(u) {
            *o *= x;
        }
        Ok(())
    }

    /// Jacobian of the vector field at `(t, u)`.
    pub fn jacobian(&self, t: f64, u: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let n = self.n;
        let (a, b) = self.coefficients(t)?;
        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n {
            let g = a[i] - (0..n).map(|k| b[(i, k)] * u[k]).sum::<f64>();
            for j in 0..n {
                jac[(i, j)] = -u[i] * b[(i, j)];
            }
            jac[(i, i)] += g;
        }
        Ok(jac)
    }

    pub fn coefficient_name(&self, i: usize, j: Option<usize>) -> String {
        match j {
            None => format!("a{}", self.species[i] + 1),
            Some(j) => format!("b{}{}", self.species[i] + 1, self.species[j] + 1),
        }
    }

    /// Check the cooperative sign structure on the sampling grid and return
    /// every violation found.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.n;
        let mut violations = Vec::new();
        for t in uniform_grid(self.window, self.samples) {
            for i in 0..n {
                self.a[i].eval(t)?;
                for j in 0..n {
                    let v = self.b[i * n + j].eval(t)?;
                    let kind = if i == j {
                        (v <= 0.0).then_some(ViolationKind::DiagonalNotPositive)
                    } else {
                        (v > COOPERATIVE_TOL).then_some(ViolationKind::NotCooperative)
                    };
                    if let Some(kind) = kind {
                        violations.push(Violation { kind, i: i + 1, j: j + 1, t, value: v });
                    }
                }
            }
        }
        // declared bounds are part of the contract too
        self.coefficient_bounds()?;
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Violations(violations))
        }
    }

    /// Global inf/sup estimates of every coefficient over the check window.
    pub fn coefficient_bounds(&self) -> Result<CoefficientBounds, ModelError> {
        let n = self.n;
        let est = |f: &TimeFn, name: String| {
            f.estimate_bounds(self.window, self.samples).map_err(|source| ModelError::Coefficient { name, source })
        };
        let a = (0..n).map(|i| est(&self.a[i], self.coefficient_name(i, None))).collect::<Result<Vec<_>, _>>()?;
        let mut b = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                b.push(est(&self.b[i * n + j], self.coefficient_name(i, Some(j)))?);
            }
        }
        Ok(CoefficientBounds { n, a, b })
    }

    /// Tabulate every coefficient on the sampling grid.
    pub fn sample(&self) -> Result<SampledCoefficients, EvalError> {
        let n = self.n;
        let times: Vec<f64> = uniform_grid(self.window, self.samples).collect();
        let mut a = vec![0.0; times.len() * n];
        let mut b = vec![0.0; times.len() * n * n];
        for (k, &t) in times.iter().enumerate() {
            self.coefficients_into(t, &mut a[k * n..(k + 1) * n], &mut b[k * n * n..(k + 1) * n * n])?;
        }
        Ok(SampledCoefficients { n, times, a, b })
    }

    /// The system restricted to the species in `s` (coordinates of `self`).
    /// An empty support yields a system with no species.
    pub fn subcommunity(&self, s: &SupportSet) -> SystemSpec {
        assert_eq!(s.n(), self.n, "support dimension mismatch");
        let idx = s.present();
        let m = idx.len();
        let mut b = Vec::with_capacity(m * m);
        for &i in &idx {
            for &j in &idx {
                b.push(self.b(i, j).clone());
            }
        }
        SystemSpec {
            n: m,
            a: idx.iter().map(|&i| self.a[i].clone()).collect(),
            b,
            window: self.window,
            samples: self.samples,
            species: idx.iter().map(|&i| self.species[i]).collect(),
        }
    }

    /// Re-embed a state of `subcommunity(s)` into the coordinates of `self`,
    /// with exact zeros on the absent species.
    pub fn embed(&self, s: &SupportSet, x: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.n];
        for (k, i) in s.present().into_iter().enumerate() {
            u[i] = x[k];
        }
        u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientBounds {
    n: usize,
    a: Vec<Bounds>,
    b: Vec<Bounds>,
}

impl CoefficientBounds {
    pub fn a(&self, i: usize) -> Bounds {
        self.a[i]
    }

    pub fn b(&self, i: usize, j: usize) -> Bounds {
        self.b[i * self.n + j]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Bounds of the subsystem on `s`.
    pub fn restrict(&self, s: &SupportSet) -> CoefficientBounds {
        let idx = s.present();
        let a = idx.iter().map(|&i| self.a[i]).collect();
        let b = idx.iter().flat_map(|&i| idx.iter().map(move |&j| (i, j))).map(|(i, j)| self.b(i, j)).collect();
        CoefficientBounds { n: idx.len(), a, b }
    }

    pub fn all_declared(&self) -> bool {
        use crate::expr::BoundSource::Declared;
        self.a.iter().chain(&self.b).all(|b| b.source == Declared)
    }
}

/// Coefficients tabulated on the uniform check grid.
#[derive(Debug, Clone)]
pub struct SampledCoefficients {
    n: usize,
    pub times: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl SampledCoefficients {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Tabulation of the subsystem on `s`.
    pub fn restrict(&self, s: &SupportSet) -> SampledCoefficients {
        let idx = s.present();
        let m = idx.len();
        let mut a = Vec::with_capacity(self.len() * m);
        let mut b = Vec::with_capacity(self.len() * m * m);
        for k in 0..self.len() {
            a.extend(idx.iter().map(|&i| self.a(k, i)));
            for &i in &idx {
                b.extend(idx.iter().map(|&j| self.b(k, i, j)));
            }
        }
        SampledCoefficients { n: m, times: self.times.clone(), a, b }
    }

    #[inline]
    pub fn a(&self, k: usize, i: usize) -> f64 {
        self.a[k * self.n + i]
    }

    #[inline]
    pub fn b(&self, k: usize, i: usize, j: usize) -> f64 {
        self.b[(k * self.n + i) * self.n + j]
    }
}
