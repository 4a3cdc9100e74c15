//! Coefficient conditions: row/column dominance (H1)/(H2), the permanence
//! condition (A) with its restriction (A_I), and the extinction condition (B).
//!
//! Every check runs at two tiers. The conservative tier replaces each
//! coefficient by its inf or sup estimate; the sampled tier evaluates the
//! inequalities on the check grid.

mod lp;
mod search;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::EvalError;
use crate::model::{CoefficientBounds, ModelError, SampledCoefficients, SupportSet, SystemSpec};

pub use lp::{maximize_dominance, DominanceLp};
pub use search::{
    certify_regime, certify_spec, search_a, search_b, search_dominance, search_witness, Regime,
    RegimeCertificate, SearchConfig, SearchOutcome,
};

/// Absolute slack tolerance, scaled by the magnitude of the row terms.
pub const SLACK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditionError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("witness required: missing {0}")]
    MissingWitness(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionKind {
    H1,
    H2,
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    PassConservative,
    PassSampled,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self != Verdict::Fail
    }
}

/// Which inequality a trace row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// (H1) row sum.
    Row,
    /// (H2) column sum.
    Column,
    /// Lower chain on a present species: `b_ii dbar_i (+ eps) <= a_i`.
    Lower,
    /// Upper chain on a present species.
    Upper,
    /// (B) on an absent species.
    Extinction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowTrace {
    /// 1-based species index.
    pub index: usize,
    pub branch: Branch,
    pub conservative_slack: f64,
    pub sampled_slack: f64,
    pub worst_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: ConditionKind,
    pub support: SupportSet,
    pub verdict: Verdict,
    /// Smallest sampled slack over all inequalities.
    pub margin: f64,
    pub conservative_margin: f64,
    pub worst_t: f64,
    pub rows: Vec<RowTrace>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    /// The row with the smallest sampled slack.
    pub fn worst_row(&self) -> Option<&RowTrace> {
        self.rows.iter().min_by(|a, b| a.sampled_slack.total_cmp(&b.sampled_slack))
    }
}

/// Candidate constants for the conditions. Vectors have length `n`; entries
/// of `dbar` outside the support are ignored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cbar: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dbar: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<SupportSet>,
}

impl Witness {
    pub fn support_or_full(&self, n: usize) -> SupportSet {
        self.support.unwrap_or_else(|| SupportSet::full(n))
    }

    /// Fill the fields that are `None` in `self` from `other`.
    pub fn merged(mut self, other: &Witness) -> Witness {
        macro_rules! fill {
            ($($f:ident),*) => { $( if self.$f.is_none() { self.$f = other.$f.clone(); } )* };
        }
        fill!(c, cbar, d, dbar, eps, theta, delta, support);
        self
    }

    /// Restrict vector fields to the species of `s` (for use with the
    /// subsystem on `s`).
    pub fn restrict(&self, s: &SupportSet) -> Witness {
        let idx = s.present();
        let pick = |v: &Option<Vec<f64>>| v.as_ref().map(|v| idx.iter().map(|&i| v[i]).collect());
        Witness {
            c: pick(&self.c),
            cbar: pick(&self.cbar),
            d: pick(&self.d),
            dbar: pick(&self.dbar),
            eps: self.eps,
            theta: self.theta,
            delta: self.delta,
            support: self.support.map(|sup| sup.relative_to(s)),
        }
    }
}

/// Coefficient bounds and grid samples of one system, shared by all checks.
#[derive(Debug, Clone)]
pub struct Checker {
    n: usize,
    bounds: CoefficientBounds,
    samples: SampledCoefficients,
}

/// Accumulates one inequality `lhs(t) >= 0` over the grid.
struct RowAcc {
    index: usize,
    branch: Branch,
    conservative: f64,
    magnitude: f64,
    sampled: f64,
    worst_t: f64,
}

impl RowAcc {
    fn new(index: usize, branch: Branch, conservative: f64, magnitude: f64) -> Self {
        RowAcc { index, branch, conservative, magnitude, sampled: f64::INFINITY, worst_t: f64::NAN }
    }

    #[inline]
    fn push(&mut self, t: f64, slack: f64) {
        if slack < self.sampled {
            self.sampled = slack;
            self.worst_t = t;
        }
    }

    fn tol(&self) -> f64 {
        SLACK_TOL * self.magnitude.max(1.0)
    }
}

fn finish(condition: ConditionKind, support: SupportSet, rows: Vec<RowAcc>) -> ConditionReport {
    let conservative_ok = rows.iter().all(|r| r.conservative >= -r.tol());
    let sampled_ok = rows.iter().all(|r| r.sampled >= -r.tol());
    let verdict = if conservative_ok {
        Verdict::PassConservative
    } else if sampled_ok {
        Verdict::PassSampled
    } else {
        Verdict::Fail
    };
    let worst = rows.iter().min_by(|a, b| a.sampled.total_cmp(&b.sampled));
    let margin = worst.map_or(f64::INFINITY, |r| r.sampled);
    let worst_t = worst.map_or(f64::NAN, |r| r.worst_t);
    let conservative_margin = rows.iter().map(|r| r.conservative).fold(f64::INFINITY, f64::min);
    ConditionReport {
        condition,
        support,
        verdict,
        margin,
        conservative_margin,
        worst_t,
        rows: rows
            .into_iter()
            .map(|r| RowTrace {
                index: r.index,
                branch: r.branch,
                conservative_slack: r.conservative,
                sampled_slack: r.sampled,
                worst_t: r.worst_t,
            })
            .collect(),
    }
}

fn positive_vec(name: &str, v: &[f64], n: usize, on: Option<&SupportSet>) -> Result<(), ConditionError> {
    if v.len() != n {
        return Err(ConditionError::Argument(format!("{name} has length {}, expected {n}", v.len())));
    }
    for (i, &x) in v.iter().enumerate() {
        if on.is_none_or(|s| s.contains(i)) && !(x > 0.0 && x.is_finite()) {
            return Err(ConditionError::Argument(format!("{name}[{}] = {x} must be positive", i + 1)));
        }
    }
    Ok(())
}

fn positive(name: &str, x: f64) -> Result<(), ConditionError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ConditionError::Argument(format!("{name} = {x} must be positive")))
    }
}

impl Checker {
    pub fn new(spec: &SystemSpec) -> Result<Self, ConditionError> {
        Ok(Checker { n: spec.n(), bounds: spec.coefficient_bounds()?, samples: spec.sample()? })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bounds(&self) -> &CoefficientBounds {
        &self.bounds
    }

    pub fn samples(&self) -> &SampledCoefficients {
        &self.samples
    }

    /// Checker for the subsystem on `s`, reusing the tabulated coefficients.
    pub fn restrict(&self, s: &SupportSet) -> Checker {
        Checker { n: s.len(), bounds: self.bounds.restrict(s), samples: self.samples.restrict(s) }
    }

    fn dominance(&self, kind: ConditionKind, c: &[f64], delta: f64) -> Result<ConditionReport, ConditionError> {
        let name = if kind == ConditionKind::H1 { "c" } else { "cbar" };
        positive_vec(name, c, self.n, None)?;
        positive("delta", delta)?;
        let n = self.n;
        // H1 sums along row i, H2 along column i
        let coef = |i: usize, j: usize| if kind == ConditionKind::H1 { (i, j) } else { (j, i) };
        let branch = if kind == ConditionKind::H1 { Branch::Row } else { Branch::Column };
        let mut rows: Vec<RowAcc> = (0..n)
            .map(|i| {
                let mut cons = -delta;
                let mut mag = delta;
                for j in 0..n {
                    let (p, q) = coef(i, j);
                    let inf = self.bounds.b(p, q).inf;
                    cons += c[j] * inf;
                    mag += (c[j] * inf).abs();
                }
                RowAcc::new(i + 1, branch, cons, mag)
            })
            .collect();
        let s = &self.samples;
        for k in 0..s.len() {
            let t = s.times[k];
            for (i, row) in rows.iter_mut().enumerate() {
                let mut v = -delta;
                for j in 0..n {
                    let (p, q) = coef(i, j);
                    v += c[j] * s.b(k, p, q);
                }
                row.push(t, v);
            }
        }
        Ok(finish(kind, SupportSet::full(n), rows))
    }

    /// Row dominance `(c_i b_ii + sum_{j != i} c_j b_ij)^L >= delta`.
    pub fn check_h1(&self, c: &[f64], delta: f64) -> Result<ConditionReport, ConditionError> {
        self.dominance(ConditionKind::H1, c, delta)
    }

    /// Column dominance `(cbar_i b_ii + sum_{j != i} cbar_j b_ji)^L >= delta`.
    pub fn check_h2(&self, cbar: &[f64], delta: f64) -> Result<ConditionReport, ConditionError> {
        self.dominance(ConditionKind::H2, cbar, delta)
    }

    /// `dbar_i b_ii <= a_i <= d_i b_ii + sum_{j in I, j != i} d_j b_ij` for
    /// `i in I`. The full support gives condition (A).
    pub fn check_a(&self, d: &[f64], dbar: &[f64], support: &SupportSet) -> Result<ConditionReport, ConditionError> {
        let w = Witness {
            d: Some(d.to_vec()),
            dbar: Some(dbar.to_vec()),
            support: Some(*support),
            ..Default::default()
        };
        self.chains(ConditionKind::A, &w)
    }

    /// Condition (B) for the split `I = support`, `J` its complement.
    pub fn check_b(&self, w: &Witness) -> Result<ConditionReport, ConditionError> {
        self.chains(ConditionKind::B, w)
    }

    fn chains(&self, kind: ConditionKind, w: &Witness) -> Result<ConditionReport, ConditionError> {
        let n = self.n;
        let support = w.support.ok_or(ConditionError::MissingWitness("support"))?;
        if support.n() != n {
            return Err(ConditionError::Argument(format!("support has dimension {}, expected {n}", support.n())));
        }
        let d = w.d.as_deref().ok_or(ConditionError::MissingWitness("d"))?;
        let dbar = w.dbar.as_deref();
        if !support.is_empty() && dbar.is_none() {
            return Err(ConditionError::MissingWitness("dbar"));
        }
        let dbar = dbar.unwrap_or(&[]);
        let is_b = kind == ConditionKind::B;
        let (c, eps, theta) = if is_b {
            let c = w.c.as_deref().ok_or(ConditionError::MissingWitness("c"))?;
            let eps = w.eps.ok_or(ConditionError::MissingWitness("eps"))?;
            let theta = w.theta.ok_or(ConditionError::MissingWitness("theta"))?;
            positive_vec("c", c, n, None)?;
            positive("eps", eps)?;
            positive("theta", theta)?;
            (c, eps, theta)
        } else {
            (&[][..], 0.0, 0.0)
        };
        positive_vec("d", d, n, if is_b { None } else { Some(&support) })?;
        if !support.is_empty() {
            positive_vec("dbar", dbar, n, Some(&support))?;
        }

        // Effective level of species j in the sums of the upper chains:
        // (A) uses d_j over I only, (B) uses d_j + theta c_j over all j.
        let level: Vec<f64> = (0..n)
            .map(|j| {
                if is_b {
                    d[j] + theta * c[j]
                } else if support.contains(j) {
                    d[j]
                } else {
                    0.0
                }
            })
            .collect();
        let bnd = &self.bounds;
        let mut rows = Vec::new();
        // (row accumulator, species, is_lower)
        let mut plan = Vec::new();
        for i in 0..n {
            let off_inf: f64 = (0..n).filter(|&j| j != i).map(|j| level[j] * bnd.b(i, j).inf).sum();
            let off_mag: f64 = (0..n).filter(|&j| j != i).map(|j| (level[j] * bnd.b(i, j).inf).abs()).sum();
            let a = bnd.a(i);
            if support.contains(i) {
                let lo = bnd.b(i, i).sup * dbar[i] + eps;
                rows.push(RowAcc::new(i + 1, Branch::Lower, a.inf - lo, a.inf.abs() + lo.abs()));
                plan.push((i, 0u8));
                let hi = d[i] * bnd.b(i, i).inf + off_inf - eps;
                rows.push(RowAcc::new(i + 1, Branch::Upper, hi - a.sup, (d[i] * bnd.b(i, i).inf).abs() + off_mag + eps + a.sup.abs()));
                plan.push((i, 1));
            } else if is_b {
                let hi = off_inf - eps;
                rows.push(RowAcc::new(i + 1, Branch::Extinction, hi - a.sup, off_mag + eps + a.sup.abs()));
                plan.push((i, 2));
            }
        }
        let s = &self.samples;
        for k in 0..s.len() {
            let t = s.times[k];
            for (row, &(i, which)) in rows.iter_mut().zip(&plan) {
                let a = s.a(k, i);
                let slack = match which {
                    0 => a - s.b(k, i, i) * dbar[i] - eps,
                    _ => {
                        let mut hi = -eps;
                        for j in 0..n {
                            if j != i {
                                hi += level[j] * s.b(k, i, j);
                            }
                        }
                        if which == 1 {
                            hi += d[i] * s.b(k, i, i);
                        }
                        hi - a
                    }
                };
                row.push(t, slack);
            }
        }
        Ok(finish(kind, support, rows))
    }
}

pub fn check_h1(spec: &SystemSpec, c: &[f64], delta: f64) -> Result<ConditionReport, ConditionError> {
    Checker::new(spec)?.check_h1(c, delta)
}

pub fn check_h2(spec: &SystemSpec, cbar: &[f64], delta: f64) -> Result<ConditionReport, ConditionError> {
    Checker::new(spec)?.check_h2(cbar, delta)
}

pub fn check_a(spec: &SystemSpec, d: &[f64], dbar: &[f64], support: &SupportSet) -> Result<ConditionReport, ConditionError> {
    Checker::new(spec)?.check_a(d, dbar, support)
}

pub fn check_b(spec: &SystemSpec, w: &Witness) -> Result<ConditionReport, ConditionError> {
    Checker::new(spec)?.check_b(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym2() -> SystemSpec {
        SystemSpec::parse(&["3", "3"], &[&["2", "-1"], &["-1", "2"]]).unwrap().with_samples(101)
    }

    fn ext2() -> SystemSpec {
        SystemSpec::parse(&["2", "0-1"], &[&["1", "-0.1"], &["-0.1", "1"]]).unwrap().with_samples(101)
    }

    #[test]
    fn h1_examples() {
        let r = check_h1(&sym2(), &[1.0, 1.0], 1.0).unwrap();
        assert_eq!(r.verdict, Verdict::PassConservative);
        assert_eq!(r.margin, 0.0);

        let r = check_h1(&sym2(), &[1.0, 3.0], 0.1).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let worst = r.worst_row().unwrap();
        assert_eq!(worst.index, 1);
        assert!((worst.sampled_slack - (-1.1)).abs() < 1e-12);

        let one = SystemSpec::parse(&["1"], &[&["1"]]).unwrap().with_samples(11);
        assert!(check_h1(&one, &[1.0], 1.0).unwrap().passed());
    }

    #[test]
    fn h2_examples() {
        assert!(check_h2(&sym2(), &[1.0, 1.0], 1.0).unwrap().passed());
        let s = SystemSpec::parse(&["1", "1", "1"], &[&["1", "0", "0"], &["-3", "1", "0"], &["0", "0", "1"]])
            .unwrap()
            .with_samples(11);
        let r = check_h2(&s, &[1.0, 1.0, 1.0], 0.1).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.worst_row().unwrap().index, 1);
        assert_eq!(check_h1(&s, &[1.0, 1.0, 1.0], 0.1).unwrap().verdict, Verdict::Fail);
        let one = SystemSpec::parse(&["1"], &[&["2+sin(t)"]]).unwrap().with_samples(1001);
        assert!(check_h2(&one, &[5.0], 1.0).unwrap().passed());
    }

    #[test]
    fn argument_errors() {
        assert!(matches!(check_h1(&sym2(), &[1.0, 0.0], 1.0), Err(ConditionError::Argument(_))));
        assert!(matches!(check_h1(&sym2(), &[1.0, 1.0], 0.0), Err(ConditionError::Argument(_))));
        assert!(matches!(check_h1(&sym2(), &[1.0], 1.0), Err(ConditionError::Argument(_))));
        let w = Witness { d: Some(vec![3.0, 1.0]), support: Some(SupportSet::from_present(2, [0])), ..Default::default() };
        assert_eq!(check_b(&ext2(), &w).unwrap_err(), ConditionError::MissingWitness("dbar"));
    }

    #[test]
    fn a_examples() {
        let full = SupportSet::full(2);
        let r = check_a(&sym2(), &[4.0, 4.0], &[1.0, 1.0], &full).unwrap();
        assert_eq!(r.verdict, Verdict::PassConservative);
        // 3 - 2 on the lower chain and 8 - 4 - 3 on the upper one
        assert!((r.margin - 1.0).abs() < 1e-12, "{r:?}");

        let r = check_a(&sym2(), &[2.0, 2.0], &[1.0, 1.0], &full).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!((r.margin + 1.0).abs() < 1e-12);

        let log = SystemSpec::parse(&["2+sin(t)"], &[&["1"]]).unwrap().with_samples(20001);
        let r = check_a(&log, &[3.0], &[1.0], &SupportSet::full(1)).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.margin.abs() < 1e-3);
    }

    fn ext_witness(support: SupportSet) -> Witness {
        Witness {
            c: Some(vec![1.0, 1.0]),
            d: Some(vec![3.0, 1.0]),
            dbar: Some(vec![1.0, 1.0]),
            eps: Some(0.1),
            theta: Some(1.0),
            support: Some(support),
            ..Default::default()
        }
    }

    #[test]
    fn b_examples() {
        let r = check_b(&ext2(), &ext_witness(SupportSet::from_present(2, [0]))).unwrap();
        assert_eq!(r.verdict, Verdict::PassConservative);
        let branches: Vec<_> = r.rows.iter().map(|x| (x.index, x.branch)).collect();
        assert_eq!(branches, [(1, Branch::Lower), (1, Branch::Upper), (2, Branch::Extinction)]);
        // 2.7 - 2 and -0.5 - (-1)
        assert!((r.rows[1].sampled_slack - 0.7).abs() < 1e-12);
        assert!((r.rows[2].sampled_slack - 0.5).abs() < 1e-12);
        assert!((r.rows[0].sampled_slack - 0.9).abs() < 1e-12);

        let r = check_b(&ext2(), &ext_witness(SupportSet::full(2))).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.worst_row().unwrap().index, 2);
        assert_eq!(r.worst_row().unwrap().branch, Branch::Lower);

        let tot = SystemSpec::parse(&["0-1", "0-1"], &[&["1", "-0.1"], &["-0.1", "1"]]).unwrap().with_samples(11);
        let w = Witness {
            c: Some(vec![1.0, 1.0]),
            d: Some(vec![1.0, 1.0]),
            eps: Some(0.05),
            theta: Some(1.0),
            support: Some(SupportSet::empty(2)),
            ..Default::default()
        };
        assert!(check_b(&tot, &w).unwrap().passed());
    }

    #[test]
    fn sampled_tier_catches_out_of_phase_coefficients() {
        // b11 + b12 = 2 + 0.5 sin - 1 - 0.5 sin = 1 at every t, but the
        // bound-wise sum is 1.5 - 1.5 = 0
        let s = SystemSpec::parse(&["3", "3"], &[&["2+0.5*sin(t)", "-1-0.5*sin(t)"], &["-1", "2"]])
            .unwrap()
            .with_window(-20.0, 20.0)
            .unwrap()
            .with_samples(4001);
        let r = check_h1(&s, &[1.0, 1.0], 0.5).unwrap();
        assert_eq!(r.verdict, Verdict::PassSampled);
        assert!(r.conservative_margin < 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn spec() -> SystemSpec {
            SystemSpec::parse(
                &["2+sin(t)", "1.5", "1"],
                &[&["2+0.3*cos(t)", "-0.4", "-0.2*abs(sin(t))"], &["-0.3", "1.8", "-0.1"], &["-0.5*cos(t)^2", "-0.1", "2"]],
            )
            .unwrap()
            .with_window(-30.0, 30.0)
            .unwrap()
            .with_samples(601)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn h1_scale_invariance(c in prop::collection::vec(0.05f64..3.0, 3), delta in 0.01f64..2.0, lam in 0.01f64..100.0) {
                let ch = Checker::new(&spec()).unwrap();
                let base = ch.check_h1(&c, delta).unwrap();
                let lc: Vec<f64> = c.iter().map(|x| x * lam).collect();
                let scaled = ch.check_h1(&lc, delta * lam).unwrap();
                prop_assert_eq!(base.verdict, scaled.verdict);
            }

            #[test]
            fn b_monotone_in_eps(d1 in 0.5f64..6.0, d2 in 0.05f64..2.0, eps in 0.001f64..1.0, frac in 0.01f64..1.0) {
                let s = SystemSpec::parse(&["2+0.2*sin(t)", "0-1"], &[&["1", "-0.1"], &["-0.1", "1"]]).unwrap().with_samples(201);
                let ch = Checker::new(&s).unwrap();
                let mut w = Witness {
                    c: Some(vec![1.0, 1.0]),
                    d: Some(vec![d1, d2]),
                    dbar: Some(vec![0.5, 1.0]),
                    eps: Some(eps),
                    theta: Some(0.5),
                    support: Some(SupportSet::from_present(2, [0])),
                    ..Default::default()
                };
                let big = ch.check_b(&w).unwrap();
                w.eps = Some(eps * frac);
                let small = ch.check_b(&w).unwrap();
                if big.passed() {
                    prop_assert!(small.passed());
                }
            }

            #[test]
            fn a_inherited_by_subsets(d in prop::collection::vec(0.1f64..8.0, 3), dbar in prop::collection::vec(0.05f64..2.0, 3), mask in 0u32..8, sub in 0u32..8) {
                let ch = Checker::new(&spec()).unwrap();
                let outer = SupportSet::from_mask(3, mask);
                let inner = SupportSet::from_mask(3, mask & sub);
                if ch.check_a(&d, &dbar, &outer).unwrap().passed() {
                    prop_assert!(ch.check_a(&d, &dbar, &inner).unwrap().passed());
                }
            }

            #[test]
            fn conservative_implies_sampled(c in prop::collection::vec(0.05f64..3.0, 3), delta in 0.01f64..2.0) {
                let ch = Checker::new(&spec()).unwrap();
                for r in [ch.check_h1(&c, delta).unwrap(), ch.check_h2(&c, delta).unwrap()] {
                    for row in &r.rows {
                        prop_assert!(row.conservative_slack <= row.sampled_slack + 1e-12);
                    }
                }
            }
        }
    }
}
