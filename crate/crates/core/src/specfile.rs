//! JSON system files.
//!
//! ```json
//! {
//!   "n": 2,
//!   "a": ["3+0.5*sin(t)", "3"],
//!   "b": [["2", "-1"], ["-1", "2"]],
//!   "bounds": {"a1": {"inf": 2.5, "sup": 3.5}},
//!   "witness": {"d": [4, 4], "dbar": [1, 1]},
//!   "window": [-100, 100],
//!   "samples": 20001
//! }
//! ```
//!
//! Species in `witness.persistent` are 1-based.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::Witness;
use crate::expr::TimeFn;
use crate::model::{SupportSet, SystemSpec};
use crate::skeleton::SkeletonConfig;
use crate::trajectories::PullbackConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecFileError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("malformed JSON at line {line}, column {column}: {msg}")]
    Json { line: usize, column: usize, msg: String },
    #[error("{field}: {msg}")]
    Expr { field: String, msg: String },
    #[error("invalid spec file: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredBounds {
    pub inf: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessFile {
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
    /// Persistent species, 1-based.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persistent: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pullback: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backward: Option<f64>,
}

impl Tolerances {
    pub fn apply_pullback(&self, cfg: &mut PullbackConfig) {
        if let Some(x) = self.pullback {
            cfg.tol = x;
        }
    }

    pub fn apply_skeleton(&self, cfg: &mut SkeletonConfig) {
        self.apply_pullback(&mut cfg.pullback);
        if let Some(x) = self.rtol {
            cfg.rtol = x;
        }
        if let Some(x) = self.forward {
            cfg.tol_fwd = x;
        }
        if let Some(x) = self.backward {
            cfg.tol_bwd = x;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub n: usize,
    pub a: Vec<String>,
    pub b: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bounds: BTreeMap<String, DeclaredBounds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// A parsed file together with the objects built from it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub file: SpecFile,
    pub spec: SystemSpec,
    pub witness: Option<Witness>,
}

impl Loaded {
    pub fn tolerances(&self) -> Tolerances {
        self.file.tolerances.clone().unwrap_or_default()
    }
}

pub fn load(path: &Path) -> Result<Loaded, SpecFileError> {
    let text = std::fs::read_to_string(path).map_err(|e| SpecFileError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    from_str(&text)
}

pub fn from_str(text: &str) -> Result<Loaded, SpecFileError> {
    let file: SpecFile = serde_json::from_str(text).map_err(|e| SpecFileError::Json { line: e.line(), column: e.column(), msg: e.to_string() })?;
    build(file)
}

fn check_len(name: &str, v: &Option<Vec<f64>>, n: usize) -> Result<(), SpecFileError> {
    match v {
        Some(x) if x.len() != n => Err(SpecFileError::Invalid(format!("witness.{name} has length {}, expected {n}", x.len()))),
        _ => Ok(()),
    }
}

/// Position of a coefficient id such as `a2` or `b13` (single-digit
/// indices, which covers every supported dimension).
fn coefficient_index(id: &str, n: usize) -> Option<(usize, Option<usize>)> {
    let digit = |c: char| c.to_digit(10).map(|d| d as usize).filter(|&d| d >= 1 && d <= n).map(|d| d - 1);
    let mut chars = id.chars();
    match (chars.next()?, chars.next(), chars.next(), chars.next()) {
        ('a', Some(i), None, None) => Some((digit(i)?, None)),
        ('b', Some(i), Some(j), None) => Some((digit(i)?, Some(digit(j)?))),
        _ => None,
    }
}

pub fn build(file: SpecFile) -> Result<Loaded, SpecFileError> {
    let n = file.n;
    if file.a.len() != n {
        return Err(SpecFileError::Invalid(format!("a has {} entries, expected {n}", file.a.len())));
    }
    if file.b.len() != n || file.b.iter().any(|r| r.len() != n) {
        return Err(SpecFileError::Invalid(format!("b must be a {n}x{n} array")));
    }
    let parse = |field: String, src: &str| TimeFn::parse(src).map_err(|e| SpecFileError::Expr { field, msg: e.to_string() });
    let mut a = Vec::with_capacity(n);
    for (i, s) in file.a.iter().enumerate() {
        a.push(parse(format!("a{}", i + 1), s)?);
    }
    let mut b = Vec::with_capacity(n);
    for (i, row) in file.b.iter().enumerate() {
        let mut r = Vec::with_capacity(n);
        for (j, s) in row.iter().enumerate() {
            r.push(parse(format!("b{}{}", i + 1, j + 1), s)?);
        }
        b.push(r);
    }
    for (id, bd) in &file.bounds {
        let (i, j) = coefficient_index(id, n).ok_or_else(|| SpecFileError::Invalid(format!("unknown coefficient id {id:?}")))?;
        if !(bd.inf <= bd.sup) {
            return Err(SpecFileError::Invalid(format!("bounds of {id} are not ordered")));
        }
        let f = match j {
            None => &mut a[i],
            Some(j) => &mut b[i][j],
        };
        *f = f.clone().with_declared_bounds(bd.inf, bd.sup);
    }
    let mut spec = SystemSpec::new(a, b).map_err(|e| SpecFileError::Invalid(e.to_string()))?;
    if let Some([lo, hi]) = file.window {
        spec = spec.with_window(lo, hi).map_err(|e| SpecFileError::Invalid(e.to_string()))?;
    }
    if let Some(s) = file.samples {
        spec = spec.with_samples(s);
    }
    let witness = match &file.witness {
        None => None,
        Some(w) => {
            check_len("c", &w.c, n)?;
            check_len("cbar", &w.cbar, n)?;
            check_len("d", &w.d, n)?;
            check_len("dbar", &w.dbar, n)?;
            let support = match &w.persistent {
                None => None,
                Some(p) => {
                    if p.iter().any(|&i| i == 0 || i > n) {
                        return Err(SpecFileError::Invalid(format!("witness.persistent has an index outside 1..={n}")));
                    }
                    Some(SupportSet::from_present(n, p.iter().map(|i| i - 1)))
                }
            };
            Some(Witness {
                c: w.c.clone(),
                cbar: w.cbar.clone(),
                d: w.d.clone(),
                dbar: w.dbar.clone(),
                eps: w.eps,
                theta: w.theta,
                delta: w.delta,
                support,
            })
        }
    };
    Ok(Loaded { file, spec, witness })
}
