//! Searching for constant witnesses and deciding which regime a system is in.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lp::maximize_dominance;
use super::{Checker, ConditionError, ConditionKind, ConditionReport, Witness};
use crate::model::{SupportSet, SystemSpec};

/// Grid used for `d`, `dbar` and `theta`, plus the `eps` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    /// Stride of the coarse pre-screen over the sampling grid.
    pub screen_stride: usize,
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (l, h) = (lo.ln(), hi.ln());
    (0..points).map(|k| (l + (h - l) * k as f64 / (points - 1) as f64).exp()).collect()
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { grid: log_grid(0.05, 20.0, 21), eps_grid: log_grid(1e-4, 10.0, 26), screen_stride: 97 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SearchOutcome {
    Found { witness: Witness, report: ConditionReport },
    /// The heuristic search failed; this says nothing about the condition.
    NotFound { reason: String },
    /// The conservative linear program is infeasible: no positive weights
    /// satisfy the inequality with the coefficient bounds in use.
    ProvedInfeasible { best_delta: f64 },
}

impl SearchOutcome {
    pub fn witness(&self) -> Option<&Witness> {
        match self {
            SearchOutcome::Found { witness, .. } => Some(witness),
            _ => None,
        }
    }

    fn not_found(reason: impl Into<String>) -> Self {
        SearchOutcome::NotFound { reason: reason.into() }
    }
}

/// Row `i` of the dominance matrix built from coefficient infima.
fn dominance_matrix(ch: &Checker, kind: ConditionKind) -> DMatrix<f64> {
    let n = ch.n();
    DMatrix::from_fn(n, n, |i, j| {
        let (p, q) = if kind == ConditionKind::H1 { (i, j) } else { (j, i) };
        ch.bounds().b(p, q).inf
    })
}

/// (H1) or (H2) weights by the bound-wise linear program, rescaled so that
/// the largest weight equals 1.
pub fn search_dominance(ch: &Checker, kind: ConditionKind) -> Result<SearchOutcome, ConditionError> {
    assert!(matches!(kind, ConditionKind::H1 | ConditionKind::H2));
    let m = dominance_matrix(ch, kind);
    let n = ch.n();
    let lp = maximize_dominance(&m);
    if lp.delta <= 1e-9 {
        return Ok(SearchOutcome::ProvedInfeasible { best_delta: lp.delta });
    }
    let value = |c: &[f64]| (0..n).map(|i| (0..n).map(|j| m[(i, j)] * c[j]).sum::<f64>()).fold(f64::INFINITY, f64::min);
    // a zero weight would leave its own row at a value <= 0, so a positive
    // optimum is interior
    let mut c = lp.c.clone();
    let top = c.iter().copied().fold(0.0, f64::max);
    c.iter_mut().for_each(|x| *x /= top);
    let delta = value(&c);
    if delta <= 0.0 {
        return Ok(SearchOutcome::not_found("no interior weights with positive dominance"));
    }
    let report = if kind == ConditionKind::H1 { ch.check_h1(&c, delta)? } else { ch.check_h2(&c, delta)? };
    if !report.passed() {
        return Ok(SearchOutcome::not_found("LP weights failed the grid check"));
    }
    let mut witness = Witness { delta: Some(delta), ..Default::default() };
    if kind == ConditionKind::H1 {
        witness.c = Some(c);
    } else {
        witness.cbar = Some(c);
    }
    Ok(SearchOutcome::Found { witness, report })
}

/// Minimum over the grid of a slack function, with a coarse pre-screen that
/// bails out as soon as the value drops to `floor` or below.
fn screened_min(ch: &Checker, stride: usize, floor: f64, mut slack: impl FnMut(usize) -> f64) -> f64 {
    let len = ch.samples().len();
    let mut best = f64::INFINITY;
    for k in (0..len).step_by(stride.max(1)) {
        best = best.min(slack(k));
        if best <= floor {
            return best;
        }
    }
    for k in 0..len {
        best = best.min(slack(k));
        if best <= floor {
            return best;
        }
    }
    best
}

/// Lexicographic walk over `grid^dims`, first coordinate most significant.
fn for_each_point(grid: &[f64], dims: usize, mut f: impl FnMut(&[f64]) -> bool) {
    let mut idx = vec![0usize; dims];
    let mut point: Vec<f64> = vec![grid[0]; dims];
    loop {
        if f(&point) {
            return;
        }
        let mut k = dims;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < grid.len() {
                point[k] = grid[idx[k]];
                break;
            }
            idx[k] = 0;
            point[k] = grid[0];
        }
    }
}

/// Largest grid value `x` with `a_i(t) - b_ii(t) x >= target` on the grid.
fn largest_lower(ch: &Checker, cfg: &SearchConfig, i: usize, target: f64) -> Option<f64> {
    let s = ch.samples();
    let bnd = ch.bounds();
    cfg.grid.iter().rev().copied().find(|&x| {
        if bnd.a(i).inf - bnd.b(i, i).sup * x > target {
            return true;
        }
        screened_min(ch, cfg.screen_stride, target, |k| s.a(k, i) - s.b(k, i, i) * x) > target
    })
}

/// Smallest slack of the upper chains of (A) on `support` (`theta = None`)
/// or of the upper/extinction chains of (B) with `eps = 0`.
fn upper_slack(ch: &Checker, cfg: &SearchConfig, support: &SupportSet, d: &[f64], c_theta: Option<(&[f64], f64)>) -> f64 {
    let n = ch.n();
    let level: Vec<f64> = (0..n)
        .map(|j| match c_theta {
            Some((c, theta)) => d[j] + theta * c[j],
            None if support.contains(j) => d[j],
            None => 0.0,
        })
        .collect();
    let rows: Vec<usize> = (0..n).filter(|&i| c_theta.is_some() || support.contains(i)).collect();
    let bnd = ch.bounds();
    let diag = |i: usize| if support.contains(i) { d[i] } else { 0.0 };
    let conservative = rows
        .iter()
        .map(|&i| {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| level[j] * bnd.b(i, j).inf).sum();
            diag(i) * bnd.b(i, i).inf + off - bnd.a(i).sup
        })
        .fold(f64::INFINITY, f64::min);
    if conservative > 0.0 {
        return conservative;
    }
    let s = ch.samples();
    screened_min(ch, cfg.screen_stride, 0.0, |k| {
        rows.iter()
            .map(|&i| {
                let mut v = diag(i) * s.b(k, i, i) - s.a(k, i);
                for j in 0..n {
                    if j != i {
                        v += level[j] * s.b(k, i, j);
                    }
                }
                v
            })
            .fold(f64::INFINITY, f64::min)
    })
}

fn pad(v: &[f64], support: &SupportSet, fill: f64) -> Vec<f64> {
    (0..support.n()).map(|i| if support.contains(i) { v[i] } else { fill }).collect()
}

/// Witness `(d, dbar)` for (A) on `support`.
pub fn search_a(ch: &Checker, support: &SupportSet, cfg: &SearchConfig) -> Result<SearchOutcome, ConditionError> {
    let n = ch.n();
    let present = support.present();
    let mut dbar = vec![1.0; n];
    for &i in &present {
        match largest_lower(ch, cfg, i, 0.0) {
            Some(x) => dbar[i] = x,
            None => return Ok(SearchOutcome::not_found(format!("no lower bound for species {}", i + 1))),
        }
    }
    let mut found = None;
    for_each_point(&cfg.grid, present.len(), |p| {
        let mut d = vec![1.0; n];
        for (k, &i) in present.iter().enumerate() {
            d[i] = p[k];
        }
        if upper_slack(ch, cfg, support, &d, None) > 0.0 {
            found = Some(d);
            true
        } else {
            false
        }
    });
    let Some(d) = found else { return Ok(SearchOutcome::not_found("no upper bound vector on the grid")) };
    let report = ch.check_a(&d, &dbar, support)?;
    if !report.passed() {
        return Ok(SearchOutcome::not_found("grid witness failed the full check"));
    }
    let witness = Witness {
        d: Some(pad(&d, support, 1.0)),
        dbar: Some(pad(&dbar, support, 1.0)),
        support: Some(*support),
        ..Default::default()
    };
    Ok(SearchOutcome::Found { witness, report })
}

/// Witness `(d, dbar, eps, theta)` for (B) with `I = support`, given (H1)
/// weights `c`.
pub fn search_b(ch: &Checker, support: &SupportSet, c: &[f64], cfg: &SearchConfig) -> Result<SearchOutcome, ConditionError> {
    let n = ch.n();
    let bnd = ch.bounds();
    let s = ch.samples();
    // species in J need a_j < 0 everywhere, species in I need a_i > 0
    for j in support.absent() {
        if bnd.a(j).sup >= 0.0 && (0..s.len()).any(|k| s.a(k, j) >= 0.0) {
            return Ok(SearchOutcome::not_found(format!("a{} is not negative", j + 1)));
        }
    }
    for i in support.present() {
        if largest_lower(ch, cfg, i, 0.0).is_none() {
            return Ok(SearchOutcome::not_found(format!("a{} is not positive", i + 1)));
        }
    }
    for &theta in &cfg.grid {
        let mut found = None;
        for_each_point(&cfg.grid, n, |d| {
            let slack = upper_slack(ch, cfg, support, d, Some((c, theta)));
            if slack > 0.0 {
                found = Some((d.to_vec(), slack));
                true
            } else {
                false
            }
        });
        let Some((d, up)) = found else { continue };
        let mut dbar = vec![1.0; n];
        let mut lower_min = f64::INFINITY;
        for i in support.present() {
            let x = largest_lower(ch, cfg, i, 0.5 * up).or_else(|| largest_lower(ch, cfg, i, 0.0));
            let Some(x) = x else { continue };
            dbar[i] = x;
            let slack = (0..s.len()).map(|k| s.a(k, i) - s.b(k, i, i) * x).fold(f64::INFINITY, f64::min);
            lower_min = lower_min.min(slack);
        }
        let eps_max = up.min(lower_min);
        let Some(&eps) = cfg.eps_grid.iter().rev().find(|&&e| e <= eps_max) else { continue };
        let witness = Witness {
            c: Some(c.to_vec()),
            d: Some(d),
            dbar: Some(dbar),
            eps: Some(eps),
            theta: Some(theta),
            support: Some(*support),
            ..Default::default()
        };
        let report = ch.check_b(&witness)?;
        if report.passed() {
            return Ok(SearchOutcome::Found { witness, report });
        }
    }
    Ok(SearchOutcome::not_found("no grid witness"))
}

/// Search a witness for one condition. For (B) the (H1) weights are
/// searched first.
pub fn search_witness(spec: &SystemSpec, kind: ConditionKind, support: &SupportSet) -> Result<SearchOutcome, ConditionError> {
    let ch = Checker::new(spec)?;
    let cfg = SearchConfig::default();
    match kind {
        ConditionKind::H1 | ConditionKind::H2 => search_dominance(&ch, kind),
        ConditionKind::A => search_a(&ch, support, &cfg),
        ConditionKind::B => match search_dominance(&ch, ConditionKind::H1)? {
            SearchOutcome::Found { witness, .. } => search_b(&ch, support, witness.c.as_ref().unwrap(), &cfg),
            other => Ok(other),
        },
    }
}

/// Which attractor structure the certified conditions imply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Regime {
    /// (H2) and (A): every species persists.
    Permanence,
    /// (H1) and (B) with a proper nonempty persistent set.
    Extinction { persistent: SupportSet },
    /// (H1) and (B) with every species going extinct.
    TotalExtinction,
    Uncertified,
}

impl Regime {
    /// Species that persist under the regime.
    pub fn persistent(&self, n: usize) -> Option<SupportSet> {
        match self {
            Regime::Permanence => Some(SupportSet::full(n)),
            Regime::Extinction { persistent } => Some(*persistent),
            Regime::TotalExtinction => Some(SupportSet::empty(n)),
            Regime::Uncertified => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Regime::Permanence => "permanence".into(),
            Regime::Extinction { persistent } => format!("extinction-of-{}", persistent.complement().len()),
            Regime::TotalExtinction => "total-extinction".into(),
            Regime::Uncertified => "uncertified".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeCertificate {
    pub regime: Regime,
    /// Merged constants of every passing check.
    pub witness: Witness,
    pub reports: Vec<ConditionReport>,
    /// Supports for which witness search was attempted without success.
    pub notes: Vec<String>,
}

impl RegimeCertificate {
    /// Witness for (A_S) and (H2)_S on a node support `s`, inherited from the
    /// regime witness and re-checked.
    pub fn node_witness(&self, ch: &Checker, s: &SupportSet) -> Result<Option<Witness>, ConditionError> {
        let Some(persist) = self.regime.persistent(ch.n()) else { return Ok(None) };
        if !s.is_subset_of(&persist) {
            return Ok(None);
        }
        if s.is_empty() {
            return Ok(Some(Witness { support: Some(*s), ..Default::default() }));
        }
        let (Some(d), Some(dbar)) = (&self.witness.d, &self.witness.dbar) else { return Ok(None) };
        if !ch.check_a(d, dbar, s)?.passed() {
            return Ok(None);
        }
        let sub = ch.restrict(s);
        let (cbar, delta) = match (&self.witness.cbar, self.witness.delta_h2()) {
            (Some(cbar), Some(delta)) => {
                let cb: Vec<f64> = s.present().iter().map(|&i| cbar[i]).collect();
                (cb, delta)
            }
            _ => match search_dominance(&sub, ConditionKind::H2)? {
                SearchOutcome::Found { witness, .. } => {
                    let cb = witness.cbar.unwrap();
                    let full = s.present().iter().enumerate().fold(vec![1.0; ch.n()], |mut v, (k, &i)| {
                        v[i] = cb[k];
                        v
                    });
                    return Ok(Some(Witness {
                        d: Some(d.clone()),
                        dbar: Some(dbar.clone()),
                        cbar: Some(full),
                        delta: witness.delta,
                        support: Some(*s),
                        ..Default::default()
                    }));
                }
                _ => return Ok(None),
            },
        };
        if !sub.check_h2(&cbar, delta)?.passed() {
            return Ok(None);
        }
        Ok(Some(Witness {
            d: Some(d.clone()),
            dbar: Some(dbar.clone()),
            cbar: self.witness.cbar.clone(),
            delta: Some(delta),
            support: Some(*s),
            ..Default::default()
        }))
    }
}

impl Witness {
    /// The `delta` that belongs to `cbar`. A merged regime witness may carry
    /// the (H1) constant in `delta`; the (H2) one is kept separately then.
    pub fn delta_h2(&self) -> Option<f64> {
        self.cbar.as_ref().and(self.delta)
    }
}

fn try_permanence(ch: &Checker, cfg: &SearchConfig, given: Option<&Witness>, allow_search: bool, cert: &mut RegimeCertificate) -> Result<bool, ConditionError> {
    let n = ch.n();
    let full = SupportSet::full(n);
    let h2 = match given.and_then(|w| Some((w.cbar.clone()?, w.delta?))) {
        Some((cbar, delta)) => {
            let r = ch.check_h2(&cbar, delta)?;
            let ok = r.passed();
            cert.reports.push(r);
            ok.then(|| Witness { cbar: Some(cbar), delta: Some(delta), ..Default::default() })
        }
        None if allow_search => match search_dominance(ch, ConditionKind::H2)? {
            SearchOutcome::Found { witness, report } => {
                cert.reports.push(report);
                Some(witness)
            }
            other => {
                cert.notes.push(format!("(H2) on {full}: {}", describe(&other)));
                None
            }
        },
        None => return Err(ConditionError::MissingWitness("cbar/delta")),
    };
    let Some(h2) = h2 else { return Ok(false) };
    let a = match given.and_then(|w| Some((w.d.clone()?, w.dbar.clone()?))) {
        Some((d, dbar)) => {
            let r = ch.check_a(&d, &dbar, &full)?;
            let ok = r.passed();
            cert.reports.push(r);
            ok.then(|| Witness { d: Some(d), dbar: Some(dbar), ..Default::default() })
        }
        None if allow_search => match search_a(ch, &full, cfg)? {
            SearchOutcome::Found { witness, report } => {
                cert.reports.push(report);
                Some(witness)
            }
            other => {
                cert.notes.push(format!("(A) on {full}: {}", describe(&other)));
                None
            }
        },
        None => return Err(ConditionError::MissingWitness("d/dbar")),
    };
    let Some(a) = a else { return Ok(false) };
    cert.regime = Regime::Permanence;
    cert.witness = Witness { support: Some(full), ..a }.merged(&h2);
    Ok(true)
}

fn describe(o: &SearchOutcome) -> String {
    match o {
        SearchOutcome::Found { .. } => "found".into(),
        SearchOutcome::NotFound { reason } => format!("not found ({reason})"),
        SearchOutcome::ProvedInfeasible { best_delta } => {
            format!("infeasible relative to the coefficient bounds (best delta {best_delta:.3e})")
        }
    }
}

fn try_extinction(ch: &Checker, cfg: &SearchConfig, support: &SupportSet, c: &[f64], delta: f64, given: Option<&Witness>, allow_search: bool, cert: &mut RegimeCertificate) -> Result<bool, ConditionError> {
    let mut reports = Vec::new();
    // column dominance on the persistent set
    let mut h2 = Witness::default();
    if support.len() >= 2 {
        let sub = ch.restrict(support);
        let given_h2 = given.and_then(|w| Some((w.cbar.clone()?, w.delta_h2()?)));
        match given_h2 {
            Some((cbar, d2)) => {
                let cb: Vec<f64> = support.present().iter().map(|&i| cbar[i]).collect();
                let r = sub.check_h2(&cb, d2)?;
                if !r.passed() {
                    cert.reports.push(r);
                    return Ok(false);
                }
                h2.cbar = Some(cbar);
            }
            None if allow_search => match search_dominance(&sub, ConditionKind::H2)? {
                SearchOutcome::Found { witness, .. } => {
                    let cb = witness.cbar.unwrap();
                    let mut full = vec![1.0; ch.n()];
                    for (k, &i) in support.present().iter().enumerate() {
                        full[i] = cb[k];
                    }
                    h2.cbar = Some(full);
                    h2.delta = witness.delta;
                }
                other => {
                    cert.notes.push(format!("(H2) on {support}: {}", describe(&other)));
                    return Ok(false);
                }
            },
            None => return Err(ConditionError::MissingWitness("cbar")),
        }
    }
    let b = match given.filter(|w| w.d.is_some() && w.eps.is_some() && w.theta.is_some()) {
        Some(w) => {
            let w = Witness { c: Some(c.to_vec()), support: Some(*support), ..w.clone() };
            let r = ch.check_b(&w)?;
            let ok = r.passed();
            reports.push(r);
            ok.then_some(w)
        }
        None if allow_search => match search_b(ch, support, c, cfg)? {
            SearchOutcome::Found { witness, report } => {
                reports.push(report);
                Some(witness)
            }
            other => {
                cert.notes.push(format!("(B) with I = {support}: {}", describe(&other)));
                None
            }
        },
        None => return Err(ConditionError::MissingWitness("d/dbar/eps/theta")),
    };
    let Some(b) = b else {
        cert.reports.extend(reports);
        return Ok(false);
    };
    cert.reports.extend(reports);
    cert.regime = if support.is_empty() { Regime::TotalExtinction } else { Regime::Extinction { persistent: *support } };
    let mut w = Witness { delta: Some(delta), ..b };
    if let Some(cbar) = h2.cbar {
        w.cbar = Some(cbar);
        // with cbar present `delta` must be the (H2) constant
        w.delta = Some(h2.delta.or(given.and_then(|g| g.delta_h2())).unwrap_or(delta));
    }
    cert.witness = w;
    Ok(true)
}

/// Decide the regime. A user witness, when given, is checked as is; with
/// `allow_search` the missing pieces are searched.
pub fn certify_regime(ch: &Checker, given: Option<&Witness>, allow_search: bool) -> Result<RegimeCertificate, ConditionError> {
    let cfg = SearchConfig::default();
    let n = ch.n();
    let mut cert = RegimeCertificate { regime: Regime::Uncertified, witness: Witness::default(), reports: Vec::new(), notes: Vec::new() };

    if let Some(w) = given.filter(|w| w.support.is_some_and(|s| !s.is_full())) {
        // explicit extinction witness
        let support = w.support.unwrap();
        let (c, delta) = match (&w.c, w.delta) {
            (Some(c), Some(delta)) => {
                let r = ch.check_h1(c, delta)?;
                let ok = r.passed();
                cert.reports.push(r);
                if !ok {
                    return Ok(cert);
                }
                (c.clone(), delta)
            }
            _ if allow_search => match search_dominance(ch, ConditionKind::H1)? {
                SearchOutcome::Found { witness, report } => {
                    cert.reports.push(report);
                    (witness.c.unwrap(), witness.delta.unwrap())
                }
                other => {
                    cert.notes.push(format!("(H1): {}", describe(&other)));
                    return Ok(cert);
                }
            },
            _ => return Err(ConditionError::MissingWitness("c/delta")),
        };
        try_extinction(ch, &cfg, &support, &c, delta, Some(w), allow_search, &mut cert)?;
        return Ok(cert);
    }

    if try_permanence(ch, &cfg, given, allow_search, &mut cert)? || !allow_search {
        return Ok(cert);
    }

    let (c, delta) = match search_dominance(ch, ConditionKind::H1)? {
        SearchOutcome::Found { witness, report } => {
            cert.reports.push(report);
            (witness.c.unwrap(), witness.delta.unwrap())
        }
        other => {
            cert.notes.push(format!("(H1): {}", describe(&other)));
            return Ok(cert);
        }
    };
    let mut candidates: Vec<SupportSet> = SupportSet::full(n).subsets().into_iter().filter(|s| !s.is_full()).collect();
    // largest persistent sets first, total extinction last
    candidates.sort_by_key(|s| (std::cmp::Reverse(s.len()), s.mask()));
    for s in candidates {
        if try_extinction(ch, &cfg, &s, &c, delta, None, true, &mut cert)? {
            return Ok(cert);
        }
    }
    Ok(cert)
}

/// Convenience wrapper that builds the checker.
pub fn certify_spec(spec: &SystemSpec, given: Option<&Witness>, allow_search: bool) -> Result<RegimeCertificate, ConditionError> {
    certify_regime(&Checker::new(spec)?, given, allow_search)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(a: &[&str], b: &[&[&str]]) -> SystemSpec {
        SystemSpec::parse(a, b).unwrap().with_window(-50.0, 50.0).unwrap().with_samples(2001)
    }

    #[test]
    fn dominance_search_examples() {
        let s = spec(&["3", "3"], &[&["2", "-1"], &["-1", "2"]]);
        let out = search_witness(&s, ConditionKind::H1, &SupportSet::full(2)).unwrap();
        let w = out.witness().unwrap();
        assert_eq!(w.c.as_deref(), Some(&[1.0, 1.0][..]));
        assert!((w.delta.unwrap() - 1.0).abs() < 1e-12);

        let bad = spec(&["3", "3"], &[&["1", "-2"], &["-2", "1"]]);
        assert!(matches!(
            search_witness(&bad, ConditionKind::H1, &SupportSet::full(2)).unwrap(),
            SearchOutcome::ProvedInfeasible { .. }
        ));

        let one = spec(&["1"], &[&["2+0.5*sin(t)"]]);
        let w = search_witness(&one, ConditionKind::H1, &SupportSet::full(1)).unwrap();
        let w = w.witness().unwrap();
        assert_eq!(w.c.as_deref(), Some(&[1.0][..]));
        assert!((w.delta.unwrap() - 1.5).abs() < 1e-4);
    }

    #[test]
    fn regimes_of_constant_systems() {
        let ch = |s: &SystemSpec| Checker::new(s).unwrap();
        let perm = spec(&["3", "3"], &[&["2", "-1"], &["-1", "2"]]);
        assert_eq!(certify_regime(&ch(&perm), None, true).unwrap().regime, Regime::Permanence);

        let ext = spec(&["2", "0-1"], &[&["1", "-0.1"], &["-0.1", "1"]]);
        let cert = certify_regime(&ch(&ext), None, true).unwrap();
        assert_eq!(cert.regime, Regime::Extinction { persistent: SupportSet::from_present(2, [0]) });
        assert!(ch(&ext).check_b(&cert.witness).unwrap().passed());

        let tot = spec(&["0-1", "0-1"], &[&["1", "-0.1"], &["-0.1", "1"]]);
        assert_eq!(certify_regime(&ch(&tot), None, true).unwrap().regime, Regime::TotalExtinction);

        let none = spec(&["1", "1"], &[&["1", "-2"], &["-2", "1"]]);
        assert_eq!(certify_regime(&ch(&none), None, true).unwrap().regime, Regime::Uncertified);
    }

    #[test]
    fn missing_witness_without_search() {
        let perm = spec(&["3", "3"], &[&["2", "-1"], &["-1", "2"]]);
        let err = certify_spec(&perm, None, false).unwrap_err();
        assert!(matches!(err, ConditionError::MissingWitness(_)));
        assert!(err.to_string().starts_with("witness required"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn found_witnesses_pass_their_check(
                b11 in 0.5f64..3.0, b22 in 0.5f64..3.0, b12 in -1.5f64..0.0, b21 in -1.5f64..0.0,
                a1 in -2.0f64..4.0, a2 in -2.0f64..4.0,
            ) {
                let f = |x: f64| format!("{x}");
                let (sa1, sa2) = (f(a1), f(a2));
                let bs = [f(b11), f(b12), f(b21), f(b22)];
                let s = SystemSpec::parse(&[&sa1, &sa2], &[&[&bs[0], &bs[1]], &[&bs[2], &bs[3]]])
                    .unwrap().with_window(-5.0, 5.0).unwrap().with_samples(11);
                let ch = Checker::new(&s).unwrap();
                for kind in [ConditionKind::H1, ConditionKind::H2] {
                    if let SearchOutcome::Found { witness, .. } = search_dominance(&ch, kind).unwrap() {
                        let c = witness.c.clone().or(witness.cbar.clone()).unwrap();
                        let r = if kind == ConditionKind::H1 { ch.check_h1(&c, witness.delta.unwrap()) } else { ch.check_h2(&c, witness.delta.unwrap()) };
                        prop_assert!(r.unwrap().passed());
                    }
                }
                let cfg = SearchConfig::default();
                let full = SupportSet::full(2);
                if let SearchOutcome::Found { witness, .. } = search_a(&ch, &full, &cfg).unwrap() {
                    prop_assert!(ch.check_a(witness.d.as_ref().unwrap(), witness.dbar.as_ref().unwrap(), &full).unwrap().passed());
                }
                if let SearchOutcome::Found { witness: h1, .. } = search_dominance(&ch, ConditionKind::H1).unwrap() {
                    for mask in 0..3u32 {
                        let sup = SupportSet::from_mask(2, mask);
                        if let SearchOutcome::Found { witness, .. } = search_b(&ch, &sup, h1.c.as_ref().unwrap(), &cfg).unwrap() {
                            prop_assert!(ch.check_b(&witness).unwrap().passed());
                        }
                    }
                }
            }
        }
    }
}
