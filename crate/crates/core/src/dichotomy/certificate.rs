//! Fitted dichotomy constants and their verification on a grid.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::linking::{linking_operators, Permuted};
use super::subspace::{principal_angle, projection_at, Subspaces};
use super::{norm2, to_rows, DichotomyConfig, DichotomyError, LinearSystem, LinearizedSystem};
use crate::model::SupportSet;
use crate::trajectories::linear_fit;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionSample {
    pub t: f64,
    pub p: Vec<Vec<f64>>,
}

/// Comparison of the projection assembled from the linking operators with
/// the one from the subspace method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkingCheck {
    pub t: f64,
    pub l_plus: Vec<Vec<f64>>,
    pub l_minus: Vec<Vec<f64>>,
    pub tail_plus: f64,
    pub tail_minus: f64,
    pub horizon: f64,
    /// Largest principal angle between the ranges and between the kernels.
    pub max_angle: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyCertificate {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<SupportSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ambient: Option<SupportSet>,
    pub window: (f64, f64),
    /// Grid time closest to 0, where `p0` is taken.
    pub t_ref: f64,
    pub p0: Vec<Vec<f64>>,
    pub stable_dim: usize,
    pub unstable_dim: usize,
    pub k_const: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Regression slopes before shrinking; `None` when the inequality is
    /// vacuous (zero projection).
    pub alpha_fit: Option<f64>,
    pub beta_fit: Option<f64>,
    /// Max over grid pairs of `|P(t)M(t,s) - M(t,s)P(s)|`, relative to
    /// `|M(t,s)| max(1, |P(s)|, |P(t)|)`.
    pub residual_invariance: f64,
    /// Max of `|P^2 - P| / max(1, |P|)` over the samples.
    pub projector_residual: f64,
    /// Worst `|M(t,s)P(s)| - slack k e^{-alpha(t-s)}` on the fine grid.
    pub bound_margin_stable: f64,
    /// Worst `|M(t,s)(I-P(s))| - slack k e^{beta(t-s)}` on the fine grid.
    pub bound_margin_unstable: f64,
    pub p_norm_max: f64,
    pub horizon: f64,
    pub exponents: Vec<f64>,
    pub samples: Vec<ProjectionSample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linking: Option<LinkingCheck>,
    pub notes: Vec<String>,
    #[serde(skip)]
    fine: Vec<(f64, DMatrix<f64>)>,
}

impl DichotomyCertificate {
    pub fn passed(&self, cfg: &DichotomyConfig) -> bool {
        self.residual_invariance <= cfg.invariance_tol
            && self.projector_residual <= cfg.projector_tol
            && self.bound_margin_stable <= 0.0
            && self.bound_margin_unstable <= 0.0
            && self.alpha > 0.0
            && self.beta > 0.0
            && self.k_const >= 1.0
    }

    /// Projection on the verification grid point nearest to `t`.
    pub fn projection_near(&self, t: f64) -> Option<&DMatrix<f64>> {
        self.fine.iter().min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs())).map(|x| &x.1)
    }

    pub fn fine_samples(&self) -> &[(f64, DMatrix<f64>)] {
        &self.fine
    }
}

/// Certificate for a linearized (LV-n) system; adds the linking-operator
/// cross-check to [`certify`].
pub fn build_certificate(lin: &LinearizedSystem, window: (f64, f64), cfg: &DichotomyConfig) -> Result<DichotomyCertificate, DichotomyError> {
    let mut cert = certify(lin, window, cfg)?;
    cert.support = Some(lin.base().support);
    cert.ambient = Some(SupportSet::from_present(lin.spec().n(), lin.coords().iter().copied()));
    cert.notes.extend(lin.warnings.iter().cloned());
    if !cfg.linking {
        return Ok(cert);
    }
    let k = lin.present_dim();
    let m = lin.dim() - k;
    if cert.stable_dim != k || cert.unstable_dim != m {
        cert.notes.push(format!(
            "block projections are not (I, 0): stable dimension {} against {} present species; linking check skipped",
            cert.stable_dim, k
        ));
        return Ok(cert);
    }
    match linking_operators(&Permuted(lin), k, cert.t_ref, cfg) {
        Ok(ops) => {
            let p_link = lin.unpermute(&ops.projection());
            let n = lin.dim();
            // kernel of [[I, L], [0, 0]] is spanned by the columns of [-L; I]
            let mut ker = DMatrix::zeros(n, m);
            for c in 0..m {
                for r in 0..k {
                    ker[(lin.order()[r], c)] = -ops.l_minus[(r, c)];
                }
                ker[(lin.order()[k + c], c)] = 1.0;
            }
            let mut ran = DMatrix::zeros(n, k);
            for r in 0..k {
                ran[(lin.order()[r], r)] = 1.0;
            }
            let p0 = DMatrix::from_fn(n, n, |r, c| cert.p0[r][c]);
            let (_, sub) = projection_at(lin, cert.t_ref, cfg)?;
            let angle = principal_angle(&ran, &sub.stable).max(principal_angle(&ker, &sub.unstable));
            let agrees = angle <= 1e-6;
            if !agrees {
                cert.notes.push(format!(
                    "linking quadrature disagrees with the subspace method (angle {angle:e}, |P_link - P0| = {:e}); subspace result kept",
                    (&p_link - &p0).abs().max()
                ));
            }
            cert.linking = Some(LinkingCheck {
                t: ops.t0,
                l_plus: to_rows(&ops.l_plus),
                l_minus: to_rows(&ops.l_minus),
                tail_plus: ops.tail_plus,
                tail_minus: ops.tail_minus,
                horizon: ops.horizon,
                max_angle: angle,
                agrees,
            });
        }
        Err(DichotomyError::Divergence { exponent }) => {
            cert.notes.push(format!("linking integral diverges (tail exponent {exponent}); certificate built from subspaces alone"));
        }
        Err(e) => return Err(e),
    }
    Ok(cert)
}

/// Build and verify a dichotomy certificate on `window` for any linear
/// system.
pub fn certify(sys: &dyn LinearSystem, window: (f64, f64), cfg: &DichotomyConfig) -> Result<DichotomyCertificate, DichotomyError> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(DichotomyError::Argument(format!("empty window [{lo}, {hi}]")));
    }
    let r = (cfg.sample_dt / cfg.fine_dt).round().max(1.0) as usize;
    let nc = ((hi - lo) / cfg.sample_dt).round().max(1.0) as usize;
    let nf = nc * r;
    let dt = cfg.sample_dt / r as f64;
    let coarse_t: Vec<f64> = (0..=nc).map(|i| lo + i as f64 * cfg.sample_dt).collect();
    let fine_t: Vec<f64> = (0..=nf).map(|j| lo + j as f64 * dt).collect();
    let n = sys.dim();

    let subs: Vec<(DMatrix<f64>, Subspaces)> = coarse_t.par_iter().map(|&t| projection_at(sys, t, cfg)).collect::<Result<_, _>>()?;
    let (s_dim, u_dim) = (subs[0].1.stable_dim(), subs[0].1.unstable_dim());
    if let Some((_, bad)) = subs.iter().find(|(_, s)| s.stable_dim() != s_dim) {
        return Err(DichotomyError::DimensionJump(format!(
            "stable dimension {} at t = {} but {} at t = {}",
            s_dim,
            coarse_t[0],
            bad.stable_dim(),
            bad.t
        )));
    }

    // one-step propagators on the fine grid, in both directions
    let props: Vec<(DMatrix<f64>, DMatrix<f64>)> = (0..nf)
        .into_par_iter()
        .map(|j| Ok((sys.fundamental(fine_t[j + 1], fine_t[j], cfg.rtol)?, sys.fundamental(fine_t[j], fine_t[j + 1], cfg.rtol)?)))
        .collect::<Result<_, DichotomyError>>()?;

    // projections on the fine grid by conjugation from the coarse sample on the left
    let mut fine_p: Vec<DMatrix<f64>> = Vec::with_capacity(nf + 1);
    for j in 0..=nf {
        let i = j / r;
        let m = j % r;
        if m == 0 {
            fine_p.push(subs[i].0.clone());
            continue;
        }
        let mut fwd = DMatrix::identity(n, n);
        let mut bwd = DMatrix::identity(n, n);
        for q in i * r..j {
            fwd = &props[q].0 * fwd;
            bwd *= &props[q].1;
        }
        fine_p.push(&fwd * &subs[i].0 * &bwd);
    }
    let eye = DMatrix::<f64>::identity(n, n);

    let projector_residual = fine_p
        .iter()
        .map(|p| (p * p - p).abs().max() / norm2(p).max(1.0))
        .fold(0.0, f64::max);
    let p_norm_max = fine_p.iter().map(norm2).fold(0.0, f64::max);

    // invariance between independently computed coarse projections
    let max_gap = cfg.gaps.iter().copied().fold(0.0, f64::max);
    let mut residual_invariance: f64 = 0.0;
    for i in 0..=nc {
        for &g in &cfg.gaps {
            let steps = (g / cfg.sample_dt).round() as usize;
            if steps == 0 || i + steps > nc || ((steps as f64) * cfg.sample_dt - g).abs() > 1e-9 {
                continue;
            }
            let mut mts = DMatrix::identity(n, n);
            for q in i * r..(i + steps) * r {
                mts = &props[q].0 * mts;
            }
            let (ps, pt) = (&subs[i].0, &subs[i + steps].0);
            let res = norm2(&(pt * &mts - &mts * ps));
            let scale = norm2(&mts) * norm2(ps).max(norm2(pt)).max(1.0);
            residual_invariance = residual_invariance.max(res / scale);
        }
    }

    // norms of the projected propagators from every fine start, up to the
    // largest gap; forward for P, backward for I - P
    let max_steps = (max_gap / dt).round() as usize;
    let fwd_norms: Vec<Vec<f64>> = (0..=nf)
        .into_par_iter()
        .map(|j| {
            let mut phi = fine_p[j].clone();
            let mut out = vec![norm2(&phi)];
            for q in j..(j + max_steps).min(nf) {
                phi = &fine_p[q + 1] * (&props[q].0 * phi);
                out.push(norm2(&phi));
            }
            out
        })
        .collect();
    let bwd_norms: Vec<Vec<f64>> = (0..=nf)
        .into_par_iter()
        .map(|j| {
            let mut psi = &eye - &fine_p[j];
            let mut out = vec![norm2(&psi)];
            for q in (j.saturating_sub(max_steps)..j).rev() {
                psi = (&eye - &fine_p[q]) * (&props[q].1 * psi);
                out.push(norm2(&psi));
            }
            out
        })
        .collect();

    let fit = |norms: &[Vec<f64>]| -> Option<f64> {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for i in 0..=nc {
            let row = &norms[i * r];
            for &g in &cfg.gaps {
                let steps = (g / dt).round() as usize;
                if let Some(&v) = row.get(steps) {
                    if steps > 0 && v > 1e-300 {
                        xs.push(g);
                        ys.push(v.ln());
                    }
                }
            }
        }
        if xs.len() < 2 || xs.iter().all(|&x| x == xs[0]) {
            return None;
        }
        Some(-linear_fit(&xs, &ys).0)
    };
    let alpha_fit = if s_dim > 0 { fit(&fwd_norms) } else { None };
    let beta_fit = if u_dim > 0 { fit(&bwd_norms) } else { None };
    let mut notes = Vec::new();
    let (alpha, beta) = match (alpha_fit, beta_fit) {
        (Some(a), Some(b)) => (cfg.shrink * a, cfg.shrink * b),
        (Some(a), None) => {
            notes.push("unstable space is trivial; beta copies alpha".into());
            (cfg.shrink * a, cfg.shrink * a)
        }
        (None, Some(b)) => {
            notes.push("stable space is trivial; alpha copies beta".into());
            (cfg.shrink * b, cfg.shrink * b)
        }
        (None, None) => return Err(DichotomyError::Argument("window too short to fit exponents".into())),
    };

    // k from the coarse pairs, every coarse multiple up to the largest gap
    let coarse_k = |norms: &[Vec<f64>], rate: f64| {
        let mut k: f64 = 1.0;
        for i in 0..=nc {
            for (steps, &v) in norms[i * r].iter().enumerate() {
                if steps % r == 0 {
                    k = k.max(v * (rate * steps as f64 * dt).exp());
                }
            }
        }
        k
    };
    let k_const = coarse_k(&fwd_norms, alpha).max(coarse_k(&bwd_norms, beta));

    let margin = |norms: &[Vec<f64>], rate: f64| {
        let mut worst = f64::NEG_INFINITY;
        for row in norms {
            for (steps, &v) in row.iter().enumerate() {
                worst = worst.max(v - cfg.slack * k_const * (-rate * steps as f64 * dt).exp());
            }
        }
        worst
    };
    let bound_margin_stable = margin(&fwd_norms, alpha);
    let bound_margin_unstable = margin(&bwd_norms, beta);

    if projector_residual > cfg.projector_tol {
        return Err(DichotomyError::IllConditioned { residual: projector_residual });
    }
    if residual_invariance > cfg.invariance_tol {
        notes.push(format!("invariance residual {residual_invariance:e} exceeds {:e}", cfg.invariance_tol));
    }

    let iref = coarse_t
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|x| x.0)
        .unwrap();
    let horizon = subs.iter().map(|s| s.1.horizon).fold(0.0, f64::max);
    Ok(DichotomyCertificate {
        support: None,
        ambient: None,
        window: (lo, coarse_t[nc]),
        t_ref: coarse_t[iref],
        p0: to_rows(&subs[iref].0),
        stable_dim: s_dim,
        unstable_dim: u_dim,
        k_const,
        alpha,
        beta,
        alpha_fit,
        beta_fit,
        residual_invariance,
        projector_residual,
        bound_margin_stable,
        bound_margin_unstable,
        p_norm_max,
        horizon,
        exponents: subs[iref].1.forward_exponents.clone(),
        samples: coarse_t.iter().zip(&subs).map(|(&t, s)| ProjectionSample { t, p: to_rows(&s.0) }).collect(),
        linking: None,
        notes,
        fine: fine_t.into_iter().zip(fine_p).collect(),
    })
}
