//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints its own PASS/FAIL line; the process fails if any
//! criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lvfa::conditions::{certify_spec, search_witness, ConditionKind, RegimeCertificate, SearchOutcome};
use lvfa::dichotomy::{build_certificate, linearize, DichotomyConfig};
use lvfa::json;
use lvfa::odeint::{integrate, integrate_with, LvOptions};
use lvfa::skeleton::extinction::{box_exit, extinction_envelope, BoxFamily};
use lvfa::skeleton::{build_skeleton, classify_initial, detect_backward_unbounded, SkeletonConfig};
use lvfa::specfile::{self, Loaded};
use lvfa::trajectories::{compute_star, estimate_contraction, list_complete_solutions, PullbackConfig};
use lvfa::{SupportSet, SystemSpec};

type Outcome = Result<String, String>;

fn bundled(name: &str) -> Loaded {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name);
    specfile::load(&p).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn certified(name: &str) -> (Loaded, RegimeCertificate) {
    let l = bundled(name);
    let cert = certify_spec(&l.spec, l.witness.as_ref(), true).unwrap();
    (l, cert)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

const EXTINCTION: [&str; 5] = ["ext2d.json", "ext3d_one.json", "ext3d_two.json", "total2d.json", "total3d.json"];

fn skeleton_counts() -> Outcome {
    let cases: [(&str, usize, usize); 7] = [
        ("perm2d.json", 4, 5),
        ("ext2d.json", 2, 1),
        ("perm3d.json", 8, 19),
        ("ext3d_one.json", 4, 5),
        ("ext3d_two.json", 2, 1),
        ("total2d.json", 1, 0),
        ("total3d.json", 1, 0),
    ];
    let mut seen = Vec::new();
    let mut worst_fwd: f64 = 0.0;
    for (name, nodes, edges) in cases {
        let (l, cert) = certified(name);
        let g = build_skeleton(&l.spec, &cert, &SkeletonConfig::default()).map_err(|e| format!("{name}: {e}"))?;
        if (g.node_count(), g.edge_count()) != (nodes, edges) {
            return Err(format!("{name}: {} nodes / {} edges, expected {nodes} / {edges}", g.node_count(), g.edge_count()));
        }
        if let Some(v) = g.shape_violations().first() {
            return Err(format!("{name}: {v}"));
        }
        for e in &g.edges {
            if !(e.forward_error <= 1e-5 && e.backward_error <= 1e-4 && e.backward_rate > 0.0 && e.t_end - e.seed_time >= 40.0) {
                return Err(format!("{name}: edge {} -> {} has errors {:e}/{:e}, rate {}", e.source, e.target, e.forward_error, e.backward_error, e.backward_rate));
            }
            worst_fwd = worst_fwd.max(e.forward_error);
        }
        seen.push(format!("{nodes}/{edges}"));
    }
    Ok(format!("counts {}; worst forward error {worst_fwd:.2e}", seen.join(", ")))
}

fn forward_attraction() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for name in ["perm2d.json", "perm3d.json"] {
        let (l, cert) = certified(name);
        let n = l.spec.n();
        let d = cert.witness.d.clone().ok_or("witness without d")?;
        let star = compute_star(&l.spec, &SupportSet::full(n), &d, cert.witness.dbar.as_ref().unwrap(), (0.0, 60.0), &PullbackConfig::default())
            .map_err(|e| e.to_string())?;
        let target = star.at(60.0).unwrap();
        for _ in 0..20 {
            let u0: Vec<f64> = d.iter().map(|di| 2.0 * di * (1.0 - rng.random::<f64>())).collect();
            let g = integrate(&l.spec, 0.0, &u0, 60.0, 1e-10, 1e-14).map_err(|e| e.to_string())?;
            let e = dist(g.last(), &target);
            worst = worst.max(e);
            if e > 1e-5 {
                return Err(format!("{name}: start {u0:?} ends {e:e} from u*"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 10.0 {
        return Err(format!("took {secs:.1} s"));
    }
    Ok(format!("40 starts, worst distance {worst:.2e}, {secs:.2} s"))
}

fn contraction_rate() -> Outcome {
    let mut parts = Vec::new();
    for name in ["perm2d.json", "perm3d.json"] {
        let (l, cert) = certified(name);
        let w = &cert.witness;
        let (cbar, delta) = (w.cbar.clone().ok_or("no cbar")?, w.delta_h2().ok_or("no delta")?);
        let (d, dbar) = (w.d.clone().unwrap(), w.dbar.clone().unwrap());
        let est = estimate_contraction(&l.spec, &dbar, &d, 0.0, 30.0, Some((&cbar, delta)), 1e-11).map_err(|e| e.to_string())?;
        let bound = delta * est.sigma1 - 0.1;
        if est.degenerate || !(est.fitted_decay >= bound) {
            return Err(format!("{name}: fitted {} < delta sigma1 - 0.1 = {bound}", est.fitted_decay));
        }
        parts.push(format!("{name} fitted {:.3} >= {:.3}", est.fitted_decay, bound));
    }
    Ok(parts.join("; "))
}

fn random_starts(rng: &mut ChaCha8Rng, upper: &[f64], k: usize) -> Vec<Vec<f64>> {
    (0..k).map(|_| upper.iter().map(|u| u * (1.0 - rng.random::<f64>())).collect()).collect()
}

fn extinction_envelopes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut latest: f64 = 0.0;
    for name in EXTINCTION {
        let (l, cert) = certified(name);
        let boxes = BoxFamily::from_witness(l.spec.n(), &cert.witness).map_err(|e| format!("{name}: {e}"))?;
        let upper: Vec<f64> = boxes.corner(3.0).iter().map(|x| 2.0 * x).collect();
        for u0 in random_starts(&mut rng, &upper, 10) {
            let rep = extinction_envelope(&l.spec, &boxes, &u0, 0.0, 60.0, 0.01).map_err(|e| e.to_string())?;
            let ts = rep.entry_time.ok_or_else(|| format!("{name}: start {u0:?} never enters the box"))?;
            if rep.worst_ratio > 1.0 + 1e-6 {
                return Err(format!("{name}: envelope ratio {} after t* = {ts}", rep.worst_ratio));
            }
            worst = worst.max(rep.worst_ratio);
            latest = latest.max(ts);
        }
    }
    Ok(format!("50 starts, worst ratio {worst:.4}, latest t* {latest:.2}"))
}

fn box_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut total = 0;
    for name in EXTINCTION {
        let (l, cert) = certified(name);
        let boxes = BoxFamily::from_witness(l.spec.n(), &cert.witness).map_err(|e| format!("{name}: {e}"))?;
        for k in [0.0, 1.0, 3.0] {
            for u0 in random_starts(&mut rng, &boxes.corner(k), 100) {
                if let Some(t) = box_exit(&l.spec, &boxes, k, &u0, 0.0, 100.0, 0.01).map_err(|e| e.to_string())? {
                    return Err(format!("{name}: start {u0:?} leaves A_{k} at t = {t}"));
                }
                total += 1;
            }
        }
    }
    Ok(format!("{total} starts, zero violations"))
}

fn backward_unboundedness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut slowest: f64 = 0.0;
    for name in EXTINCTION {
        let (l, cert) = certified(name);
        let upper: Vec<f64> = cert.witness.d.clone().unwrap().iter().map(|x| 2.0 * x).collect();
        for u0 in random_starts(&mut rng, &upper, 20) {
            match detect_backward_unbounded(&l.spec, &u0, 0.0, 1e3, 500.0).map_err(|e| e.to_string())? {
                Some(t) => slowest = slowest.max(-t),
                None => return Err(format!("{name}: start {u0:?} does not escape within 500")),
            }
        }
    }
    Ok(format!("100 starts escape, longest backward time {slowest:.2}"))
}

fn dichotomy_certificates() -> Outcome {
    let cfg = DichotomyConfig::default();
    let mut count = 0;
    let mut worst = (0.0f64, 0.0f64);
    for name in ["perm2d.json", "perm3d.json"] {
        let (l, cert) = certified(name);
        let n = l.spec.n();
        let (sols, failures) = list_complete_solutions(&l.spec, &cert, (-90.0, 90.0), &PullbackConfig::default()).map_err(|e| e.to_string())?;
        if !failures.is_empty() {
            return Err(format!("{name}: {failures:?}"));
        }
        for base in &sols {
            let lin = linearize(&l.spec, base, &SupportSet::full(n)).map_err(|e| e.to_string())?;
            let c = build_certificate(&lin, (-10.0, 10.0), &cfg).map_err(|e| format!("{name} base {}: {e}", base.support))?;
            let dims = (base.support.len(), n - base.support.len());
            if !c.passed(&cfg) || (c.stable_dim, c.unstable_dim) != dims {
                return Err(format!(
                    "{name} base {}: invariance {:e}, projector {:e}, margins {:e}/{:e}, dims ({}, {})",
                    base.support, c.residual_invariance, c.projector_residual, c.bound_margin_stable, c.bound_margin_unstable, c.stable_dim, c.unstable_dim
                ));
            }
            worst = (worst.0.max(c.residual_invariance), worst.1.max(c.projector_residual));
            count += 1;
        }
    }
    Ok(format!("{count} base solutions, worst invariance {:.1e}, worst idempotency {:.1e}", worst.0, worst.1))
}

/// Adaptive Simpson rule.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

fn pullback_oracle() -> Outcome {
    let l = bundled("logistic1d.json");
    // v = 1/u solves v' = 1 - (2 + sin t) v, so
    // v(0) = ∫_{-60}^0 exp(-∫_s^0 (2 + sin r) dr) ds = ∫ exp(2s + 1 - cos s) ds
    let v0 = simpson(&|s: f64| (2.0 * s + 1.0 - s.cos()).exp(), -60.0, 0.0, 1e-15);
    let oracle = 1.0 / v0;
    let cfg = PullbackConfig::default();
    let star = compute_star(&l.spec, &SupportSet::full(1), &[3.0], &[1.0], (-5.0, 5.0), &cfg).map_err(|e| e.to_string())?;
    let u0 = star.at(0.0).unwrap()[0];
    if (u0 - oracle).abs() > 1e-6 {
        return Err(format!("u*(0) = {u0}, oracle {oracle}"));
    }
    // independent doubling check: pull back from d over 40 and 80
    let ts: Vec<f64> = (0..=100).map(|i| -5.0 + 0.1 * i as f64).collect();
    let g40 = integrate(&l.spec, -45.0, &[3.0], 5.0, 1e-12, 1e-15).map_err(|e| e.to_string())?;
    let g80 = integrate(&l.spec, -85.0, &[3.0], 5.0, 1e-12, 1e-15).map_err(|e| e.to_string())?;
    let change = ts.iter().map(|&t| (g40.at(t).unwrap()[0] - g80.at(t).unwrap()[0]).abs()).fold(0.0, f64::max);
    if !(change < 1e-8 && star.convergence_residual < 1e-8) {
        return Err(format!("doubling change {change:e}, stored residual {:e}", star.convergence_residual));
    }
    Ok(format!("u*(0) = {u0:.12}, |u*(0) - oracle| = {:.1e}, doubling change {change:.1e}", (u0 - oracle).abs()))
}

fn logistic_classification() -> Outcome {
    let spec = SystemSpec::parse(&["1"], &[&["1"]]).unwrap();
    let cfg = SkeletonConfig::default();
    let cert = certify_spec(&spec, None, true).unwrap();
    let (sols, _) = list_complete_solutions(&spec, &cert, cfg.window, &cfg.pullback).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut counts = [0usize; 4];
    for k in 0..200 {
        let u0 = match k % 10 {
            0 => 0.0,
            1 => 1.0,
            _ => 3.0 * (1.0 - rng.random::<f64>()),
        };
        // closed form: u(t) = u0 / (u0 + (1 - u0) e^{-t})
        let expect = if u0 == 0.0 {
            'a'
        } else if u0 == 1.0 {
            'b'
        } else if u0 < 1.0 {
            'c'
        } else {
            'd'
        };
        let got = classify_initial(&spec, cert.regime, &[u0], 0.0, &sols, &cfg.classify).map_err(|e| e.to_string())?;
        if got.case != Some(expect) {
            return Err(format!("u0 = {u0}: got {:?}, expected {expect}", got.case));
        }
        counts[(expect as u8 - b'a') as usize] += 1;
    }
    Ok(format!("200 starts, cases a/b/c/d = {}/{}/{}/{}, zero mismatches", counts[0], counts[1], counts[2], counts[3]))
}

fn integrator_order() -> Outcome {
    let spec = SystemSpec::parse(&["1"], &[&["1"]]).unwrap();
    let exact = |t: f64| 0.5 / (0.5 + 0.5 * (-t).exp());
    let err = |h: f64| -> Result<f64, String> {
        let opts = LvOptions { fixed_step: Some(h), ..LvOptions::tol(1e-6, 1e-9) };
        let sol = integrate_with(&spec, 0.0, &[0.5], 4.0, &opts, |_, _| true).map_err(|e| e.to_string())?;
        Ok((sol.grid.last()[0] - exact(4.0)).abs())
    };
    let hs = [0.4, 0.2, 0.1, 0.05];
    let errs = hs.iter().map(|&h| err(h)).collect::<Result<Vec<_>, _>>()?;
    let factors: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    if factors.iter().any(|&f| f < 8.0) {
        return Err(format!("error factors {factors:?}"));
    }
    // cocycle on a non-autonomous system
    let s2 = SystemSpec::parse(&["2+sin(t)", "1+0.5*cos(t)"], &[&["1.5", "-0.3"], &["-0.4", "1.2+0.2*sin(2*t)"]]).unwrap();
    let rtol = 1e-9;
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..20 {
        let u0 = [0.1 + 4.0 * rng.random::<f64>(), 0.1 + 4.0 * rng.random::<f64>()];
        let (t0, d1, d2) = (-5.0 + 10.0 * rng.random::<f64>(), 0.5 + 5.0 * rng.random::<f64>(), 0.5 + 5.0 * rng.random::<f64>());
        let direct = integrate(&s2, t0, &u0, t0 + d1 + d2, rtol, 1e-12).map_err(|e| e.to_string())?;
        let mid = integrate(&s2, t0, &u0, t0 + d1, rtol, 1e-12).map_err(|e| e.to_string())?;
        let two = integrate(&s2, t0 + d1, mid.last(), t0 + d1 + d2, rtol, 1e-12).map_err(|e| e.to_string())?;
        for i in 0..2 {
            worst = worst.max((direct.last()[i] - two.last()[i]).abs() / direct.last()[i].abs().max(1.0));
        }
    }
    if worst > 10.0 * rtol {
        return Err(format!("cocycle residual {worst:e} above {:e}", 10.0 * rtol));
    }
    let f: Vec<String> = factors.iter().map(|f| format!("{f:.1}")).collect();
    Ok(format!("error factors per halving {}; cocycle residual {worst:.1e}", f.join(", ")))
}

fn scale_invariance() -> Outcome {
    let mut lines = Vec::new();
    for name in ["perm2d.json", "ext2d.json", "perm3d.json"] {
        let l = bundled(name);
        let n = l.spec.n();
        let SearchOutcome::Found { witness, report } = search_witness(&l.spec, ConditionKind::H1, &SupportSet::full(n)).map_err(|e| e.to_string())? else {
            return Err(format!("{name}: no (H1) witness"));
        };
        let (c, delta) = (witness.c.clone().unwrap(), witness.delta.unwrap());
        for lambda in [0.1, 10.0] {
            let cl: Vec<f64> = c.iter().map(|x| lambda * x).collect();
            let r = lvfa::conditions::check_h1(&l.spec, &cl, lambda * delta).map_err(|e| e.to_string())?;
            if r.verdict != report.verdict {
                return Err(format!("{name}: verdict {:?} at lambda {lambda}, {:?} at 1", r.verdict, report.verdict));
            }
        }
        let a = json::to_string(&certify_spec(&l.spec, None, true).unwrap()).unwrap();
        let b = json::to_string(&certify_spec(&l.spec, None, true).unwrap()).unwrap();
        if a != b {
            return Err(format!("{name}: certificate JSON differs between runs"));
        }
        lines.push(format!("{name} {:?}", report.verdict));
    }
    Ok(format!("verdicts unchanged for lambda in {{0.1, 10}} ({}); JSON byte-identical", lines.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("skeleton counts", skeleton_counts),
        ("forward attraction", forward_attraction),
        ("contraction rate", contraction_rate),
        ("extinction envelope", extinction_envelopes),
        ("box invariance", box_invariance),
        ("backward unboundedness", backward_unboundedness),
        ("dichotomy certificates", dichotomy_certificates),
        ("pullback oracle", pullback_oracle),
        ("1-D classification", logistic_classification),
        ("integrator order and cocycle", integrator_order),
        ("scale invariance and determinism", scale_invariance),
    ];
    // a bare `cargo test -- --list` should not run the suite
    if std::env::args().any(|a| a == "--list") {
        for (k, (name, _)) in criteria.iter().enumerate() {
            println!("criterion {}: {name}: test", k + 1);
        }
        return;
    }
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.1} s): {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1} s): {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
