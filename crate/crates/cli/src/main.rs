use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use lvfa::conditions::{certify_spec, search_witness, Checker, ConditionKind, ConditionReport, Regime, SearchOutcome, Witness};
use lvfa::dichotomy::{build_certificate, linearize, DichotomyConfig};
use lvfa::skeleton::{build_skeleton, classify_initial, trace_connection, Outcome, SkeletonConfig, SkeletonError, SkeletonGraph};
use lvfa::specfile::{self, Loaded};
use lvfa::trajectories::{list_complete_solutions, CompleteSolution};
use lvfa::{json, SupportSet};

/// Attractor structure of non-autonomous cooperative Lotka-Volterra systems.
#[derive(Parser)]
#[command(name = "lvfa", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Global {
    /// Output directory for files.
    #[arg(short = 'o', long = "out", global = true, default_value = ".")]
    out: PathBuf,
    /// Time window (checking window for `check`, computation window otherwise).
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true, global = true)]
    window: Option<Vec<f64>>,
    /// Main tolerance of the subcommand.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for random sampling.
    #[arg(long, default_value_t = 42, global = true)]
    seed: u64,
    /// Only use the witness given in the spec file.
    #[arg(long, global = true)]
    no_search: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check coefficient conditions, or certify the regime when no condition is named.
    Check {
        spec: PathBuf,
        #[arg(long)]
        h1: bool,
        #[arg(long)]
        h2: bool,
        #[arg(long)]
        a: bool,
        #[arg(long)]
        b: bool,
        /// Support for (A) and (B), as 1-based indices such as `1,2`.
        #[arg(long)]
        support: Option<String>,
    },
    /// Compute the complete bounded solution on a support.
    Star {
        spec: PathBuf,
        #[arg(long)]
        support: Option<String>,
        /// Sampling step of the CSV output.
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
    },
    /// Certify the exponential dichotomy of a linearization.
    Dichotomy {
        spec: PathBuf,
        /// Support of the base solution.
        #[arg(long)]
        support: Option<String>,
        /// Species kept in the linearization (default: all).
        #[arg(long)]
        ambient: Option<String>,
    },
    /// Build the skeleton graph of complete solutions and connections.
    Skeleton {
        spec: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
    },
    /// Classify the solution through an initial condition.
    Classify {
        spec: PathBuf,
        /// Initial state, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        u0: String,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        t0: f64,
    },
    /// Trace one connection between complete solutions.
    Trace {
        spec: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
    },
}

/// Failure that maps to an exit code.
enum Failure {
    Usage(String),
    Fail(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Res = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(k) = std::env::var("LVFA_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Fail(msg)) => {
            eprintln!("lvfa: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("lvfa: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Res {
    let g = &cli.global;
    match &cli.cmd {
        Cmd::Check { spec, h1, h2, a, b, support } => cmd_check(g, spec, [*h1, *h2, *a, *b], support.as_deref()),
        Cmd::Star { spec, support, dt } => cmd_star(g, spec, support.as_deref(), *dt),
        Cmd::Dichotomy { spec, support, ambient } => cmd_dichotomy(g, spec, support.as_deref(), ambient.as_deref()),
        Cmd::Skeleton { spec, dt } => cmd_skeleton(g, spec, *dt),
        Cmd::Classify { spec, u0, t0 } => cmd_classify(g, spec, u0, *t0),
        Cmd::Trace { spec, from, to, dt } => cmd_trace(g, spec, from, to, *dt),
    }
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    specfile::load(path).map_err(|e| Failure::Usage(e.to_string()))
}

fn window(g: &Global) -> Option<(f64, f64)> {
    g.window.as_ref().map(|w| (w[0], w[1]))
}

/// `1,3` style lists; `{}`, `0` and the empty string mean the empty set.
fn parse_support(s: &str, n: usize) -> Result<SupportSet, Failure> {
    let body = s.trim().trim_start_matches('{').trim_end_matches('}').trim();
    if body.is_empty() || body == "0" {
        return Ok(SupportSet::empty(n));
    }
    let mut idx = Vec::new();
    for part in body.split(',') {
        let i: usize = part.trim().parse().map_err(|_| Failure::Usage(format!("bad species index {part:?}")))?;
        if i == 0 || i > n {
            return Err(Failure::Usage(format!("species index {i} outside 1..={n}")));
        }
        idx.push(i - 1);
    }
    Ok(SupportSet::from_present(n, idx))
}

fn emit<T: Serialize>(value: &T) -> Result<(), Failure> {
    let s = json::to_string(value)?;
    std::io::stdout().write_all(s.as_bytes())?;
    Ok(())
}

/// Write through a temporary file in the same directory, then rename.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}

fn file_label(s: &SupportSet) -> String {
    let p = s.present();
    if p.is_empty() {
        "0".into()
    } else {
        p.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join("")
    }
}

fn certify(g: &Global, l: &Loaded) -> Result<lvfa::conditions::RegimeCertificate, Failure> {
    if g.no_search && l.witness.is_none() {
        return Err(Failure::Usage("witness required (spec file has none and --no-search is set)".into()));
    }
    Ok(certify_spec(&l.spec, l.witness.as_ref(), !g.no_search)?)
}

#[derive(Serialize)]
struct CheckOutput {
    condition: String,
    witness: Option<Witness>,
    report: Option<ConditionReport>,
    search: Option<SearchOutcome>,
}

fn cmd_check(g: &Global, path: &Path, flags: [bool; 4], support: Option<&str>) -> Res {
    let mut l = load(path)?;
    if let Some((lo, hi)) = window(g) {
        l.spec = l.spec.clone().with_window(lo, hi)?;
    }
    let n = l.spec.n();
    let kinds: Vec<ConditionKind> = [ConditionKind::H1, ConditionKind::H2, ConditionKind::A, ConditionKind::B]
        .into_iter()
        .zip(flags)
        .filter(|(_, f)| *f)
        .map(|(k, _)| k)
        .collect();
    if kinds.is_empty() {
        let cert = certify(g, &l)?;
        emit(&cert)?;
        return Ok(cert.regime != Regime::Uncertified);
    }
    let w = l.witness.clone().unwrap_or_default();
    let support = match support {
        Some(s) => parse_support(s, n)?,
        None => w.support_or_full(n),
    };
    let checker = Checker::new(&l.spec)?;
    let mut outputs = Vec::new();
    let mut ok = true;
    for kind in kinds {
        let given = match kind {
            ConditionKind::H1 => w.c.clone().zip(w.delta).map(|(c, d)| checker.check_h1(&c, d)),
            ConditionKind::H2 => w.cbar.clone().zip(w.delta).map(|(c, d)| checker.check_h2(&c, d)),
            ConditionKind::A => w.d.clone().zip(w.dbar.clone()).map(|(d, db)| checker.check_a(&d, &db, &support)),
            ConditionKind::B => (w.c.is_some() && w.d.is_some() && w.eps.is_some() && w.theta.is_some())
                .then(|| checker.check_b(&Witness { support: Some(support), ..w.clone() })),
        };
        let out = match given {
            Some(r) => {
                let report = r?;
                CheckOutput { condition: format!("{kind:?}"), witness: Some(w.clone()), report: Some(report), search: None }
            }
            None if g.no_search => return Err(Failure::Usage(format!("witness required for {kind:?} (--no-search is set)"))),
            None => {
                let found = search_witness(&l.spec, kind, &support)?;
                CheckOutput {
                    condition: format!("{kind:?}"),
                    witness: found.witness().cloned(),
                    report: match &found {
                        SearchOutcome::Found { report, .. } => Some(report.clone()),
                        _ => None,
                    },
                    search: Some(found),
                }
            }
        };
        ok &= out.report.as_ref().is_some_and(|r| r.passed());
        outputs.push(out);
    }
    if !ok {
        for o in &outputs {
            if let Some(row) = o.report.as_ref().and_then(|r| if r.passed() { None } else { r.worst_row() }) {
                eprintln!("{} fails: row {} slack {:e} at t = {}", o.condition, row.index + 1, row.sampled_slack, row.worst_t);
            }
        }
    }
    emit(&outputs)?;
    Ok(ok)
}

fn solutions(g: &Global, l: &Loaded, win: (f64, f64)) -> Result<(lvfa::conditions::RegimeCertificate, Vec<CompleteSolution>, Vec<(SupportSet, String)>), Failure> {
    let cert = certify(g, l)?;
    if cert.regime == Regime::Uncertified {
        return Err(Failure::Fail("no regime is certified for this system".into()));
    }
    let mut pb = lvfa::trajectories::PullbackConfig::default();
    l.tolerances().apply_pullback(&mut pb);
    if let Some(t) = g.tol {
        pb.tol = t;
    }
    let (sols, failures) = list_complete_solutions(&l.spec, &cert, win, &pb)?;
    Ok((cert, sols, failures))
}

fn write_solution_csv(dir: &Path, name: &str, s: &CompleteSolution, dt: f64) -> Result<PathBuf, Failure> {
    let mut buf = Vec::new();
    s.grid.write_csv(&mut buf, Some(&s.sample_times(dt)))?;
    write_atomic(dir, name, &buf)
}

fn cmd_star(g: &Global, path: &Path, support: Option<&str>, dt: f64) -> Res {
    let l = load(path)?;
    let n = l.spec.n();
    let win = window(g).unwrap_or((-20.0, 20.0));
    let (cert, sols, failures) = solutions(g, &l, win)?;
    let want = match support {
        Some(s) => parse_support(s, n)?,
        None => cert.regime.persistent(n).expect("certified"),
    };
    if let Some((_, why)) = failures.iter().find(|(s, _)| *s == want) {
        return Err(Failure::Fail(format!("solution on {want}: {why}")));
    }
    let Some(sol) = sols.iter().find(|s| s.support == want) else {
        return Err(Failure::Fail(format!("support {want} is not covered by the certified regime")));
    };
    let stem = format!("star_{}", file_label(&want));
    write_solution_csv(&g.out, &format!("{stem}.csv"), sol, dt)?;
    let side = json::to_string(&sol.sidecar())?;
    write_atomic(&g.out, &format!("{stem}.json"), side.as_bytes())?;
    std::io::stdout().write_all(side.as_bytes())?;
    Ok(true)
}

fn cmd_dichotomy(g: &Global, path: &Path, support: Option<&str>, ambient: Option<&str>) -> Res {
    let l = load(path)?;
    let n = l.spec.n();
    let win = window(g).unwrap_or((-20.0, 20.0));
    // the base solution is needed well beyond the certification window
    let margin = 60.0;
    let (cert, sols, _) = solutions(g, &l, (win.0 - margin, win.1 + margin))?;
    let base_support = match support {
        Some(s) => parse_support(s, n)?,
        None => cert.regime.persistent(n).expect("certified"),
    };
    let ambient = match ambient {
        Some(s) => parse_support(s, n)?,
        None => SupportSet::full(n),
    };
    let Some(base) = sols.iter().find(|s| s.support == base_support) else {
        return Err(Failure::Fail(format!("no complete solution on {base_support}")));
    };
    let lin = linearize(&l.spec, base, &ambient)?;
    let mut cfg = DichotomyConfig::default();
    if let Some(t) = g.tol {
        cfg.invariance_tol = t;
    }
    let c = build_certificate(&lin, win, &cfg).map_err(|e| Failure::Fail(e.to_string()))?;
    let s = json::to_string(&c)?;
    write_atomic(&g.out, &format!("dichotomy_{}.json", file_label(&base_support)), s.as_bytes())?;
    std::io::stdout().write_all(s.as_bytes())?;
    Ok(c.passed(&cfg))
}

fn skeleton_config(g: &Global, l: &Loaded) -> SkeletonConfig {
    let mut cfg = SkeletonConfig { seed: g.seed, ..Default::default() };
    l.tolerances().apply_skeleton(&mut cfg);
    if let Some(w) = window(g) {
        cfg.window = w;
    }
    if let Some(t) = g.tol {
        cfg.tol_fwd = t;
    }
    cfg
}

#[derive(Serialize)]
struct SkeletonOutput<'a> {
    complete: bool,
    error: Option<String>,
    graph: &'a SkeletonGraph,
    node_files: Vec<String>,
    edge_files: Vec<String>,
    shape_violations: Vec<String>,
}

fn write_graph(g: &Global, graph: &SkeletonGraph, error: Option<String>, dt: f64) -> Result<(), Failure> {
    let mut node_files = Vec::new();
    for s in &graph.solutions {
        let name = format!("node_{}.csv", file_label(&s.support));
        write_solution_csv(&g.out, &name, s, dt)?;
        node_files.push(name);
    }
    let mut edge_files = Vec::new();
    for e in &graph.edges {
        let name = format!("edge_{}_{}.csv", file_label(&e.source), file_label(&e.target));
        let mut buf = Vec::new();
        e.trajectory.write_csv(&mut buf, Some(&e.trajectory.uniform_times(dt)))?;
        write_atomic(&g.out, &name, &buf)?;
        edge_files.push(name);
    }
    let out = SkeletonOutput {
        complete: error.is_none(),
        error,
        graph,
        node_files,
        edge_files,
        shape_violations: graph.shape_violations(),
    };
    let s = json::to_string(&out)?;
    write_atomic(&g.out, "skeleton.json", s.as_bytes())?;
    write_atomic(&g.out, "skeleton.dot", graph.to_dot().as_bytes())?;
    std::io::stdout().write_all(s.as_bytes())?;
    Ok(())
}

fn cmd_skeleton(g: &Global, path: &Path, dt: f64) -> Res {
    let l = load(path)?;
    let cert = certify(g, &l)?;
    let cfg = skeleton_config(g, &l);
    match build_skeleton(&l.spec, &cert, &cfg) {
        Ok(graph) => {
            write_graph(g, &graph, None, dt)?;
            Ok(graph.shape_violations().is_empty())
        }
        Err(e @ (SkeletonError::Incomplete { .. } | SkeletonError::TheoryViolation { .. })) => {
            let msg = e.to_string();
            if let SkeletonError::Incomplete { graph, .. } | SkeletonError::TheoryViolation { graph, .. } = e {
                write_graph(g, &graph, Some(msg.clone()), dt)?;
            }
            Err(Failure::Fail(msg))
        }
        Err(e @ (SkeletonError::Uncertified | SkeletonError::RegimeInconsistency { .. })) => Err(Failure::Fail(e.to_string())),
        Err(e) => Err(Failure::Usage(e.to_string())),
    }
}

fn cmd_classify(g: &Global, path: &Path, u0: &str, t0: f64) -> Res {
    let l = load(path)?;
    let u: Vec<f64> = u0
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("bad initial value {x:?}"))))
        .collect::<Result<_, _>>()?;
    let mut cfg = skeleton_config(g, &l);
    if let Some(t) = g.tol {
        cfg.classify.tol = t;
    }
    let (cert, sols, _) = solutions(g, &l, cfg.window)?;
    let c = classify_initial(&l.spec, cert.regime, &u, t0, &sols, &cfg.classify)?;
    emit(&c)?;
    Ok(!matches!(c.outcome, Outcome::Unclassified { .. }))
}

fn cmd_trace(g: &Global, path: &Path, from: &str, to: &str, dt: f64) -> Res {
    let l = load(path)?;
    let n = l.spec.n();
    let (src, dst) = (parse_support(from, n)?, parse_support(to, n)?);
    let cfg = skeleton_config(g, &l);
    let (_, sols, _) = solutions(g, &l, cfg.window)?;
    let find = |s: SupportSet| sols.iter().find(|x| x.support == s).ok_or_else(|| Failure::Fail(format!("no complete solution on {s}")));
    let c = match trace_connection(&l.spec, find(src)?, find(dst)?, &cfg) {
        Ok(c) => c,
        Err(e @ SkeletonError::Precondition(_)) => return Err(Failure::Usage(e.to_string())),
        Err(e) => return Err(Failure::Fail(e.to_string())),
    };
    let name = format!("edge_{}_{}.csv", file_label(&src), file_label(&dst));
    let mut buf = Vec::new();
    c.trajectory.write_csv(&mut buf, Some(&c.trajectory.uniform_times(dt)))?;
    write_atomic(&g.out, &name, &buf)?;
    emit(&c)?;
    Ok(true)
}
