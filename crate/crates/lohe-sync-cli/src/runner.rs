//! Staged experiment execution: graph ingestion, initial states, simulation,
//! error extraction, the closed-flow cross-check, certification, and artifact
//! emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use lohe_sync::analysis::{
    decay_certificate, epsilon_search, sync_diameter, DecayReport, RegionSpec, Verdict,
};
use lohe_sync::digraph::{beta_weights, condensation, has_spanning_tree, Digraph};
use lohe_sync::dynamics::{
    hemisphere_certificate, integrate, ModelParams, SimConfig, StateMatrix, Trajectory,
};
use lohe_sync::riccati::{error_from_states, integrate_riccati, total_error, ErrorMatrix};
use lohe_sync::{scenarios, Error};

use crate::config::{ExperimentConfig, GraphSource, InitSource, OmegaSource};
use crate::plots;

/// Largest tolerated deviation between simulated errors and the closed error
/// flow integrated side by side; beyond this the run aborts as numerically
/// inconsistent.
const RICCATI_CROSS_TOL: f64 = 1e-4;

/// A failure, classified for the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or inputs (exit 2).
    Config(String),
    /// Numerical breakdown or insufficient data (exit 3).
    Numeric(String),
    /// A mathematical invariant was violated (exit 4).
    Invariant(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Invariant(_) => 4,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config",
            Failure::Numeric(_) => "numeric",
            Failure::Invariant(_) => "invariant",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numeric(m) | Failure::Invariant(m) => m,
        }
    }
}

/// Maps library errors onto exit-code classes.
pub fn classify(err: Error) -> Failure {
    match &err {
        Error::NonFinite(_) | Error::InsufficientData(_) | Error::NoFeasibleEpsilon { .. } => {
            Failure::Numeric(err.to_string())
        }
        Error::InvariantViolation(_) => Failure::Invariant(err.to_string()),
        _ => Failure::Config(err.to_string()),
    }
}

/// A failure tagged with the pipeline stage it occurred in.
#[derive(Debug)]
pub struct StageFailure {
    pub stage: &'static str,
    pub failure: Failure,
}

/// Success data returned to the caller.
pub struct RunOutcome {
    pub verdict: Verdict,
    pub summary_path: PathBuf,
}

fn at<T>(stage: &'static str, r: lohe_sync::Result<T>) -> Result<T, StageFailure> {
    r.map_err(|e| StageFailure {
        stage,
        failure: classify(e),
    })
}

fn read_input(stage: &'static str, path: &Path) -> Result<String, StageFailure> {
    std::fs::read_to_string(path).map_err(|e| StageFailure {
        stage,
        failure: Failure::Config(format!("cannot read {}: {e}", path.display())),
    })
}

/// Parses a drift-matrix file: an `omega n` header followed by `n` rows of
/// `n` entries; `#` starts a comment.
pub fn parse_omega(text: &str) -> lohe_sync::Result<DMatrix<f64>> {
    let parse_err = |line: usize, msg: String| Error::Parse { line, msg };
    let mut header: Option<usize> = None;
    let mut entries: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match (&mut header, fields.as_slice()) {
            (None, ["omega", n]) => {
                let n: usize = n
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("invalid dimension `{n}`")))?;
                if n == 0 {
                    return Err(parse_err(line_no, "dimension must be positive".into()));
                }
                header = Some(n);
            }
            (None, _) => {
                return Err(parse_err(
                    line_no,
                    "expected `omega <n>` header first".into(),
                ));
            }
            (Some(n), values) => {
                if rows >= *n {
                    return Err(parse_err(line_no, format!("more than {n} rows")));
                }
                if values.len() != *n {
                    return Err(parse_err(
                        line_no,
                        format!("expected {n} entries, got {}", values.len()),
                    ));
                }
                for v in values {
                    let x: f64 = v
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("invalid entry `{v}`")))?;
                    if !x.is_finite() {
                        return Err(parse_err(line_no, format!("non-finite entry `{v}`")));
                    }
                    entries.push(x);
                }
                rows += 1;
            }
        }
    }
    let n = header.ok_or_else(|| parse_err(1, "missing `omega <n>` header".into()))?;
    if rows != n {
        return Err(parse_err(0, format!("expected {n} rows, got {rows}")));
    }
    Ok(DMatrix::from_row_slice(n, n, &entries))
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Runs the full pipeline for one configuration; artifacts land in
/// `cfg.out_dir`.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutcome, StageFailure> {
    // Graph.
    let (g, graph_label) = match &cfg.graph {
        GraphSource::Builtin(name) if name == "paper-fig1" => {
            (scenarios::paper_fig1_digraph(), name.clone())
        }
        GraphSource::Builtin(other) => {
            return Err(StageFailure {
                stage: "graph",
                failure: Failure::Config(format!(
                    "unknown scenario `{other}` (available: paper-fig1)"
                )),
            });
        }
        GraphSource::Path(p) => (
            at("graph", Digraph::parse(&read_input("graph", p)?))?,
            p.display().to_string(),
        ),
    };

    let (omega, omega_label) = match &cfg.omega {
        None => (None, "none".to_owned()),
        Some(OmegaSource::Builtin) => (Some(scenarios::paper_fig1_omega()), "builtin".to_owned()),
        Some(OmegaSource::Path(p)) => (
            Some(at("graph", parse_omega(&read_input("graph", p)?))?),
            p.display().to_string(),
        ),
    };

    // Connectivity structure.
    let cond = condensation(&g);
    if !has_spanning_tree(&cond) {
        return Err(StageFailure {
            stage: "condensation",
            failure: classify(Error::NoSpanningTree {
                sources: cond.source_count(),
            }),
        });
    }

    // Initial states.
    let (state0, init_label) = match &cfg.init {
        InitSource::Path(p) => (
            at("init", StateMatrix::parse(&read_input("init", p)?))?,
            format!("path:{}", p.display()),
        ),
        InitSource::Seeded { seed, margin } => (
            at(
                "init",
                StateMatrix::random_hemisphere(g.node_count(), cfg.n, *seed, *margin),
            )?,
            format!("seed:{seed} margin:{}", fmt(*margin)),
        ),
    };
    if state0.m() != g.node_count() {
        return Err(StageFailure {
            stage: "init",
            failure: Failure::Config(format!(
                "initial state has {} rows but the graph has {} nodes",
                state0.m(),
                g.node_count()
            )),
        });
    }
    if let Some(w) = &omega {
        if w.nrows() != state0.n() {
            return Err(StageFailure {
                stage: "init",
                failure: Failure::Config(format!(
                    "drift matrix is {}x{} but states live in dimension {}",
                    w.nrows(),
                    w.ncols(),
                    state0.n()
                )),
            });
        }
    }

    // Hemisphere certificate on the initial configuration (informative).
    let hemisphere = hemisphere_certificate(&state0);

    // Integration.
    let params = at("integrate", ModelParams::new(cfg.k, omega))?;
    let sim = at(
        "integrate",
        SimConfig::new(cfg.dt, cfg.t_end, cfg.record_every),
    )?;
    let traj = at("integrate", integrate(&state0, &g, &params, &sim))?;

    // Pairwise errors at the recorded samples.
    let errors: Vec<ErrorMatrix> = traj.states().iter().map(error_from_states).collect();

    // Cross-check: integrate the closed error flow from the same start and
    // compare at every sample. The flows are frame-invariant, so this also
    // covers runs with a drift term.
    let ricc = at("riccati", integrate_riccati(&errors[0], &g, cfg.k, &sim))?;
    let mut riccati_max_dev = 0.0f64;
    for ((_, e_closed), e_sim) in ricc.iter().zip(&errors) {
        riccati_max_dev = riccati_max_dev.max((e_closed.entries() - e_sim.entries()).amax());
    }
    if riccati_max_dev > RICCATI_CROSS_TOL {
        return Err(StageFailure {
            stage: "riccati",
            failure: Failure::Numeric(format!(
                "closed error flow deviates from simulated errors by {riccati_max_dev:e} \
                 (tolerance {RICCATI_CROSS_TOL:e})"
            )),
        });
    }

    // Certification.
    let (epsilon_used, report) = match cfg.epsilon {
        Some(eps) => {
            let beta = at("analysis", beta_weights(&cond, &g, eps))?;
            let spec = at("analysis", RegionSpec::new(cfg.eta, beta))?;
            (
                eps,
                at("analysis", decay_certificate(&traj, &g, cfg.k, &spec))?,
            )
        }
        None => at("analysis", epsilon_search(&traj, &g, &cond, cfg.k, cfg.eta))?,
    };
    let beta = at("analysis", beta_weights(&cond, &g, epsilon_used))?;
    let v_series: Vec<f64> = errors
        .iter()
        .map(|e| total_error(e, &beta))
        .collect::<lohe_sync::Result<_>>()
        .map_err(|e| StageFailure {
            stage: "analysis",
            failure: classify(e),
        })?;

    // Artifacts.
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out).map_err(|e| StageFailure {
        stage: "emit",
        failure: Failure::Config(format!("cannot create {}: {e}", out.display())),
    })?;
    let write = |stage: &'static str, name: &str, contents: &str| {
        std::fs::write(out.join(name), contents).map_err(|e| StageFailure {
            stage,
            failure: Failure::Config(format!("cannot write {name}: {e}")),
        })
    };

    write("emit", "states.csv", &states_csv(&traj))?;
    write("emit", "errors.csv", &errors_csv(traj.times(), &errors))?;
    write(
        "emit",
        "total_error.csv",
        &total_error_csv(traj.times(), &v_series),
    )?;

    let final_diameter = sync_diameter(traj.final_state());
    let summary = summary_text(
        cfg,
        &graph_label,
        &omega_label,
        &init_label,
        g.node_count(),
        state0.n(),
        traj.len(),
        hemisphere.is_some(),
        riccati_max_dev,
        final_diameter,
        &report,
        epsilon_used,
    );
    write("emit", "summary.txt", &summary)?;
    let summary_path = out.join("summary.txt");

    if cfg.plots {
        let v_svg = plots::total_error_svg(traj.times(), &v_series).map_err(|e| StageFailure {
            stage: "plots",
            failure: classify(e),
        })?;
        write("plots", "total_error.svg", &v_svg)?;
        let coords =
            plots::coordinates_svg(traj.times(), traj.states()).map_err(|e| StageFailure {
                stage: "plots",
                failure: classify(e),
            })?;
        write("plots", "coordinates.svg", &coords)?;
        if state0.n() == 3 {
            let proj = plots::projection_svg(traj.states()).map_err(|e| StageFailure {
                stage: "plots",
                failure: classify(e),
            })?;
            write("plots", "projection.svg", &proj)?;
        }
    }

    Ok(RunOutcome {
        verdict: report.verdict(),
        summary_path,
    })
}

fn states_csv(traj: &Trajectory) -> String {
    let (m, n) = {
        let s = &traj.states()[0];
        (s.m(), s.n())
    };
    let mut out = String::from("t");
    for i in 1..=m {
        for d in 1..=n {
            let _ = write!(out, ",r_{i}_{d}");
        }
    }
    out.push('\n');
    for (t, s) in traj.iter() {
        out.push_str(&fmt(t));
        for i in 0..m {
            for d in 0..n {
                let _ = write!(out, ",{}", fmt(s.matrix()[(i, d)]));
            }
        }
        out.push('\n');
    }
    out
}

fn errors_csv(times: &[f64], errors: &[ErrorMatrix]) -> String {
    let m = errors[0].dim();
    let mut out = String::from("t");
    for i in 1..=m {
        for j in (i + 1)..=m {
            let _ = write!(out, ",e_{i}_{j}");
        }
    }
    out.push('\n');
    for (t, e) in times.iter().zip(errors) {
        out.push_str(&fmt(*t));
        for i in 0..m {
            for j in (i + 1)..m {
                let _ = write!(out, ",{}", fmt(e.entries()[(i, j)]));
            }
        }
        out.push('\n');
    }
    out
}

fn total_error_csv(times: &[f64], values: &[f64]) -> String {
    let mut out = String::from("t,v\n");
    for (t, v) in times.iter().zip(values) {
        let _ = writeln!(out, "{},{}", fmt(*t), fmt(*v));
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn summary_text(
    cfg: &ExperimentConfig,
    graph_label: &str,
    omega_label: &str,
    init_label: &str,
    m: usize,
    n: usize,
    samples: usize,
    hemisphere_found: bool,
    riccati_max_dev: f64,
    final_diameter: f64,
    report: &DecayReport,
    epsilon_used: f64,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "graph={graph_label}");
    let _ = writeln!(out, "m={m}");
    let _ = writeln!(out, "n={n}");
    let _ = writeln!(out, "k={}", fmt(cfg.k));
    let _ = writeln!(out, "dt={}", fmt(cfg.dt));
    let _ = writeln!(out, "t_end={}", fmt(cfg.t_end));
    let _ = writeln!(out, "record_every={}", cfg.record_every);
    let _ = writeln!(out, "samples={samples}");
    let _ = writeln!(out, "omega={omega_label}");
    let _ = writeln!(out, "init={init_label}");
    let _ = writeln!(out, "eta={}", fmt(cfg.eta));
    let _ = writeln!(
        out,
        "hemisphere={}",
        if hemisphere_found { "found" } else { "absent" }
    );
    let _ = writeln!(out, "riccati_max_dev={}", fmt(riccati_max_dev));
    let _ = writeln!(out, "final_diameter={}", fmt(final_diameter));
    out.push_str(&report.summary_block(epsilon_used));
    out
}
