//! Command-line front end: resolves a configuration from defaults, an
//! optional `key = value` file, and flags, then runs the simulation /
//! certification pipeline. Exit codes: 0 on success, 2 for configuration
//! problems, 3 for numerical failures (including a failed certificate), 4
//! for violated invariants.

mod config;
mod plots;
mod runner;

use std::path::{Path, PathBuf};

use clap::Parser;

use config::{GraphSource, OmegaSource, Overrides};
use lohe_sync::analysis::Verdict;
use runner::{classify, execute, Failure, StageFailure};

#[derive(Parser, Debug)]
#[command(
    name = "lohe-sync",
    version,
    about = "Simulate coupled oscillators on a weighted digraph and certify \
             that their pairwise errors decay exponentially"
)]
struct Cli {
    /// Flat `key = value` experiment file; flags override its entries.
    #[arg(long, value_name = "FILE", conflicts_with = "batch")]
    config: Option<PathBuf>,

    /// Run a built-in scenario (available: paper-fig1).
    #[arg(long, value_name = "NAME", conflicts_with = "graph")]
    scenario: Option<String>,

    /// Weighted digraph file: a `nodes m` header, then 1-based `from to weight` lines.
    #[arg(long, value_name = "FILE")]
    graph: Option<PathBuf>,

    /// Ambient dimension for seeded initial states.
    #[arg(long, value_name = "DIM")]
    n: Option<usize>,

    /// Coupling gain (positive).
    #[arg(long, value_name = "GAIN")]
    k: Option<f64>,

    /// Add a common drift term: `builtin`, or a file with an `omega n` header.
    #[arg(long, value_name = "SOURCE", num_args = 0..=1, default_missing_value = "builtin")]
    with_omega: Option<String>,

    /// Initial-state file: a `state m n` header, then one unit row per node.
    #[arg(long, value_name = "FILE", conflicts_with = "seed")]
    init: Option<PathBuf>,

    /// Seed for hemisphere-confined random initial states.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Integration step size.
    #[arg(long, value_name = "STEP")]
    dt: Option<f64>,

    /// Integration horizon.
    #[arg(long = "t-end", value_name = "TIME")]
    t_end: Option<f64>,

    /// Keep every this-many-th step (plus both endpoints).
    #[arg(long = "record-every", value_name = "STRIDE")]
    record_every: Option<usize>,

    /// Fixed block-weighting scale for the certificate; omit to search
    /// downward from 0.1.
    #[arg(long, value_name = "EPS")]
    epsilon: Option<f64>,

    /// Region level in (0, 1) for the decay certificate.
    #[arg(long, value_name = "ETA")]
    eta: Option<f64>,

    /// Output directory (falls back to LOHE_SYNC_OUT, then `out`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Render SVG plots next to the CSV artifacts.
    #[arg(long)]
    plots: bool,

    /// File with one config path per line; runs each into its own
    /// subdirectory of the output root.
    #[arg(long, value_name = "FILE")]
    batch: Option<PathBuf>,
}

fn flag_overrides(cli: &Cli) -> Overrides {
    let graph = match (&cli.scenario, &cli.graph) {
        (Some(name), _) => Some(GraphSource::Builtin(name.clone())),
        (None, Some(path)) => Some(GraphSource::Path(path.clone())),
        (None, None) => None,
    };
    let omega = cli.with_omega.as_ref().map(|s| {
        if s == "builtin" {
            OmegaSource::Builtin
        } else {
            OmegaSource::Path(PathBuf::from(s))
        }
    });
    Overrides {
        graph,
        n: cli.n,
        k: cli.k,
        omega,
        init_path: cli.init.clone(),
        seed: cli.seed,
        margin: None,
        dt: cli.dt,
        t_end: cli.t_end,
        record_every: cli.record_every,
        epsilon: cli.epsilon,
        eta: cli.eta,
        out: cli.out.clone(),
        plots: cli.plots.then_some(true),
    }
}

fn print_failure(sf: &StageFailure) {
    eprintln!("experiment failed at stage `{}`", sf.stage);
    eprintln!("error={}: {}", sf.failure.class(), sf.failure.message());
}

fn config_failure(e: lohe_sync::Error) -> StageFailure {
    StageFailure {
        stage: "config",
        failure: classify(e),
    }
}

fn env_out() -> Option<PathBuf> {
    std::env::var_os("LOHE_SYNC_OUT").map(PathBuf::from)
}

fn run_single(cli: &Cli) -> i32 {
    let file_layer = match &cli.config {
        Some(p) => match Overrides::from_file(p) {
            Ok(o) => o,
            Err(e) => {
                let sf = config_failure(e);
                print_failure(&sf);
                return sf.failure.exit_code();
            }
        },
        None => Overrides::default(),
    };
    let cfg = match flag_overrides(cli)
        .merge_over(file_layer)
        .finalize(env_out())
    {
        Ok(c) => c,
        Err(e) => {
            let sf = config_failure(e);
            print_failure(&sf);
            return sf.failure.exit_code();
        }
    };
    match execute(&cfg) {
        Ok(outcome) => match outcome.verdict {
            Verdict::Pass => {
                println!("certificate=pass ({})", outcome.summary_path.display());
                0
            }
            Verdict::NeverEntered => {
                println!(
                    "certificate=never_entered ({})",
                    outcome.summary_path.display()
                );
                0
            }
            Verdict::Fail => {
                let sf = StageFailure {
                    stage: "certificate",
                    failure: Failure::Numeric(format!(
                        "decay certificate failed; see {}",
                        outcome.summary_path.display()
                    )),
                };
                print_failure(&sf);
                sf.failure.exit_code()
            }
        },
        Err(sf) => {
            print_failure(&sf);
            sf.failure.exit_code()
        }
    }
}

/// One line of the batch report, plus the exit code it contributes.
fn batch_entry(entry: &Path, flags: &Overrides, run_dir: PathBuf) -> (i32, String) {
    let file_layer = match Overrides::from_file(entry) {
        Ok(o) => o,
        Err(e) => {
            let f = classify(e);
            return (
                f.exit_code(),
                format!(
                    "failed at stage `config` (error={}: {})",
                    f.class(),
                    f.message()
                ),
            );
        }
    };
    let mut merged = flags.clone().merge_over(file_layer);
    merged.out = Some(run_dir);
    let cfg = match merged.finalize(None) {
        Ok(c) => c,
        Err(e) => {
            let f = classify(e);
            return (
                f.exit_code(),
                format!(
                    "failed at stage `config` (error={}: {})",
                    f.class(),
                    f.message()
                ),
            );
        }
    };
    match execute(&cfg) {
        Ok(outcome) => match outcome.verdict {
            Verdict::Pass => (0, "certificate=pass".to_owned()),
            Verdict::NeverEntered => (0, "certificate=never_entered".to_owned()),
            Verdict::Fail => (
                3,
                format!(
                    "failed at stage `certificate` (error=numeric: decay certificate failed; \
                     see {})",
                    outcome.summary_path.display()
                ),
            ),
        },
        Err(sf) => (
            sf.failure.exit_code(),
            format!(
                "failed at stage `{}` (error={}: {})",
                sf.stage,
                sf.failure.class(),
                sf.failure.message()
            ),
        ),
    }
}

fn run_batch(cli: &Cli, batch_path: &Path) -> i32 {
    let batch_fail = |msg: String| {
        let sf = StageFailure {
            stage: "batch",
            failure: Failure::Config(msg),
        };
        print_failure(&sf);
        2
    };
    let text = match std::fs::read_to_string(batch_path) {
        Ok(t) => t,
        Err(e) => return batch_fail(format!("cannot read {}: {e}", batch_path.display())),
    };
    let base = batch_path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries: Vec<(String, PathBuf)> = Vec::new();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let path = base.join(line);
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".to_owned());
        entries.push((stem, path));
    }
    if entries.is_empty() {
        return batch_fail("batch file lists no configs".into());
    }
    let mut seen = std::collections::HashSet::new();
    for (stem, _) in &entries {
        if !seen.insert(stem.clone()) {
            return batch_fail(format!(
                "duplicate run name `{stem}`: batch config stems must be unique"
            ));
        }
    }

    let out_root = cli
        .out
        .clone()
        .or_else(env_out)
        .unwrap_or_else(|| PathBuf::from(config::DEFAULT_OUT));
    let mut flags = flag_overrides(cli);
    flags.out = None; // consumed as the per-run output root

    let results: Vec<(i32, String)> = std::thread::scope(|scope| {
        let handles: Vec<_> = entries
            .iter()
            .map(|(stem, path)| {
                let flags = &flags;
                let run_dir = out_root.join(stem);
                scope.spawn(move || batch_entry(path, flags, run_dir))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("batch worker panicked"))
            .collect()
    });

    let mut overall = 0;
    for ((stem, _), (code, line)) in entries.iter().zip(&results) {
        println!("{stem}: {line}");
        overall = overall.max(*code);
    }
    overall
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.batch.clone() {
        Some(path) => run_batch(&cli, &path),
        None => run_single(&cli),
    };
    std::process::exit(code);
}
