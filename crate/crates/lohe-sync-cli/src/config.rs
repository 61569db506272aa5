//! Experiment configuration: flat `key = value` files, flag overrides, and
//! defaults, resolved into a validated [`ExperimentConfig`].

use std::path::{Path, PathBuf};

use lohe_sync::{Error, Result};

pub const DEFAULT_N: usize = 3;
pub const DEFAULT_K: f64 = 1.0;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_END: f64 = 50.0;
pub const DEFAULT_RECORD_EVERY: usize = 10;
pub const DEFAULT_ETA: f64 = 0.5;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_MARGIN: f64 = 0.2;
pub const DEFAULT_OUT: &str = "out";

/// Where the digraph comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphSource {
    /// Named built-in scenario (`paper-fig1`).
    Builtin(String),
    /// Graph file with a `nodes m` header and `from to weight` lines.
    Path(PathBuf),
}

/// Where the drift matrix comes from, when enabled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OmegaSource {
    /// The built-in benchmark drift matrix.
    Builtin,
    /// File with an `omega n` header and `n` rows.
    Path(PathBuf),
}

/// Where the initial states come from.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSource {
    /// State file with a `state m n` header and unit rows.
    Path(PathBuf),
    /// Hemisphere-confined random states from the documented generator.
    Seeded { seed: u64, margin: f64 },
}

/// Fully resolved run description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    pub n: usize,
    pub k: f64,
    pub omega: Option<OmegaSource>,
    pub init: InitSource,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    /// Fixed weighting scale; `None` triggers the search.
    pub epsilon: Option<f64>,
    pub eta: f64,
    pub out_dir: PathBuf,
    pub plots: bool,
}

/// One layer of partial settings (a config file, or the command line).
/// Later layers win field by field; the graph and init sources are each
/// merged as a unit so a flag cleanly replaces a file-level choice.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub graph: Option<GraphSource>,
    pub n: Option<usize>,
    pub k: Option<f64>,
    pub omega: Option<OmegaSource>,
    pub init_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub margin: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub record_every: Option<usize>,
    pub epsilon: Option<f64>,
    pub eta: Option<f64>,
    pub out: Option<PathBuf>,
    pub plots: Option<bool>,
}

impl Overrides {
    /// Parses a flat `key = value` file. `#` starts a comment; blank lines
    /// are skipped; unknown or repeated keys are errors. Path values are
    /// resolved relative to the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut out = Overrides::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("empty value for key `{key}`"),
                });
            }
            out.set(key, value, line_no, base)?;
        }
        Ok(out)
    }

    fn set(&mut self, key: &str, value: &str, line: usize, base: &Path) -> Result<()> {
        fn dup<T>(slot: &Option<T>, key: &str, line: usize) -> Result<()> {
            if slot.is_some() {
                return Err(Error::Parse {
                    line,
                    msg: format!("key `{key}` set twice"),
                });
            }
            Ok(())
        }
        fn num<T: std::str::FromStr>(value: &str, key: &str, line: usize) -> Result<T> {
            value.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid value `{value}` for key `{key}`"),
            })
        }
        let rel = |value: &str| base.join(value);
        match key {
            "scenario" => {
                dup(&self.graph, "scenario/graph", line)?;
                self.graph = Some(GraphSource::Builtin(value.to_owned()));
            }
            "graph" => {
                dup(&self.graph, "scenario/graph", line)?;
                self.graph = Some(GraphSource::Path(rel(value)));
            }
            "n" => {
                dup(&self.n, key, line)?;
                self.n = Some(num(value, key, line)?);
            }
            "k" => {
                dup(&self.k, key, line)?;
                self.k = Some(num(value, key, line)?);
            }
            "omega" => {
                dup(&self.omega, key, line)?;
                self.omega = Some(if value == "builtin" {
                    OmegaSource::Builtin
                } else {
                    OmegaSource::Path(rel(value))
                });
            }
            "init" => {
                dup(&self.init_path, key, line)?;
                self.init_path = Some(rel(value));
            }
            "seed" => {
                dup(&self.seed, key, line)?;
                self.seed = Some(num(value, key, line)?);
            }
            "margin" => {
                dup(&self.margin, key, line)?;
                self.margin = Some(num(value, key, line)?);
            }
            "dt" => {
                dup(&self.dt, key, line)?;
                self.dt = Some(num(value, key, line)?);
            }
            "t_end" => {
                dup(&self.t_end, key, line)?;
                self.t_end = Some(num(value, key, line)?);
            }
            "record_every" => {
                dup(&self.record_every, key, line)?;
                self.record_every = Some(num(value, key, line)?);
            }
            "epsilon" => {
                dup(&self.epsilon, key, line)?;
                self.epsilon = Some(num(value, key, line)?);
            }
            "eta" => {
                dup(&self.eta, key, line)?;
                self.eta = Some(num(value, key, line)?);
            }
            "out" => {
                dup(&self.out, key, line)?;
                self.out = Some(rel(value));
            }
            "plots" => {
                dup(&self.plots, key, line)?;
                self.plots = Some(match value {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(Error::Parse {
                            line,
                            msg: format!("invalid value `{other}` for key `plots`"),
                        })
                    }
                });
            }
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown key `{other}`"),
                });
            }
        }
        if self.init_path.is_some() && self.seed.is_some() {
            return Err(Error::Parse {
                line,
                msg: "`init` and `seed` are mutually exclusive".into(),
            });
        }
        Ok(())
    }

    /// Applies `self` on top of `base`, field by field. The initial-state
    /// choice (`init`/`seed`) moves as one unit.
    pub fn merge_over(self, base: Overrides) -> Overrides {
        let (init_path, seed) = if self.init_path.is_some() || self.seed.is_some() {
            (self.init_path, self.seed)
        } else {
            (base.init_path, base.seed)
        };
        Overrides {
            graph: self.graph.or(base.graph),
            n: self.n.or(base.n),
            k: self.k.or(base.k),
            omega: self.omega.or(base.omega),
            init_path,
            seed,
            margin: self.margin.or(base.margin),
            dt: self.dt.or(base.dt),
            t_end: self.t_end.or(base.t_end),
            record_every: self.record_every.or(base.record_every),
            epsilon: self.epsilon.or(base.epsilon),
            eta: self.eta.or(base.eta),
            out: self.out.or(base.out),
            plots: self.plots.or(base.plots),
        }
    }

    /// Fills in defaults and produces the final configuration. `env_out` is
    /// consulted (after flags and file) for the output root.
    pub fn finalize(self, env_out: Option<PathBuf>) -> Result<ExperimentConfig> {
        let graph = self.graph.ok_or_else(|| {
            Error::Validation("no graph source: pass --scenario NAME or --graph PATH".into())
        })?;
        let init = match (self.init_path, self.seed) {
            (Some(path), None) => InitSource::Path(path),
            (None, seed) => InitSource::Seeded {
                seed: seed.unwrap_or(DEFAULT_SEED),
                margin: self.margin.unwrap_or(DEFAULT_MARGIN),
            },
            (Some(_), Some(_)) => {
                return Err(Error::Validation(
                    "`init` and `seed` are mutually exclusive".into(),
                ))
            }
        };
        Ok(ExperimentConfig {
            graph,
            n: self.n.unwrap_or(DEFAULT_N),
            k: self.k.unwrap_or(DEFAULT_K),
            omega: self.omega,
            init,
            dt: self.dt.unwrap_or(DEFAULT_DT),
            t_end: self.t_end.unwrap_or(DEFAULT_T_END),
            record_every: self.record_every.unwrap_or(DEFAULT_RECORD_EVERY),
            epsilon: self.epsilon,
            eta: self.eta.unwrap_or(DEFAULT_ETA),
            out_dir: self
                .out
                .or(env_out)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            plots: self.plots.unwrap_or(false),
        })
    }
}
