//! Experiment configuration: a flat TOML file plus command-line overrides.
//!
//! Keys match the long flag names without the leading dashes, e.g.
//! `lambda = 0.1`, `latent-dim = 10`, `sigma = "auto"`,
//! `ly-refresh = "every:5"`, `view-dims = [12, 10, 8]`.

use std::fs;
use std::path::{Path, PathBuf};

use dgrmsc::dataset::{LoadOptions, SyntheticSpec};
use dgrmsc::graphs::Sigma;
use dgrmsc::solver::{LyRefresh, SolverConfig};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    Dgrmsc,
    Grmsc,
    Both,
}

impl Ablation {
    /// Variants to run, in output order.
    pub fn variants(self) -> &'static [Variant] {
        match self {
            Ablation::Dgrmsc => &[Variant::Dgrmsc],
            Ablation::Grmsc => &[Variant::Grmsc],
            Ablation::Both => &[Variant::Dgrmsc, Variant::Grmsc],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Dgrmsc,
    Grmsc,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Dgrmsc => "dgrmsc",
            Variant::Grmsc => "grmsc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Directory { path: PathBuf, options: LoadOptions },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub solver: SolverConfig,
    /// Cluster count; defaults to the number of label classes.
    pub clusters: Option<usize>,
    pub runs: usize,
    pub output_dir: PathBuf,
    pub ablation: Ablation,
    pub refit_per_run: bool,
    data_path: Option<PathBuf>,
    load: LoadOptions,
    synth: SyntheticSpec,
    synth_touched: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic(SyntheticSpec::default()),
            solver: SolverConfig::default(),
            clusters: None,
            runs: 30,
            output_dir: PathBuf::from("out"),
            ablation: Ablation::Dgrmsc,
            refit_per_run: false,
            data_path: None,
            load: LoadOptions::default(),
            synth: SyntheticSpec::default(),
            synth_touched: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("bad value for {key}: {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(CliError::Config(format!("bad boolean for {key}: {value:?}"))),
    }
}

pub fn parse_sigma(value: &str) -> Result<Sigma, CliError> {
    if value.trim().eq_ignore_ascii_case("auto") {
        Ok(Sigma::Auto)
    } else {
        let s: f64 = parse("sigma", value)?;
        if s > 0.0 {
            Ok(Sigma::Fixed(s))
        } else {
            Err(CliError::Config(format!("sigma must be > 0 or auto, got {value}")))
        }
    }
}

pub fn parse_ly_refresh(value: &str) -> Result<LyRefresh, CliError> {
    let v = value.trim().to_ascii_lowercase();
    let (kind, arg) = match v.split_once(':') {
        Some((k, a)) => (k.to_string(), Some(a.to_string())),
        None => (v.clone(), None),
    };
    match (kind.as_str(), arg) {
        ("every", None) => Ok(LyRefresh::EveryIter),
        ("every", Some(t)) => Ok(LyRefresh::EveryT(parse("ly-refresh", &t)?)),
        ("frozen", Some(t)) => Ok(LyRefresh::FrozenAfter(parse("ly-refresh", &t)?)),
        _ => Err(CliError::Config(format!(
            "ly-refresh must be every, every:<t> or frozen:<t>, got {value:?}"
        ))),
    }
}

pub fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn toml_scalar(key: &str, v: &toml::Value) -> Result<String, CliError> {
    use toml::Value as V;
    Ok(match v {
        V::String(s) => s.clone(),
        V::Integer(i) => i.to_string(),
        V::Float(f) => f.to_string(),
        V::Boolean(b) => b.to_string(),
        V::Array(items) => items
            .iter()
            .map(|i| toml_scalar(key, i))
            .collect::<Result<Vec<_>, _>>()?
            .join(","),
        _ => return Err(CliError::Config(format!("unsupported value for {key}"))),
    })
}

impl ExperimentConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let s = &mut self.solver;
        match key {
            "lambda" => s.lambda = parse(key, value)?,
            "beta" => s.beta = parse(key, value)?,
            "gamma" => s.gamma = parse(key, value)?,
            "latent-dim" => {
                s.latent_dim = if value.trim().eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "knn" => s.k = parse(key, value)?,
            "sigma" => s.sigma = parse_sigma(value)?,
            "latent-sigma" => s.latent_sigma = parse_sigma(value)?,
            "mu0" => s.mu0 = parse(key, value)?,
            "rho" => s.rho = parse(key, value)?,
            "mu-max" => s.mu_max = parse(key, value)?,
            "eps" => s.epsilon = parse(key, value)?,
            "max-iter" => s.max_iter = parse(key, value)?,
            "seed" => s.seed = parse(key, value)?,
            "ly-refresh" => s.ly_refresh = parse_ly_refresh(value)?,
            "runs" => self.runs = parse(key, value)?,
            "clusters" => self.clusters = Some(parse(key, value)?),
            "ablation" => {
                self.ablation = match value.trim().to_ascii_lowercase().as_str() {
                    "dgrmsc" => Ablation::Dgrmsc,
                    "grmsc" => Ablation::Grmsc,
                    "both" => Ablation::Both,
                    _ => {
                        return Err(CliError::Config(format!(
                            "ablation must be dgrmsc, grmsc or both, got {value:?}"
                        )))
                    }
                }
            }
            "refit-per-run" => self.refit_per_run = parse_bool(key, value)?,
            "out" => self.output_dir = PathBuf::from(value.trim()),
            "data" => self.data_path = Some(PathBuf::from(value.trim())),
            "transpose" => self.load.transpose = parse_bool(key, value)?,
            "minmax" => self.load.min_max_scale = parse_bool(key, value)?,
            "n-per-cluster" => self.synth_set(|sp| {
                sp.n_per_cluster = parse(key, value)?;
                Ok(())
            })?,
            "synth-clusters" => self.synth_set(|sp| {
                sp.c = parse(key, value)?;
                Ok(())
            })?,
            "view-dims" => self.synth_set(|sp| {
                sp.view_dims = parse_list(key, value)?;
                Ok(())
            })?,
            "latent-rank" => self.synth_set(|sp| {
                sp.latent_dim = parse(key, value)?;
                Ok(())
            })?,
            "noise" => self.synth_set(|sp| {
                sp.noise_sigma = parse(key, value)?;
                Ok(())
            })?,
            "separation" => self.synth_set(|sp| {
                sp.cluster_separation = parse(key, value)?;
                Ok(())
            })?,
            "synth-seed" => self.synth_set(|sp| {
                sp.seed = parse(key, value)?;
                Ok(())
            })?,
            other => return Err(CliError::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    fn synth_set(
        &mut self,
        f: impl FnOnce(&mut SyntheticSpec) -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        self.synth_touched = true;
        f(&mut self.synth)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for (k, v) in &table {
            self.set(k, &toml_scalar(k, v)?)?;
        }
        Ok(())
    }

    /// Resolves the data source and checks the experiment-level invariants.
    pub fn finalize(mut self) -> Result<Self, CliError> {
        self.source = match (&self.data_path, self.synth_touched) {
            (Some(_), true) => {
                return Err(CliError::Config(
                    "set either a dataset path or synthetic parameters, not both".into(),
                ))
            }
            (Some(p), false) => DataSource::Directory {
                path: p.clone(),
                options: self.load,
            },
            (None, _) => DataSource::Synthetic(self.synth.clone()),
        };
        if self.runs == 0 {
            return Err(CliError::Config("runs must be >= 1".into()));
        }
        if let Some(c) = self.clusters {
            if c < 2 {
                return Err(CliError::Config(format!("clusters must be >= 2, got {c}")));
            }
        }
        self.solver.validate()?;
        Ok(self)
    }

    /// The synthetic spec in effect (used by `synth`).
    pub fn synthetic_spec(&self) -> &SyntheticSpec {
        &self.synth
    }
}
