use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use dgrmsc::dataset::{self, MultiViewDataset};
use dgrmsc::matrix_io::{write_atomic, write_matrix};
use dgrmsc::metrics::{self, MetricReport, MetricValues};
use dgrmsc::solver::{self, FitResult, SolverConfig};
use dgrmsc::spectral;

use crate::config::{Ablation, DataSource, ExperimentConfig, Variant};
use crate::{exit, CliError};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "MVSC_THREADS";

/// Files written by `fit`, in write order.
pub const FIT_ARTIFACTS: [&str; 8] = [
    "Y.csv", "Z.csv", "W.csv", "E_L.csv", "E_S.csv", "trace.csv", "A.csv", "Q.csv",
];

pub fn load_source(cfg: &ExperimentConfig) -> Result<MultiViewDataset, CliError> {
    Ok(match &cfg.source {
        DataSource::Directory { path, options } => dataset::load_dataset_with(path, *options)?,
        DataSource::Synthetic(spec) => dataset::generate_synthetic(spec)?,
    })
}

fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0);
    match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Core(dgrmsc::Error::Io { path: dir.to_path_buf(), source: e }))
}

fn run_fit(ds: &MultiViewDataset, cfg: &SolverConfig, variant: Variant) -> Result<FitResult, CliError> {
    Ok(match variant {
        Variant::Dgrmsc => solver::fit(ds, cfg)?,
        Variant::Grmsc => solver::grmsc_fit(ds, cfg)?,
    })
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub converged: bool,
    pub iterations: usize,
    pub artifacts: Vec<PathBuf>,
}

impl FitOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.converged {
            exit::SUCCESS
        } else {
            exit::NOT_CONVERGED
        }
    }
}

/// Fits once and writes `Y, Z, W, E_L, E_S`, the trace, the affinity `A` and
/// the auxiliary `Q` (needed to re-check `||Q - Z||`).
/// `ablation=grmsc` fits the `gamma = 0` model; `both` fits the full model.
pub fn cmd_fit(cfg: &ExperimentConfig) -> Result<FitOutcome, CliError> {
    let ds = load_source(cfg)?;
    let variant = match cfg.ablation {
        Ablation::Grmsc => Variant::Grmsc,
        Ablation::Dgrmsc | Ablation::Both => Variant::Dgrmsc,
    };
    let fit = run_fit(&ds, &cfg.solver, variant)?;
    let affinity = spectral::affinity_from_z(&fit.state.z)?;

    let out = &cfg.output_dir;
    ensure_dir(out)?;
    let s = &fit.state;
    let paths: Vec<PathBuf> = FIT_ARTIFACTS.iter().map(|f| out.join(f)).collect();
    write_matrix(&paths[0], &s.y)?;
    write_matrix(&paths[1], &s.z)?;
    write_matrix(&paths[2], &s.w)?;
    write_matrix(&paths[3], &s.e_l)?;
    write_matrix(&paths[4], &s.e_s)?;
    write_atomic(&paths[5], fit.trace.to_csv().as_bytes())?;
    write_matrix(&paths[6], &affinity.a)?;
    write_matrix(&paths[7], &s.q)?;
    Ok(FitOutcome {
        converged: fit.trace.converged(),
        iterations: fit.trace.iterations(),
        artifacts: paths,
    })
}

#[derive(Debug, Clone)]
pub struct VariantReport {
    pub variant: Variant,
    pub report: MetricReport,
    pub seeds: Vec<u64>,
    /// Every fit behind this report converged.
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub reports: Vec<VariantReport>,
}

impl EvalOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.reports.iter().all(|r| r.converged) {
            exit::SUCCESS
        } else {
            exit::NOT_CONVERGED
        }
    }

    pub fn tables(&self) -> String {
        self.reports
            .iter()
            .map(|r| r.report.table(r.variant.name()))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn cluster_count(cfg: &ExperimentConfig, ds: &MultiViewDataset) -> Result<usize, CliError> {
    cfg.clusters
        .or_else(|| ds.n_classes())
        .ok_or_else(|| CliError::Config("cluster count unknown: pass --clusters".into()))
}

/// Fits (once, or once per run with `refit_per_run`) and scores `runs`
/// spectral clusterings seeded `seed, seed + 1, ...`.
fn evaluate_variant(
    ds: &MultiViewDataset,
    labels: &[usize],
    c: usize,
    solver_cfg: &SolverConfig,
    variant: Variant,
    runs: usize,
    refit_per_run: bool,
) -> Result<(VariantReport, Option<FitResult>), CliError> {
    let seeds: Vec<u64> = (0..runs as u64).map(|i| solver_cfg.seed.wrapping_add(i)).collect();
    let (values, converged, fit) = if refit_per_run {
        let per_run: Vec<Result<(MetricValues, bool), CliError>> = seeds
            .par_iter()
            .map(|&seed| {
                let cfg = SolverConfig { seed, ..solver_cfg.clone() };
                let fit = run_fit(ds, &cfg, variant)?;
                let a = spectral::affinity_from_z(&fit.state.z)?;
                let res = spectral::spectral_cluster(&a, c, seed)?;
                Ok((metrics::evaluate(labels, &res.labels)?, fit.trace.converged()))
            })
            .collect();
        let per_run = per_run.into_iter().collect::<Result<Vec<_>, _>>()?;
        let converged = per_run.iter().all(|(_, c)| *c);
        (per_run.into_iter().map(|(v, _)| v).collect::<Vec<_>>(), converged, None)
    } else {
        let fit = run_fit(ds, solver_cfg, variant)?;
        let a = spectral::affinity_from_z(&fit.state.z)?;
        let values: Vec<Result<MetricValues, CliError>> = seeds
            .par_iter()
            .map(|&seed| {
                let res = spectral::spectral_cluster(&a, c, seed)?;
                Ok(metrics::evaluate(labels, &res.labels)?)
            })
            .collect();
        let values = values.into_iter().collect::<Result<Vec<_>, _>>()?;
        let converged = fit.trace.converged();
        (values, converged, Some(fit))
    };
    Ok((
        VariantReport {
            variant,
            report: metrics::aggregate(&values)?,
            seeds,
            converged,
        },
        fit,
    ))
}

/// Writes `metrics_<variant>.csv`, `summary_<variant>.txt` and, for a single
/// fit, `trace_<variant>.csv` per requested variant.
pub fn cmd_eval(cfg: &ExperimentConfig) -> Result<EvalOutcome, CliError> {
    let ds = load_source(cfg)?;
    let labels = ds.labels().ok_or(CliError::NoLabels)?.to_vec();
    let c = cluster_count(cfg, &ds)?;
    ensure_dir(&cfg.output_dir)?;

    let mut reports = Vec::new();
    for &variant in cfg.ablation.variants() {
        let (vr, fit) = with_pool(|| {
            evaluate_variant(&ds, &labels, c, &cfg.solver, variant, cfg.runs, cfg.refit_per_run)
        })?;
        let name = variant.name();
        let out = &cfg.output_dir;
        write_atomic(
            &out.join(format!("metrics_{name}.csv")),
            vr.report.to_csv(&vr.seeds).as_bytes(),
        )?;
        write_atomic(
            &out.join(format!("summary_{name}.txt")),
            vr.report.table(name).as_bytes(),
        )?;
        if let Some(fit) = fit {
            write_atomic(
                &out.join(format!("trace_{name}.csv")),
                fit.trace.to_csv().as_bytes(),
            )?;
        }
        reports.push(vr);
    }
    Ok(EvalOutcome { reports })
}

/// Hyperparameter grid for `sweep`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub lambdas: Vec<f64>,
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl SweepGrid {
    /// `{0.001, 0.01, ..., 1000}`.
    pub fn decades() -> Vec<f64> {
        vec![0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0]
    }

    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut pts = Vec::new();
        for &l in &self.lambdas {
            for &b in &self.betas {
                for &g in &self.gammas {
                    pts.push((l, b, g));
                }
            }
        }
        pts
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub points: usize,
    pub failures: Vec<((f64, f64, f64), String)>,
    pub csv_path: PathBuf,
}

/// Evaluates every grid point and writes `sweep.csv` in long format
/// (`lambda,beta,gamma,metric,mean,std`) plus `sweep_failures.csv`. With
/// `ablation=grmsc` the gamma axis collapses to 0.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    grid: &SweepGrid,
    runs_override: Option<usize>,
) -> Result<SweepOutcome, CliError> {
    if grid.lambdas.is_empty() || grid.betas.is_empty() || grid.gammas.is_empty() {
        return Err(CliError::Config("sweep grid is empty".into()));
    }
    let ds = load_source(cfg)?;
    let labels = ds.labels().ok_or(CliError::NoLabels)?.to_vec();
    let c = cluster_count(cfg, &ds)?;
    let runs = runs_override.unwrap_or(cfg.runs).max(1);
    let variant = match cfg.ablation {
        Ablation::Grmsc => Variant::Grmsc,
        _ => Variant::Dgrmsc,
    };
    let grid = match variant {
        Variant::Grmsc => SweepGrid { gammas: vec![0.0], ..grid.clone() },
        Variant::Dgrmsc => grid.clone(),
    };
    ensure_dir(&cfg.output_dir)?;

    let mut csv = String::from("lambda,beta,gamma,metric,mean,std\n");
    let mut failed = String::from("lambda,beta,gamma,error\n");
    let mut failures = Vec::new();
    let points = grid.points();
    for &(l, b, g) in &points {
        let solver_cfg = SolverConfig { lambda: l, beta: b, gamma: g, ..cfg.solver.clone() };
        let res = with_pool(|| {
            evaluate_variant(&ds, &labels, c, &solver_cfg, variant, runs, cfg.refit_per_run)
        });
        match res {
            Ok((vr, _)) => {
                let mean = vr.report.mean.as_array();
                let std = vr.report.std.as_array();
                for (i, name) in MetricValues::NAMES.iter().enumerate() {
                    csv.push_str(&format!("{l:?},{b:?},{g:?},{name},{:?},{:?}\n", mean[i], std[i]));
                }
            }
            Err(e) => {
                let msg = e.to_string().replace(',', ";");
                failed.push_str(&format!("{l:?},{b:?},{g:?},{msg}\n"));
                failures.push(((l, b, g), msg));
            }
        }
    }
    let csv_path = cfg.output_dir.join("sweep.csv");
    write_atomic(&csv_path, csv.as_bytes())?;
    write_atomic(&cfg.output_dir.join("sweep_failures.csv"), failed.as_bytes())?;
    Ok(SweepOutcome {
        points: points.len(),
        failures,
        csv_path,
    })
}

/// Materializes the configured synthetic dataset under `output_dir`.
pub fn cmd_synth(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let ds = dataset::generate_synthetic(cfg.synthetic_spec())?;
    ds.save(&cfg.output_dir)?;
    Ok(cfg.output_dir.clone())
}
