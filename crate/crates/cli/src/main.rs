use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mvsc_cli::config::parse_list;
use mvsc_cli::{cmd_eval, cmd_fit, cmd_sweep, cmd_synth, exit, CliError, ExperimentConfig, SweepGrid};

#[derive(Parser)]
#[command(name = "mvsc", version, about = "Double-graph regularized multi-view subspace clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit once and write Y, Z, W, E_L, E_S, Q, the trace and the affinity.
    Fit(Common),
    /// Fit, then score repeated spectral clusterings against the labels.
    Eval(Common),
    /// Evaluate over a lambda/beta/gamma grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated lambda values.
        #[arg(long)]
        lambda_grid: Option<String>,
        #[arg(long)]
        beta_grid: Option<String>,
        #[arg(long)]
        gamma_grid: Option<String>,
        /// Use {0.001, ..., 1000} on every axis not given explicitly.
        #[arg(long)]
        decade_grid: bool,
        /// Runs per grid point (defaults to --runs).
        #[arg(long)]
        sweep_runs: Option<usize>,
    },
    /// Write the configured synthetic dataset to --out.
    Synth(Common),
}

/// Every flag maps onto the config key of the same name.
#[derive(Args, Default)]
struct Common {
    /// TOML configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory (view_<i>.csv, labels.csv).
    #[arg(long)]
    data: Option<String>,
    /// Dataset files are rows-as-samples.
    #[arg(long)]
    transpose: bool,
    /// Min-max scale every feature to [0, 1].
    #[arg(long)]
    minmax: bool,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    /// Latent dimension m, or "auto".
    #[arg(long)]
    latent_dim: Option<String>,
    /// Neighbors per k-NN graph.
    #[arg(long)]
    knn: Option<String>,
    /// View-graph kernel width, or "auto".
    #[arg(long)]
    sigma: Option<String>,
    /// Latent-graph kernel width, or "auto".
    #[arg(long)]
    latent_sigma: Option<String>,
    /// every | every:<t> | frozen:<t>
    #[arg(long)]
    ly_refresh: Option<String>,
    #[arg(long)]
    mu0: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    mu_max: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    runs: Option<String>,
    #[arg(long)]
    clusters: Option<String>,
    /// dgrmsc | grmsc | both
    #[arg(long)]
    ablation: Option<String>,
    /// Reseed and refit the optimizer for every evaluation run.
    #[arg(long)]
    refit_per_run: bool,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    n_per_cluster: Option<String>,
    #[arg(long)]
    synth_clusters: Option<String>,
    /// Comma-separated per-view dimensions.
    #[arg(long)]
    view_dims: Option<String>,
    #[arg(long)]
    latent_rank: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    separation: Option<String>,
    #[arg(long)]
    synth_seed: Option<String>,
}

impl Common {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut kv: Vec<(&'static str, String)> = [
            ("data", &self.data),
            ("lambda", &self.lambda),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("latent-dim", &self.latent_dim),
            ("knn", &self.knn),
            ("sigma", &self.sigma),
            ("latent-sigma", &self.latent_sigma),
            ("ly-refresh", &self.ly_refresh),
            ("mu0", &self.mu0),
            ("rho", &self.rho),
            ("mu-max", &self.mu_max),
            ("eps", &self.eps),
            ("max-iter", &self.max_iter),
            ("seed", &self.seed),
            ("runs", &self.runs),
            ("clusters", &self.clusters),
            ("ablation", &self.ablation),
            ("out", &self.out),
            ("n-per-cluster", &self.n_per_cluster),
            ("synth-clusters", &self.synth_clusters),
            ("view-dims", &self.view_dims),
            ("latent-rank", &self.latent_rank),
            ("noise", &self.noise),
            ("separation", &self.separation),
            ("synth-seed", &self.synth_seed),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
        .collect();
        for (k, on) in [
            ("transpose", self.transpose),
            ("minmax", self.minmax),
            ("refit-per-run", self.refit_per_run),
        ] {
            if on {
                kv.push((k, "true".into()));
            }
        }
        kv
    }

    fn build(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_file(p)?;
        }
        for (k, v) in self.overrides() {
            cfg.set(k, &v)?;
        }
        cfg.finalize()
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Fit(common) => {
            let cfg = common.build()?;
            let out = cmd_fit(&cfg)?;
            eprintln!(
                "fit: {} after {} iterations; artifacts in {}",
                if out.converged { "converged" } else { "max-iter reached" },
                out.iterations,
                cfg.output_dir.display()
            );
            Ok(out.exit_code())
        }
        Command::Eval(common) => {
            let cfg = common.build()?;
            let out = cmd_eval(&cfg)?;
            print!("{}", out.tables());
            Ok(out.exit_code())
        }
        Command::Sweep {
            common,
            lambda_grid,
            beta_grid,
            gamma_grid,
            decade_grid,
            sweep_runs,
        } => {
            let cfg = common.build()?;
            let axis = |given: &Option<String>, key: &str, current: f64| -> Result<Vec<f64>, CliError> {
                match given {
                    Some(v) => parse_list(key, v),
                    None if decade_grid => Ok(SweepGrid::decades()),
                    None => Ok(vec![current]),
                }
            };
            let grid = SweepGrid {
                lambdas: axis(&lambda_grid, "lambda-grid", cfg.solver.lambda)?,
                betas: axis(&beta_grid, "beta-grid", cfg.solver.beta)?,
                gammas: axis(&gamma_grid, "gamma-grid", cfg.solver.gamma)?,
            };
            let out = cmd_sweep(&cfg, &grid, sweep_runs)?;
            eprintln!(
                "sweep: {} points, {} failed; results in {}",
                out.points,
                out.failures.len(),
                out.csv_path.display()
            );
            Ok(exit::SUCCESS)
        }
        Command::Synth(common) => {
            let cfg = common.build()?;
            let dir = cmd_synth(&cfg)?;
            eprintln!("synth: dataset written to {}", dir.display());
            Ok(exit::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
