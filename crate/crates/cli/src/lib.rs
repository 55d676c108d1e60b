//! Experiment harness: `fit`, `eval`, `sweep` and `synth` commands.

pub mod commands;
pub mod config;

use thiserror::Error;

pub use commands::{cmd_eval, cmd_fit, cmd_sweep, cmd_synth, EvalOutcome, FitOutcome, SweepGrid};
pub use config::{Ablation, DataSource, ExperimentConfig, Variant};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// Artifacts were written but the solver hit `max_iter` first.
    pub const NOT_CONVERGED: i32 = 2;
    pub const INPUT_ERROR: i32 = 3;
    pub const DIVERGED: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("evaluation needs ground-truth labels, but the dataset has none")]
    NoLabels,

    #[error(transparent)]
    Core(#[from] dgrmsc::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use dgrmsc::Error as E;
        match self {
            CliError::Core(E::Diverged { .. } | E::SingularSylvester { .. } | E::Decomposition(_)) => {
                exit::DIVERGED
            }
            _ => exit::INPUT_ERROR,
        }
    }
}
