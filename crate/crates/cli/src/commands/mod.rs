mod adaptive;
mod sweep;
mod toy;
mod traces;

use std::path::PathBuf;

use eesim_core::bandit::AdaptiveRun;
use eesim_core::cascade::{speedup_ratio, ExitDecision};
use serde::Serialize;

use crate::cli::{Cli, Command};
use crate::error::CliResult;

pub use adaptive::{cmd_bandit, cmd_compare_distortion, cmd_lambda_sweep};
pub use sweep::cmd_sweep_threshold;
pub use toy::{cmd_ablation, cmd_train_toy};
pub use traces::cmd_gen_traces;

/// Resolves the config, validates it, runs the command and returns the files
/// it wrote.
pub fn run(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    let config = cli.effective_config()?;
    match &cli.command {
        Command::SweepThreshold(_) => cmd_sweep_threshold(&config),
        Command::Bandit(_) => cmd_bandit(&config),
        Command::CompareDistortion(_) => cmd_compare_distortion(&config),
        Command::Ablation(_) => cmd_ablation(&config),
        Command::LambdaSweep(_) => cmd_lambda_sweep(&config),
        Command::TrainToy(_) => cmd_train_toy(&config),
        Command::GenTraces(_) => cmd_gen_traces(&config),
    }
}

/// Fraction of labelled decisions that emitted their target.
pub(crate) fn token_accuracy<'a>(
    decisions: impl IntoIterator<Item = &'a ExitDecision>,
) -> Option<f64> {
    let (mut hit, mut seen) = (0u64, 0u64);
    for d in decisions {
        if let Some(ok) = d.correct {
            seen += 1;
            hit += u64::from(ok);
        }
    }
    (seen > 0).then(|| hit as f64 / seen as f64)
}

/// Aggregate outcome of one policy over a token stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyStats {
    pub tokens: u64,
    pub captions: usize,
    pub speedup: f64,
    pub token_accuracy: Option<f64>,
    pub mean_exit_layer: f64,
    pub mean_reward: f64,
}

impl PolicyStats {
    pub(crate) fn of(run: &AdaptiveRun, layers: usize) -> CliResult<Self> {
        let hist = run.histogram(layers);
        Ok(Self {
            tokens: hist.total(),
            captions: run.captions.len(),
            speedup: speedup_ratio(&hist, layers)?,
            token_accuracy: token_accuracy(run.captions.iter().flat_map(|c| &c.tokens)),
            mean_exit_layer: hist.mean_exit_layer().unwrap_or(f64::NAN),
            mean_reward: run.log.mean_reward().unwrap_or(f64::NAN),
        })
    }
}
