use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use eesim_core::distill::LossMix;

use crate::config::{ExperimentConfig, Policy, SweepSource};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "eesim", version, about = "Early-exit cascade simulator")]
pub struct Cli {
    /// TOML experiment config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed for every generator in the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Speedup and accuracy at each fixed threshold.
    SweepThreshold(SweepArgs),
    /// Online UCB threshold selection with regret accounting.
    Bandit(BanditArgs),
    /// Fixed threshold against adaptive thresholds at several distortion levels.
    CompareDistortion(DistortionArgs),
    /// Per-layer accuracy of the three exit-loss variants on the toy task.
    Ablation(ToyArgs),
    /// Adaptive runs across latency cost weights.
    LambdaSweep(LambdaArgs),
    /// Trains one toy cascade and writes its checkpoint.
    TrainToy(TrainToyArgs),
    /// Writes synthetic captions as a trace file.
    GenTraces(GenTracesArgs),
}

#[derive(Debug, Args)]
pub struct GeneratorArgs {
    /// Distortion level of the synthetic generator.
    #[arg(long)]
    pub sigma: Option<f64>,

    #[arg(long)]
    pub layers: Option<usize>,

    #[arg(long)]
    pub max_caption_length: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RewardArgs {
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Cost scale; defaults to 1/N.
    #[arg(long)]
    pub mu: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,

    /// Comma-separated thresholds.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,

    #[arg(long, value_enum)]
    pub source: Option<SweepSource>,

    /// Trace file (implies `--source traces`).
    #[arg(long)]
    pub traces: Option<PathBuf>,

    /// Toy cascade checkpoint (implies `--source model`).
    #[arg(long)]
    pub model: Option<PathBuf>,

    #[arg(long)]
    pub images: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BanditCommon {
    /// Comma-separated action set.
    #[arg(long, value_delimiter = ',')]
    pub actions: Option<Vec<f64>>,

    #[arg(long)]
    pub gamma: Option<f64>,

    #[arg(long)]
    pub oracle_samples: Option<usize>,

    #[arg(long)]
    pub oracle_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BanditArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[command(flatten)]
    pub reward: RewardArgs,
    #[command(flatten)]
    pub bandit: BanditCommon,

    /// Token rounds to play.
    #[arg(long)]
    pub tokens: Option<u64>,

    /// Continue from a saved bandit state.
    #[arg(long)]
    pub resume: Option<PathBuf>,

    /// First image index of the stream.
    #[arg(long)]
    pub start_image: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DistortionArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[command(flatten)]
    pub reward: RewardArgs,
    #[command(flatten)]
    pub bandit: BanditCommon,

    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,

    #[arg(long)]
    pub fixed_threshold: Option<f64>,

    #[arg(long, value_enum, value_delimiter = ',')]
    pub policies: Option<Vec<Policy>>,

    #[arg(long)]
    pub tokens: Option<u64>,
}

#[derive(Debug, Args)]
pub struct LambdaArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[command(flatten)]
    pub bandit: BanditCommon,

    #[arg(long)]
    pub mu: Option<f64>,

    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,

    #[arg(long)]
    pub tokens: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[arg(long)]
    pub train_examples: Option<usize>,

    #[arg(long)]
    pub test_examples: Option<usize>,

    #[arg(long)]
    pub backbone_epochs: Option<usize>,

    #[arg(long)]
    pub exit_epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainToyArgs {
    #[command(flatten)]
    pub toy: ToyArgs,

    /// Exit loss: ce-only, kl-only or both.
    #[arg(long, value_parser = parse_mix)]
    pub mix: Option<LossMix>,

    /// Skip writing the held-out split as traces.
    #[arg(long)]
    pub no_export_traces: bool,
}

#[derive(Debug, Args)]
pub struct GenTracesArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,

    #[arg(long)]
    pub images: Option<usize>,

    /// File name inside the output directory.
    #[arg(long)]
    pub file: Option<String>,
}

fn parse_mix(s: &str) -> Result<LossMix, String> {
    LossMix::ALL
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| format!("expected one of ce-only, kl-only, both; got {s:?}"))
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl GeneratorArgs {
    fn apply(&self, c: &mut ExperimentConfig) {
        set(&mut c.generator.sigma, self.sigma);
        set(&mut c.generator.layers, self.layers);
        set(&mut c.max_caption_length, self.max_caption_length);
    }
}

impl RewardArgs {
    fn apply(&self, c: &mut ExperimentConfig) {
        set(&mut c.reward.lambda, self.lambda);
        if self.mu.is_some() {
            c.reward.mu = self.mu;
        }
    }
}

impl BanditCommon {
    fn apply(&self, c: &mut ExperimentConfig) {
        set(&mut c.bandit.actions, self.actions.clone());
        set(&mut c.bandit.gamma, self.gamma);
        set(&mut c.bandit.oracle_samples, self.oracle_samples);
        set(&mut c.bandit.oracle_seed, self.oracle_seed);
    }
}

impl ToyArgs {
    fn apply(&self, c: &mut ExperimentConfig) {
        set(&mut c.toy.train_examples, self.train_examples);
        set(&mut c.toy.test_examples, self.test_examples);
        set(&mut c.toy.backbone.epochs, self.backbone_epochs);
        set(&mut c.toy.exits.epochs, self.exit_epochs);
    }
}

impl Cli {
    /// Config file, then flags, then the master seed pushed into components.
    pub fn effective_config(&self) -> CliResult<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        set(&mut c.seed, self.seed);
        set(&mut c.out_dir, self.out_dir.clone());
        match &self.command {
            Command::SweepThreshold(a) => {
                a.generator.apply(&mut c);
                set(&mut c.sweep.alphas, a.alphas.clone());
                set(&mut c.sweep.images, a.images);
                if a.traces.is_some() {
                    c.sweep.traces = a.traces.clone();
                    c.sweep.source = SweepSource::Traces;
                }
                if a.model.is_some() {
                    c.sweep.model = a.model.clone();
                    c.sweep.source = SweepSource::Model;
                }
                set(&mut c.sweep.source, a.source);
            }
            Command::Bandit(a) => {
                a.generator.apply(&mut c);
                a.reward.apply(&mut c);
                a.bandit.apply(&mut c);
                set(&mut c.bandit.tokens, a.tokens);
                set(&mut c.bandit.start_image, a.start_image);
                if a.resume.is_some() {
                    c.bandit.resume = a.resume.clone();
                }
            }
            Command::CompareDistortion(a) => {
                a.generator.apply(&mut c);
                a.reward.apply(&mut c);
                a.bandit.apply(&mut c);
                set(&mut c.distortion.sigmas, a.sigmas.clone());
                set(&mut c.distortion.fixed_threshold, a.fixed_threshold);
                set(&mut c.distortion.policies, a.policies.clone());
                set(&mut c.distortion.tokens, a.tokens);
            }
            Command::LambdaSweep(a) => {
                a.generator.apply(&mut c);
                a.bandit.apply(&mut c);
                if a.mu.is_some() {
                    c.reward.mu = a.mu;
                }
                set(&mut c.lambda_sweep.lambdas, a.lambdas.clone());
                set(&mut c.lambda_sweep.tokens, a.tokens);
            }
            Command::Ablation(a) => a.apply(&mut c),
            Command::TrainToy(a) => {
                a.toy.apply(&mut c);
                set(&mut c.train_toy.mix, a.mix);
                if a.no_export_traces {
                    c.train_toy.export_traces = false;
                }
            }
            Command::GenTraces(a) => {
                a.generator.apply(&mut c);
                set(&mut c.gen_traces.images, a.images);
                set(&mut c.gen_traces.file, a.file.clone());
            }
        }
        c.resolve_seeds();
        Ok(c)
    }
}
