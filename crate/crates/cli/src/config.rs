//! Experiment configuration: TOML file, then command-line overrides.

use std::path::{Path, PathBuf};

use eesim_core::bandit::{ActionSet, RewardParams};
use eesim_core::cascade::check_threshold;
use eesim_core::distill::{AblationConfig, LossMix};
use eesim_core::synth::SyntheticConfidenceModel;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed. Overrides the generator seed and the toy task/init seeds.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub max_caption_length: usize,
    pub generator: SyntheticConfidenceModel,
    pub reward: RewardConfig,
    pub sweep: SweepConfig,
    pub bandit: BanditConfig,
    pub distortion: DistortionConfig,
    pub lambda_sweep: LambdaSweepConfig,
    pub toy: AblationConfig,
    pub train_toy: TrainToyConfig,
    pub gen_traces: GenTracesConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            max_caption_length: eesim_core::cascade::DEFAULT_MAX_CAPTION_LENGTH,
            generator: SyntheticConfidenceModel::default(),
            reward: RewardConfig::default(),
            sweep: SweepConfig::default(),
            bandit: BanditConfig::default(),
            distortion: DistortionConfig::default(),
            lambda_sweep: LambdaSweepConfig::default(),
            toy: AblationConfig::default(),
            train_toy: TrainToyConfig::default(),
            gen_traces: GenTracesConfig::default(),
        }
    }
}

/// Latency cost `o_i = lambda * i` (`o_1 = 0`) scaled by `mu` (default `1/N`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub lambda: f64,
    pub mu: Option<f64>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepSource {
    /// Captions drawn from the synthetic generator.
    Synthetic,
    /// A trace file.
    Traces,
    /// A toy cascade checkpoint run on the toy task's held-out split.
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    pub source: SweepSource,
    pub traces: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub images: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alphas: (0..=10).map(|k| k as f64 / 10.0).collect(),
            source: SweepSource::Synthetic,
            traces: None,
            model: None,
            images: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BanditConfig {
    pub actions: Vec<f64>,
    pub gamma: f64,
    pub tokens: u64,
    pub oracle_samples: usize,
    pub oracle_seed: u64,
    /// Snapshot to continue from instead of a fresh state.
    pub resume: Option<PathBuf>,
    /// Index of the first image in the stream, so a resumed run sees new images.
    pub start_image: u64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            actions: ActionSet::tenths().thresholds().to_vec(),
            gamma: 1.0,
            tokens: 100_000,
            oracle_samples: eesim_core::bandit::DEFAULT_ORACLE_SAMPLES,
            oracle_seed: 0,
            resume: None,
            start_image: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistortionConfig {
    pub sigmas: Vec<f64>,
    pub fixed_threshold: f64,
    pub policies: Vec<Policy>,
    pub tokens: u64,
}

impl Default for DistortionConfig {
    fn default() -> Self {
        Self {
            sigmas: vec![0.0, 1.0, 2.0],
            fixed_threshold: 0.6,
            policies: vec![Policy::Fixed, Policy::Adaptive],
            tokens: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LambdaSweepConfig {
    pub lambdas: Vec<f64>,
    pub tokens: u64,
}

impl Default for LambdaSweepConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![0.0, 0.5, 1.0, 2.0, 4.0],
            tokens: 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainToyConfig {
    pub mix: LossMix,
    /// Also write the held-out split as a trace file.
    pub export_traces: bool,
}

impl Default for TrainToyConfig {
    fn default() -> Self {
        Self {
            mix: LossMix::Both,
            export_traces: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenTracesConfig {
    pub images: usize,
    pub file: String,
}

impl Default for GenTracesConfig {
    fn default() -> Self {
        Self {
            images: 1000,
            file: "traces.jsonl".to_string(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_list(name: &str, values: &[f64], lo: f64, hi: f64) -> CliResult<()> {
    if values.is_empty() {
        return Err(config_err(format!("{name} must not be empty")));
    }
    if let Some(v) = values.iter().find(|v| !(lo..=hi).contains(*v)) {
        return Err(config_err(format!("{name} value {v} outside [{lo}, {hi}]")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string().replace('\n', " ")))
    }

    /// Pushes the master seed into every seeded component.
    pub fn resolve_seeds(&mut self) {
        self.generator.seed = self.seed;
        self.toy = self.toy.with_seed(self.seed);
    }

    pub fn reward_params(&self, lambda: f64) -> CliResult<RewardParams> {
        let n = self.generator.layers;
        let params = match self.reward.mu {
            Some(mu) => RewardParams::linear_with_mu(n, lambda, mu),
            None => RewardParams::linear(n, lambda),
        };
        Ok(params?)
    }

    pub fn actions(&self) -> CliResult<ActionSet> {
        Ok(ActionSet::new(self.bandit.actions.clone())?)
    }

    fn validate_common(&self) -> CliResult<()> {
        self.generator.validate()?;
        if self.max_caption_length == 0 {
            return Err(config_err("max_caption_length must be >= 1"));
        }
        if !(self.reward.lambda.is_finite() && self.reward.lambda >= 0.0) {
            return Err(config_err(format!(
                "lambda must be >= 0, got {}",
                self.reward.lambda
            )));
        }
        self.reward_params(self.reward.lambda)?;
        Ok(())
    }

    fn validate_bandit(&self) -> CliResult<()> {
        self.actions()?;
        if !(self.bandit.gamma.is_finite() && self.bandit.gamma >= 1.0) {
            return Err(config_err(format!(
                "gamma must be >= 1, got {}",
                self.bandit.gamma
            )));
        }
        if self.bandit.oracle_samples == 0 {
            return Err(config_err("oracle_samples must be >= 1"));
        }
        Ok(())
    }

    pub fn validate_sweep(&self) -> CliResult<()> {
        self.validate_common()?;
        check_list("sweep.alphas", &self.sweep.alphas, 0.0, 1.0)?;
        match self.sweep.source {
            SweepSource::Synthetic if self.sweep.images == 0 => {
                Err(config_err("sweep.images must be >= 1"))
            }
            SweepSource::Traces => require_file("sweep.traces", self.sweep.traces.as_deref()),
            SweepSource::Model => {
                self.toy.validate()?;
                require_file("sweep.model", self.sweep.model.as_deref())
            }
            _ => Ok(()),
        }
    }

    pub fn validate_bandit_cmd(&self) -> CliResult<()> {
        self.validate_common()?;
        self.validate_bandit()?;
        if self.bandit.tokens == 0 {
            return Err(config_err("bandit.tokens must be >= 1"));
        }
        if let Some(p) = &self.bandit.resume {
            require_file("bandit.resume", Some(p))?;
        }
        Ok(())
    }

    pub fn validate_distortion(&self) -> CliResult<()> {
        self.validate_common()?;
        self.validate_bandit()?;
        check_list("distortion.sigmas", &self.distortion.sigmas, 0.0, f64::MAX)?;
        check_threshold(self.distortion.fixed_threshold)?;
        if self.distortion.policies.is_empty() {
            return Err(config_err("distortion.policies must not be empty"));
        }
        if self.distortion.tokens == 0 {
            return Err(config_err("distortion.tokens must be >= 1"));
        }
        Ok(())
    }

    pub fn validate_lambda_sweep(&self) -> CliResult<()> {
        self.validate_common()?;
        self.validate_bandit()?;
        check_list(
            "lambda_sweep.lambdas",
            &self.lambda_sweep.lambdas,
            0.0,
            f64::MAX,
        )?;
        if self.lambda_sweep.tokens == 0 {
            return Err(config_err("lambda_sweep.tokens must be >= 1"));
        }
        Ok(())
    }

    pub fn validate_toy(&self) -> CliResult<()> {
        Ok(self.toy.validate()?)
    }

    pub fn validate_gen_traces(&self) -> CliResult<()> {
        self.validate_common()?;
        if self.gen_traces.images == 0 {
            return Err(config_err("gen_traces.images must be >= 1"));
        }
        if self.gen_traces.file.is_empty() {
            return Err(config_err("gen_traces.file must not be empty"));
        }
        Ok(())
    }
}

fn require_file(name: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        None => Err(config_err(format!("{name} is required for this source"))),
        Some(p) if !p.is_file() => Err(CliError::Io {
            path: p.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
        }),
        Some(_) => Ok(()),
    }
}
