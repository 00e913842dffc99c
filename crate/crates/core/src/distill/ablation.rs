use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{CascadeDims, ToyCascade};
use super::task::ToyTask;
use super::train::{layer_accuracy, train_backbone, train_exits, LossMix, LrSchedule, TrainConfig};
use crate::error::{Error, Result};

/// Largest accuracy spread between loss variants at the deepest exit.
pub const DEEPEST_EXIT_EPSILON: f64 = 0.03;
/// Largest accuracy gap between any variant's deepest exit and the teacher.
pub const TEACHER_GAP_EPSILON: f64 = 0.06;

/// Everything that defines one two-stage training experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    pub dims: CascadeDims,
    pub task: ToyTask,
    pub train_examples: usize,
    pub test_examples: usize,
    pub label_noise: f64,
    pub backbone: TrainConfig,
    pub exits: TrainConfig,
    pub init_seed: u64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            dims: CascadeDims::default(),
            task: ToyTask::default(),
            train_examples: 1000,
            test_examples: 1000,
            label_noise: 0.3,
            backbone: TrainConfig {
                epochs: 60,
                batch_size: Some(32),
                schedule: LrSchedule {
                    initial: 0.5,
                    decay: 0.5,
                    step_every: 20,
                },
            },
            exits: TrainConfig {
                epochs: 30,
                batch_size: Some(32),
                schedule: LrSchedule {
                    initial: 0.1,
                    decay: 0.5,
                    step_every: 10,
                },
            },
            init_seed: 0,
        }
    }
}

impl AblationConfig {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        self.task.validate()?;
        if self.task.input_dim != self.dims.input || self.task.vocab != self.dims.vocab {
            return Err(Error::DimensionMismatch(format!(
                "task is {}->{} but cascade is {}->{}",
                self.task.input_dim, self.task.vocab, self.dims.input, self.dims.vocab
            )));
        }
        if self.train_examples == 0 || self.test_examples == 0 {
            return Err(Error::InvalidParams(
                "train and test sets must be nonempty".into(),
            ));
        }
        Ok(())
    }

    /// Same experiment under a different seed for both task and init.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.task.seed = seed;
        c.init_seed = seed;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub mix: LossMix,
    /// Held-out accuracy of layers `1..=N` (the last entry is the teacher).
    pub accuracy: Vec<f64>,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub backbone_losses: Vec<f64>,
    pub teacher_accuracy: f64,
    pub variants: Vec<VariantResult>,
}

impl AblationResult {
    pub fn variant(&self, mix: LossMix) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.mix == mix)
    }

    /// Max minus min accuracy across variants at exit `layer` (1-based).
    pub fn spread_at(&self, layer: usize) -> f64 {
        let accs = self.variants.iter().map(|v| v.accuracy[layer - 1]);
        let hi = accs.clone().fold(f64::NEG_INFINITY, f64::max);
        let lo = accs.fold(f64::INFINITY, f64::min);
        hi - lo
    }
}

/// Stage one once, then stage two for every variant from the same frozen model.
pub fn run_ablation(cfg: &AblationConfig, mixes: &[LossMix]) -> Result<AblationResult> {
    cfg.validate()?;
    let train = cfg.task.sample(cfg.train_examples, cfg.label_noise, 0)?;
    let test = cfg.task.sample(cfg.test_examples, 0.0, 1)?;
    let mut base = ToyCascade::new(cfg.dims, cfg.init_seed)?;
    let report = train_backbone(&mut base, &train, &cfg.backbone)?;
    let teacher_accuracy = *layer_accuracy(&base, &test)?.last().expect("nonempty");

    let variants = mixes
        .par_iter()
        .map(|&mix| {
            let mut m = base.clone();
            let r = train_exits(&mut m, &train, &cfg.exits, mix)?;
            Ok(VariantResult {
                mix,
                accuracy: layer_accuracy(&m, &test)?,
                final_loss: r.epoch_losses.last().copied().unwrap_or(f64::NAN),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationResult {
        backbone_losses: report.epoch_losses,
        teacher_accuracy,
        variants,
    })
}
