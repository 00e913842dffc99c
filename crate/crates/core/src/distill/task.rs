use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A short target sequence with one input vector per position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticExample {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<u32>,
}

impl SyntheticExample {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn check(&self, input_dim: usize, vocab: usize) -> Result<()> {
        if self.inputs.len() != self.targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} input vectors for {} targets",
                self.inputs.len(),
                self.targets.len()
            )));
        }
        if let Some(x) = self.inputs.iter().find(|x| x.len() != input_dim) {
            return Err(Error::DimensionMismatch(format!(
                "input has {} features, model expects {input_dim}",
                x.len()
            )));
        }
        if let Some(&y) = self.targets.iter().find(|&&y| y as usize >= vocab) {
            return Err(Error::DimensionMismatch(format!(
                "target {y} outside vocabulary of size {vocab}"
            )));
        }
        Ok(())
    }
}

/// Gaussian-mixture classification task.
///
/// Every class owns `modes` random prototype centres; a token picks a class,
/// one of its centres, and adds isotropic noise. Training labels may be
/// replaced by a uniformly random class with probability `label_noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyTask {
    pub input_dim: usize,
    pub vocab: usize,
    pub modes: usize,
    pub centre_scale: f64,
    pub input_noise: f64,
    pub tokens_per_example: usize,
    pub seed: u64,
}

impl Default for ToyTask {
    fn default() -> Self {
        Self {
            input_dim: 16,
            vocab: 32,
            modes: 8,
            centre_scale: 1.0,
            input_noise: 0.3,
            tokens_per_example: 4,
            seed: 0,
        }
    }
}

impl ToyTask {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.vocab < 2 || self.modes == 0 || self.tokens_per_example == 0
        {
            return Err(Error::InvalidParams(format!(
                "degenerate toy task: {self:?}"
            )));
        }
        if !(self.centre_scale.is_finite()
            && self.input_noise.is_finite()
            && self.input_noise >= 0.0)
        {
            return Err(Error::InvalidParams(
                "toy task scales must be finite".into(),
            ));
        }
        Ok(())
    }

    fn centres(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.vocab * self.modes)
            .map(|_| {
                (0..self.input_dim)
                    .map(|_| self.centre_scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect()
    }

    /// `count` examples drawn from split stream `split`. The class centres
    /// depend only on `seed`, so splits share one task.
    pub fn sample(
        &self,
        count: usize,
        label_noise: f64,
        split: u64,
    ) -> Result<Vec<SyntheticExample>> {
        self.validate()?;
        if !(0.0..=1.0).contains(&label_noise) {
            return Err(Error::InvalidParams(format!(
                "label noise {label_noise} outside [0, 1]"
            )));
        }
        let centres = self.centres();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(split + 1);
        let examples = (0..count)
            .map(|_| {
                let mut inputs = Vec::with_capacity(self.tokens_per_example);
                let mut targets = Vec::with_capacity(self.tokens_per_example);
                for _ in 0..self.tokens_per_example {
                    let class = rng.random_range(0..self.vocab);
                    let mode = rng.random_range(0..self.modes);
                    let centre = &centres[class * self.modes + mode];
                    let x = centre
                        .iter()
                        .map(|c| c + self.input_noise * rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    let flip = rng.random::<f64>() < label_noise;
                    let noisy = rng.random_range(0..self.vocab);
                    inputs.push(x);
                    targets.push(if flip { noisy } else { class } as u32);
                }
                SyntheticExample { inputs, targets }
            })
            .collect();
        Ok(examples)
    }
}

/// Two well-separated Gaussian blobs in `input_dim` dimensions, labels 0/1.
pub fn separable_two_class(input_dim: usize, count: usize, seed: u64) -> Vec<SyntheticExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let y = rng.random_range(0..2u32);
            let sign = if y == 0 { -1.0 } else { 1.0 };
            let x = (0..input_dim)
                .map(|_| sign + 0.3 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            SyntheticExample {
                inputs: vec![x],
                targets: vec![y],
            }
        })
        .collect()
}
