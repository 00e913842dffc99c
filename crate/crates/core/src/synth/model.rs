use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeShape, LayerOutcome, TokenTrace};
use crate::error::{Error, Result};

const IMAGE_DOMAIN: u64 = 1;
const ORACLE_DOMAIN: u64 = 2;

/// Generator of per-layer confidence profiles.
///
/// Each token draws a difficulty `d` and its layer-`i` logit rises as
/// `growth * (i - d)`. A share of tokens is ambiguous: their logit saturates
/// at a per-token ceiling, so going deeper stops paying off. Distortion `sigma`
/// lowers every logit by `distortion_penalty * sigma` and raises the ambiguous
/// share to `1 - (1 - ambiguous_share) * exp(-ambiguity_growth * sigma)`.
///
/// Token ids follow a calibrated-confidence rule: with a per-token uniform
/// `u`, layer `i` predicts the target when `C_i > u` and a fixed distractor
/// otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfidenceModel {
    pub layers: usize,
    pub vocab: u32,
    pub eos_id: u32,
    /// Difficulty is uniform on `[mean - spread, mean + spread]`.
    pub difficulty_mean: f64,
    pub difficulty_spread: f64,
    pub growth: f64,
    pub sigma: f64,
    pub distortion_penalty: f64,
    pub noise: f64,
    pub ambiguous_share: f64,
    pub ambiguity_growth: f64,
    /// Ceiling confidence of an ambiguous token, uniform in logit space
    /// between these two probabilities.
    pub ceiling_low: f64,
    pub ceiling_high: f64,
    pub eos_prob: f64,
    pub seed: u64,
}

impl Default for SyntheticConfidenceModel {
    fn default() -> Self {
        Self {
            layers: 12,
            vocab: 32,
            eos_id: 0,
            difficulty_mean: 6.5,
            difficulty_spread: 5.5,
            growth: 1.5,
            sigma: 0.0,
            distortion_penalty: 1.0,
            noise: 0.05,
            ambiguous_share: 0.35,
            ambiguity_growth: 0.4,
            ceiling_low: 0.6,
            ceiling_high: 0.7,
            eos_prob: 0.1,
            seed: 0,
        }
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn domain_rng(seed: u64, domain: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

impl SyntheticConfidenceModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.layers < 2 {
            return bad(format!("layers must be >= 2, got {}", self.layers));
        }
        if self.vocab < 3 {
            return bad(format!("vocab must be >= 3, got {}", self.vocab));
        }
        if self.eos_id >= self.vocab {
            return bad(format!(
                "eos id {} outside vocab {}",
                self.eos_id, self.vocab
            ));
        }
        let finite = [
            self.difficulty_mean,
            self.difficulty_spread,
            self.growth,
            self.sigma,
            self.distortion_penalty,
            self.noise,
            self.ambiguity_growth,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("generator parameters must be finite".into());
        }
        if self.difficulty_spread < 0.0 || self.noise < 0.0 || self.distortion_penalty < 0.0 {
            return bad("spread, noise and distortion penalty must be >= 0".into());
        }
        if self.ambiguity_growth < 0.0 {
            return bad("ambiguity growth must be >= 0".into());
        }
        if self.growth <= 0.0 {
            return bad(format!("growth must be > 0, got {}", self.growth));
        }
        if self.sigma < 0.0 {
            return bad(format!("sigma must be >= 0, got {}", self.sigma));
        }
        for (name, p) in [
            ("ambiguous_share", self.ambiguous_share),
            ("eos_prob", self.eos_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if !(0.0 < self.ceiling_low
            && self.ceiling_low <= self.ceiling_high
            && self.ceiling_high < 1.0)
        {
            return bad(format!(
                "ceiling range must satisfy 0 < low <= high < 1, got [{}, {}]",
                self.ceiling_low, self.ceiling_high
            ));
        }
        Ok(())
    }

    pub fn shape(&self) -> CascadeShape {
        CascadeShape {
            layers: self.layers,
            vocab: self.vocab,
            eos_id: self.eos_id,
        }
    }

    /// Same model at distortion `sigma`.
    pub fn distort(&self, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "sigma must be >= 0, got {sigma}"
            )));
        }
        Ok(Self {
            sigma,
            ..self.clone()
        })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Probability that a token is ambiguous at the current `sigma`.
    pub fn ambiguous_probability(&self) -> f64 {
        1.0 - (1.0 - self.ambiguous_share) * (-self.ambiguity_growth * self.sigma).exp()
    }

    /// Draws one labelled token trace.
    ///
    /// The number and order of draws does not depend on `sigma`, so two
    /// models that differ only in distortion map the same stream to paired
    /// traces.
    pub fn sample_trace<R: Rng + ?Sized>(&self, rng: &mut R) -> TokenTrace {
        let d = self.difficulty_mean + self.difficulty_spread * (2.0 * rng.random::<f64>() - 1.0);
        let ambiguous = rng.random::<f64>() < self.ambiguous_probability();
        let (lo, hi) = (logit(self.ceiling_low), logit(self.ceiling_high));
        let ceiling = lo + (hi - lo) * rng.random::<f64>();
        let target = if rng.random::<f64>() < self.eos_prob {
            self.eos_id
        } else {
            skip(rng.random_range(0..self.vocab - 1), &[self.eos_id])
        };
        let distractor = if target == self.eos_id {
            skip(rng.random_range(0..self.vocab - 1), &[self.eos_id])
        } else {
            skip(rng.random_range(0..self.vocab - 2), &[self.eos_id, target])
        };
        let u = rng.random::<f64>();

        let cap = if ambiguous { ceiling } else { f64::INFINITY };
        let shift = self.distortion_penalty * self.sigma;
        let layers = (1..=self.layers)
            .map(|i| {
                let eps: f64 = rng.sample(StandardNormal);
                let z = (self.growth * (i as f64 - d)).min(cap) - shift + self.noise * eps;
                let c = logistic(z).clamp(0.0, 1.0);
                LayerOutcome::new(c, if c > u { target } else { distractor })
            })
            .collect();
        TokenTrace::new(layers)
            .expect("generated confidences lie in [0, 1]")
            .with_target(target)
    }

    /// Token stream for image `index`. Infinite; callers stop at eos or a cap.
    pub fn image_traces(&self, index: u64) -> impl Iterator<Item = TokenTrace> + '_ {
        let mut rng = domain_rng(self.seed, IMAGE_DOMAIN, index);
        std::iter::repeat_with(move || self.sample_trace(&mut rng))
    }

    /// Ground-truth caption of image `index`: tokens up to and including the
    /// first eos target, or `max_len` tokens.
    pub fn caption(&self, index: u64, max_len: usize) -> Vec<TokenTrace> {
        let mut out = Vec::new();
        for trace in self.image_traces(index).take(max_len) {
            let done = trace.target() == Some(self.eos_id);
            out.push(trace);
            if done {
                break;
            }
        }
        out
    }

    /// `(image_id, token stream)` for images `0, 1, 2, ...`.
    pub fn images(
        &self,
    ) -> impl Iterator<Item = (String, impl Iterator<Item = TokenTrace> + '_)> + '_ {
        (0u64..).map(move |j| (image_id(j), self.image_traces(j)))
    }

    /// `len` i.i.d. traces from oracle substream `chunk`, disjoint from the
    /// image streams.
    pub fn sample_chunk(&self, chunk: u64, len: usize) -> Vec<TokenTrace> {
        let mut rng = domain_rng(self.seed, ORACLE_DOMAIN, chunk);
        (0..len).map(|_| self.sample_trace(&mut rng)).collect()
    }
}

pub fn image_id(index: u64) -> String {
    format!("img{index:06}")
}

/// Maps `x` in `[0, V - k)` onto `[0, V)` minus the `k` excluded ids.
fn skip(mut x: u32, excluded: &[u32]) -> u32 {
    let mut ex = excluded.to_vec();
    ex.sort_unstable();
    ex.dedup();
    for e in ex {
        if x >= e {
            x += 1;
        }
    }
    x
}
