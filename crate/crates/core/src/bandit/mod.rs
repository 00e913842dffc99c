//! Online threshold selection with UCB.
//!
//! Each arm is a confidence threshold applied uniformly to every exit. A
//! round is one token: pick a threshold, run the exit rule, and score the
//! outcome by the confidence gained over layer 1 minus the scaled latency of
//! getting there. No labels are involved.

mod oracle;
mod run;
mod state;

pub use oracle::{
    evaluate_arms, expected_reward_oracle, regret_bound, regret_curve, OracleTable,
    DEFAULT_ORACLE_SAMPLES,
};
pub use run::{run_adaptive, AdaptiveRun, BanditLog, RoundRecord};
pub use state::{BanditState, SNAPSHOT_FORMAT, SNAPSHOT_VERSION};

use serde::{Deserialize, Serialize};

use crate::cascade::ExitDecision;
use crate::error::{Error, Result};

/// Candidate thresholds, strictly increasing in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ActionSet {
    thresholds: Vec<f64>,
}

impl ActionSet {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::InvalidParams("action set is empty".into()));
        }
        if let Some(&bad) = thresholds.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::InvalidThreshold(bad));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams(
                "action set thresholds must be strictly increasing".into(),
            ));
        }
        Ok(Self { thresholds })
    }

    /// `{0.1, 0.2, ..., 1.0}`.
    pub fn tenths() -> Self {
        Self {
            thresholds: (1..=10).map(|k| k as f64 / 10.0).collect(),
        }
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn threshold(&self, arm: usize) -> f64 {
        self.thresholds[arm]
    }

    pub fn index_of(&self, alpha: f64) -> Option<usize> {
        self.thresholds.iter().position(|&a| a == alpha)
    }
}

impl TryFrom<Vec<f64>> for ActionSet {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ActionSet> for Vec<f64> {
    fn from(a: ActionSet) -> Self {
        a.thresholds
    }
}

/// Reward model: scale `mu` and cumulative latency `o_1..o_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub mu: f64,
    pub latency: Vec<f64>,
}

impl RewardParams {
    /// `mu = 1/N`, `o_1 = 0`, `o_i = lambda * i` for `i >= 2`.
    pub fn linear(layers: usize, lambda: f64) -> Result<Self> {
        Self::linear_with_mu(layers, lambda, 1.0 / layers as f64)
    }

    pub fn linear_with_mu(layers: usize, lambda: f64, mu: f64) -> Result<Self> {
        let latency = (1..=layers)
            .map(|i| if i == 1 { 0.0 } else { lambda * i as f64 })
            .collect();
        Self::new(mu, latency)
    }

    pub fn new(mu: f64, latency: Vec<f64>) -> Result<Self> {
        let p = Self { mu, latency };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidParams(format!(
                "mu must be > 0, got {}",
                self.mu
            )));
        }
        if self.latency.len() < 2 {
            return Err(Error::InvalidParams(
                "latency schedule needs at least 2 layers".into(),
            ));
        }
        if self.latency[0] != 0.0 {
            return Err(Error::InvalidParams(format!(
                "o_1 must be 0, got {}",
                self.latency[0]
            )));
        }
        if self.latency.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidParams("latency must be finite".into()));
        }
        if self.latency.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParams(
                "latency schedule must be nondecreasing".into(),
            ));
        }
        Ok(())
    }

    pub fn layers(&self) -> usize {
        self.latency.len()
    }

    /// Closed interval every reward falls in: `[-1 - mu * o_N, 1]`.
    pub fn reward_bounds(&self) -> (f64, f64) {
        (-1.0 - self.mu * self.latency[self.latency.len() - 1], 1.0)
    }
}

/// `(C_i - C_1) - mu * o_i` for a token that exited at layer `i`.
pub fn reward(decision: &ExitDecision, params: &RewardParams) -> Result<f64> {
    let i = decision.exit_layer;
    if i == 0 || i > params.layers() {
        return Err(Error::InvalidParams(format!(
            "exit layer {} outside [1, {}]",
            i,
            params.layers()
        )));
    }
    let gain = decision.confidence - decision.confidence_first_layer;
    Ok(gain - params.mu * params.latency[i - 1])
}
