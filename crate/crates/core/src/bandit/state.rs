use serde::{Deserialize, Serialize};

use super::{reward, ActionSet, RewardParams};
use crate::cascade::{decide_exit, TokenTrace};
use crate::error::{Error, Result};

pub const SNAPSHOT_FORMAT: &str = "eesim-bandit-state";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Per-arm running means and pull counts.
///
/// `t` is the number of rewards received so far, so `t == sum(pulls)` at all
/// times.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditState {
    actions: ActionSet,
    gamma: f64,
    q: Vec<f64>,
    pulls: Vec<u64>,
    t: u64,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format: String,
    version: u32,
    gamma: f64,
    thresholds: Vec<f64>,
    q: Vec<f64>,
    pulls: Vec<u64>,
    t: u64,
}

impl BanditState {
    pub fn new(actions: ActionSet, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 1.0) {
            return Err(Error::InvalidParams(format!(
                "exploration weight gamma must be >= 1, got {gamma}"
            )));
        }
        let k = actions.len();
        Ok(Self {
            actions,
            gamma,
            q: vec![0.0; k],
            pulls: vec![0; k],
            t: 0,
        })
    }

    /// Plays every arm once, in threshold order, on consecutive traces.
    pub fn initialize<I>(
        actions: ActionSet,
        gamma: f64,
        params: &RewardParams,
        traces: I,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = TokenTrace>,
    {
        let mut state = Self::new(actions, gamma)?;
        let mut traces = traces.into_iter();
        let needed = state.actions.len();
        for arm in 0..needed {
            let trace = traces
                .next()
                .ok_or(Error::SourceExhausted { needed, got: arm })?;
            let d = decide_exit(&trace, state.actions.threshold(arm))?;
            state.update_arm(arm, reward(&d, params)?);
        }
        Ok(state)
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn is_initialized(&self) -> bool {
        self.pulls.iter().all(|&n| n > 0)
    }

    /// `Q(a) + gamma * sqrt(ln t / N(a))`.
    pub fn ucb_index(&self, arm: usize) -> f64 {
        let bonus = ((self.t as f64).ln() / self.pulls[arm] as f64).sqrt();
        self.q[arm] + self.gamma * bonus
    }

    /// Arm with the highest UCB index; exact ties go to the smallest threshold.
    pub fn ucb_select_arm(&self) -> Result<usize> {
        if !self.is_initialized() {
            return Err(Error::Uninitialized);
        }
        let mut best = 0;
        let mut best_index = self.ucb_index(0);
        for arm in 1..self.q.len() {
            let index = self.ucb_index(arm);
            if index > best_index {
                best = arm;
                best_index = index;
            }
        }
        Ok(best)
    }

    pub fn ucb_select(&self) -> Result<f64> {
        self.ucb_select_arm().map(|a| self.actions.threshold(a))
    }

    /// First never-played arm while initializing, then the UCB choice.
    pub fn next_arm(&self) -> usize {
        match self.pulls.iter().position(|&n| n == 0) {
            Some(arm) => arm,
            None => self
                .ucb_select_arm()
                .expect("all arms have been played at least once"),
        }
    }

    pub fn update_arm(&mut self, arm: usize, r: f64) {
        self.pulls[arm] += 1;
        self.q[arm] += (r - self.q[arm]) / self.pulls[arm] as f64;
        self.t += 1;
    }

    pub fn update(&mut self, alpha: f64, r: f64) -> Result<()> {
        let arm = self
            .actions
            .index_of(alpha)
            .ok_or(Error::UnknownArm(alpha))?;
        self.update_arm(arm, r);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let snap = Snapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            gamma: self.gamma,
            thresholds: self.actions.thresholds().to_vec(),
            q: self.q.clone(),
            pulls: self.pulls.clone(),
            t: self.t,
        };
        Ok(serde_json::to_string_pretty(&snap)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: Snapshot = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        if snap.format != SNAPSHOT_FORMAT {
            return Err(Error::Parse {
                line: 1,
                message: format!("unexpected format tag {:?}", snap.format),
            });
        }
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: snap.version,
                expected: SNAPSHOT_VERSION,
            });
        }
        let mut state = Self::new(ActionSet::new(snap.thresholds)?, snap.gamma)?;
        let k = state.actions.len();
        if snap.q.len() != k || snap.pulls.len() != k {
            return Err(Error::InvalidParams(format!(
                "snapshot has {} arms but {} means and {} counts",
                k,
                snap.q.len(),
                snap.pulls.len()
            )));
        }
        if snap.pulls.iter().sum::<u64>() != snap.t {
            return Err(Error::InvalidParams(
                "snapshot pull counts do not sum to t".into(),
            ));
        }
        state.q = snap.q;
        state.pulls = snap.pulls;
        state.t = snap.t;
        Ok(state)
    }
}
