use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{reward, ActionSet, BanditLog, RewardParams};
use crate::cascade::{decide_exit, TokenTrace};
use crate::error::{Error, Result};
use crate::synth::SyntheticConfidenceModel;

pub const DEFAULT_ORACLE_SAMPLES: usize = 200_000;

const CHUNK: usize = 10_000;

/// Per-arm expectations estimated on a common set of traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTable {
    pub thresholds: Vec<f64>,
    pub expected_reward: Vec<f64>,
    pub mean_exit_layer: Vec<f64>,
    /// Fraction of exits that emitted the target; `None` for unlabelled traces.
    pub accuracy: Option<Vec<f64>>,
    pub samples: usize,
}

impl OracleTable {
    /// Arm with the highest expected reward, ties to the smallest threshold.
    pub fn best_arm(&self) -> usize {
        argmax_first(&self.expected_reward)
    }

    pub fn best_threshold(&self) -> f64 {
        self.thresholds[self.best_arm()]
    }

    /// `Delta_a = E[r(a*)] - E[r(a)]`, zero for the best arm.
    pub fn gaps(&self) -> Vec<f64> {
        let best = self.expected_reward[self.best_arm()];
        self.expected_reward.iter().map(|r| best - r).collect()
    }

    pub fn max_gap(&self) -> f64 {
        self.gaps().into_iter().fold(0.0, f64::max)
    }

    pub fn gap_of(&self, threshold: f64) -> Option<f64> {
        let arm = self.thresholds.iter().position(|&a| a == threshold)?;
        Some(self.gaps()[arm])
    }

    /// Arm with the highest accuracy, ties to the smallest threshold.
    pub fn most_accurate_arm(&self) -> Option<usize> {
        self.accuracy.as_deref().map(argmax_first)
    }

    /// Expected speedup `N / E[exit layer]` for each arm.
    pub fn speedup(&self, layers: usize) -> Vec<f64> {
        self.mean_exit_layer
            .iter()
            .map(|m| layers as f64 / m)
            .collect()
    }
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
struct Sums {
    reward: Vec<f64>,
    exit_layer: Vec<u64>,
    correct: Vec<u64>,
    labelled: usize,
    n: usize,
}

impl Sums {
    fn new(k: usize) -> Self {
        Self {
            reward: vec![0.0; k],
            exit_layer: vec![0; k],
            correct: vec![0; k],
            labelled: 0,
            n: 0,
        }
    }

    fn add_traces(
        &mut self,
        traces: &[TokenTrace],
        actions: &ActionSet,
        params: &RewardParams,
    ) -> Result<()> {
        for trace in traces {
            if trace.num_layers() != params.layers() {
                return Err(Error::InvalidTrace(format!(
                    "expected {} layers, got {}",
                    params.layers(),
                    trace.num_layers()
                )));
            }
            self.n += 1;
            if trace.target().is_some() {
                self.labelled += 1;
            }
            for (arm, &alpha) in actions.thresholds().iter().enumerate() {
                let d = decide_exit(trace, alpha)?;
                self.reward[arm] += reward(&d, params)?;
                self.exit_layer[arm] += d.exit_layer as u64;
                if d.correct == Some(true) {
                    self.correct[arm] += 1;
                }
            }
        }
        Ok(())
    }

    fn merge(&mut self, other: &Sums) {
        for (a, b) in self.reward.iter_mut().zip(&other.reward) {
            *a += b;
        }
        for (a, b) in self.exit_layer.iter_mut().zip(&other.exit_layer) {
            *a += b;
        }
        for (a, b) in self.correct.iter_mut().zip(&other.correct) {
            *a += b;
        }
        self.labelled += other.labelled;
        self.n += other.n;
    }

    fn into_table(self, actions: &ActionSet) -> Result<OracleTable> {
        if self.n == 0 {
            return Err(Error::InvalidParams(
                "oracle needs at least one trace".into(),
            ));
        }
        let n = self.n as f64;
        let accuracy =
            (self.labelled == self.n).then(|| self.correct.iter().map(|&c| c as f64 / n).collect());
        Ok(OracleTable {
            thresholds: actions.thresholds().to_vec(),
            expected_reward: self.reward.iter().map(|r| r / n).collect(),
            mean_exit_layer: self.exit_layer.iter().map(|&l| l as f64 / n).collect(),
            accuracy,
            samples: self.n,
        })
    }
}

/// Applies every threshold to every trace and averages.
pub fn evaluate_arms(
    traces: &[TokenTrace],
    actions: &ActionSet,
    params: &RewardParams,
) -> Result<OracleTable> {
    let mut sums = Sums::new(actions.len());
    sums.add_traces(traces, actions, params)?;
    sums.into_table(actions)
}

/// Monte-Carlo estimate of each arm's expected reward.
///
/// All arms are scored on the same sampled traces. Sampling is split into
/// fixed-size chunks with their own seeded substreams; chunk sums are merged
/// in chunk order, so the result does not depend on the thread count.
pub fn expected_reward_oracle(
    model: &SyntheticConfidenceModel,
    actions: &ActionSet,
    params: &RewardParams,
    samples: usize,
) -> Result<OracleTable> {
    model.validate()?;
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<Result<Sums>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(samples - c * CHUNK);
            let traces = model.sample_chunk(c as u64, len);
            let mut sums = Sums::new(actions.len());
            sums.add_traces(&traces, actions, params)?;
            Ok(sums)
        })
        .collect();
    let mut total = Sums::new(actions.len());
    for p in partial {
        total.merge(&p?);
    }
    total.into_table(actions)
}

/// Cumulative pseudo-regret `R(T) = sum_t (E[r(a*)] - E[r(a_t)])`.
pub fn regret_curve(log: &BanditLog, oracle: &OracleTable) -> Result<Vec<f64>> {
    let gaps = oracle.gaps();
    let mut total = 0.0;
    log.records
        .iter()
        .map(|rec| {
            let arm = oracle
                .thresholds
                .iter()
                .position(|&a| a == rec.threshold)
                .ok_or(Error::UnknownArm(rec.threshold))?;
            total += gaps[arm];
            Ok(total)
        })
        .collect()
}

/// UCB regret bound `4 gamma sum ln(T)/Delta + (pi^2/3 + 1) sum Delta` over
/// suboptimal arms. Infinite when a non-best arm has a zero gap.
pub fn regret_bound(oracle: &OracleTable, gamma: f64, rounds: u64) -> f64 {
    let best = oracle.best_arm();
    let ln_t = (rounds as f64).ln();
    let gaps = oracle.gaps();
    let mut log_term = 0.0;
    let mut gap_term = 0.0;
    for (arm, &gap) in gaps.iter().enumerate() {
        if arm == best {
            continue;
        }
        if gap <= 0.0 {
            return f64::INFINITY;
        }
        log_term += ln_t / gap;
        gap_term += gap;
    }
    4.0 * gamma * log_term + (std::f64::consts::PI.powi(2) / 3.0 + 1.0) * gap_term
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::RoundRecord;

    fn flat(c: &[f64]) -> TokenTrace {
        TokenTrace::from_parts(c, &vec![1; c.len()]).unwrap()
    }

    fn table(rewards: Vec<f64>) -> OracleTable {
        let k = rewards.len();
        OracleTable {
            thresholds: (1..=k).map(|i| i as f64 / 10.0).collect(),
            expected_reward: rewards,
            mean_exit_layer: vec![1.0; k],
            accuracy: None,
            samples: 1,
        }
    }

    fn log_of(thresholds: &[f64]) -> BanditLog {
        BanditLog {
            records: thresholds
                .iter()
                .enumerate()
                .map(|(i, &a)| RoundRecord {
                    t: i as u64 + 1,
                    arm: 0,
                    threshold: a,
                    exit_layer: 1,
                    reward: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn scripted_expectations_are_trace_averages() {
        // N = 3, mu = 1/3, o = [0, 2, 3]
        let traces = vec![
            flat(&[0.2, 0.5, 0.9]),
            flat(&[0.6, 0.7, 0.8]),
            flat(&[0.1, 0.3, 0.4]),
        ];
        let params = RewardParams::linear(3, 1.0).unwrap();
        let actions = ActionSet::new(vec![0.4, 0.65]).unwrap();
        let t = evaluate_arms(&traces, &actions, &params).unwrap();
        // alpha 0.4: exits 2, 1, 3
        let r04 = ((0.5 - 0.2) - 2.0 / 3.0 + 0.0 + (0.4 - 0.1) - 1.0) / 3.0;
        // alpha 0.65: exits 3, 2, 3
        let r065 = ((0.9 - 0.2) - 1.0 + (0.7 - 0.6) - 2.0 / 3.0 + (0.4 - 0.1) - 1.0) / 3.0;
        assert!((t.expected_reward[0] - r04).abs() < 1e-12);
        assert!((t.expected_reward[1] - r065).abs() < 1e-12);
        assert_eq!(t.mean_exit_layer, vec![2.0, 8.0 / 3.0]);
        assert_eq!(t.best_threshold(), 0.4);
        assert!(t.accuracy.is_none());
    }

    #[test]
    fn regret_of_always_optimal_log_is_zero() {
        let t = table(vec![0.1, 0.3, 0.2]);
        let r = regret_curve(&log_of(&[0.2; 50]), &t).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn regret_alternating_with_gap() {
        let t = table(vec![0.5, 0.4]);
        let choices: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 0.1 } else { 0.2 })
            .collect();
        let r = regret_curve(&log_of(&choices), &t).unwrap();
        assert!((r[99] - 5.0).abs() < 1e-9);
        assert!(r.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn regret_rejects_unknown_arm() {
        let t = table(vec![0.5, 0.4]);
        assert!(matches!(
            regret_curve(&log_of(&[0.7]), &t),
            Err(Error::UnknownArm(_))
        ));
    }

    #[test]
    fn bound_hand_value() {
        let t = table(vec![0.5, 0.4, 0.25]);
        let ln = (1000f64).ln();
        let expect =
            4.0 * 2.0 * (ln / 0.1 + ln / 0.25) + (std::f64::consts::PI.powi(2) / 3.0 + 1.0) * 0.35;
        let got = regret_bound(&t, 2.0, 1000);
        assert!((got - expect).abs() < 1e-9 * expect);
        assert_eq!(regret_bound(&table(vec![0.3]), 1.0, 1000), 0.0);
        assert!(regret_bound(&table(vec![0.3, 0.3]), 1.0, 1000).is_infinite());
    }

    #[test]
    fn ties_go_to_smallest_threshold() {
        assert_eq!(table(vec![0.0, 0.0, 0.0]).best_arm(), 0);
        assert_eq!(table(vec![-0.1, 0.2, 0.2]).best_arm(), 1);
    }
}
