use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{reward, BanditState, RewardParams};
use crate::cascade::{
    decide_exit, CaptionEnd, CaptionRun, CascadeShape, ExitHistogram, TokenTrace,
};
use crate::error::{Error, Result};

/// One token round of the adaptive loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based global token round.
    pub t: u64,
    pub arm: usize,
    pub threshold: f64,
    pub exit_layer: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BanditLog {
    pub records: Vec<RoundRecord>,
}

impl BanditLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn chosen_thresholds(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.threshold)
    }

    pub fn mean_reward(&self) -> Option<f64> {
        (!self.records.is_empty())
            .then(|| self.records.iter().map(|r| r.reward).sum::<f64>() / self.records.len() as f64)
    }

    /// Pull counts per arm index over the last `window` rounds (all rounds if
    /// the log is shorter).
    pub fn arm_counts(&self, arms: usize, window: Option<usize>) -> Vec<u64> {
        let skip = window.map_or(0, |w| self.records.len().saturating_sub(w));
        let mut counts = vec![0; arms];
        for r in &self.records[skip..] {
            counts[r.arm] += 1;
        }
        counts
    }

    /// CSV with columns `t,arm,exit_layer,reward,cumulative_pseudo_regret`.
    ///
    /// `arm` is the chosen threshold. The regret column is left empty when no
    /// regret series is supplied.
    pub fn write_csv<W: Write>(&self, mut out: W, regret: Option<&[f64]>) -> Result<()> {
        if let Some(r) = regret {
            if r.len() != self.records.len() {
                return Err(Error::InvalidParams(format!(
                    "regret series has {} points for {} rounds",
                    r.len(),
                    self.records.len()
                )));
            }
        }
        writeln!(out, "t,arm,exit_layer,reward,cumulative_pseudo_regret")?;
        for (i, rec) in self.records.iter().enumerate() {
            write!(
                out,
                "{},{},{},{}",
                rec.t, rec.threshold, rec.exit_layer, rec.reward
            )?;
            match regret {
                Some(r) => writeln!(out, ",{}", r[i])?,
                None => writeln!(out, ",")?,
            }
        }
        Ok(())
    }
}

/// Captions and per-round log of an adaptive run.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveRun {
    pub captions: Vec<CaptionRun>,
    pub log: BanditLog,
}

impl AdaptiveRun {
    pub fn histogram(&self, layers: usize) -> ExitHistogram {
        let mut h = ExitHistogram::new(layers);
        for c in &self.captions {
            h.extend(&c.tokens);
        }
        h
    }
}

/// Decodes a stream of images, choosing a threshold per token with UCB.
///
/// Arms that have never been played are tried first, in threshold order, so a
/// fresh state spends its first `K` tokens on initialization; a state restored
/// from a snapshot picks up where it left off. `max_tokens` bounds the number
/// of rounds in this call; hitting it mid-caption ends that caption with
/// [`CaptionEnd::Budget`].
pub fn run_adaptive<I, T>(
    images: I,
    state: &mut BanditState,
    params: &RewardParams,
    shape: &CascadeShape,
    max_caption_length: usize,
    max_tokens: Option<u64>,
) -> Result<AdaptiveRun>
where
    I: IntoIterator<Item = (String, T)>,
    T: IntoIterator<Item = TokenTrace>,
{
    shape.validate()?;
    params.validate()?;
    if params.layers() != shape.layers {
        return Err(Error::InvalidParams(format!(
            "reward schedule has {} layers, cascade has {}",
            params.layers(),
            shape.layers
        )));
    }
    let budget = max_tokens.unwrap_or(u64::MAX);
    let mut log = BanditLog::default();
    let mut captions = Vec::new();
    let mut rounds = 0u64;

    for (image_id, traces) in images {
        if rounds >= budget {
            break;
        }
        let mut traces = traces.into_iter();
        let mut tokens = Vec::new();
        let end = loop {
            if tokens.len() >= max_caption_length {
                break CaptionEnd::LengthCap;
            }
            if rounds >= budget {
                break CaptionEnd::Budget;
            }
            let Some(trace) = traces.next() else {
                break CaptionEnd::SourceExhausted;
            };
            trace.check_shape(shape.layers, shape.vocab)?;
            let arm = state.next_arm();
            let threshold = state.actions().threshold(arm);
            let decision = decide_exit(&trace, threshold)?;
            let r = reward(&decision, params)?;
            state.update_arm(arm, r);
            rounds += 1;
            log.records.push(RoundRecord {
                t: state.t(),
                arm,
                threshold,
                exit_layer: decision.exit_layer,
                reward: r,
            });
            tokens.push(decision);
            if decision.token_id == shape.eos_id {
                break CaptionEnd::Eos;
            }
        };
        captions.push(CaptionRun {
            image_id,
            tokens,
            end,
        });
    }
    Ok(AdaptiveRun { captions, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::ActionSet;
    use crate::cascade::run_caption;

    const SHAPE: CascadeShape = CascadeShape {
        layers: 3,
        vocab: 10,
        eos_id: 0,
    };

    fn fixture() -> Vec<(String, Vec<TokenTrace>)> {
        let t = |c: [f64; 3], ids: [u32; 3]| TokenTrace::from_parts(&c, &ids).unwrap();
        vec![
            (
                "a".to_string(),
                vec![
                    t([0.2, 0.7, 0.9], [4, 5, 5]),
                    t([0.5, 0.6, 0.95], [6, 6, 0]),
                    t([0.9, 0.9, 0.9], [0, 0, 0]),
                ],
            ),
            (
                "b".to_string(),
                vec![
                    t([0.1, 0.3, 0.8], [2, 3, 3]),
                    t([0.65, 0.7, 0.99], [0, 0, 0]),
                ],
            ),
        ]
    }

    #[test]
    fn single_arm_matches_fixed_threshold_decoding() {
        let params = RewardParams::linear(3, 1.0).unwrap();
        let mut state = BanditState::new(ActionSet::new(vec![0.6]).unwrap(), 1.0).unwrap();
        let run = run_adaptive(fixture(), &mut state, &params, &SHAPE, 20, None).unwrap();
        for (adaptive, (id, traces)) in run.captions.iter().zip(fixture()) {
            let fixed = run_caption(id, traces, 0.6, &SHAPE, 20).unwrap();
            assert_eq!(adaptive, &fixed);
        }
        assert_eq!(state.t(), run.log.len() as u64);
    }

    #[test]
    fn log_is_ordered_and_consistent_with_state() {
        let params = RewardParams::linear(3, 1.0).unwrap();
        let mut state = BanditState::new(ActionSet::tenths(), 1.0).unwrap();
        let images = (0..50).flat_map(|_| fixture());
        let run = run_adaptive(images, &mut state, &params, &SHAPE, 20, None).unwrap();
        assert!(run.log.records.windows(2).all(|w| w[0].t + 1 == w[1].t));
        assert_eq!(state.pulls().iter().sum::<u64>(), state.t());
        for arm in 0..state.actions().len() {
            let rewards: Vec<f64> = run
                .log
                .records
                .iter()
                .filter(|r| r.arm == arm)
                .map(|r| r.reward)
                .collect();
            assert_eq!(rewards.len() as u64, state.pulls()[arm]);
            let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
            assert!((mean - state.q()[arm]).abs() < 1e-12);
        }
        // first K rounds play each arm once in order
        let first: Vec<usize> = run.log.records[..10].iter().map(|r| r.arm).collect();
        assert_eq!(first, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn budget_stops_mid_caption_and_resume_continues() {
        let params = RewardParams::linear(3, 1.0).unwrap();
        let mut state = BanditState::new(ActionSet::tenths(), 1.0).unwrap();
        let run = run_adaptive(fixture(), &mut state, &params, &SHAPE, 20, Some(2)).unwrap();
        assert_eq!(run.log.len(), 2);
        assert_eq!(run.captions.len(), 1);
        assert_eq!(run.captions[0].end, CaptionEnd::Budget);

        let snapshot = state.to_json().unwrap();
        let mut resumed = BanditState::from_json(&snapshot).unwrap();
        let more = run_adaptive(fixture(), &mut resumed, &params, &SHAPE, 20, Some(3)).unwrap();
        assert_eq!(more.log.records[0].t, 3);
        assert_eq!(resumed.t(), 5);
    }

    #[test]
    fn csv_layout() {
        let params = RewardParams::linear(3, 1.0).unwrap();
        let mut state = BanditState::new(ActionSet::new(vec![0.5]).unwrap(), 1.0).unwrap();
        let run = run_adaptive(fixture(), &mut state, &params, &SHAPE, 20, Some(2)).unwrap();
        let mut buf = Vec::new();
        run.log.write_csv(&mut buf, Some(&[0.0, 0.0])).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,arm,exit_layer,reward,cumulative_pseudo_regret");
        assert!(lines[1].starts_with("1,0.5,2,"));
        assert_eq!(lines.len(), 3);
        assert!(run.log.write_csv(Vec::new(), Some(&[0.0])).is_err());
    }
}
