//! Confidence traces and the greedy early-exit decoding loop.
//!
//! A [`TokenTrace`] records, for one token position, what every exit head
//! would have said: its top-1 probability (the confidence) and its argmax
//! token. The exit rule walks the layers in order and stops at the first
//! intermediate layer whose confidence reaches the threshold; the final layer
//! always answers when nothing earlier does.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One exit head's view of a token: max probability and argmax id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerOutcome {
    pub confidence: f64,
    pub token_id: u32,
}

impl LayerOutcome {
    pub fn new(confidence: f64, token_id: u32) -> Self {
        Self {
            confidence,
            token_id,
        }
    }
}

/// Per-layer outcomes for a single token position.
///
/// `target` is the ground-truth token when the trace comes from a labelled
/// source; it is only used for accuracy accounting, never by the exit rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenTrace {
    layers: Vec<LayerOutcome>,
    target: Option<u32>,
}

impl TokenTrace {
    pub fn new(layers: Vec<LayerOutcome>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidTrace(format!(
                "a trace needs at least 2 layers, got {}",
                layers.len()
            )));
        }
        for (i, outcome) in layers.iter().enumerate() {
            if !(0.0..=1.0).contains(&outcome.confidence) {
                return Err(Error::InvalidTrace(format!(
                    "confidence {} at layer {} is outside [0, 1]",
                    outcome.confidence,
                    i + 1
                )));
            }
        }
        Ok(Self {
            layers,
            target: None,
        })
    }

    /// Builds a trace from parallel confidence / token slices.
    pub fn from_parts(confidences: &[f64], token_ids: &[u32]) -> Result<Self> {
        if confidences.len() != token_ids.len() {
            return Err(Error::InvalidTrace(format!(
                "{} confidences but {} token ids",
                confidences.len(),
                token_ids.len()
            )));
        }
        Self::new(
            confidences
                .iter()
                .zip(token_ids)
                .map(|(&c, &id)| LayerOutcome::new(c, id))
                .collect(),
        )
    }

    pub fn with_target(mut self, target: u32) -> Self {
        self.target = Some(target);
        self
    }

    pub fn layers(&self) -> &[LayerOutcome] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn target(&self) -> Option<u32> {
        self.target
    }

    /// Confidence at 1-based layer `layer`.
    pub fn confidence(&self, layer: usize) -> f64 {
        self.layers[layer - 1].confidence
    }

    /// Checks the trace against an expected depth and vocabulary size.
    pub fn check_shape(&self, layers: usize, vocab: u32) -> Result<()> {
        if self.layers.len() != layers {
            return Err(Error::InvalidTrace(format!(
                "expected {} layers, got {}",
                layers,
                self.layers.len()
            )));
        }
        let bad_id = self
            .layers
            .iter()
            .map(|o| o.token_id)
            .chain(self.target)
            .find(|&id| id >= vocab);
        if let Some(id) = bad_id {
            return Err(Error::InvalidTrace(format!(
                "token id {id} is outside vocabulary of size {vocab}"
            )));
        }
        Ok(())
    }
}

/// Where a token left the network and what it emitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitDecision {
    /// 1-based layer index in `[1, N]`.
    pub exit_layer: usize,
    pub token_id: u32,
    pub confidence: f64,
    /// Layer-1 confidence of the source trace; rewards are measured against it.
    pub confidence_first_layer: f64,
    /// Whether the emitted token equals the trace's target, when one is known.
    pub correct: Option<bool>,
}

pub fn check_threshold(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(alpha))
    }
}

/// Applies the exit rule to one token.
///
/// Returns the first layer `i < N` with `C_i >= alpha`; otherwise the final
/// layer's outcome, whatever its confidence.
pub fn decide_exit(trace: &TokenTrace, alpha: f64) -> Result<ExitDecision> {
    check_threshold(alpha)?;
    let layers = trace.layers();
    let last = layers.len() - 1;
    let index = layers[..last]
        .iter()
        .position(|o| o.confidence >= alpha)
        .unwrap_or(last);
    let outcome = layers[index];
    Ok(ExitDecision {
        exit_layer: index + 1,
        token_id: outcome.token_id,
        confidence: outcome.confidence,
        confidence_first_layer: layers[0].confidence,
        correct: trace.target().map(|t| t == outcome.token_id),
    })
}

/// Static shape of a cascade as seen by the decoding loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeShape {
    pub layers: usize,
    pub vocab: u32,
    pub eos_id: u32,
}

impl CascadeShape {
    pub fn validate(&self) -> Result<()> {
        if self.layers < 2 {
            return Err(Error::InvalidParams(format!(
                "cascade needs at least 2 layers, got {}",
                self.layers
            )));
        }
        if self.eos_id >= self.vocab {
            return Err(Error::InvalidParams(format!(
                "eos id {} is outside vocabulary of size {}",
                self.eos_id, self.vocab
            )));
        }
        Ok(())
    }
}

pub const DEFAULT_MAX_CAPTION_LENGTH: usize = 20;

/// Why a caption stopped growing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionEnd {
    Eos,
    LengthCap,
    /// The trace source ran dry before eos or the cap.
    SourceExhausted,
    /// An outer token budget stopped the run mid-caption.
    Budget,
}

/// Greedy decoding result for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRun {
    pub image_id: String,
    pub tokens: Vec<ExitDecision>,
    pub end: CaptionEnd,
}

impl CaptionRun {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn terminated_by_eos(&self) -> bool {
        self.end == CaptionEnd::Eos
    }

    pub fn truncated(&self) -> bool {
        self.end == CaptionEnd::SourceExhausted
    }

    pub fn token_ids(&self) -> Vec<u32> {
        self.tokens.iter().map(|d| d.token_id).collect()
    }
}

/// Decodes one caption at a fixed threshold.
///
/// Pulls one trace per emitted token until the exiting head emits eos or
/// `max_len` tokens have been produced. Running out of traces first is not an
/// error: the run comes back flagged [`CaptionEnd::SourceExhausted`].
pub fn run_caption<I>(
    image_id: impl Into<String>,
    traces: I,
    alpha: f64,
    shape: &CascadeShape,
    max_len: usize,
) -> Result<CaptionRun>
where
    I: IntoIterator<Item = TokenTrace>,
{
    check_threshold(alpha)?;
    shape.validate()?;
    let mut traces = traces.into_iter();
    let mut tokens = Vec::new();
    let end = loop {
        if tokens.len() >= max_len {
            break CaptionEnd::LengthCap;
        }
        let Some(trace) = traces.next() else {
            break CaptionEnd::SourceExhausted;
        };
        trace.check_shape(shape.layers, shape.vocab)?;
        let decision = decide_exit(&trace, alpha)?;
        tokens.push(decision);
        if decision.token_id == shape.eos_id {
            break CaptionEnd::Eos;
        }
    };
    Ok(CaptionRun {
        image_id: image_id.into(),
        tokens,
        end,
    })
}

/// Token counts per exit layer, index `l - 1` for layer `l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExitHistogram {
    counts: Vec<u64>,
}

impl ExitHistogram {
    pub fn new(layers: usize) -> Self {
        Self {
            counts: vec![0; layers],
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn record(&mut self, exit_layer: usize) {
        self.counts[exit_layer - 1] += 1;
    }

    pub fn extend<'a>(&mut self, decisions: impl IntoIterator<Item = &'a ExitDecision>) {
        for d in decisions {
            self.record(d.exit_layer);
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn mean_exit_layer(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.layer_weighted_sum() as f64 / total as f64)
    }

    fn layer_weighted_sum(&self) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &w)| w * (i as u64 + 1))
            .sum()
    }

    pub fn merge(&mut self, other: &ExitHistogram) {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// `(sum_l w_l * N) / (sum_l w_l * l)`: full-depth work over actual work.
pub fn speedup_ratio(hist: &ExitHistogram, layers: usize) -> Result<f64> {
    let total = hist.total();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    if hist.counts().len() > layers {
        return Err(Error::InvalidParams(format!(
            "histogram has {} layers but N = {}",
            hist.counts().len(),
            layers
        )));
    }
    let full = total as f64 * layers as f64;
    Ok(full / hist.layer_weighted_sum() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(conf: &[f64]) -> TokenTrace {
        let ids: Vec<u32> = (0..conf.len() as u32).map(|i| i + 10).collect();
        TokenTrace::from_parts(conf, &ids).unwrap()
    }

    #[test]
    fn exits_at_first_crossing() {
        let d = decide_exit(&trace(&[0.3, 0.65, 0.9]), 0.6).unwrap();
        assert_eq!(d.exit_layer, 2);
        assert_eq!(d.confidence, 0.65);
        assert_eq!(d.token_id, 11);
        assert_eq!(d.confidence_first_layer, 0.3);
    }

    #[test]
    fn falls_back_to_final_layer() {
        let d = decide_exit(&trace(&[0.2, 0.3, 0.4]), 0.6).unwrap();
        assert_eq!(d.exit_layer, 3);
        assert_eq!(d.confidence, 0.4);
    }

    #[test]
    fn zero_threshold_exits_at_layer_one() {
        let d = decide_exit(&trace(&[0.0, 0.0, 0.0]), 0.0).unwrap();
        assert_eq!(d.exit_layer, 1);
    }

    #[test]
    fn threshold_one_needs_exact_certainty() {
        let d = decide_exit(&trace(&[0.999, 1.0, 0.5]), 1.0).unwrap();
        assert_eq!(d.exit_layer, 2);
        let d = decide_exit(&trace(&[0.999, 0.9999, 0.5]), 1.0).unwrap();
        assert_eq!(d.exit_layer, 3);
    }

    #[test]
    fn final_layer_confidence_never_gates() {
        // only intermediate layers are compared with alpha
        let d = decide_exit(&trace(&[0.1, 0.1, 0.99]), 0.5).unwrap();
        assert_eq!(d.exit_layer, 3);
    }

    #[test]
    fn rejects_bad_threshold_and_traces() {
        assert!(matches!(
            decide_exit(&trace(&[0.1, 0.2]), 1.5),
            Err(Error::InvalidThreshold(_))
        ));
        assert!(TokenTrace::from_parts(&[0.5], &[1]).is_err());
        assert!(TokenTrace::from_parts(&[0.5, 1.2], &[1, 2]).is_err());
        assert!(TokenTrace::from_parts(&[0.5, f64::NAN], &[1, 2]).is_err());
        assert!(TokenTrace::from_parts(&[0.5, 0.2], &[1]).is_err());
        let t = trace(&[0.5, 0.6]);
        assert!(t.check_shape(3, 100).is_err());
        assert!(t.check_shape(2, 11).is_err());
        assert!(t.check_shape(2, 12).is_ok());
    }

    fn scripted(conf: &[f64], ids: &[u32]) -> TokenTrace {
        TokenTrace::from_parts(conf, ids).unwrap()
    }

    const SHAPE: CascadeShape = CascadeShape {
        layers: 3,
        vocab: 10,
        eos_id: 0,
    };

    #[test]
    fn caption_stops_on_immediate_eos() {
        let src = vec![
            scripted(&[0.9, 0.9, 0.9], &[0, 0, 0]),
            scripted(&[0.9, 0.9, 0.9], &[4, 4, 4]),
        ];
        let run = run_caption("img", src, 0.5, &SHAPE, 20).unwrap();
        assert_eq!(run.len(), 1);
        assert!(run.terminated_by_eos());
    }

    #[test]
    fn caption_respects_length_cap() {
        let src = std::iter::repeat(scripted(&[0.9, 0.9, 0.9], &[3, 3, 3]));
        let run = run_caption("img", src, 0.5, &SHAPE, 20).unwrap();
        assert_eq!(run.len(), 20);
        assert!(!run.terminated_by_eos());
        assert_eq!(run.end, CaptionEnd::LengthCap);
    }

    #[test]
    fn caption_flags_exhausted_source() {
        let src = vec![scripted(&[0.9, 0.9, 0.9], &[3, 3, 3])];
        let run = run_caption("img", src, 0.5, &SHAPE, 20).unwrap();
        assert_eq!(run.len(), 1);
        assert!(run.truncated());
    }

    #[test]
    fn caption_matches_hand_trace() {
        // alpha = 0.6:
        //   token 1: [0.7, ...] -> layer 1, id 5
        //   token 2: [0.2, 0.4, 0.5] -> no crossing, layer 3, id 7
        //   token 3: [0.1, 0.6, 0.95] -> layer 2 (0.6 >= 0.6), id 0 = eos
        let src = vec![
            scripted(&[0.7, 0.8, 0.9], &[5, 6, 6]),
            scripted(&[0.2, 0.4, 0.5], &[1, 2, 7]),
            scripted(&[0.1, 0.6, 0.95], &[3, 0, 4]),
            scripted(&[0.9, 0.9, 0.9], &[8, 8, 8]),
        ];
        let run = run_caption("img", src, 0.6, &SHAPE, 20).unwrap();
        let layers: Vec<usize> = run.tokens.iter().map(|d| d.exit_layer).collect();
        assert_eq!(layers, vec![1, 3, 2]);
        assert_eq!(run.token_ids(), vec![5, 7, 0]);
        assert!(run.terminated_by_eos());
    }

    #[test]
    fn caption_rejects_wrong_depth() {
        let src = vec![scripted(&[0.9, 0.9], &[3, 3])];
        assert!(run_caption("img", src, 0.5, &SHAPE, 20).is_err());
    }

    #[test]
    fn speedup_hand_cases() {
        let mut all_final = vec![0u64; 12];
        all_final[11] = 7;
        let s = speedup_ratio(&ExitHistogram::from_counts(all_final), 12).unwrap();
        assert!((s - 1.0).abs() < 1e-12);

        let mut mid = vec![0u64; 12];
        mid[5] = 3;
        let s = speedup_ratio(&ExitHistogram::from_counts(mid), 12).unwrap();
        assert!((s - 2.0).abs() < 1e-12);

        let mut mixed = vec![0u64; 12];
        mixed[2] = 10;
        mixed[11] = 10;
        let s = speedup_ratio(&ExitHistogram::from_counts(mixed), 12).unwrap();
        assert!((s - 240.0 / 150.0).abs() < 1e-12);
    }

    #[test]
    fn speedup_of_empty_histogram_is_an_error() {
        assert!(matches!(
            speedup_ratio(&ExitHistogram::new(12), 12),
            Err(Error::EmptyHistogram)
        ));
    }
}
