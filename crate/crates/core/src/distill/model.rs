use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::loss::{confidence_and_argmax, softmax};
use super::task::SyntheticExample;
use crate::cascade::{LayerOutcome, TokenTrace};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "eesim-toy-cascade";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Affine map `y = W x + b` with `W` stored row-major (`rows x cols`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            w: vec![0.0; rows * cols],
            b: vec![0.0; rows],
        }
    }

    /// Gaussian weights with variance `1 / cols`, zero bias.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (cols as f64).sqrt();
        let w = (0..rows * cols)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            rows,
            cols,
            w,
            b: vec![0.0; rows],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.w
            .chunks_exact(self.cols)
            .zip(&self.b)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    /// `W^T dy`.
    pub fn back(&self, dy: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.cols];
        for (row, &g) in self.w.chunks_exact(self.cols).zip(dy) {
            for (d, w) in dx.iter_mut().zip(row) {
                *d += g * w;
            }
        }
        dx
    }

    /// Accumulates `scale * dy x^T` into the weights and `scale * dy` into the bias.
    pub fn accumulate(&mut self, dy: &[f64], x: &[f64], scale: f64) {
        for ((row, b), &g) in self.w.chunks_exact_mut(self.cols).zip(&mut self.b).zip(dy) {
            let g = g * scale;
            *b += g;
            for (w, xv) in row.iter_mut().zip(x) {
                *w += g * xv;
            }
        }
    }

    /// `self -= lr * grad`.
    pub fn descend(&mut self, grad: &Dense, lr: f64) {
        for (p, g) in self.w.iter_mut().zip(&grad.w) {
            *p -= lr * g;
        }
        for (p, g) in self.b.iter_mut().zip(&grad.b) {
            *p -= lr * g;
        }
    }

    fn get(&self, i: usize) -> f64 {
        if i < self.w.len() {
            self.w[i]
        } else {
            self.b[i - self.w.len()]
        }
    }

    fn get_mut(&mut self, i: usize) -> &mut f64 {
        if i < self.w.len() {
            &mut self.w[i]
        } else {
            let n = self.w.len();
            &mut self.b[i - n]
        }
    }

    fn check(&self, rows: usize, cols: usize, what: &str) -> Result<()> {
        if self.rows != rows
            || self.cols != cols
            || self.w.len() != rows * cols
            || self.b.len() != rows
        {
            return Err(Error::DimensionMismatch(format!(
                "{what}: expected {rows}x{cols}, got {}x{} with {} weights and {} biases",
                self.rows,
                self.cols,
                self.w.len(),
                self.b.len()
            )));
        }
        if self.w.iter().chain(&self.b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "{what}: non-finite parameter"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeDims {
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
    pub vocab: usize,
}

impl Default for CascadeDims {
    fn default() -> Self {
        Self {
            input: 16,
            hidden: 32,
            layers: 6,
            vocab: 32,
        }
    }
}

impl CascadeDims {
    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.hidden == 0 || self.layers < 2 || self.vocab < 2 {
            return Err(Error::InvalidParams(format!(
                "cascade needs input, hidden >= 1, layers >= 2, vocab >= 2; got {self:?}"
            )));
        }
        Ok(())
    }
}

/// All parameters of a cascade, or a gradient with the same shape.
///
/// `backbone[i]` maps layer `i` input to layer `i + 1` pre-activation;
/// `teacher` reads the last hidden state; `exits[i]` reads hidden state `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub backbone: Vec<Dense>,
    pub teacher: Dense,
    pub exits: Vec<Dense>,
}

/// Which parameter group a flat index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    /// Backbone and teacher head.
    Theta,
    /// Exit heads.
    Exits,
}

impl Params {
    pub fn zeros_like(&self) -> Self {
        Self {
            backbone: self.backbone.iter().map(Dense::zeros_like).collect(),
            teacher: self.teacher.zeros_like(),
            exits: self.exits.iter().map(Dense::zeros_like).collect(),
        }
    }

    fn group(&self, group: ParamGroup) -> Vec<&Dense> {
        match group {
            ParamGroup::Theta => self
                .backbone
                .iter()
                .chain(std::iter::once(&self.teacher))
                .collect(),
            ParamGroup::Exits => self.exits.iter().collect(),
        }
    }

    fn group_mut(&mut self, group: ParamGroup) -> Vec<&mut Dense> {
        match group {
            ParamGroup::Theta => self
                .backbone
                .iter_mut()
                .chain(std::iter::once(&mut self.teacher))
                .collect(),
            ParamGroup::Exits => self.exits.iter_mut().collect(),
        }
    }

    pub fn group_len(&self, group: ParamGroup) -> usize {
        self.group(group).iter().map(|d| d.len()).sum()
    }

    /// Value at flat index `i` within `group` (weights before biases, layers in order).
    pub fn get(&self, group: ParamGroup, mut i: usize) -> f64 {
        for d in self.group(group) {
            if i < d.len() {
                return d.get(i);
            }
            i -= d.len();
        }
        panic!("parameter index out of range");
    }

    pub fn get_mut(&mut self, group: ParamGroup, mut i: usize) -> &mut f64 {
        for d in self.group_mut(group) {
            if i < d.len() {
                return d.get_mut(i);
            }
            i -= d.len();
        }
        panic!("parameter index out of range");
    }

    /// Raw bytes of the group, for bit-exact comparisons.
    pub fn group_bytes(&self, group: ParamGroup) -> Vec<u8> {
        self.group(group)
            .iter()
            .flat_map(|d| d.w.iter().chain(&d.b))
            .flat_map(|v| v.to_bits().to_le_bytes())
            .collect()
    }
}

/// Per-layer head outputs for one token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenOutput {
    /// `probs[i]` is the distribution of layer `i + 1`; the last is the teacher.
    pub probs: Vec<Vec<f64>>,
}

impl TokenOutput {
    pub fn trace(&self, target: Option<u32>) -> TokenTrace {
        let layers = self
            .probs
            .iter()
            .map(|p| {
                let (c, id) = confidence_and_argmax(p);
                LayerOutcome::new(c.clamp(0.0, 1.0), id as u32)
            })
            .collect();
        let trace = TokenTrace::new(layers).expect("softmax outputs lie in [0, 1]");
        match target {
            Some(t) => trace.with_target(t),
            None => trace,
        }
    }
}

/// Feed-forward backbone of `tanh` layers with an exit head after every
/// layer but the last, which carries the teacher head.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyCascade {
    dims: CascadeDims,
    params: Params,
    frozen: bool,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    dims: CascadeDims,
    frozen: bool,
    params: Params,
}

impl ToyCascade {
    pub fn new(dims: CascadeDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backbone = (0..dims.layers)
            .map(|i| {
                let cols = if i == 0 { dims.input } else { dims.hidden };
                Dense::random(dims.hidden, cols, &mut rng)
            })
            .collect();
        let teacher = Dense::random(dims.vocab, dims.hidden, &mut rng);
        let exits = (0..dims.layers - 1)
            .map(|_| Dense::random(dims.vocab, dims.hidden, &mut rng))
            .collect();
        Ok(Self {
            dims,
            params: Params {
                backbone,
                teacher,
                exits,
            },
            frozen: false,
        })
    }

    pub fn zeros(dims: CascadeDims) -> Result<Self> {
        let mut m = Self::new(dims, 0)?;
        m.params = m.params.zeros_like();
        Ok(m)
    }

    pub fn from_params(dims: CascadeDims, params: Params, frozen: bool) -> Result<Self> {
        dims.validate()?;
        if params.backbone.len() != dims.layers || params.exits.len() != dims.layers - 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} backbone layers and {} exits, got {} and {}",
                dims.layers,
                dims.layers - 1,
                params.backbone.len(),
                params.exits.len()
            )));
        }
        for (i, d) in params.backbone.iter().enumerate() {
            let cols = if i == 0 { dims.input } else { dims.hidden };
            d.check(dims.hidden, cols, &format!("backbone layer {}", i + 1))?;
        }
        params
            .teacher
            .check(dims.vocab, dims.hidden, "teacher head")?;
        for (i, d) in params.exits.iter().enumerate() {
            d.check(dims.vocab, dims.hidden, &format!("exit head {}", i + 1))?;
        }
        Ok(Self {
            dims,
            params,
            frozen,
        })
    }

    pub fn dims(&self) -> CascadeDims {
        self.dims
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Bytes of the backbone and teacher parameters.
    pub fn theta_bytes(&self) -> Vec<u8> {
        self.params.group_bytes(ParamGroup::Theta)
    }

    /// Head of 1-based layer `layer`: an exit below `N`, the teacher at `N`.
    pub fn head(&self, layer: usize) -> &Dense {
        if layer == self.dims.layers {
            &self.params.teacher
        } else {
            &self.params.exits[layer - 1]
        }
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims.input {
            return Err(Error::DimensionMismatch(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.dims.input
            )));
        }
        Ok(())
    }

    /// Hidden states `h_1..h_N`.
    pub fn hidden_states(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut states: Vec<Vec<f64>> = Vec::with_capacity(self.dims.layers);
        for (i, layer) in self.params.backbone.iter().enumerate() {
            let input = if i == 0 { x } else { &states[i - 1] };
            let h = layer.apply(input).into_iter().map(f64::tanh).collect();
            states.push(h);
        }
        states
    }

    pub fn forward_token(&self, x: &[f64]) -> Result<TokenOutput> {
        self.check_input(x)?;
        let states = self.hidden_states(x);
        let probs = states
            .iter()
            .enumerate()
            .map(|(i, h)| softmax(&self.head(i + 1).apply(h)))
            .collect();
        Ok(TokenOutput { probs })
    }

    /// Per-token head outputs for an example.
    pub fn forward(&self, example: &SyntheticExample) -> Result<Vec<TokenOutput>> {
        example.check(self.dims.input, self.dims.vocab)?;
        example
            .inputs
            .iter()
            .map(|x| self.forward_token(x))
            .collect()
    }

    /// Labelled traces for every token of an example.
    pub fn traces(&self, example: &SyntheticExample) -> Result<Vec<TokenTrace>> {
        Ok(self
            .forward(example)?
            .iter()
            .zip(&example.targets)
            .map(|(out, &y)| out.trace(Some(y)))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            dims: self.dims,
            frozen: self.frozen,
            params: self.params.clone(),
        };
        Ok(serde_json::to_string(&ck)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        if value.get("format").and_then(|f| f.as_str()) != Some(CHECKPOINT_FORMAT) {
            return Err(Error::Parse {
                line: 1,
                message: format!("checkpoint format tag must be {CHECKPOINT_FORMAT:?}"),
            });
        }
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == CHECKPOINT_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::UnsupportedVersion {
                    found: u32::try_from(v).unwrap_or(u32::MAX),
                    expected: CHECKPOINT_VERSION,
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "checkpoint is missing its version".into(),
                })
            }
        }
        let ck: Checkpoint = serde_json::from_value(value).map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        Self::from_params(ck.dims, ck.params, ck.frozen)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
