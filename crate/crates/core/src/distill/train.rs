use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{ce_logit_grad, exit_loss, kl_logit_grad, softmax, LossBreakdown, PROB_FLOOR};
use super::model::{ParamGroup, Params, ToyCascade};
use super::task::SyntheticExample;
use crate::error::{Error, Result};

/// Which terms of the exit loss are optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossMix {
    CeOnly,
    KlOnly,
    Both,
}

impl LossMix {
    pub const ALL: [LossMix; 3] = [LossMix::CeOnly, LossMix::KlOnly, LossMix::Both];

    fn weights(self) -> (f64, f64) {
        match self {
            LossMix::CeOnly => (1.0, 0.0),
            LossMix::KlOnly => (0.0, 1.0),
            LossMix::Both => (1.0, 1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossMix::CeOnly => "ce-only",
            LossMix::KlOnly => "kl-only",
            LossMix::Both => "both",
        }
    }
}

/// `lr(epoch) = initial * decay^(epoch / step_every)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub initial: f64,
    pub decay: f64,
    pub step_every: usize,
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        Self {
            initial: lr,
            decay: 1.0,
            step_every: usize::MAX,
        }
    }

    pub fn rate(&self, epoch: usize) -> f64 {
        self.initial * self.decay.powi((epoch / self.step_every.max(1)) as i32)
    }

    fn validate(&self) -> Result<()> {
        if !(self.initial.is_finite()
            && self.initial > 0.0
            && self.decay > 0.0
            && self.decay <= 1.0)
        {
            return Err(Error::InvalidParams(format!(
                "learning rate must be > 0 and decay in (0, 1], got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Tokens per step; `None` means full batch.
    pub batch_size: Option<usize>,
    pub schedule: LrSchedule,
}

/// Loss over the whole training set after each epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
}

struct Token<'a> {
    x: &'a [f64],
    y: u32,
}

fn tokens<'a>(model: &ToyCascade, data: &'a [SyntheticExample]) -> Result<Vec<Token<'a>>> {
    let dims = model.dims();
    let mut out = Vec::new();
    for ex in data {
        ex.check(dims.input, dims.vocab)?;
        out.extend(
            ex.inputs
                .iter()
                .zip(&ex.targets)
                .map(|(x, &y)| Token { x, y }),
        );
    }
    if out.is_empty() {
        return Err(Error::InvalidParams("training set has no tokens".into()));
    }
    Ok(out)
}

fn batches<'a, 'b>(
    toks: &'b [Token<'a>],
    batch: Option<usize>,
) -> std::slice::Chunks<'b, Token<'a>> {
    toks.chunks(batch.unwrap_or(toks.len()).max(1))
}

/// Final-layer cross-entropy and its gradient with respect to backbone and
/// teacher, averaged over `toks`.
fn finetune_grad(model: &ToyCascade, toks: &[Token<'_>]) -> (f64, Params) {
    let p = model.params();
    let mut grad = p.zeros_like();
    let scale = 1.0 / toks.len() as f64;
    let mut loss = 0.0;
    for tok in toks {
        let hs = model.hidden_states(tok.x);
        let h_last = &hs[hs.len() - 1];
        let probs = softmax(&p.teacher.apply(h_last));
        loss -= probs[tok.y as usize].max(PROB_FLOOR).ln();
        let mut dz = vec![0.0; probs.len()];
        ce_logit_grad(&probs, tok.y, &mut dz);
        grad.teacher.accumulate(&dz, h_last, scale);
        let mut dh = p.teacher.back(&dz);
        for i in (0..hs.len()).rev() {
            let da: Vec<f64> = dh
                .iter()
                .zip(&hs[i])
                .map(|(g, h)| g * (1.0 - h * h))
                .collect();
            let input = if i == 0 { tok.x } else { &hs[i - 1] };
            grad.backbone[i].accumulate(&da, input, scale);
            if i > 0 {
                dh = p.backbone[i].back(&da);
            }
        }
    }
    (loss * scale, grad)
}

/// Summed exit losses over layers `1..N-1` and their gradient with respect
/// to the exit heads. The teacher distribution is recomputed from the
/// current (frozen) backbone.
fn exit_grad(model: &ToyCascade, toks: &[Token<'_>], mix: LossMix) -> (LossBreakdown, Params) {
    let (w_ce, w_kl) = mix.weights();
    let p = model.params();
    let mut grad = p.zeros_like();
    let scale = 1.0 / toks.len() as f64;
    let (mut ce, mut kl) = (0.0, 0.0);
    for tok in toks {
        let hs = model.hidden_states(tok.x);
        let teacher = softmax(&p.teacher.apply(&hs[hs.len() - 1]));
        for (i, head) in p.exits.iter().enumerate() {
            let probs = softmax(&head.apply(&hs[i]));
            let mut dz = vec![0.0; probs.len()];
            if w_ce != 0.0 {
                ce -= probs[tok.y as usize].max(PROB_FLOOR).ln();
                ce_logit_grad(&probs, tok.y, &mut dz);
            }
            if w_kl != 0.0 {
                kl += super::loss::kl_divergence(&probs, &teacher).unwrap_or(0.0);
                kl_logit_grad(&probs, &teacher, &mut dz);
            }
            grad.exits[i].accumulate(&dz, &hs[i], scale);
        }
    }
    (LossBreakdown::new(ce * scale, kl * scale), grad)
}

fn step(model: &mut ToyCascade, grad: &Params, group: ParamGroup, lr: f64) {
    let p = model.params_mut();
    match group {
        ParamGroup::Theta => {
            for (d, g) in p.backbone.iter_mut().zip(&grad.backbone) {
                d.descend(g, lr);
            }
            p.teacher.descend(&grad.teacher, lr);
        }
        ParamGroup::Exits => {
            for (d, g) in p.exits.iter_mut().zip(&grad.exits) {
                d.descend(g, lr);
            }
        }
    }
}

fn finite_or_abort(epoch: usize, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss { epoch, loss })
    }
}

/// Gradient descent on the final-layer cross-entropy, then freeze.
///
/// Exit heads are not touched. Batches are contiguous runs of tokens in
/// dataset order.
pub fn train_backbone(
    model: &mut ToyCascade,
    data: &[SyntheticExample],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if model.is_frozen() {
        return Err(Error::Frozen);
    }
    cfg.schedule.validate()?;
    let toks = tokens(model, data)?;
    let mut report = TrainReport::default();
    for epoch in 0..cfg.epochs {
        let lr = cfg.schedule.rate(epoch);
        for batch in batches(&toks, cfg.batch_size) {
            let (loss, grad) = finetune_grad(model, batch);
            finite_or_abort(epoch, loss)?;
            step(model, &grad, ParamGroup::Theta, lr);
        }
        let (loss, _) = finetune_grad(model, &toks);
        finite_or_abort(epoch, loss)?;
        report.epoch_losses.push(loss);
    }
    model.freeze();
    Ok(report)
}

/// Gradient descent on the summed exit losses with the backbone frozen.
pub fn train_exits(
    model: &mut ToyCascade,
    data: &[SyntheticExample],
    cfg: &TrainConfig,
    mix: LossMix,
) -> Result<TrainReport> {
    if !model.is_frozen() {
        return Err(Error::NotFrozen);
    }
    cfg.schedule.validate()?;
    let toks = tokens(model, data)?;
    let mut report = TrainReport::default();
    for epoch in 0..cfg.epochs {
        let lr = cfg.schedule.rate(epoch);
        for batch in batches(&toks, cfg.batch_size) {
            let (loss, grad) = exit_grad(model, batch, mix);
            finite_or_abort(epoch, loss.total)?;
            step(model, &grad, ParamGroup::Exits, lr);
        }
        let (loss, _) = exit_grad(model, &toks, mix);
        finite_or_abort(epoch, loss.total)?;
        report.epoch_losses.push(loss.total);
    }
    Ok(report)
}

/// Per-layer exact-match accuracy of the argmax token, layers `1..=N`.
pub fn layer_accuracy(model: &ToyCascade, data: &[SyntheticExample]) -> Result<Vec<f64>> {
    let n = model.dims().layers;
    let mut hits = vec![0u64; n];
    let mut total = 0u64;
    for ex in data {
        for trace in model.traces(ex)? {
            total += 1;
            for (h, o) in hits.iter_mut().zip(trace.layers()) {
                if Some(o.token_id) == trace.target() {
                    *h += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(Error::InvalidParams("accuracy of an empty set".into()));
    }
    Ok(hits.iter().map(|&h| h as f64 / total as f64).collect())
}

/// Exit losses of layers `1..N-1` on a dataset, computed from probabilities.
pub fn exit_losses(model: &ToyCascade, data: &[SyntheticExample]) -> Result<Vec<LossBreakdown>> {
    let n = model.dims().layers;
    let mut student: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n - 1];
    let mut teacher = Vec::new();
    let mut targets = Vec::new();
    for ex in data {
        for (out, &y) in model.forward(ex)?.into_iter().zip(&ex.targets) {
            let mut probs = out.probs;
            teacher.push(probs.pop().expect("at least two layers"));
            for (s, p) in student.iter_mut().zip(probs) {
                s.push(p);
            }
            targets.push(y);
        }
    }
    student
        .iter()
        .map(|s| exit_loss(s, &teacher, &targets))
        .collect()
}

/// Loss whose analytic gradient is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Final-layer cross-entropy over backbone and teacher parameters.
    Finetune,
    /// Summed exit losses over the exit-head parameters.
    Exit(LossMix),
}

impl Objective {
    fn group(self) -> ParamGroup {
        match self {
            Objective::Finetune => ParamGroup::Theta,
            Objective::Exit(_) => ParamGroup::Exits,
        }
    }

    fn eval(self, model: &ToyCascade, toks: &[Token<'_>]) -> (f64, Params) {
        match self {
            Objective::Finetune => finetune_grad(model, toks),
            Objective::Exit(mix) => {
                let (l, g) = exit_grad(model, toks, mix);
                (l.total, g)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub probes: usize,
    pub max_relative_error: f64,
    pub max_abs_analytic: f64,
}

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Compares analytic gradients to central differences on `probes` random
/// coordinates of the objective's parameter group.
///
/// Relative error is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(
    model: &ToyCascade,
    data: &[SyntheticExample],
    objective: Objective,
    probes: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let toks = tokens(model, data)?;
    let (_, grad) = objective.eval(model, &toks);
    let group = objective.group();
    let count = model.params().group_len(group);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = model.clone();
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for _ in 0..probes {
        let i = rng.random_range(0..count);
        let orig = work.params().get(group, i);
        *work.params_mut().get_mut(group, i) = orig + FD_STEP;
        let plus = objective.eval(&work, &toks).0;
        *work.params_mut().get_mut(group, i) = orig - FD_STEP;
        let minus = objective.eval(&work, &toks).0;
        *work.params_mut().get_mut(group, i) = orig;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let analytic = grad.get(group, i);
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        max_rel = max_rel.max((analytic - numeric).abs() / denom);
        max_abs = max_abs.max(analytic.abs());
    }
    Ok(GradCheckReport {
        probes,
        max_relative_error: max_rel,
        max_abs_analytic: max_abs,
    })
}

/// Gradient of `KL(p || q)` with respect to student logits `z`, `p = softmax(z)`.
pub fn kl_gradient_wrt_logits(z: &[f64], q: &[f64]) -> Vec<f64> {
    let p = softmax(z);
    let mut g = vec![0.0; z.len()];
    kl_logit_grad(&p, q, &mut g);
    g
}
