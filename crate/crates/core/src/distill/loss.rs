use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to every probability before taking its log.
pub const PROB_FLOOR: f64 = 1e-12;

fn ln_floor(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

/// Top-1 probability and its index (first index on ties).
pub fn confidence_and_argmax(p: &[f64]) -> (f64, usize) {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    (p[best], best)
}

fn check_aligned(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("{what}: {a} vs {b}")));
    }
    if a == 0 {
        return Err(Error::InvalidParams(format!("{what}: empty sequence")));
    }
    Ok(())
}

fn target_prob(p: &[f64], y: u32) -> Result<f64> {
    p.get(y as usize).copied().ok_or_else(|| {
        Error::DimensionMismatch(format!("target {y} outside vocabulary of size {}", p.len()))
    })
}

/// Mean negative log-likelihood of the targets.
pub fn cross_entropy(probs: &[Vec<f64>], targets: &[u32]) -> Result<f64> {
    check_aligned(probs.len(), targets.len(), "probabilities vs targets")?;
    let mut sum = 0.0;
    for (p, &y) in probs.iter().zip(targets) {
        sum -= ln_floor(target_prob(p, y)?);
    }
    Ok(sum / targets.len() as f64)
}

/// Final-layer cross-entropy used to fine-tune the backbone.
pub fn finetune_loss(final_probs: &[Vec<f64>], targets: &[u32]) -> Result<f64> {
    cross_entropy(final_probs, targets)
}

/// `sum_v p(v) ln(p(v) / q(v))`, student first. Zero-mass terms of `p` add 0.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "distributions of size {} and {}",
            p.len(),
            q.len()
        )));
    }
    let kl = p
        .iter()
        .zip(q)
        .filter(|(&pv, _)| pv > 0.0)
        .map(|(&pv, &qv)| pv * (ln_floor(pv) - ln_floor(qv)))
        .sum::<f64>();
    Ok(kl.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub kl: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(ce: f64, kl: f64) -> Self {
        Self {
            ce,
            kl,
            total: ce + kl,
        }
    }
}

/// Hard-label cross-entropy plus soft-label KL to the teacher, token-averaged.
pub fn exit_loss(
    student: &[Vec<f64>],
    teacher: &[Vec<f64>],
    targets: &[u32],
) -> Result<LossBreakdown> {
    check_aligned(student.len(), teacher.len(), "student vs teacher")?;
    let ce = cross_entropy(student, targets)?;
    let mut kl = 0.0;
    for (p, q) in student.iter().zip(teacher) {
        kl += kl_divergence(p, q)?;
    }
    Ok(LossBreakdown::new(ce, kl / student.len() as f64))
}

/// Gradient of `-ln p(y)` with respect to the logits: `p - e_y`.
pub fn ce_logit_grad(p: &[f64], y: u32, out: &mut [f64]) {
    for (o, &pv) in out.iter_mut().zip(p) {
        *o += pv;
    }
    out[y as usize] -= 1.0;
}

/// Gradient of `KL(p || q)` with respect to the student logits, `q` fixed:
/// `p * (ln p - ln q - KL)`.
pub fn kl_logit_grad(p: &[f64], q: &[f64], out: &mut [f64]) {
    let terms: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(&pv, &qv)| ln_floor(pv) - ln_floor(qv))
        .collect();
    let kl: f64 = p.iter().zip(&terms).map(|(pv, t)| pv * t).sum();
    for ((o, &pv), t) in out.iter_mut().zip(p).zip(&terms) {
        *o += pv * (t - kl);
    }
}
