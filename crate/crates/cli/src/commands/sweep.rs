use std::path::PathBuf;

use eesim_core::cascade::{decide_exit, speedup_ratio, CascadeShape, ExitHistogram, TokenTrace};
use eesim_core::distill::ToyCascade;
use eesim_core::synth::read_all;
use eesim_core::Error as CoreError;

use super::token_accuracy;
use crate::config::{ExperimentConfig, SweepSource};
use crate::error::CliResult;
use crate::output::{cell, opt_cell, Sink};

/// One row of the threshold sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub speedup_ratio: f64,
    pub token_accuracy: Option<f64>,
    pub mean_exit_layer: f64,
}

/// Caption traces from the configured source, plus the cascade shape.
pub(crate) fn load_captions(
    config: &ExperimentConfig,
) -> CliResult<(CascadeShape, Vec<Vec<TokenTrace>>)> {
    match config.sweep.source {
        SweepSource::Synthetic => {
            let g = &config.generator;
            let captions = (0..config.sweep.images as u64)
                .map(|j| g.caption(j, config.max_caption_length))
                .collect();
            Ok((g.shape(), captions))
        }
        SweepSource::Traces => {
            let path = config.sweep.traces.as_ref().expect("validated");
            let (header, records) = read_all(path)?;
            let shape = header.shape();
            shape.validate()?;
            let captions = records.into_iter().map(|r| r.tokens).collect::<Vec<_>>();
            for t in captions.iter().flatten() {
                t.check_shape(shape.layers, shape.vocab)?;
            }
            Ok((shape, captions))
        }
        SweepSource::Model => {
            let path = config.sweep.model.as_ref().expect("validated");
            let model = ToyCascade::load(path)?;
            let dims = model.dims();
            let task = &config.toy.task;
            if dims.input != task.input_dim || dims.vocab != task.vocab {
                return Err(CoreError::DimensionMismatch(format!(
                    "checkpoint is {}->{} but the toy task is {}->{}",
                    dims.input, dims.vocab, task.input_dim, task.vocab
                ))
                .into());
            }
            let test = task.sample(config.toy.test_examples, 0.0, 1)?;
            let captions = test
                .iter()
                .map(|ex| model.traces(ex))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((toy_shape(&model), captions))
        }
    }
}

pub(crate) fn toy_shape(model: &ToyCascade) -> CascadeShape {
    let dims = model.dims();
    CascadeShape {
        layers: dims.layers,
        vocab: dims.vocab as u32,
        eos_id: 0,
    }
}

/// Evaluates every threshold on every trace of every caption.
///
/// Captions are fixed in advance (teacher-forced), so each alpha sees the same
/// tokens and per-token monotonicity carries over to the aggregate columns.
pub fn sweep_rows(
    alphas: &[f64],
    layers: usize,
    captions: &[Vec<TokenTrace>],
) -> CliResult<Vec<SweepRow>> {
    alphas
        .iter()
        .map(|&alpha| {
            let mut hist = ExitHistogram::new(layers);
            let decisions = captions
                .iter()
                .flatten()
                .map(|t| decide_exit(t, alpha))
                .collect::<Result<Vec<_>, _>>()?;
            hist.extend(&decisions);
            Ok(SweepRow {
                alpha,
                speedup_ratio: speedup_ratio(&hist, layers)?,
                token_accuracy: token_accuracy(&decisions),
                mean_exit_layer: hist.mean_exit_layer().unwrap_or(f64::NAN),
            })
        })
        .collect()
}

pub fn cmd_sweep_threshold(config: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    config.validate_sweep()?;
    let (shape, captions) = load_captions(config)?;
    let rows = sweep_rows(&config.sweep.alphas, shape.layers, &captions)?;
    let sink = Sink::new("sweep-threshold", config)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                cell(r.alpha),
                cell(r.speedup_ratio),
                opt_cell(r.token_accuracy),
                cell(r.mean_exit_layer),
            ]
        })
        .collect();
    let path = sink.csv(
        "sweep_threshold.csv",
        &[
            "alpha",
            "speedup_ratio",
            "token_accuracy",
            "mean_exit_layer",
        ],
        &table,
    )?;
    Ok(vec![path])
}
