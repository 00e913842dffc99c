use std::path::PathBuf;

use eesim_core::distill::{
    exit_losses, layer_accuracy, run_ablation, train_backbone, train_exits, LossBreakdown, LossMix,
    ToyCascade, DEEPEST_EXIT_EPSILON, TEACHER_GAP_EPSILON,
};
use eesim_core::synth::{TraceHeader, TraceRecord, TraceWriter};
use serde::Serialize;

use super::sweep::toy_shape;
use crate::config::ExperimentConfig;
use crate::error::{io_err, CliResult};
use crate::output::{cell, Sink};

#[derive(Debug, Serialize)]
struct AblationSummary {
    teacher_accuracy: f64,
    deepest_exit: usize,
    deepest_exit_spread: f64,
    deepest_exit_epsilon: f64,
    teacher_gap_epsilon: f64,
    layer1_both_minus_ce_only: f64,
    backbone_losses: Vec<f64>,
    variants: Vec<eesim_core::distill::VariantResult>,
}

pub fn cmd_ablation(config: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    config.validate_toy()?;
    let result = run_ablation(&config.toy, &LossMix::ALL)?;
    let layers = config.toy.dims.layers;
    let acc = |mix| &result.variant(mix).expect("all mixes run").accuracy;
    let rows: Vec<Vec<String>> = (0..layers)
        .map(|i| {
            vec![
                cell(i + 1),
                cell(acc(LossMix::CeOnly)[i]),
                cell(acc(LossMix::KlOnly)[i]),
                cell(acc(LossMix::Both)[i]),
            ]
        })
        .collect();
    let deepest = layers - 1;
    let summary = AblationSummary {
        teacher_accuracy: result.teacher_accuracy,
        deepest_exit: deepest,
        deepest_exit_spread: result.spread_at(deepest),
        deepest_exit_epsilon: DEEPEST_EXIT_EPSILON,
        teacher_gap_epsilon: TEACHER_GAP_EPSILON,
        layer1_both_minus_ce_only: acc(LossMix::Both)[0] - acc(LossMix::CeOnly)[0],
        backbone_losses: result.backbone_losses.clone(),
        variants: result.variants.clone(),
    };
    let sink = Sink::new("ablation", config)?;
    let csv = sink.csv(
        "ablation.csv",
        &[
            "layer",
            "accuracy_ce_only",
            "accuracy_kl_only",
            "accuracy_both",
        ],
        &rows,
    )?;
    let json = sink.json("ablation_summary.json", &summary)?;
    Ok(vec![csv, json])
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    mix: LossMix,
    layer_accuracy: Vec<f64>,
    exit_losses: Vec<LossBreakdown>,
    checkpoint: String,
}

pub fn cmd_train_toy(config: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    config.validate_toy()?;
    let cfg = &config.toy;
    let train = cfg.task.sample(cfg.train_examples, cfg.label_noise, 0)?;
    let test = cfg.task.sample(cfg.test_examples, 0.0, 1)?;
    let mut model = ToyCascade::new(cfg.dims, cfg.init_seed)?;
    let stage1 = train_backbone(&mut model, &train, &cfg.backbone)?;
    let stage2 = train_exits(&mut model, &train, &cfg.exits, config.train_toy.mix)?;

    let sink = Sink::new("train-toy", config)?;
    let mut written = Vec::new();
    let ckpt = sink.path("toy_cascade.json");
    model.save(&ckpt)?;
    written.push(ckpt);

    let rows: Vec<Vec<String>> = [("backbone", &stage1), ("exits", &stage2)]
        .into_iter()
        .flat_map(|(stage, r)| {
            r.epoch_losses
                .iter()
                .enumerate()
                .map(move |(e, l)| vec![stage.to_string(), cell(e + 1), cell(l)])
        })
        .collect();
    written.push(sink.csv("train_loss.csv", &["stage", "epoch", "loss"], &rows)?);

    let summary = TrainSummary {
        mix: config.train_toy.mix,
        layer_accuracy: layer_accuracy(&model, &test)?,
        exit_losses: exit_losses(&model, &test)?,
        checkpoint: "toy_cascade.json".to_string(),
    };
    written.push(sink.json("train_summary.json", &summary)?);

    if config.train_toy.export_traces {
        let path = sink.path("toy_traces.jsonl");
        let file = std::fs::File::create(&path).map_err(io_err(&path))?;
        let header = TraceHeader::new(
            toy_shape(&model),
            format!("toy-cascade seed={}", cfg.init_seed),
        );
        let mut w = TraceWriter::new(std::io::BufWriter::new(file), &header)?;
        for (j, ex) in test.iter().enumerate() {
            w.write(&TraceRecord {
                image_id: format!("ex{j:06}"),
                tokens: model.traces(ex)?,
            })?;
        }
        w.finish()?;
        written.push(path);
    }
    Ok(written)
}
