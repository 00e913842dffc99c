use std::path::PathBuf;

use eesim_core::synth::{image_id, write_traces, TraceHeader, TraceRecord};

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::output::Sink;

/// Ground-truth synthetic captions, one record per image.
pub fn cmd_gen_traces(config: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    config.validate_gen_traces()?;
    let g = &config.generator;
    let records: Vec<TraceRecord> = (0..config.gen_traces.images as u64)
        .map(|j| TraceRecord {
            image_id: image_id(j),
            tokens: g.caption(j, config.max_caption_length),
        })
        .collect();
    let header = TraceHeader::new(
        g.shape(),
        format!("synthetic seed={} sigma={}", g.seed, g.sigma),
    );
    let sink = Sink::new("gen-traces", config)?;
    let path = sink.path(&config.gen_traces.file);
    write_traces(&path, &header, &records)?;
    Ok(vec![path])
}
