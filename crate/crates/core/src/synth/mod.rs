//! Synthetic confidence traces and the on-disk trace format.

mod model;
mod trace_file;

pub use model::{image_id, SyntheticConfidenceModel};
pub use trace_file::{
    read_all, read_traces, write_traces, TraceHeader, TraceReader, TraceRecord, TraceWriter,
    TRACE_FORMAT, TRACE_VERSION,
};
