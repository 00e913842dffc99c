use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeShape, LayerOutcome, TokenTrace};
use crate::error::{Error, Result};

pub const TRACE_FORMAT: &str = "eesim-traces";
pub const TRACE_VERSION: u32 = 1;

/// First line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub layers: usize,
    pub vocab: u32,
    pub eos_id: u32,
    pub source: String,
}

impl TraceHeader {
    pub fn new(shape: CascadeShape, source: impl Into<String>) -> Self {
        Self {
            format: TRACE_FORMAT.to_string(),
            version: TRACE_VERSION,
            layers: shape.layers,
            vocab: shape.vocab,
            eos_id: shape.eos_id,
            source: source.into(),
        }
    }

    pub fn shape(&self) -> CascadeShape {
        CascadeShape {
            layers: self.layers,
            vocab: self.vocab,
            eos_id: self.eos_id,
        }
    }
}

/// One image: its id and the traces of its caption positions in order.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub image_id: String,
    pub tokens: Vec<TokenTrace>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawToken {
    #[serde(default)]
    target: Option<u32>,
    layers: Vec<(f64, u32)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    image: String,
    tokens: Vec<RawToken>,
}

/// Streaming writer. Confidences are written with 17 significant digits.
pub struct TraceWriter<W: Write> {
    out: W,
    shape: CascadeShape,
    line: String,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, header: &TraceHeader) -> Result<Self> {
        header.shape().validate()?;
        writeln!(out, "{}", serde_json::to_string(header)?)?;
        Ok(Self {
            out,
            shape: header.shape(),
            line: String::new(),
        })
    }

    pub fn write(&mut self, record: &TraceRecord) -> Result<()> {
        let line = &mut self.line;
        line.clear();
        line.push_str("{\"image\":");
        line.push_str(&serde_json::to_string(&record.image_id)?);
        line.push_str(",\"tokens\":[");
        for (k, trace) in record.tokens.iter().enumerate() {
            trace.check_shape(self.shape.layers, self.shape.vocab)?;
            if k > 0 {
                line.push(',');
            }
            line.push('{');
            if let Some(target) = trace.target() {
                let _ = write!(line, "\"target\":{target},");
            }
            line.push_str("\"layers\":[");
            for (i, o) in trace.layers().iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                let _ = write!(line, "[{:.16e},{}]", o.confidence, o.token_id);
            }
            line.push_str("]}");
        }
        line.push_str("]}");
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Line-by-line reader; yields one record per line after the header.
pub struct TraceReader<R: BufRead> {
    input: R,
    header: TraceHeader,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut buf = String::new();
        if input.read_line(&mut buf)? == 0 {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            });
        }
        let header = parse_header(buf.trim_end())?;
        Ok(Self {
            input,
            header,
            line_no: 1,
            buf,
        })
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    fn parse_record(&self, text: &str) -> Result<TraceRecord> {
        let line = self.line_no;
        let err = |message: String| Error::Parse { line, message };
        let raw: RawRecord = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
        let shape = self.header.shape();
        let mut tokens = Vec::with_capacity(raw.tokens.len());
        for (k, tok) in raw.tokens.into_iter().enumerate() {
            if tok.layers.len() != shape.layers {
                return Err(err(format!(
                    "token {k}: expected {} layers (header), got {}",
                    shape.layers,
                    tok.layers.len()
                )));
            }
            let outcomes = tok
                .layers
                .into_iter()
                .map(|(c, id)| LayerOutcome::new(c, id))
                .collect();
            let mut trace =
                TokenTrace::new(outcomes).map_err(|e| err(format!("token {k}: {e}")))?;
            if let Some(t) = tok.target {
                trace = trace.with_target(t);
            }
            trace
                .check_shape(shape.layers, shape.vocab)
                .map_err(|e| err(format!("token {k}: {e}")))?;
            tokens.push(trace);
        }
        Ok(TraceRecord {
            image_id: raw.image,
            tokens,
        })
    }
}

fn parse_header(text: &str) -> Result<TraceHeader> {
    let err = |message: String| Error::Parse { line: 1, message };
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| err(format!("header: {e}")))?;
    if value.get("format").and_then(|f| f.as_str()) != Some(TRACE_FORMAT) {
        return Err(err(format!("header: format tag must be {TRACE_FORMAT:?}")));
    }
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == TRACE_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::UnsupportedVersion {
                found: u32::try_from(v).unwrap_or(u32::MAX),
                expected: TRACE_VERSION,
            })
        }
        None => return Err(err("header: missing integer version".into())),
    }
    let header: TraceHeader =
        serde_json::from_value(value).map_err(|e| err(format!("header: {e}")))?;
    header
        .shape()
        .validate()
        .map_err(|e| err(format!("header: {e}")))?;
    Ok(header)
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<TraceRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let text = self.buf.trim();
            if text.is_empty() {
                continue;
            }
            return Some(self.parse_record(text));
        }
    }
}

pub fn write_traces<'a, P, I>(path: P, header: &TraceHeader, records: I) -> Result<()>
where
    P: AsRef<Path>,
    I: IntoIterator<Item = &'a TraceRecord>,
{
    let mut w = TraceWriter::new(BufWriter::new(File::create(path)?), header)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()?;
    Ok(())
}

pub fn read_traces<P: AsRef<Path>>(path: P) -> Result<TraceReader<BufReader<File>>> {
    TraceReader::new(BufReader::new(File::open(path)?))
}

/// Reads a whole file, stopping at the first bad record.
pub fn read_all<P: AsRef<Path>>(path: P) -> Result<(TraceHeader, Vec<TraceRecord>)> {
    let reader = read_traces(path)?;
    let header = reader.header().clone();
    let records = reader.collect::<Result<Vec<_>>>()?;
    Ok((header, records))
}
