// Trace files: one JSON header line carrying the resolved run, then one
// JSON record per retained iteration.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::Provenance;
use crate::likelihoods::LikelihoodModel;
use crate::sampler::{ChainRecord, ChainTrace};

pub const TRACE_FORMAT: &str = "spkmix-trace/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub chain: usize,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub data: Provenance,
    pub config: RunConfig,
    /// The likelihood with every "auto" hyperparameter resolved.
    pub model: LikelihoodModel,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
}

pub fn write_trace<W: Write>(mut out: W, header: &TraceHeader, trace: &ChainTrace) -> Result<()> {
    let line = |e: serde_json::Error| Error::Io(e.to_string());
    serde_json::to_writer(&mut out, header).map_err(line)?;
    out.write_all(b"\n")?;
    for r in &trace.records {
        serde_json::to_writer(&mut out, r).map_err(line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> Result<(TraceHeader, ChainTrace)> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| Error::Parse("trace file is empty".into()))??;
    let header: TraceHeader = serde_json::from_str(&first).map_err(|e| Error::Parse(format!("trace header: {e}")))?;
    if header.format != TRACE_FORMAT {
        return Err(Error::Parse(format!("unknown trace format '{}'", header.format)));
    }
    let mut records = Vec::new();
    for (i, l) in lines.enumerate() {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let r: ChainRecord =
            serde_json::from_str(&l).map_err(|e| Error::Parse(format!("trace line {}: {e}", i + 2)))?;
        records.push(r);
    }
    let trace = ChainTrace { iterations: header.iterations, burn_in: header.burn_in, thin: header.thin, records };
    Ok((header, trace))
}

pub fn load_trace(path: impl AsRef<std::path::Path>) -> Result<(TraceHeader, ChainTrace)> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_trace(std::io::BufReader::new(f))
}
