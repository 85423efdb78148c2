//! Atomic file emission and the trace file format.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use stsir::mcmc::ChainTrace;
use stsir::model::ParamLayout;
use stsir::{ChainTrace64, ModelSpec64};

use crate::fail::{Failure, Outcome};

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::data(format!("{}: {e}", path.display()))
}

/// Runs `fill` against a temporary file next to `path`, then renames it
/// into place so readers never observe a partial file.
pub fn atomic(path: &Path, fill: impl FnOnce(&Path) -> Outcome<()>) -> Outcome<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let tmp = tempfile::Builder::new()
        .prefix(".stsir-")
        .tempfile_in(dir)
        .map_err(|e| io_failure(dir, e))?;
    fill(tmp.path())?;
    tmp.persist(path).map_err(|e| io_failure(path, e.error))?;
    Ok(())
}

/// Writes a CSV with the given header and pre-formatted rows.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Outcome<()> {
    atomic(path, |tmp| {
        let mut w = csv::Writer::from_path(tmp).map_err(|e| io_failure(path, e))?;
        w.write_record(header).map_err(|e| io_failure(path, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| io_failure(path, e))?;
        }
        w.flush().map_err(|e| io_failure(path, e))
    })
}

pub fn spec_hash(spec: &ModelSpec64) -> String {
    hex::encode(Sha256::digest(spec.to_json().as_bytes()))
}

pub fn trace_path(dir: &Path, chain: usize) -> PathBuf {
    dir.join(format!("trace_chain{chain}.csv"))
}

/// Trace file: a `# spec_hash=` line, then one row per retained draw with
/// the draw index, its deviance and every parameter. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_trace(path: &Path, trace: &ChainTrace64, spec: &ModelSpec64) -> Outcome<()> {
    atomic(path, |tmp| {
        let file = std::fs::File::create(tmp).map_err(|e| io_failure(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "# spec_hash={}", spec_hash(spec)).map_err(|e| io_failure(path, e))?;
        let mut header = vec!["draw".to_string(), "deviance".to_string()];
        header.extend(trace.layout.names());
        writeln!(out, "{}", header.join(",")).map_err(|e| io_failure(path, e))?;
        for (k, (draw, dev)) in trace.draws.iter().zip(&trace.deviances).enumerate() {
            let mut line = format!("{k},{dev}");
            for v in trace.layout.flatten(draw) {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}").map_err(|e| io_failure(path, e))?;
        }
        out.flush().map_err(|e| io_failure(path, e))
    })
}

/// Reads a trace written by [`write_trace`], checking it against `spec`
/// and the panel dimensions.
pub fn read_trace(path: &Path, spec: &ModelSpec64, m: usize, t: usize) -> Outcome<ChainTrace64> {
    let file = std::fs::File::open(path).map_err(|e| io_failure(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| io_failure(path, e))?;
    let stored = first
        .trim_end()
        .strip_prefix("# spec_hash=")
        .ok_or_else(|| Failure::data(format!("{}: missing spec_hash header", path.display())))?;
    let expected = spec_hash(spec);
    if stored != expected {
        return Err(Failure::config(format!(
            "trace {} was fitted under a different model spec (hash {stored}, expected {expected})",
            path.display()
        )));
    }
    let layout = ParamLayout::new(spec, m, t);
    let names = layout.names();
    let mut csv = csv::Reader::from_reader(reader);
    let headers = csv.headers().map_err(|e| io_failure(path, e))?.clone();
    let found: Vec<&str> = headers.iter().skip(2).collect();
    if found != names.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Failure::config(format!(
            "trace {} columns do not match the configured panel and model",
            path.display()
        )));
    }
    let mut trace = ChainTrace {
        layout,
        draws: Vec::new(),
        deviances: Vec::new(),
        mu_snapshots: Vec::new(),
        accept_rates: Vec::new(),
    };
    for rec in csv.records() {
        let rec = rec.map_err(|e| io_failure(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let values: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::data(format!("{}:{line}: {e}", path.display())))?;
        trace.deviances.push(values[0]);
        trace.draws.push(layout.unflatten(&values[1..])?);
    }
    if trace.is_empty() {
        return Err(Failure::data(format!("trace {} has no draws", path.display())));
    }
    Ok(trace)
}
