//! Result files. Everything is written to a temporary file in the target
//! directory and renamed into place, so a failed run leaves nothing behind.

use std::io::Write;
use std::path::Path;

use holojcas_core::optimizer::{ConvergenceTrace, Termination};
use serde::Serialize;

use crate::config::OutputFormat;
use crate::error::{Error, Result};
use crate::harness::{to_db, SweepResult};

pub const SWEEP_HEADER: [&str; 11] = [
    "axis_value",
    "scheme",
    "mean_rate",
    "mean_crb_theta_lin",
    "mean_crb_phi_lin",
    "mean_crb_theta_db",
    "mean_crb_phi_db",
    "mean_crb_theta_db_alt",
    "mean_crb_phi_db_alt",
    "n_ok",
    "n_failed",
];

pub const TRACE_HEADER: [&str; 6] = [
    "iteration",
    "rate",
    "crb_theta_db",
    "crb_phi_db",
    "objective",
    "tx_power",
];

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x}")
}

/// Writes through `body` into a temp file next to `path`, then renames it.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let io = |source| Error::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        body(&mut buf)?;
        buf.flush().map_err(io)?;
    }
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_sweep_csv(result: &SweepResult, out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for p in &result.points {
        w.write_record([
            format_float(p.axis_value),
            p.scheme.as_str().to_string(),
            format_float(p.mean_rate),
            format_float(p.mean_crb_theta_lin),
            format_float(p.mean_crb_phi_lin),
            format_float(p.mean_crb_theta_db),
            format_float(p.mean_crb_phi_db),
            format_float(p.mean_crb_theta_db_alt),
            format_float(p.mean_crb_phi_db_alt),
            p.n_ok.to_string(),
            p.n_failed.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_sweep(result: &SweepResult, format: OutputFormat, out: &mut dyn Write) -> Result<()> {
    match format {
        OutputFormat::Csv => write_sweep_csv(result, out),
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, result)?;
            writeln!(out).map_err(serde_json::Error::io)?;
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub rate: f64,
    pub crb_theta_db: f64,
    pub crb_phi_db: f64,
    pub objective: f64,
    pub tx_power: f64,
}

#[derive(Serialize)]
struct TraceDocument<'a> {
    converged: bool,
    rows: &'a [TraceRow],
}

pub fn trace_rows(trace: &ConvergenceTrace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow {
            iteration: r.iteration,
            rate: r.rate,
            crb_theta_db: to_db(r.crb_theta),
            crb_phi_db: to_db(r.crb_phi),
            objective: r.weighted_objective,
            tx_power: r.tx_power,
        })
        .collect()
}

pub fn write_trace(
    trace: &ConvergenceTrace,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<()> {
    let rows = trace_rows(trace);
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(TRACE_HEADER)?;
            for r in &rows {
                w.write_record([
                    r.iteration.to_string(),
                    format_float(r.rate),
                    format_float(r.crb_theta_db),
                    format_float(r.crb_phi_db),
                    format_float(r.objective),
                    format_float(r.tx_power),
                ])?;
            }
            w.flush().map_err(csv::Error::from)?;
        }
        OutputFormat::Json => {
            let doc = TraceDocument {
                converged: trace.termination == Termination::ToleranceMet,
                rows: &rows,
            };
            serde_json::to_writer_pretty(&mut *out, &doc)?;
            writeln!(out).map_err(serde_json::Error::io)?;
        }
    }
    Ok(())
}
