//! CSV serialization of sweep results.
//!
//! The summary file has one row per cell: the swept parameter columns, then
//! for every metric its mean, median, stddev, p50, p90, p95, p99, min and
//! max. The raw sidecar (`<stem>.raw.csv`) has one row per cell and
//! replication. Both files are written to temporaries and renamed into
//! place, so a failed write leaves nothing behind.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::OutputError;
use crate::experiment::{cell_seed, Metric, SweepResult};
use crate::stats::StatsSummary;

pub const STAT_COLUMNS: [&str; 9] = [
    "mean", "median", "stddev", "p50", "p90", "p95", "p99", "min", "max",
];

const RAW_EXTRA_COLUMNS: [&str; 7] = [
    "preemption_cost",
    "removed_servers",
    "misdiagnoses",
    "standby_swaps",
    "host_selections",
    "compute_segments",
    "hazard_exposure",
];

fn stat_values(s: &StatsSummary) -> [f64; 9] {
    [
        s.mean, s.median, s.stddev, s.p50, s.p90, s.p95, s.p99, s.min, s.max,
    ]
}

/// Sidecar path: `out/fig2a.csv` becomes `out/fig2a.raw.csv`.
pub fn raw_path(summary: &Path) -> PathBuf {
    let stem = summary
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    summary.with_file_name(format!("{stem}.raw.csv"))
}

pub fn summary_header(result: &SweepResult) -> Vec<String> {
    let mut header: Vec<String> = result
        .spec
        .keys()
        .iter()
        .map(|k| k.name().to_owned())
        .collect();
    for metric in Metric::ALL {
        for stat in STAT_COLUMNS {
            header.push(format!("{}_{stat}", metric.name()));
        }
    }
    header
}

pub fn render_summary(result: &SweepResult) -> Result<Vec<u8>, OutputError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(summary_header(result))?;
    for cell in &result.cells {
        let mut row: Vec<String> = cell.assignment.iter().map(|(_, v)| v.to_string()).collect();
        for metric in Metric::ALL {
            row.extend(stat_values(cell.summary(metric)).iter().map(f64::to_string));
        }
        w.write_record(&row)?;
    }
    Ok(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?)
}

pub fn render_raw(result: &SweepResult) -> Result<Vec<u8>, OutputError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header: Vec<String> = result
        .spec
        .keys()
        .iter()
        .map(|k| k.name().to_owned())
        .collect();
    header.extend(["cell", "replication", "seed"].map(String::from));
    header.extend(Metric::ALL.iter().map(|m| m.name().to_owned()));
    header.extend(RAW_EXTRA_COLUMNS.map(String::from));
    w.write_record(&header)?;

    for cell in &result.cells {
        let seed = cell_seed(result.spec.base_seed, cell.index);
        for (rep, run) in cell.runs.iter().enumerate() {
            let mut row: Vec<String> = cell.assignment.iter().map(|(_, v)| v.to_string()).collect();
            row.push(cell.index.to_string());
            row.push(rep.to_string());
            row.push(seed.to_string());
            row.extend(Metric::ALL.iter().map(|m| m.value(run).to_string()));
            row.push(run.preemption_cost.to_string());
            row.push(run.removed_servers.to_string());
            row.push(run.misdiagnoses.to_string());
            row.push(run.standby_swaps.to_string());
            row.push(run.host_selections.to_string());
            row.push(run.compute_segments.to_string());
            row.push(run.hazard_exposure.to_string());
            w.write_record(&row)?;
        }
    }
    Ok(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?)
}

fn stage(path: &Path, bytes: &[u8]) -> Result<NamedTempFile, OutputError> {
    let io_err = |source| OutputError::Io {
        path: path.to_owned(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut file = NamedTempFile::new_in(dir).map_err(io_err)?;
    file.write_all(bytes).map_err(io_err)?;
    file.flush().map_err(io_err)?;
    Ok(file)
}

/// Writes the summary CSV to `path` and the raw sidecar next to it.
pub fn write_results(result: &SweepResult, path: &Path) -> Result<(), OutputError> {
    let summary = render_summary(result)?;
    let raw = render_raw(result)?;
    let raw_path = raw_path(path);
    let summary_tmp = stage(path, &summary)?;
    let raw_tmp = stage(&raw_path, &raw)?;
    raw_tmp.persist(&raw_path).map_err(|e| OutputError::Io {
        path: raw_path.clone(),
        source: e.error,
    })?;
    summary_tmp.persist(path).map_err(|e| OutputError::Io {
        path: path.to_owned(),
        source: e.error,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_name() {
        assert_eq!(raw_path(Path::new("out/fig2a.csv")), PathBuf::from("out/fig2a.raw.csv"));
        assert_eq!(raw_path(Path::new("results")), PathBuf::from("results.raw.csv"));
    }
}
