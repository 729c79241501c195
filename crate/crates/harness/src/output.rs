//! CSV files. Floats are written with the shortest decimal that parses
//! back to the same `f64`, so every file round-trips exactly.

use std::path::Path;

use dcpf_core::metrics::SubproblemTiming;
use dcpf_core::RunRecord;

use crate::error::{config_err, HarnessError, Result};

pub const RUN_COLUMNS: [&str; 5] = ["t", "consensus_err", "tracking_err", "optimality_gap", "fw_gap"];
pub const TIMING_COLUMNS: [&str; 5] = ["kind", "set", "dim", "mean_ns", "median_ns"];
pub const MERGED_COLUMNS: [&str; 8] = [
    "algorithm",
    "iteration",
    "wall_s",
    "t",
    "consensus_err",
    "tracking_err",
    "optimality_gap",
    "fw_gap",
];

/// One row of the timing report.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub kind: String,
    pub set: String,
    pub dim: usize,
    pub timing: SubproblemTiming,
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    csv::Writer::from_path(path).map_err(csv_err(path))
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn check_lengths(rec: &RunRecord) -> Result<()> {
    let n = rec.len();
    let cols = [&rec.consensus_err, &rec.tracking_err, &rec.optimality_gap, &rec.fw_gap];
    if cols.iter().any(|c| c.len() != n) {
        return Err(config_err(format!(
            "record for {} has ragged metric columns",
            rec.algorithm
        )));
    }
    Ok(())
}

pub fn write_run_csv(path: &Path, rec: &RunRecord) -> Result<()> {
    check_lengths(rec)?;
    let mut w = writer(path)?;
    w.write_record(RUN_COLUMNS).map_err(csv_err(path))?;
    for k in 0..rec.len() {
        w.write_record([
            fmt(rec.times[k]),
            fmt(rec.consensus_err[k]),
            fmt(rec.tracking_err[k]),
            fmt(rec.optimality_gap[k]),
            fmt(rec.fw_gap[k]),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| HarnessError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads the metric columns written by [`write_run_csv`].
pub fn read_run_csv(path: &Path) -> Result<RunRecord> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(RUN_COLUMNS) {
        return Err(config_err(format!(
            "{} does not have the run columns {RUN_COLUMNS:?}",
            path.display()
        )));
    }
    let mut rec = RunRecord::default();
    for row in r.records() {
        let row = row.map_err(csv_err(path))?;
        let mut vals = [0.0; 5];
        for (slot, field) in vals.iter_mut().zip(row.iter()) {
            *slot = field.parse().map_err(|_| {
                config_err(format!("{}: {field:?} is not a number", path.display()))
            })?;
        }
        rec.times.push(vals[0]);
        rec.consensus_err.push(vals[1]);
        rec.tracking_err.push(vals[2]);
        rec.optimality_gap.push(vals[3]);
        rec.fw_gap.push(vals[4]);
    }
    Ok(rec)
}

pub fn write_timing_csv(path: &Path, rows: &[TimingRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TIMING_COLUMNS).map_err(csv_err(path))?;
    for row in rows {
        w.write_record([
            row.kind.clone(),
            row.set.clone(),
            row.dim.to_string(),
            fmt(row.timing.mean_ns),
            fmt(row.timing.median_ns),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| HarnessError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// All records in one file, one row per sample, tagged by algorithm.
pub fn write_merged_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(MERGED_COLUMNS).map_err(csv_err(path))?;
    for rec in records {
        check_lengths(rec)?;
        for k in 0..rec.len() {
            w.write_record([
                rec.algorithm.clone(),
                rec.iterations.get(k).map_or(String::new(), u64::to_string),
                rec.wall_s.get(k).map_or(String::new(), |v| fmt(*v)),
                fmt(rec.times[k]),
                fmt(rec.consensus_err[k]),
                fmt(rec.tracking_err[k]),
                fmt(rec.optimality_gap[k]),
                fmt(rec.fw_gap[k]),
            ])
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|source| HarnessError::Write {
        path: path.to_path_buf(),
        source,
    })
}
