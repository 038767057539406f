//! Trajectory CSV and JSON emission.
//!
//! Numbers are written in Rust's shortest round-trip form, so reading a
//! file back and writing it again reproduces it byte for byte.

use std::fs;
use std::path::Path;

use nash_sir_core::{ModelParams, Trajectory};
use serde::Serialize;

use crate::CliError;

pub const HEADER: [&str; 9] = ["t", "S", "C", "I", "R_C", "R_I", "d_N", "A", "gamma_E"];

/// One CSV row, in [`HEADER`] order.
pub type Row = [f64; 9];

pub fn rows(traj: &Trajectory) -> Vec<Row> {
    traj.samples
        .iter()
        .map(|s| [s.t, s.epi.s, s.epi.c, s.epi.i, s.epi.r_c, s.epi.r_i, s.d_n, s.availability, s.gamma_e])
        .collect()
}

/// Every `stride`-th row, always ending with the last.
pub fn strided(rows: &[Row], stride: usize) -> Vec<Row> {
    let mut out: Vec<Row> = rows.iter().step_by(stride.max(1)).copied().collect();
    if let Some(last) = rows.last() {
        if (rows.len() - 1) % stride.max(1) != 0 {
            out.push(*last);
        }
    }
    out
}

pub fn format_number(x: f64) -> String {
    format!("{x:?}")
}

pub fn trajectory_csv(rows: &[Row]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).map_err(CliError::output)?;
    for r in rows {
        w.write_record(r.iter().map(|x| format_number(*x))).map_err(CliError::output)?;
    }
    w.into_inner().map_err(|e| CliError::output(e.into_error()))
}

/// Parses a trajectory CSV. A wrong header or field count is a format error,
/// as is a bad number or an empty file.
pub fn parse_trajectory_csv(bytes: &[u8]) -> Result<Vec<Row>, CliError> {
    let bad = |m: String| CliError::Format(m);
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = r.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().ne(HEADER) {
        return Err(bad(format!("expected header {}", HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let mut row = [0.0; 9];
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| bad(format!("row {}: `{field}` is not a number", line + 1)))?;
            if !v.is_finite() {
                return Err(bad(format!("row {}: non-finite value", line + 1)));
            }
            row[k] = v;
        }
        out.push(row);
    }
    if out.is_empty() {
        return Err(bad("trajectory has no rows".into()));
    }
    Ok(out)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<Row>, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Format(format!("cannot read {}: {e}", path.display())))?;
    parse_trajectory_csv(&bytes).map_err(|e| match e {
        CliError::Format(m) => CliError::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut v = serde_json::to_vec_pretty(value).map_err(CliError::output)?;
    v.push(b'\n');
    Ok(v)
}

/// Files prepared in memory and written together once everything has been
/// computed, so a failed run leaves no partial output behind.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(CliError::output)?;
            }
            fs::write(&path, bytes).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

/// Summary of a single trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub attack_rate: f64,
    #[serde(rename = "total_gamma_E")]
    pub total_gamma_e: f64,
    #[serde(rename = "peak_I")]
    pub peak_i: f64,
    pub t_peak: f64,
}

impl TrajectorySummary {
    pub fn of(traj: &Trajectory, p: &ModelParams) -> Self {
        let (peak_i, t_peak) = traj.peak_sick();
        Self { attack_rate: traj.attack_rate(), total_gamma_e: traj.total_economic_loss(p), peak_i, t_peak }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_keeps_the_last_row() {
        let rows: Vec<Row> = (0..11).map(|k| [k as f64; 9]).collect();
        let s = strided(&rows, 3);
        assert_eq!(s.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![0.0, 3.0, 6.0, 9.0, 10.0]);
        assert_eq!(strided(&rows, 5).len(), 3);
        assert_eq!(strided(&rows, 1), rows);
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0, 1e-300, 2.0 / 3.0, 12345.678, 5e-7, 0.0] {
            assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn schema_violations() {
        assert!(parse_trajectory_csv(b"t,S\n0,1\n").is_err());
        let header = HEADER.join(",");
        assert!(parse_trajectory_csv(format!("{header}\n").as_bytes()).is_err());
        assert!(parse_trajectory_csv(format!("{header}\n0,1,0,0,0,0,0,1\n").as_bytes()).is_err());
        assert!(parse_trajectory_csv(format!("{header}\n0,1,0,0,0,0,0,1,x\n").as_bytes()).is_err());
        let ok = parse_trajectory_csv(format!("{header}\n0,1,0,0,0,0,0,1,0\n").as_bytes()).unwrap();
        assert_eq!(ok.len(), 1);
    }
}
