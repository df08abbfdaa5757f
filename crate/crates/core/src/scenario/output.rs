//! CSV trajectories and JSON reports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

use super::config::OutputSettings;
use super::run::{RunResult, Trajectory};

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
        }
        _ => Ok(()),
    }
}

/// Writes every `stride`-th row, starting with the first.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, stride: usize) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(&traj.columns).map_err(|e| io_err(path, e))?;
    for row in traj.rows.iter().step_by(stride.max(1)) {
        w.write_record(row.iter().map(|v| format!("{v:e}")))
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// Rows of serializable records as CSV with a header taken from the fields.
pub fn write_rows_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes the files requested in the outputs section and returns their paths.
pub fn emit_outputs(result: &RunResult, outputs: &OutputSettings) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if let Some(p) = &outputs.trajectory_csv {
        write_trajectory_csv(p, &result.trajectory, outputs.stride)?;
        written.push(p.clone());
    }
    if let Some(p) = &outputs.report_json {
        write_json(p, result)?;
        written.push(p.clone());
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_downsamples_exactly() {
        let traj = Trajectory {
            columns: vec!["t_s", "x"],
            rows: (0..5000).map(|k| vec![k as f64, 2.0 * k as f64]).collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/t.csv");
        write_trajectory_csv(&path, &traj, 1000).unwrap();
        let mut r = csv::Reader::from_path(&path).unwrap();
        assert_eq!(r.headers().unwrap(), vec!["t_s", "x"]);
        let t: Vec<f64> = r
            .records()
            .map(|x| x.unwrap()[0].parse().unwrap())
            .collect();
        assert_eq!(t, vec![0.0, 1000.0, 2000.0, 3000.0, 4000.0]);
    }
}
