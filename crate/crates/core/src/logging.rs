//! Long-form metric curves and their CSV on-disk format.
//!
//! Per-run files have the schema `step,metric,value,seed`; aggregated
//! files (written by the eval stage) use `step,metric,mean,std,n_seeds`.
//! Values are printed with Rust's shortest round-trip float formatting, so
//! identical runs produce byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One logged scalar: a metric value at a training step/iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub step: u64,
    pub metric: String,
    pub value: f64,
}

impl CurvePoint {
    pub fn new(step: u64, metric: impl Into<String>, value: f64) -> Self {
        CurvePoint { step, metric: metric.into(), value }
    }
}

pub fn write_run_curves(path: &Path, seed: u64, points: &[CurvePoint]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "step,metric,value,seed")?;
    for p in points {
        writeln!(w, "{},{},{},{}", p.step, p.metric, p.value, seed)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a per-run curve file, returning its points and the run seed.
pub fn read_run_curves(path: &Path) -> Result<(Vec<CurvePoint>, u64)> {
    let file = File::open(path).map_err(|_| Error::MissingArtifact {
        path: path.display().to_string(),
        hint: "run the producing stage first".into(),
    })?;
    let reader = BufReader::new(file);
    let mut points = Vec::new();
    let mut seed = 0u64;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if idx == 0 {
            if line.trim() != "step,metric,value,seed" {
                return Err(Error::Parse { line: 1, message: format!("unexpected header '{line}'") });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.splitn(4, ',').collect();
        if parts.len() != 4 {
            return Err(Error::Parse { line: idx + 1, message: format!("expected 4 fields, got {}", parts.len()) });
        }
        let step = parts[0].parse::<u64>().map_err(|e| Error::Parse { line: idx + 1, message: e.to_string() })?;
        let value = parts[2].parse::<f64>().map_err(|e| Error::Parse { line: idx + 1, message: e.to_string() })?;
        seed = parts[3].parse::<u64>().map_err(|e| Error::Parse { line: idx + 1, message: e.to_string() })?;
        points.push(CurvePoint { step, metric: parts[1].to_string(), value });
    }
    Ok((points, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        let points = vec![
            CurvePoint::new(0, "disc_loss", 1.3862943611198906),
            CurvePoint::new(1, "disc_loss", 1.25),
            CurvePoint::new(0, "env_return", -200.0),
        ];
        write_run_curves(&path, 7, &points).unwrap();
        let (back, seed) = read_run_curves(&path).unwrap();
        assert_eq!(seed, 7);
        assert_eq!(back, points);
    }

    #[test]
    fn writes_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let points = vec![CurvePoint::new(3, "x", 0.1 + 0.2)];
        write_run_curves(&a, 1, &points).unwrap();
        write_run_curves(&b, 1, &points).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn missing_file_is_actionable() {
        let err = read_run_curves(Path::new("/nonexistent/curves.csv")).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact { .. }));
    }
}
