//! `report.json` and per-target `scatter_<target>.csv` files.

use std::path::{Path, PathBuf};

use mmbody_core::metrics::{Report, Scatter};
use mmbody_core::targets::TARGET_NAMES;

use crate::error::{Error, Result};
use crate::fsutil::{read_json, write_atomic, write_json};

/// Structural checks beyond what deserialization enforces.
pub fn validate_report(path: &Path, r: &Report) -> Result<()> {
    for t in &r.per_target {
        if !TARGET_NAMES.contains(&t.name.as_str()) {
            return Err(Error::format(path, format!("unknown target {:?}", t.name)));
        }
        if t.n == 0 || !(t.mae >= 0.0) || !(t.std >= 0.0) {
            return Err(Error::format(path, format!("invalid statistics for {}", t.name)));
        }
        if t.pearson.is_some_and(|p| !(-1.0..=1.0).contains(&p)) {
            return Err(Error::format(path, format!("pearson out of range for {}", t.name)));
        }
    }
    Ok(())
}

pub fn write_report(path: &Path, r: &Report) -> Result<()> {
    validate_report(path, r)?;
    write_json(path, r)
}

pub fn read_report(path: &Path) -> Result<Report> {
    let r: Report = read_json(path)?;
    validate_report(path, &r)?;
    Ok(r)
}

pub fn scatter_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("scatter_{name}.csv"))
}

pub fn scatter_csv(s: &Scatter) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |source| Error::Csv { path: PathBuf::from(format!("scatter_{}.csv", s.name)), source };
    w.write_record(["target", "prediction"]).map_err(err)?;
    for (t, p) in &s.pairs {
        w.write_record([t.to_string(), p.to_string()]).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Usage(e.to_string()))
}

pub fn write_scatter(dir: &Path, scatter: &[Scatter]) -> Result<Vec<PathBuf>> {
    scatter
        .iter()
        .map(|s| {
            let p = scatter_path(dir, &s.name);
            write_atomic(&p, &scatter_csv(s)?)?;
            Ok(p)
        })
        .collect()
}

pub fn read_scatter(path: &Path) -> Result<Vec<(f64, f64)>> {
    let err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    r.deserialize::<(f64, f64)>().map(|row| row.map_err(err)).collect()
}
