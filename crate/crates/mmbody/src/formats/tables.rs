//! `targets.csv`, `split.json` and the JSON-lines training log.

use std::path::{Path, PathBuf};

use mmbody_core::rng;
use mmbody_core::targets::{MaskedTargetVector, TARGET_COUNT, TARGET_NAMES};
use mmbody_core::train::EpochRecord;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::fsutil::{read, write_atomic};

/// One row per sample; an empty cell marks a missing label.
pub fn targets_csv(rows: &[MaskedTargetVector]) -> Result<Vec<u8>> {
    let err = |source| Error::Csv { path: PathBuf::from("targets.csv"), source };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(std::iter::once("id").chain(TARGET_NAMES)).map_err(err)?;
    for r in rows {
        let cells = (0..TARGET_COUNT).map(|j| r.get(j).map_or_else(String::new, |v| v.to_string()));
        w.write_record(std::iter::once(r.id.clone()).chain(cells)).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Usage(e.to_string()))
}

pub fn write_targets(path: &Path, rows: &[MaskedTargetVector]) -> Result<()> {
    write_atomic(path, &targets_csv(rows)?)
}

pub fn read_targets(path: &Path) -> Result<Vec<MaskedTargetVector>> {
    let err = |source| Error::Csv { path: path.to_path_buf(), source };
    let bytes = read(path)?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let header: Vec<String> = r.headers().map_err(err)?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("id") {
        return Err(Error::format(path, "first column must be id"));
    }
    // column for each canonical target, if present
    let cols: Vec<Option<usize>> = TARGET_NAMES.iter().map(|n| header.iter().position(|h| h == n)).collect();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(err)?;
        let mut t = MaskedTargetVector { id: rec[0].to_string(), values: [0.0; TARGET_COUNT], mask: [false; TARGET_COUNT] };
        for (j, c) in cols.iter().enumerate() {
            let Some(cell) = c.and_then(|c| rec.get(c)).map(str::trim).filter(|s| !s.is_empty()) else { continue };
            t.values[j] = cell
                .parse()
                .map_err(|_| Error::format(path, format!("{}: bad {} value {cell:?}", t.id, TARGET_NAMES[j])))?;
            t.mask[j] = true;
        }
        out.push(t);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    /// Seeded shuffle then 8/1/1 with at least one validation and test id
    /// when there are three or more samples.
    pub fn make(ids: &[String], seed: u64) -> Self {
        let mut ids = ids.to_vec();
        ids.shuffle(&mut rng::stream(seed, 0x5917));
        let n = ids.len();
        let (mut n_val, mut n_test) = (n / 10, n / 10);
        if n >= 3 {
            n_val = n_val.max(1);
            n_test = n_test.max(1);
        }
        let test = ids.split_off(n - n_test);
        let val = ids.split_off(n - n_test - n_val);
        Self { train: ids, val, test }
    }

    pub fn get(&self, name: &str) -> Option<&[String]> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

/// One training log line.
pub fn log_record(r: &EpochRecord, head_names: &[String]) -> Value {
    let mut m = Map::new();
    m.insert("epoch".into(), json!(r.epoch));
    m.insert("lr_encoder".into(), json!(r.lr_encoder));
    m.insert("lr_heads".into(), json!(r.lr_heads));
    m.insert("w".into(), json!(r.weights));
    for (name, l) in head_names.iter().zip(&r.head_losses) {
        m.insert(format!("loss_{name}"), json!(l));
    }
    m.insert("train_total".into(), json!(r.train_total));
    m.insert("val_total".into(), json!(r.val_total));
    if !r.dwa_neutral.is_empty() {
        let names: Vec<&String> = r.dwa_neutral.iter().map(|&h| &head_names[h]).collect();
        m.insert("dwa_neutral".into(), json!(names));
    }
    Value::Object(m)
}

pub fn log_lines(log: &[EpochRecord], head_names: &[String]) -> String {
    log.iter().map(|r| log_record(r, head_names).to_string() + "\n").collect()
}
