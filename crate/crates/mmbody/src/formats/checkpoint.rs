//! Checkpoint directory: `checkpoint.json` manifest plus a raw
//! little-endian f64 parameter blob at manifest-declared offsets.

use std::path::Path;

use mmbody_core::loss::Normalizer;
use mmbody_core::nn::{Model, ModelConfig, INPUT_SCALE_MM};
use mmbody_core::targets::{TARGET_NAMES, TARGET_UNITS};
use mmbody_core::train::Checkpoint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{read, read_json, write_atomic, write_json};

pub const MANIFEST: &str = "checkpoint.json";
pub const BLOB: &str = "params.f64";
const FORMAT: &str = "mmbody-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    /// Per-sample centroid is subtracted before scaling.
    pub center: String,
    pub scale_mm: f64,
    pub channels: Vec<String>,
    pub points_per_sample: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockEntry {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub model: ModelConfig,
    pub targets: Vec<String>,
    pub units: Vec<String>,
    pub normalizer: Normalizer,
    pub input: InputSpec,
    pub seed: u64,
    pub epoch: usize,
    pub blob: String,
    pub param_count: usize,
    pub blocks: Vec<BlockEntry>,
}

fn manifest_for(c: &Checkpoint) -> Result<Manifest> {
    let model = Model::new(&c.model, 0)?;
    Ok(Manifest {
        format: FORMAT.into(),
        model: c.model.clone(),
        targets: TARGET_NAMES.iter().map(|s| s.to_string()).collect(),
        units: TARGET_UNITS.iter().map(|s| s.to_string()).collect(),
        normalizer: c.normalizer.clone(),
        input: InputSpec {
            center: "centroid".into(),
            scale_mm: INPUT_SCALE_MM,
            channels: ["x", "y", "z", "x", "y", "z"].map(String::from).to_vec(),
            points_per_sample: c.points_per_sample,
        },
        seed: c.seed,
        epoch: c.epoch,
        blob: BLOB.into(),
        param_count: c.params.len(),
        blocks: model.blocks().into_iter().map(|b| BlockEntry { name: b.name, offset: b.offset, len: b.len }).collect(),
    })
}

pub fn save_checkpoint(dir: &Path, c: &Checkpoint) -> Result<()> {
    let m = manifest_for(c)?;
    if m.param_count != m.blocks.iter().map(|b| b.len).sum::<usize>() {
        return Err(Error::format(dir, "parameter count does not match architecture"));
    }
    let blob: Vec<u8> = c.params.iter().flat_map(|v| v.to_le_bytes()).collect();
    write_atomic(&dir.join(BLOB), &blob)?;
    write_json(&dir.join(MANIFEST), &m)
}

/// Accepts the checkpoint directory or its manifest file.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let manifest_path = if path.is_dir() { path.join(MANIFEST) } else { path.to_path_buf() };
    if !manifest_path.is_file() {
        return Err(Error::CheckpointNotFound(path.to_path_buf()));
    }
    let m: Manifest = read_json(&manifest_path)?;
    if m.format != FORMAT {
        return Err(Error::format(&manifest_path, format!("unsupported format {:?}", m.format)));
    }
    if m.targets != TARGET_NAMES {
        return Err(Error::format(&manifest_path, "target ordering differs from this build"));
    }
    if m.input.scale_mm != INPUT_SCALE_MM || m.input.center != "centroid" {
        return Err(Error::format(&manifest_path, "unsupported input normalization"));
    }
    let expected = Model::new(&m.model, 0)?.blocks();
    let same_layout = expected.len() == m.blocks.len()
        && expected.iter().zip(&m.blocks).all(|(a, b)| a.name == b.name && a.offset == b.offset && a.len == b.len);
    if !same_layout {
        return Err(Error::format(&manifest_path, "parameter blocks do not match the declared architecture"));
    }
    let blob_path = manifest_path.with_file_name(&m.blob);
    let bytes = read(&blob_path)?;
    if bytes.len() != m.param_count * 8 {
        return Err(Error::format(&blob_path, format!("expected {} parameters, found {} bytes", m.param_count, bytes.len())));
    }
    let params = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Checkpoint {
        model: m.model,
        params,
        normalizer: m.normalizer,
        seed: m.seed,
        points_per_sample: m.input.points_per_sample,
        epoch: m.epoch,
    })
}
