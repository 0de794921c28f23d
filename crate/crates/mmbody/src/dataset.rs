//! Dataset directory layout and the synth → scan → train → eval stages.

use std::path::{Path, PathBuf};

use mmbody_core::meshkit::{sample_surface, SmoothConfig};
use mmbody_core::metrics::{evaluate, Evaluation};
use mmbody_core::procgen::{sample_indexed_body, synthesize, ProcgenRanges, SynthConfig, DEFAULT_SPACING_MM};
use mmbody_core::scan::{simulate_scan_seeded, ScanConfig};
use mmbody_core::targets::MaskedTargetVector;
use mmbody_core::train::{train, Sample, TrainConfig, TrainOutcome};
use mmbody_core::{anthro, par, rng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::checkpoint::{load_checkpoint, save_checkpoint};
use crate::formats::lvol::write_label_volume;
use crate::formats::obj::{read_obj, write_obj};
use crate::formats::ply::{read_ply, write_ply};
use crate::formats::report::{write_report, write_scatter};
use crate::formats::tables::{log_lines, read_targets, write_targets, Split};
use crate::fsutil::{read_json, write_atomic, write_json};

pub const TRAIN_LOG: &str = "train_log.jsonl";

/// `volumes/`, `meshes/`, `scans/`, `targets.csv`, `split.json`.
#[derive(Debug, Clone)]
pub struct DatasetDir {
    pub root: PathBuf,
}

impl DatasetDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn volume(&self, id: &str) -> PathBuf {
        self.root.join("volumes").join(format!("{id}.lvol.json"))
    }

    pub fn mesh(&self, id: &str) -> PathBuf {
        self.root.join("meshes").join(format!("{id}.obj"))
    }

    pub fn scan(&self, id: &str) -> PathBuf {
        self.root.join("scans").join(format!("{id}.ply"))
    }

    pub fn targets(&self) -> PathBuf {
        self.root.join("targets.csv")
    }

    pub fn split(&self) -> PathBuf {
        self.root.join("split.json")
    }

    pub fn read_targets(&self) -> Result<Vec<MaskedTargetVector>> {
        read_targets(&self.targets())
    }

    pub fn read_split(&self) -> Result<Split> {
        read_json(&self.split())
    }

    /// Scans joined with their targets, in `ids` order.
    pub fn load_samples(&self, ids: &[String]) -> Result<Vec<Sample>> {
        let targets = self.read_targets()?;
        ids.par_iter()
            .map(|id| {
                let t = targets
                    .iter()
                    .find(|t| &t.id == id)
                    .ok_or_else(|| Error::format(&self.targets(), format!("no targets for {id}")))?;
                Ok(Sample { id: id.clone(), points: read_ply(&self.scan(id))?.points, targets: t.clone() })
            })
            .collect()
    }
}

pub fn body_id(i: usize) -> String {
    format!("body_{i:04}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthOptions {
    pub count: usize,
    pub seed: u64,
    pub spacing_mm: f64,
    pub ranges: ProcgenRanges,
    pub smooth: SmoothConfig,
    pub keypoints: [f64; 3],
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            count: 200,
            seed: 0,
            spacing_mm: DEFAULT_SPACING_MM,
            ranges: ProcgenRanges::default(),
            smooth: SmoothConfig::default(),
            keypoints: anthro::DEFAULT_KEYPOINTS,
        }
    }
}

/// Generates bodies, writing each volume and mesh as soon as it exists,
/// then `targets.csv` and a seeded `split.json`.
pub fn synth_bodies(dir: &DatasetDir, opts: &SynthOptions) -> Result<Vec<MaskedTargetVector>> {
    opts.ranges.validate()?;
    if opts.count == 0 {
        return Err(mmbody_core::Error::EmptyDataset.into());
    }
    let cfg = SynthConfig { spacing_mm: opts.spacing_mm, keypoints: opts.keypoints, smooth: opts.smooth };
    let rows: Vec<MaskedTargetVector> = (0..opts.count)
        .into_par_iter()
        .map(|i| {
            let id = body_id(i);
            let spec = sample_indexed_body(opts.seed, i as u64, &opts.ranges)?;
            let body = synthesize(&spec, &cfg)?;
            write_label_volume(&dir.volume(&id), &body.volume)?;
            write_obj(&dir.mesh(&id), &body.mesh)?;
            Ok(body.truth.to_targets(id))
        })
        .collect::<Result<_>>()?;
    write_targets(&dir.targets(), &rows)?;
    let ids: Vec<String> = rows.iter().map(|r| r.id.clone()).collect();
    write_json(&dir.split(), &Split::make(&ids, opts.seed))?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanOptions {
    pub scan: ScanConfig,
    /// Oriented points sampled from each mesh before the scan simulation.
    pub surface_samples: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { scan: ScanConfig::default(), surface_samples: mmbody_core::meshkit::DEFAULT_SURFACE_SAMPLES }
    }
}

/// Samples a mesh surface and simulates one scan; `index` selects the
/// random streams.
pub fn scan_mesh(mesh: &mmbody_core::meshkit::TriMesh, opts: &ScanOptions, index: u64) -> Result<mmbody_core::scan::SimulatedScan> {
    let seed = opts.scan.seed;
    let pc = sample_surface(mesh, opts.surface_samples, rng::child_seed(seed, index))?;
    Ok(simulate_scan_seeded(&pc, &opts.scan, seed, index)?)
}

/// One simulated scan per row of `targets.csv`, keyed by row index.
pub fn simulate_scans(dir: &DatasetDir, opts: &ScanOptions) -> Result<usize> {
    opts.scan.validate()?;
    let rows = dir.read_targets()?;
    let results: Vec<Result<()>> = par::map_indexed(rows.len(), |i| {
        let id = &rows[i].id;
        let scan = scan_mesh(&read_obj(&dir.mesh(id))?, opts, i as u64)?;
        write_ply(&dir.scan(id), &scan.cloud)
    });
    results.into_iter().collect::<Result<Vec<()>>>()?;
    Ok(rows.len())
}

/// Trains on the `train` split, selects on `val`, and writes the best
/// checkpoint and the epoch log under `out`.
pub fn train_dataset(dir: &DatasetDir, cfg: &TrainConfig, out: &Path) -> Result<TrainOutcome> {
    let split = dir.read_split()?;
    let train_set = dir.load_samples(&split.train)?;
    let val_set = dir.load_samples(&split.val)?;
    let outcome = train(&train_set, &val_set, cfg)?;
    save_checkpoint(out, &outcome.best)?;
    write_atomic(&out.join(TRAIN_LOG), log_lines(&outcome.log, &outcome.head_names).as_bytes())?;
    write_json(&out.join("train.json"), cfg)?;
    Ok(outcome)
}

/// Evaluates a checkpoint on one split, writing `report` and scatter files
/// next to it.
pub fn eval_dataset(checkpoint: &Path, dir: &DatasetDir, split: &str, report: &Path) -> Result<Evaluation> {
    let ckpt = load_checkpoint(checkpoint)?;
    let s = dir.read_split()?;
    let ids = s.get(split).ok_or_else(|| Error::Usage(format!("unknown split {split:?}")))?;
    let samples = dir.load_samples(ids)?;
    let name = dir.root.file_name().map_or_else(|| "dataset".to_string(), |n| n.to_string_lossy().into_owned());
    let ev = evaluate(&ckpt, &samples, &format!("{name}/{split}"))?;
    write_report(report, &ev.report)?;
    write_scatter(report.parent().unwrap_or(Path::new(".")), &ev.scatter)?;
    Ok(ev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOptions {
    pub synth: SynthOptions,
    pub scan: ScanOptions,
    pub train: TrainConfig,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { synth: SynthOptions::default(), scan: ScanOptions::default(), train: TrainConfig::default() }
    }
}

/// synth → scan → train → eval inside `out`, which becomes the dataset
/// directory; the checkpoint goes to `out/ckpt` and the test report to
/// `out/report/report.json`.
pub fn run_pipeline(out: &Path, opts: &PipelineOptions) -> Result<Evaluation> {
    let dir = DatasetDir::new(out);
    synth_bodies(&dir, &opts.synth)?;
    simulate_scans(&dir, &opts.scan)?;
    let ckpt = out.join("ckpt");
    train_dataset(&dir, &opts.train, &ckpt)?;
    eval_dataset(&ckpt, &dir, "test", &out.join("report").join("report.json"))
}
