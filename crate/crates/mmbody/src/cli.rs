//! Command line adapters. Each subcommand reads its inputs, calls one
//! library operation and writes and re-reads its outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use mmbody_core::anthro::{measure_circumferences, measure_height};
use mmbody_core::meshkit::{SmoothConfig, DEFAULT_SURFACE_SAMPLES};
use mmbody_core::procgen::ProcgenRanges;
use mmbody_core::scan::{extract_from_intensity, simulate_scan_seeded, ScanConfig};
use mmbody_core::surface::{extract_surface, BODY_ISO};
use mmbody_core::train::TrainConfig;
use mmbody_core::volgrid::{background_volume, tissue_volumes};
use serde_json::{json, Value};

use crate::dataset::{
    eval_dataset, run_pipeline, scan_mesh, synth_bodies, train_dataset, DatasetDir, PipelineOptions,
    ScanOptions, SynthOptions,
};
use crate::error::{Error, Result};
use crate::formats::lvol::{read_intensity_volume, read_label_volume};
use crate::formats::obj::{read_obj, write_obj};
use crate::formats::ply::{read_ply, write_ply};
use crate::formats::report::read_report;
use crate::fsutil::{read_json, write_json};

#[derive(Debug, Parser)]
#[command(name = "mmbody", version, about = "Synthetic mmWave body scans and multi-task body composition regression")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate procedural bodies: label volumes, meshes, targets.csv, split.json.
    SynthBodies(SynthArgs),
    /// Extract the smoothed body surface of a label volume.
    ExtractSurface(ExtractSurfaceArgs),
    /// Per-class tissue volumes of a label volume, in liters.
    TissueVolumes(TissueArgs),
    /// Height and chest, waist and hip circumferences of a mesh.
    Measure(MeasureArgs),
    /// Simulate a scan of a mesh or an oriented point cloud.
    SimulateScan(SimulateScanArgs),
    /// Extract an oriented point cloud from a scanner intensity volume.
    ExtractReal(ExtractRealArgs),
    /// Train the multi-head model on a dataset directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of a dataset directory.
    Eval(EvalArgs),
    /// synth-bodies, scans, train and eval in one directory.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[arg(long, default_value_t = 0.5)]
    pub smooth_lambda: f64,
    #[arg(long, default_value_t = 10)]
    pub smooth_iters: usize,
}

impl SmoothArgs {
    fn config(&self) -> SmoothConfig {
        SmoothConfig { lambda: self.smooth_lambda, iterations: self.smooth_iters }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2.0)]
    pub spacing_mm: f64,
    /// procgen.json parameter ranges (defaults when omitted).
    #[arg(long)]
    pub ranges: Option<PathBuf>,
    #[command(flatten)]
    pub smooth: SmoothArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractSurfaceArgs {
    /// Label volume header (.lvol.json).
    #[arg(long)]
    pub volume: PathBuf,
    #[arg(long, default_value_t = BODY_ISO)]
    pub iso: f64,
    #[command(flatten)]
    pub smooth: SmoothArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TissueArgs {
    #[arg(long)]
    pub volume: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_keypoints(s: &str) -> std::result::Result<[f64; 3], String> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<std::result::Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|_| "expected three comma-separated fractions".to_string())
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Chest, waist and hip heights as fractions of body height.
    #[arg(long, value_parser = parse_keypoints, default_value = "0.72,0.62,0.53")]
    pub keypoints: [f64; 3],
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["mesh", "cloud"])))]
pub struct SimulateScanArgs {
    /// OBJ mesh; the surface is sampled first.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Oriented point cloud (PLY).
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    /// scan.json (defaults when omitted).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Points sampled from a mesh input.
    #[arg(long, default_value_t = DEFAULT_SURFACE_SAMPLES)]
    pub surface_samples: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractRealArgs {
    /// Intensity volume header (.lvol.json with dtype f32 and a panel).
    #[arg(long)]
    pub intensity: PathBuf,
    #[arg(long)]
    pub min_intensity: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// train.json (defaults when omitted).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub ranges: Option<PathBuf>,
    #[arg(long)]
    pub scan: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2.0)]
    pub spacing_mm: f64,
    #[arg(long, default_value_t = DEFAULT_SURFACE_SAMPLES)]
    pub surface_samples: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn load_or_default<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    path.as_deref().map_or_else(|| Ok(T::default()), read_json)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

pub fn run(cmd: &Command) -> Result<Value> {
    match cmd {
        Command::SynthBodies(a) => {
            let opts = SynthOptions {
                count: a.count,
                seed: a.seed,
                spacing_mm: a.spacing_mm,
                ranges: load_or_default::<ProcgenRanges>(&a.ranges)?,
                smooth: a.smooth.config(),
                ..SynthOptions::default()
            };
            let dir = DatasetDir::new(&a.out);
            let rows = synth_bodies(&dir, &opts)?;
            if dir.read_targets()?.len() != rows.len() {
                return Err(Error::format(&dir.targets(), "row count mismatch after write"));
            }
            Ok(json!({"bodies": rows.len(), "out": path_str(&a.out)}))
        }
        Command::ExtractSurface(a) => {
            let v = read_label_volume(&a.volume)?;
            let mesh = extract_surface(&v, a.iso, a.smooth.config())?;
            write_obj(&a.out, &mesh)?;
            let back = read_obj(&a.out)?;
            Ok(json!({"vertices": back.vertices().len(), "triangles": back.triangles().len(), "out": path_str(&a.out)}))
        }
        Command::TissueVolumes(a) => {
            let v = read_label_volume(&a.volume)?;
            let mut vols: BTreeMap<String, f64> = tissue_volumes(&v);
            vols.insert("background".into(), background_volume(&v));
            write_json(&a.out, &vols)?;
            let _: BTreeMap<String, f64> = read_json(&a.out)?;
            Ok(json!({"classes": vols.len(), "out": path_str(&a.out)}))
        }
        Command::Measure(a) => {
            let mesh = read_obj(&a.mesh)?;
            let height_cm = measure_height(&mesh)?;
            let c = measure_circumferences(&mesh, a.keypoints)?;
            let out = json!({"height_cm": height_cm, "chest_cm": c.chest_cm, "waist_cm": c.waist_cm, "hip_cm": c.hip_cm});
            write_json(&a.out, &out)?;
            let _: Value = read_json(&a.out)?;
            Ok(out)
        }
        Command::SimulateScan(a) => {
            let mut scan: ScanConfig = load_or_default(&a.config)?;
            if let Some(s) = a.seed {
                scan.seed = s;
            }
            let result = match (&a.mesh, &a.cloud) {
                (Some(m), _) => scan_mesh(&read_obj(m)?, &ScanOptions { scan, surface_samples: a.surface_samples }, 0)?,
                (_, Some(c)) => simulate_scan_seeded(&read_ply(c)?, &scan, scan.seed, 0)?,
                _ => return Err(Error::Usage("one of --mesh or --cloud is required".into())),
            };
            write_ply(&a.out, &result.cloud)?;
            let n = read_ply(&a.out)?.len();
            Ok(json!({"points": n, "angle_deg": result.angle_deg, "tau": result.tau, "out": path_str(&a.out)}))
        }
        Command::ExtractReal(a) => {
            let vol = read_intensity_volume(&a.intensity)?;
            let pc = extract_from_intensity(&vol, a.min_intensity);
            write_ply(&a.out, &pc)?;
            Ok(json!({"points": read_ply(&a.out)?.len(), "out": path_str(&a.out)}))
        }
        Command::Train(a) => {
            let cfg: TrainConfig = load_or_default(&a.config)?;
            let out = train_dataset(&DatasetDir::new(&a.data), &cfg, &a.out)?;
            crate::formats::checkpoint::load_checkpoint(&a.out)?;
            Ok(json!({"best_epoch": out.best.epoch, "epochs": out.log.len(), "out": path_str(&a.out)}))
        }
        Command::Eval(a) => {
            let ev = eval_dataset(&a.checkpoint, &DatasetDir::new(&a.data), &a.split, &a.out)?;
            read_report(&a.out)?;
            Ok(json!({"targets": ev.report.per_target.len(), "out": path_str(&a.out)}))
        }
        Command::Pipeline(a) => {
            let opts = PipelineOptions {
                synth: SynthOptions {
                    count: a.count,
                    seed: a.seed,
                    spacing_mm: a.spacing_mm,
                    ranges: load_or_default(&a.ranges)?,
                    ..SynthOptions::default()
                },
                scan: ScanOptions { scan: load_or_default(&a.scan)?, surface_samples: a.surface_samples },
                train: load_or_default(&a.train)?,
            };
            let ev = run_pipeline(&a.out, &opts)?;
            let report = a.out.join("report").join("report.json");
            read_report(&report)?;
            Ok(json!({"report": path_str(&report), "targets": ev.report.per_target.len()}))
        }
    }
}

pub fn error_json(e: &Error) -> Value {
    json!({"error": {"kind": e.kind(), "message": e.to_string()}})
}

/// Parses arguments, runs, and returns the process exit code. Successful
/// runs print a JSON summary on stdout; failures print a JSON error on
/// stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let msg = e.render().to_string();
            eprintln!("{}", json!({"error": {"kind": "usage", "message": msg.trim()}}));
            return 2;
        }
    };
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("{}", error_json(&Error::Usage(e.to_string())));
            return 2;
        }
    }
    match run(&cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            1
        }
    }
}

