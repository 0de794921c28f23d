//! Geometric mmWave scanner surrogate.
//!
//! A dense oriented cloud is registered to scanner coordinates, rotated about
//! the vertical axis and jittered, then filtered by how squarely each normal
//! faces the panels, and finally downsampled. Real scans are turned into
//! clouds by taking the depthwise intensity maximum of every lateral column.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::meshkit::OrientedPointCloud;
use crate::rng;
use crate::volgrid::GridGeometry;

/// Scanner simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// Unit normal of the panels (anterior-posterior direction).
    pub panel_axis: Vec3,
    pub rot_sigma_deg: f64,
    pub rot_clip_deg: f64,
    pub jitter_max_mm: f64,
    pub thresh_mean: f64,
    pub thresh_sigma: f64,
    /// `[low, high]` clip for the illumination threshold.
    pub thresh_clip: [f64; 2],
    pub target_points: usize,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            panel_axis: [0.0, 1.0, 0.0],
            rot_sigma_deg: 5.0,
            rot_clip_deg: 10.0,
            jitter_max_mm: 2.0,
            thresh_mean: 0.7,
            thresh_sigma: 0.05,
            thresh_clip: [0.5, 0.9],
            target_points: 100_000,
            seed: 0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.thresh_clip;
        if !(0.0 < lo && lo <= self.thresh_mean && self.thresh_mean <= hi && hi < 1.0) {
            return Err(Error::InvalidInput(format!(
                "threshold clip must satisfy 0 < {lo} <= {} <= {hi} < 1",
                self.thresh_mean
            )));
        }
        if !(self.thresh_sigma >= 0.0 && self.rot_sigma_deg >= 0.0) {
            return Err(Error::InvalidInput("standard deviations must be non-negative".into()));
        }
        if !(self.rot_clip_deg >= 0.0 && self.jitter_max_mm >= 0.0) {
            return Err(Error::InvalidInput("rotation clip and jitter must be non-negative".into()));
        }
        if self.target_points == 0 {
            return Err(Error::InvalidInput("target_points must be at least 1".into()));
        }
        if libm::fabs(geom::norm(self.panel_axis) - 1.0) > 1e-9 {
            return Err(Error::InvalidInput(format!("panel_axis {:?} is not unit length", self.panel_axis)));
        }
        Ok(())
    }
}

/// Rigid translation to scanner coordinates: lateral and anterior-posterior
/// centroid at zero, lowest point on the floor (z = 0).
pub fn register(pc: &OrientedPointCloud) -> Result<OrientedPointCloud> {
    let c = pc.centroid().ok_or(Error::EmptyCloud)?;
    let floor = pc.points.iter().map(|p| p[2]).fold(f64::INFINITY, f64::min);
    let shift = [c[0], c[1], floor];
    let mut out = pc.clone();
    for p in &mut out.points {
        *p = geom::sub(*p, shift);
    }
    Ok(out)
}

/// Rotation angle in degrees: Normal(0, sigma) clipped to ±clip.
pub fn sample_rotation<R: Rng + ?Sized>(cfg: &ScanConfig, rng: &mut R) -> f64 {
    if cfg.rot_sigma_deg == 0.0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, cfg.rot_sigma_deg).expect("sigma validated non-negative");
    normal.sample(rng).clamp(-cfg.rot_clip_deg, cfg.rot_clip_deg)
}

/// Rotates about z by `angle_deg` (points and normals) and adds uniform
/// per-coordinate jitter in `[-jitter_max_mm, jitter_max_mm]`.
pub fn apply_augmentation<R: Rng + ?Sized>(
    pc: &OrientedPointCloud,
    angle_deg: f64,
    jitter_max_mm: f64,
    rng: &mut R,
) -> OrientedPointCloud {
    let mut out = pc.clone();
    if angle_deg != 0.0 {
        let (s, c) = libm::sincos(angle_deg.to_radians());
        for (p, n) in out.points.iter_mut().zip(out.normals.iter_mut()) {
            *p = geom::rotate_z(*p, c, s);
            *n = geom::rotate_z(*n, c, s);
        }
    }
    if jitter_max_mm > 0.0 {
        for p in &mut out.points {
            for c in p.iter_mut() {
                *c += rng.random_range(-jitter_max_mm..=jitter_max_mm);
            }
        }
    }
    out
}

/// Random vertical-axis rotation and positional jitter. Returns the cloud
/// and the realized angle in degrees.
pub fn augment<R: Rng + ?Sized>(pc: &OrientedPointCloud, cfg: &ScanConfig, rng: &mut R) -> (OrientedPointCloud, f64) {
    let angle = sample_rotation(cfg, rng);
    (apply_augmentation(pc, angle, cfg.jitter_max_mm, rng), angle)
}

/// Keeps points whose normal satisfies `(n · panel_axis)² >= tau`. Squaring
/// makes the front and back panels symmetric.
pub fn illumination_filter(pc: &OrientedPointCloud, panel_axis: Vec3, tau: f64) -> OrientedPointCloud {
    let keep: Vec<usize> = pc
        .normals
        .iter()
        .enumerate()
        .filter(|(_, n)| {
            let d = geom::dot(**n, panel_axis);
            d * d >= tau
        })
        .map(|(i, _)| i)
        .collect();
    pc.select(&keep)
}

/// Illumination threshold: Normal(mean, sigma) clipped to the configured range.
pub fn sample_threshold<R: Rng + ?Sized>(cfg: &ScanConfig, rng: &mut R) -> f64 {
    if cfg.thresh_sigma == 0.0 {
        return cfg.thresh_mean;
    }
    let normal = Normal::new(cfg.thresh_mean, cfg.thresh_sigma).expect("sigma validated non-negative");
    normal.sample(rng).clamp(cfg.thresh_clip[0], cfg.thresh_clip[1])
}

/// Uniform subset of `n` points without replacement, kept in input order.
/// Smaller clouds are returned whole.
pub fn downsample<R: Rng + ?Sized>(pc: &OrientedPointCloud, n: usize, rng: &mut R) -> OrientedPointCloud {
    if pc.len() <= n {
        return pc.clone();
    }
    let mut idx = rand::seq::index::sample(rng, pc.len(), n).into_vec();
    idx.sort_unstable();
    pc.select(&idx)
}

/// A simulated scan and the random draws that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedScan {
    pub cloud: OrientedPointCloud,
    pub angle_deg: f64,
    pub tau: f64,
}

/// register → augment → illumination filter → downsample, drawing from `rng`.
pub fn simulate_scan<R: Rng + ?Sized>(
    pc: &OrientedPointCloud,
    cfg: &ScanConfig,
    rng: &mut R,
) -> Result<SimulatedScan> {
    cfg.validate()?;
    let registered = register(pc)?;
    let (augmented, angle_deg) = augment(&registered, cfg, rng);
    let tau = sample_threshold(cfg, rng);
    let visible = illumination_filter(&augmented, cfg.panel_axis, tau);
    let cloud = downsample(&visible, cfg.target_points, rng);
    Ok(SimulatedScan { cloud, angle_deg, tau })
}

/// [`simulate_scan`] on the stream `(seed, scan_id)`, so a batch of scans is
/// reproducible regardless of processing order.
pub fn simulate_scan_seeded(
    pc: &OrientedPointCloud,
    cfg: &ScanConfig,
    seed: u64,
    scan_id: u64,
) -> Result<SimulatedScan> {
    let mut r = rng::stream(seed, scan_id);
    simulate_scan(pc, cfg, &mut r)
}

/// Which panel recorded an intensity volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Panel {
    /// Sits at the low end of the depth axis.
    Front,
    /// Sits at the high end of the depth axis.
    Back,
}

pub const LATERAL_SPACING_MM: f64 = 1.9;
pub const DEPTH_SPACING_MM: f64 = 5.5;

/// Scanner reconstruction volume from one panel.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityVolume {
    pub geometry: GridGeometry,
    /// Axis along which depth is resolved.
    pub depth_axis: usize,
    pub intensities: Vec<f32>,
    pub panel: Panel,
}

impl IntensityVolume {
    pub fn new(geometry: GridGeometry, depth_axis: usize, intensities: Vec<f32>, panel: Panel) -> Result<Self> {
        if depth_axis > 2 {
            return Err(Error::Format(format!("depth axis {depth_axis} not in 0..=2")));
        }
        if intensities.len() != geometry.len() {
            return Err(Error::Format(format!(
                "payload has {} values, dims {:?} need {}",
                intensities.len(),
                geometry.dims,
                geometry.len()
            )));
        }
        if intensities.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite intensity".into()));
        }
        Ok(Self { geometry, depth_axis, intensities, panel })
    }

    /// Unit vector along the depth axis pointing from the panel into the volume.
    pub fn view_direction(&self) -> Vec3 {
        let mut d = [0.0; 3];
        d[self.depth_axis] = match self.panel {
            Panel::Front => 1.0,
            Panel::Back => -1.0,
        };
        d
    }
}

/// One point per lateral column at the depthwise intensity maximum, if it
/// reaches `min_intensity`. Ties go to the voxel nearest the panel. Normals
/// face the recording panel.
pub fn extract_from_intensity(vol: &IntensityVolume, min_intensity: f64) -> OrientedPointCloud {
    let g = &vol.geometry;
    let d = vol.depth_axis;
    let (a, b) = match d {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let depth = g.dims[d];
    let normal = geom::scale(vol.view_direction(), -1.0);
    let mut out = OrientedPointCloud::default();
    for j in 0..g.dims[b] {
        for i in 0..g.dims[a] {
            let mut best: Option<(usize, f32)> = None;
            for step in 0..depth {
                let k = match vol.panel {
                    Panel::Front => step,
                    Panel::Back => depth - 1 - step,
                };
                let mut c = [0usize; 3];
                c[a] = i;
                c[b] = j;
                c[d] = k;
                let v = vol.intensities[g.index(c[0], c[1], c[2])];
                if best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((k, v));
                }
            }
            if let Some((k, v)) = best {
                if f64::from(v) >= min_intensity {
                    let mut c = [0usize; 3];
                    c[a] = i;
                    c[b] = j;
                    c[d] = k;
                    out.points.push(g.position(c[0], c[1], c[2]));
                    out.normals.push(normal);
                }
            }
        }
    }
    out
}
