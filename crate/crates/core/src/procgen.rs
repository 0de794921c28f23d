//! Procedural A-pose bodies built from superellipsoid segments with nested
//! tissue shells, rasterized to label volumes with exact per-voxel
//! containment tests.
//!
//! Coordinates are millimeters with z up and the sole of the feet at z = 0;
//! x is lateral and y anterior-posterior.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anthro::{self, DEFAULT_KEYPOINTS};
use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::meshkit::{SmoothConfig, TriMesh};
use crate::surface::{extract_surface, BODY_ISO};
use crate::targets::{MaskedTargetVector, TARGET_COUNT};
use crate::volgrid::{class, tissue_volumes, GridGeometry, LabelVolume};
use crate::{par, rng};

/// Label ids written by [`rasterize`].
pub mod label {
    pub const SAT: u8 = 1;
    pub const VAT: u8 = 2;
    pub const MUSCLE: u8 = 3;
    pub const LEAN: u8 = 4;
}

pub const DEFAULT_SPACING_MM: f64 = 2.0;

const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartKind {
    Head,
    Torso,
    Pelvis,
    Arm,
    Leg,
}

impl PartKind {
    /// Tissue filling the region inside the shells.
    fn core_label(self) -> u8 {
        match self {
            PartKind::Arm | PartKind::Leg => label::MUSCLE,
            _ => label::LEAN,
        }
    }

    fn has_muscle_shell(self) -> bool {
        self != PartKind::Head
    }
}

/// `x^p` for `x >= 0`, with multiply/sqrt paths for the quarter-integer
/// exponents the layout uses.
fn pow_fast(x: f64, p: f64) -> f64 {
    match p {
        1.0 => x,
        1.25 => x * libm::sqrt(libm::sqrt(x)),
        1.5 => x * libm::sqrt(x),
        2.0 => x * x,
        2.5 => x * x * libm::sqrt(x),
        3.0 => x * x * x,
        4.0 => (x * x) * (x * x),
        _ => libm::pow(x, p),
    }
}

/// Superellipsoid `(|x/a|^e + |y/b|^e)^(q/e) + |z/c|^q <= 1` in a frame
/// tilted about the anterior-posterior (y) axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyPart {
    pub kind: PartKind,
    pub center: Vec3,
    /// Outer (skin) semi-axes in mm.
    pub semi_axes: Vec3,
    /// Horizontal and vertical exponents `[e, q]`.
    pub exponents: [f64; 2],
    /// Rotation about +y in degrees.
    pub tilt_deg: f64,
}

impl BodyPart {
    fn to_local(&self, p: Vec3) -> Vec3 {
        let d = geom::sub(p, self.center);
        let (s, c) = libm::sincos(-self.tilt_deg.to_radians());
        [c * d[0] + s * d[2], d[1], -s * d[0] + c * d[2]]
    }

    fn to_world(&self, l: Vec3) -> Vec3 {
        let (s, c) = libm::sincos(self.tilt_deg.to_radians());
        geom::add(self.center, [c * l[0] + s * l[2], l[1], -s * l[0] + c * l[2]])
    }

    /// Shape function in local coordinates with semi-axes shrunk by `inset`.
    fn level(&self, local: Vec3, inset: f64) -> f64 {
        let [a, b, c] = self.semi_axes.map(|s| s - inset);
        let [e, q] = self.exponents;
        let xy = pow_fast(libm::fabs(local[0] / a), e) + pow_fast(libm::fabs(local[1] / b), e);
        pow_fast(xy, q / e) + pow_fast(libm::fabs(local[2] / c), q)
    }

    pub fn contains(&self, p: Vec3, inset: f64) -> bool {
        self.level(self.to_local(p), inset) <= 1.0
    }

    /// Axis-aligned bounds of the tilted bounding box.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for k in 0..8 {
            let corner = [0, 1, 2].map(|a| if k >> a & 1 == 1 { self.semi_axes[a] } else { -self.semi_axes[a] });
            let w = self.to_world(corner);
            for a in 0..3 {
                lo[a] = lo[a].min(w[a]);
                hi[a] = hi[a].max(w[a]);
            }
        }
        (lo, hi)
    }
}

/// Axis-aligned ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: Vec3,
    pub semi_axes: Vec3,
}

impl Ellipsoid {
    pub fn contains(&self, p: Vec3) -> bool {
        let d = geom::sub(p, self.center);
        (0..3).map(|a| (d[a] / self.semi_axes[a]) * (d[a] / self.semi_axes[a])).sum::<f64>() <= 1.0
    }
}

/// A procedural body. Parts carry outer semi-axes; the SAT shell and the
/// muscle shell are insets of each part's surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    pub seed: u64,
    pub height_mm: f64,
    pub parts: Vec<BodyPart>,
    pub sat_mm: f64,
    pub muscle_mm: f64,
    pub vat: Option<Ellipsoid>,
    pub abduction_deg: f64,
}

/// Uniform sampling ranges, `[low, high]` each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcgenRanges {
    pub height_mm: [f64; 2],
    pub width_scale: [f64; 2],
    pub sat_mm: [f64; 2],
    pub muscle_mm: [f64; 2],
    pub vat_scale: [f64; 2],
    pub abduction_deg: [f64; 2],
    /// Share of the visceral-fat draw that follows the SAT draw (0 = independent).
    pub fat_coupling: f64,
}

impl Default for ProcgenRanges {
    fn default() -> Self {
        Self {
            height_mm: [1500.0, 1950.0],
            width_scale: [0.9, 1.1],
            sat_mm: [4.0, 35.0],
            muscle_mm: [6.0, 18.0],
            vat_scale: [0.0, 1.0],
            abduction_deg: [35.0, 50.0],
            fat_coupling: 0.7,
        }
    }
}

impl ProcgenRanges {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("height_mm", self.height_mm),
            ("width_scale", self.width_scale),
            ("sat_mm", self.sat_mm),
            ("muscle_mm", self.muscle_mm),
            ("vat_scale", self.vat_scale),
            ("abduction_deg", self.abduction_deg),
        ];
        for (name, [lo, hi]) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidInput(format!("range {name} = [{lo}, {hi}] is degenerate")));
            }
        }
        if self.height_mm[0] <= 0.0 || self.width_scale[0] <= 0.0 || self.sat_mm[0] < 0.0 || self.muscle_mm[0] < 0.0 {
            return Err(Error::InvalidInput("sizes must be positive".to_string()));
        }
        if !(0.0..=1.0).contains(&self.fat_coupling) {
            return Err(Error::InvalidInput("fat_coupling must lie in [0, 1]".to_string()));
        }
        Ok(())
    }
}

/// Scalar body parameters from which a [`BodySpec`] is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    pub height_mm: f64,
    pub width_scale: f64,
    pub sat_mm: f64,
    pub muscle_mm: f64,
    /// Visceral fat amount in [0, 1].
    pub vat_scale: f64,
    pub abduction_deg: f64,
}

impl BodySpec {
    /// Lays out head, torso, pelvis, two arms and two legs proportionally to
    /// height. Fat thickens every segment and visceral fat widens the belly.
    pub fn from_params(seed: u64, p: &BodyParams) -> Self {
        let h = p.height_mm;
        let w = p.width_scale;
        let s = p.sat_mm;
        let belly = 0.025 * h * p.vat_scale;
        let torso_a = 0.095 * h * w;
        let head_c = 0.065 * h;
        let mut parts = vec![
            BodyPart {
                kind: PartKind::Torso,
                center: [0.0, 0.0, 0.70 * h],
                semi_axes: [torso_a + s, 0.062 * h * w + belly + s, 0.18 * h],
                exponents: [2.0, 4.0],
                tilt_deg: 0.0,
            },
            BodyPart {
                kind: PartKind::Pelvis,
                center: [0.0, 0.0, 0.52 * h],
                semi_axes: [0.10 * h * w + s, 0.065 * h * w + 0.6 * belly + s, 0.08 * h],
                exponents: [2.0, 3.0],
                tilt_deg: 0.0,
            },
            BodyPart {
                kind: PartKind::Head,
                center: [0.0, 0.0, h - head_c],
                semi_axes: [0.055 * h, 0.062 * h, head_c],
                exponents: [2.0, 2.0],
                tilt_deg: 0.0,
            },
        ];
        let arm_c = 0.20 * h;
        let arm_r = 0.028 * h * w + s;
        for side in [1.0, -1.0] {
            let shoulder = [side * (torso_a + 0.5 * s), 0.0, 0.85 * h];
            let theta = p.abduction_deg.to_radians();
            let reach = 0.9 * arm_c;
            parts.push(BodyPart {
                kind: PartKind::Arm,
                center: [shoulder[0] + side * reach * libm::sin(theta), 0.0, shoulder[2] - reach * libm::cos(theta)],
                semi_axes: [arm_r, arm_r, arm_c],
                exponents: [2.0, 2.5],
                tilt_deg: -side * p.abduction_deg,
            });
        }
        let leg_c = 0.26 * h;
        for side in [1.0, -1.0] {
            parts.push(BodyPart {
                kind: PartKind::Leg,
                center: [side * 0.058 * h * w, 0.0, leg_c],
                semi_axes: [0.05 * h * w + s, 0.055 * h * w + s, leg_c],
                exponents: [2.0, 2.5],
                tilt_deg: 0.0,
            });
        }
        let v = 0.3 + 0.7 * p.vat_scale;
        let vat = Ellipsoid {
            center: [0.0, 0.0, 0.64 * h],
            semi_axes: [0.06 * h * w * v, 0.035 * h * w * v + 0.6 * belly, 0.06 * h * v],
        };
        Self {
            seed,
            height_mm: h,
            parts,
            sat_mm: s,
            muscle_mm: p.muscle_mm,
            vat: Some(vat),
            abduction_deg: p.abduction_deg,
        }
    }

    /// Lowest and highest z over all parts.
    pub fn vertical_extent(&self) -> (f64, f64) {
        self.parts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), part| {
            let (plo, phi) = if part.tilt_deg == 0.0 {
                (part.center[2] - part.semi_axes[2], part.center[2] + part.semi_axes[2])
            } else {
                let (l, h) = part.bounds();
                (l[2], h[2])
            };
            (lo.min(plo), hi.max(phi))
        })
    }

    /// Checks shell nesting, visceral blob containment and the height.
    pub fn validate(&self) -> Result<()> {
        if self.parts.is_empty() {
            return Err(Error::InvalidInput("body has no parts".to_string()));
        }
        if !(self.sat_mm >= 0.0 && self.muscle_mm >= 0.0) {
            return Err(Error::InvalidInput("shell thicknesses must be non-negative".to_string()));
        }
        for (i, part) in self.parts.iter().enumerate() {
            if part.exponents.iter().any(|e| !(*e >= 1.0)) {
                return Err(Error::InvalidInput(format!("part {i}: exponents must be >= 1")));
            }
            let shells = self.sat_mm + if part.kind.has_muscle_shell() { self.muscle_mm } else { 0.0 };
            let min_axis = part.semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(min_axis > shells) {
                return Err(Error::InvalidInput(format!(
                    "part {i} ({:?}): shells of {shells} mm do not nest inside semi-axis {min_axis} mm",
                    part.kind
                )));
            }
        }
        if let Some(vat) = &self.vat {
            if vat.semi_axes.iter().any(|a| !(*a > 0.0)) {
                return Err(Error::InvalidInput("VAT semi-axes must be positive".to_string()));
            }
            let torso = self
                .parts
                .iter()
                .find(|p| p.kind == PartKind::Torso)
                .ok_or_else(|| Error::InvalidInput("VAT blob needs a torso".to_string()))?;
            let inset = self.sat_mm + self.muscle_mm;
            if !fibonacci_directions(256).all(|d| {
                let p = geom::add(vat.center, [0, 1, 2].map(|a| d[a] * vat.semi_axes[a]));
                torso.level(torso.to_local(p), inset) < 1.0
            }) {
                return Err(Error::InvalidInput("VAT blob leaves the torso interior".to_string()));
            }
        }
        let (lo, hi) = self.vertical_extent();
        if libm::fabs((hi - lo) - self.height_mm) > 1e-6 * self.height_mm.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "height {} mm disagrees with part extent {} mm",
                self.height_mm,
                hi - lo
            )));
        }
        Ok(())
    }

    /// Label of the innermost region containing `p`.
    pub fn label_at(&self, p: Vec3) -> u8 {
        if let Some(vat) = &self.vat {
            if vat.contains(p) {
                return label::VAT;
            }
        }
        let mut best = (0u8, 0u8);
        for part in &self.parts {
            let (rank, l) = self.part_label(part, part.to_local(p));
            if rank > best.0 {
                best = (rank, l);
            }
        }
        best.1
    }

    /// (depth rank, label) of a local point within one part.
    fn part_label(&self, part: &BodyPart, local: Vec3) -> (u8, u8) {
        if part.level(local, 0.0) > 1.0 {
            return (0, 0);
        }
        if part.level(local, self.sat_mm) > 1.0 {
            return (1, label::SAT);
        }
        if part.kind.has_muscle_shell() && part.level(local, self.sat_mm + self.muscle_mm) > 1.0 {
            return (2, label::MUSCLE);
        }
        (3, part.kind.core_label())
    }
}

fn fibonacci_directions(n: usize) -> impl Iterator<Item = Vec3> {
    let golden = core::f64::consts::PI * (3.0 - libm::sqrt(5.0));
    (0..n).map(move |i| {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = libm::sqrt(1.0 - z * z);
        let (s, c) = libm::sincos(golden * i as f64);
        [r * c, r * s, z]
    })
}

fn lerp(range: [f64; 2], u: f64) -> f64 {
    range[0] + u * (range[1] - range[0])
}

/// Draws body parameters uniformly from `ranges` and lays out a body,
/// resampling until the result validates.
pub fn sample_body<R: Rng + ?Sized>(rng: &mut R, ranges: &ProcgenRanges) -> Result<BodySpec> {
    ranges.validate()?;
    for _ in 0..MAX_ATTEMPTS {
        let seed: u64 = rng.random();
        let fat: f64 = rng.random();
        let visceral = ranges.fat_coupling * fat + (1.0 - ranges.fat_coupling) * rng.random::<f64>();
        let params = BodyParams {
            height_mm: lerp(ranges.height_mm, rng.random()),
            width_scale: lerp(ranges.width_scale, rng.random()),
            sat_mm: lerp(ranges.sat_mm, fat),
            muscle_mm: lerp(ranges.muscle_mm, rng.random()),
            vat_scale: lerp(ranges.vat_scale, visceral),
            abduction_deg: lerp(ranges.abduction_deg, rng.random()),
        };
        let spec = BodySpec::from_params(seed, &params);
        if spec.validate().is_ok() {
            return Ok(spec);
        }
    }
    Err(Error::RetryBudgetExhausted { attempts: MAX_ATTEMPTS })
}

/// Body `index` of a batch seeded with `seed`.
pub fn sample_indexed_body(seed: u64, index: u64, ranges: &ProcgenRanges) -> Result<BodySpec> {
    let mut r = rng::stream(rng::child_seed(seed, index), 0);
    sample_body(&mut r, ranges)
}

pub fn legend() -> BTreeMap<u8, String> {
    [
        (label::SAT, class::SAT),
        (label::VAT, class::VAT),
        (label::MUSCLE, class::MUSCLE),
        (label::LEAN, class::LEAN),
    ]
    .into_iter()
    .map(|(id, n)| (id, n.to_string()))
    .collect()
}

/// Labels every voxel center of a grid covering the body with a two-voxel
/// background margin. Slices along z are computed independently.
pub fn rasterize(spec: &BodySpec, spacing_mm: f64) -> Result<LabelVolume> {
    if !(spacing_mm > 0.0 && spacing_mm.is_finite()) {
        return Err(Error::InvalidInput(format!("spacing {spacing_mm} must be positive")));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for part in &spec.parts {
        let (l, h) = part.bounds();
        for a in 0..3 {
            lo[a] = lo[a].min(l[a]);
            hi[a] = hi[a].max(h[a]);
        }
    }
    let origin = lo.map(|l| (libm::floor(l / spacing_mm) - 2.0) * spacing_mm);
    let mut dims = [0usize; 3];
    for a in 0..3 {
        dims[a] = (libm::ceil((hi[a] - origin[a]) / spacing_mm) + 3.0) as usize;
    }
    let geometry = GridGeometry::new(dims, [spacing_mm; 3], origin, 2)?;
    let part_ranges: Vec<[[usize; 2]; 3]> = spec
        .parts
        .iter()
        .map(|part| {
            let (l, h) = part.bounds();
            [0, 1, 2].map(|a| {
                let first = libm::ceil((l[a] - origin[a]) / spacing_mm).max(0.0) as usize;
                let last = (libm::floor((h[a] - origin[a]) / spacing_mm) as usize).min(dims[a] - 1);
                [first, last + 1]
            })
        })
        .collect();
    let slices = par::map_indexed(dims[2], |z| {
        let mut rank = vec![0u8; dims[0] * dims[1]];
        let mut labels = vec![0u8; dims[0] * dims[1]];
        for (part, r) in spec.parts.iter().zip(&part_ranges) {
            if !(r[2][0]..r[2][1]).contains(&z) {
                continue;
            }
            for y in r[1][0]..r[1][1] {
                for x in r[0][0]..r[0][1] {
                    let p = geometry.position(x, y, z);
                    let (rk, l) = spec.part_label(part, part.to_local(p));
                    let k = x + dims[0] * y;
                    if rk > rank[k] {
                        rank[k] = rk;
                        labels[k] = l;
                    }
                }
            }
        }
        if let Some(vat) = &spec.vat {
            for (k, l) in labels.iter_mut().enumerate() {
                if *l != 0 && vat.contains(geometry.position(k % dims[0], k / dims[0], z)) {
                    *l = label::VAT;
                }
            }
        }
        labels
    });
    LabelVolume::new(geometry, slices.concat(), legend())
}

/// Reference values for the ten targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub height_cm: f64,
    pub chest_cm: f64,
    pub waist_cm: f64,
    pub hip_cm: f64,
    pub sat_l: f64,
    pub imvat_l: f64,
    pub vat_l: f64,
    pub body_l: f64,
    pub lt_l: f64,
    pub mv_l: f64,
    pub mask: [bool; TARGET_COUNT],
}

impl GroundTruth {
    pub fn values(&self) -> [f64; TARGET_COUNT] {
        [
            self.height_cm,
            self.chest_cm,
            self.waist_cm,
            self.hip_cm,
            self.sat_l,
            self.imvat_l,
            self.vat_l,
            self.body_l,
            self.lt_l,
            self.mv_l,
        ]
    }

    pub fn to_targets(&self, id: impl Into<String>) -> MaskedTargetVector {
        MaskedTargetVector { id: id.into(), values: self.values(), mask: self.mask }
    }
}

/// Knobs for turning a spec into volume, surface and ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub spacing_mm: f64,
    pub keypoints: [f64; 3],
    pub smooth: SmoothConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { spacing_mm: DEFAULT_SPACING_MM, keypoints: DEFAULT_KEYPOINTS, smooth: SmoothConfig::default() }
    }
}

/// A rasterized body with its surface and reference values.
#[derive(Debug, Clone)]
pub struct SynthBody {
    pub volume: LabelVolume,
    pub mesh: TriMesh,
    pub truth: GroundTruth,
}

/// Rasterizes, extracts the smoothed surface and measures it.
pub fn synthesize(spec: &BodySpec, cfg: &SynthConfig) -> Result<SynthBody> {
    let volume = rasterize(spec, cfg.spacing_mm)?;
    let mesh = extract_surface(&volume, BODY_ISO, cfg.smooth)?;
    let girth = anthro::measure_circumferences(&mesh, cfg.keypoints)?;
    let vols = tissue_volumes(&volume);
    let get = |name: &str| vols.get(name).copied().unwrap_or(0.0);
    let vat = get(class::VAT);
    let truth = GroundTruth {
        height_cm: spec.height_mm / 10.0,
        chest_cm: girth.chest_cm,
        waist_cm: girth.waist_cm,
        hip_cm: girth.hip_cm,
        sat_l: get(class::SAT),
        imvat_l: vat,
        vat_l: vat,
        body_l: vols.values().sum(),
        lt_l: get(class::LEAN),
        mv_l: get(class::MUSCLE),
        mask: [true; TARGET_COUNT],
    };
    Ok(SynthBody { volume, mesh, truth })
}

/// Ground truth with default smoothing and keypoints at `spacing_mm`.
pub fn ground_truth(spec: &BodySpec, spacing_mm: f64) -> Result<GroundTruth> {
    let cfg = SynthConfig { spacing_mm, ..SynthConfig::default() };
    Ok(synthesize(spec, &cfg)?.truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use rand::SeedableRng;

    fn params() -> BodyParams {
        BodyParams {
            height_mm: 1700.0,
            width_scale: 1.0,
            sat_mm: 15.0,
            muscle_mm: 10.0,
            vat_scale: 0.5,
            abduction_deg: 40.0,
        }
    }

    fn sphere_body(r: f64) -> BodySpec {
        BodySpec {
            seed: 0,
            height_mm: 2.0 * r,
            parts: vec![BodyPart {
                kind: PartKind::Head,
                center: [0.0, 0.0, r],
                semi_axes: [r; 3],
                exponents: [2.0, 2.0],
                tilt_deg: 0.0,
            }],
            sat_mm: 5.0,
            muscle_mm: 0.0,
            vat: None,
            abduction_deg: 0.0,
        }
    }

    #[test]
    fn layout_is_valid_and_has_exact_height() {
        let spec = BodySpec::from_params(1, &params());
        spec.validate().unwrap();
        let (lo, hi) = spec.vertical_extent();
        assert!((lo - 0.0).abs() < 1e-9 && (hi - 1700.0).abs() < 1e-9);
    }

    #[test]
    fn sampling_is_deterministic_and_valid() {
        let ranges = ProcgenRanges::default();
        let a = sample_indexed_body(9, 3, &ranges).unwrap();
        let b = sample_indexed_body(9, 3, &ranges).unwrap();
        assert_eq!(a, b);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut mean = 0.0;
        for _ in 0..1000 {
            let s = sample_body(&mut rng, &ranges).unwrap();
            s.validate().unwrap();
            assert!(s.sat_mm + s.muscle_mm < s.parts.iter().map(|p| p.semi_axes[0]).fold(f64::INFINITY, f64::min));
            mean += s.height_mm / 1000.0;
        }
        let mid = 0.5 * (ranges.height_mm[0] + ranges.height_mm[1]);
        assert!((mean - mid).abs() / mid < 0.02, "{mean}");
    }

    #[test]
    fn invalid_ranges_and_exhausted_budget() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let bad = ProcgenRanges { height_mm: [1900.0, 1500.0], ..Default::default() };
        assert!(matches!(sample_body(&mut rng, &bad), Err(Error::InvalidInput(_))));
        // fat thicker than any limb can hold
        let impossible = ProcgenRanges { sat_mm: [400.0, 500.0], ..Default::default() };
        assert_eq!(sample_body(&mut rng, &impossible), Err(Error::RetryBudgetExhausted { attempts: MAX_ATTEMPTS }));
    }

    #[test]
    fn labels_at_known_points() {
        let spec = BodySpec::from_params(1, &params());
        let vat = spec.vat.unwrap();
        assert_eq!(spec.label_at(vat.center), label::VAT);
        assert_eq!(spec.label_at([5000.0, 0.0, 0.0]), 0);
        // just inside the torso skin at the flank
        let torso = spec.parts[0];
        let flank = [torso.semi_axes[0] - 1.0, 0.0, 0.75 * 1700.0];
        assert_eq!(spec.label_at(flank), label::SAT);
        let deeper = [torso.semi_axes[0] - spec.sat_mm - 1.0, 0.0, 0.75 * 1700.0];
        assert_eq!(spec.label_at(deeper), label::MUSCLE);
        let g = rasterize(&spec, 4.0).unwrap();
        let geo = g.geometry();
        let idx = |p: Vec3| [0, 1, 2].map(|a| libm::round((p[a] - geo.origin_mm[a]) / 4.0) as usize);
        let [x, y, z] = idx(vat.center);
        assert_eq!(g.get(x, y, z), label::VAT);
        assert_eq!(g.get(0, 0, 0), 0);
    }

    #[test]
    fn sphere_body_volume() {
        let truth = ground_truth(&sphere_body(100.0), 2.0).unwrap();
        let exact = 4.0 / 3.0 * PI * 1e6 / 1e6;
        assert!((truth.body_l - exact).abs() / exact < 0.02, "{}", truth.body_l);
        assert!((truth.body_l - 4.18879).abs() / 4.18879 < 0.02);
        assert_eq!(truth.mask, [true; TARGET_COUNT]);
    }

    #[test]
    fn cylinder_torso_waist() {
        // near-cylindrical trunk: circular section, very flat top/bottom exponent
        let r = 120.0;
        let spec = BodySpec {
            seed: 0,
            height_mm: 1000.0,
            parts: vec![BodyPart {
                kind: PartKind::Torso,
                center: [0.0, 0.0, 500.0],
                semi_axes: [r, r, 500.0],
                exponents: [2.0, 40.0],
                tilt_deg: 0.0,
            }],
            sat_mm: 10.0,
            muscle_mm: 10.0,
            vat: None,
            abduction_deg: 0.0,
        };
        spec.validate().unwrap();
        let truth = ground_truth(&spec, 2.0).unwrap();
        let expected = 2.0 * PI * r / 10.0;
        assert!((truth.waist_cm - expected).abs() / expected < 0.005, "{}", truth.waist_cm);
    }

    #[test]
    fn grid_convergence_of_tissue_volumes() {
        // child-sized body keeps the 0.5 mm grid small
        let small = BodyParams { height_mm: 600.0, sat_mm: 8.0, muscle_mm: 5.0, ..params() };
        let spec = BodySpec::from_params(2, &small);
        spec.validate().unwrap();
        let coarse = tissue_volumes(&rasterize(&spec, 1.0).unwrap());
        let fine = tissue_volumes(&rasterize(&spec, 0.5).unwrap());
        for (name, v) in &fine {
            let rel = (coarse[name] - v).abs() / v;
            assert!(rel < 0.03, "{name}: {} vs {v}", coarse[name]);
        }
    }

    #[test]
    fn partition_and_ordering_invariants() {
        let spec = BodySpec::from_params(3, &params());
        let truth = ground_truth(&spec, 4.0).unwrap();
        let sum = truth.sat_l + truth.vat_l + truth.mv_l + truth.lt_l;
        assert!((sum - truth.body_l).abs() < 1e-12);
        assert!(truth.body_l >= truth.sat_l + truth.vat_l + truth.mv_l);
        assert_eq!(truth.imvat_l, truth.vat_l);
        assert!(truth.values().iter().all(|v| *v > 0.0));
        assert!(truth.chest_cm > truth.waist_cm * 0.5);
        assert_eq!(ground_truth(&spec, 4.0).unwrap(), truth);
        // measurement reproduces the stored girths exactly
        let body = synthesize(&spec, &SynthConfig { spacing_mm: 4.0, ..Default::default() }).unwrap();
        let g = anthro::measure_circumferences(&body.mesh, DEFAULT_KEYPOINTS).unwrap();
        assert_eq!(g.waist_cm, truth.waist_cm);
    }

    #[test]
    fn more_fat_means_more_sat_and_bfp() {
        let mut last: Option<(f64, f64)> = None;
        for sat in [6.0, 12.0, 18.0, 24.0, 30.0] {
            let spec = BodySpec::from_params(4, &BodyParams { sat_mm: sat, ..params() });
            let v = tissue_volumes(&rasterize(&spec, 4.0).unwrap());
            let body: f64 = v.values().sum();
            let bfp = 100.0 * (v[class::VAT] + v[class::SAT]) / body;
            if let Some((s, b)) = last {
                assert!(v[class::SAT] > s && bfp > b);
            }
            last = Some((v[class::SAT], bfp));
        }
    }
}
