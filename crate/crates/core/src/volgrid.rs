//! Voxel label grids: body masks, per-slice cavity filling and tissue volumes.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::par;

/// Canonical tissue class names.
pub mod class {
    pub const BACKGROUND: &str = "background";
    pub const SAT: &str = "SAT";
    pub const IMVAT: &str = "IMVAT";
    pub const VAT: &str = "VAT";
    pub const MUSCLE: &str = "MUSCLE";
    pub const BONE: &str = "BONE";
    pub const LEAN: &str = "LEAN";
    pub const BODY: &str = "BODY";
}

/// Geometry shared by every grid type: voxel counts, spacing, origin and
/// which axis points up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
    pub height_axis: usize,
}

impl GridGeometry {
    pub fn new(
        dims: [usize; 3],
        spacing_mm: [f64; 3],
        origin_mm: [f64; 3],
        height_axis: usize,
    ) -> Result<Self> {
        if spacing_mm.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Format(format!("spacing must be positive, got {spacing_mm:?}")));
        }
        if origin_mm.iter().any(|o| !o.is_finite()) {
            return Err(Error::Format("origin must be finite".to_string()));
        }
        if height_axis > 2 {
            return Err(Error::Format(format!("height_axis {height_axis} not in 0..=2")));
        }
        dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
        Ok(Self { dims, spacing_mm, origin_mm, height_axis })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear index, x fastest.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let r = idx / self.dims[0];
        [x, r % self.dims[1], r / self.dims[1]]
    }

    /// Physical position of a voxel center in mm.
    #[inline]
    pub fn position(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        [
            self.origin_mm[0] + x as f64 * self.spacing_mm[0],
            self.origin_mm[1] + y as f64 * self.spacing_mm[1],
            self.origin_mm[2] + z as f64 * self.spacing_mm[2],
        ]
    }

    /// Volume of one voxel in mm³.
    #[inline]
    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing_mm[0] * self.spacing_mm[1] * self.spacing_mm[2]
    }
}

/// Voxel grid of tissue-class ids with a legend.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    geometry: GridGeometry,
    voxels: Vec<u8>,
    legend: BTreeMap<u8, String>,
}

impl LabelVolume {
    /// Validates voxel count, spacing, and that every label is in the legend.
    /// Class 0 is forced to `background`.
    pub fn new(
        geometry: GridGeometry,
        voxels: Vec<u8>,
        mut legend: BTreeMap<u8, String>,
    ) -> Result<Self> {
        if voxels.len() != geometry.len() {
            return Err(Error::Format(format!(
                "payload has {} voxels, dims {:?} need {}",
                voxels.len(),
                geometry.dims,
                geometry.len()
            )));
        }
        match legend.get(&0) {
            Some(name) if name != class::BACKGROUND => {
                return Err(Error::Format(format!("class 0 must be background, got `{name}`")));
            }
            _ => {
                legend.insert(0, class::BACKGROUND.to_string());
            }
        }
        let mut seen = [false; 256];
        for &v in &voxels {
            seen[v as usize] = true;
        }
        if let Some(id) = (0..256).find(|&id| seen[id] && !legend.contains_key(&(id as u8))) {
            return Err(Error::Format(format!("voxel label {id} is absent from the legend")));
        }
        Ok(Self { geometry, voxels, legend })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn voxels(&self) -> &[u8] {
        &self.voxels
    }

    pub fn legend(&self) -> &BTreeMap<u8, String> {
        &self.legend
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.voxels[self.geometry.index(x, y, z)]
    }

    /// Class id for a legend name, if present.
    pub fn class_id(&self, name: &str) -> Option<u8> {
        self.legend.iter().find(|(_, n)| n.as_str() == name).map(|(id, _)| *id)
    }
}

/// One boolean per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub geometry: GridGeometry,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// Scalar field over a grid, as consumed by marching cubes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub geometry: GridGeometry,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.geometry.index(x, y, z)]
    }
}

/// Every labeled (nonzero) voxel becomes part of the body.
pub fn body_mask(v: &LabelVolume) -> BinaryMask {
    BinaryMask {
        geometry: v.geometry,
        bits: v.voxels.iter().map(|&l| l > 0).collect(),
    }
}

/// Fills background regions that are not 4-connected to the border of their
/// axial slice (the plane orthogonal to the height axis).
pub fn fill_cavities(m: &BinaryMask) -> BinaryMask {
    let g = m.geometry;
    let h = g.height_axis;
    let (a, b) = match h {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (na, nb) = (g.dims[a], g.dims[b]);
    let slices = par::map_indexed(g.dims[h], |s| {
        let at = |i: usize, j: usize| {
            let mut c = [0usize; 3];
            c[h] = s;
            c[a] = i;
            c[b] = j;
            g.index(c[0], c[1], c[2])
        };
        let slice: Vec<bool> = (0..na * nb).map(|k| m.bits[at(k % na, k / na)]).collect();
        fill_slice(&slice, na, nb)
    });
    let mut bits = m.bits.clone();
    for (s, filled) in slices.into_iter().enumerate() {
        for (k, &f) in filled.iter().enumerate() {
            if f {
                let mut c = [0usize; 3];
                c[h] = s;
                c[a] = k % na;
                c[b] = k / na;
                bits[g.index(c[0], c[1], c[2])] = true;
            }
        }
    }
    BinaryMask { geometry: g, bits }
}

/// 2D hole fill on a row-major `w × h` slice; returns the filled slice.
fn fill_slice(slice: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut outside = vec![false; slice.len()];
    let mut queue = VecDeque::new();
    let seed = |i: usize, j: usize, outside: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
        let k = i + w * j;
        if !slice[k] && !outside[k] {
            outside[k] = true;
            queue.push_back(k);
        }
    };
    for i in 0..w {
        seed(i, 0, &mut outside, &mut queue);
        if h > 1 {
            seed(i, h - 1, &mut outside, &mut queue);
        }
    }
    for j in 0..h {
        seed(0, j, &mut outside, &mut queue);
        if w > 1 {
            seed(w - 1, j, &mut outside, &mut queue);
        }
    }
    while let Some(k) = queue.pop_front() {
        let (i, j) = (k % w, k / w);
        let mut visit = |n: usize| {
            if !slice[n] && !outside[n] {
                outside[n] = true;
                queue.push_back(n);
            }
        };
        if i > 0 {
            visit(k - 1);
        }
        if i + 1 < w {
            visit(k + 1);
        }
        if j > 0 {
            visit(k - w);
        }
        if j + 1 < h {
            visit(k + w);
        }
    }
    outside.iter().map(|o| !o).collect()
}

/// Per-class volume in liters for every legend class other than background.
/// Classes sharing a name are summed.
pub fn tissue_volumes(v: &LabelVolume) -> BTreeMap<String, f64> {
    let counts = histogram(&v.voxels);
    let voxel_mm3 = v.geometry.voxel_volume_mm3();
    let mut out = BTreeMap::new();
    for (&id, name) in &v.legend {
        if id == 0 {
            continue;
        }
        *out.entry(name.clone()).or_insert(0.0) += counts[id as usize] as f64 * voxel_mm3 / 1e6;
    }
    out
}

/// Volume of unlabeled voxels in liters.
pub fn background_volume(v: &LabelVolume) -> f64 {
    histogram(&v.voxels)[0] as f64 * v.geometry.voxel_volume_mm3() / 1e6
}

fn histogram(voxels: &[u8]) -> [u64; 256] {
    let mut counts = [0u64; 256];
    for &l in voxels {
        counts[l as usize] += 1;
    }
    counts
}

/// Binary mask as a 0/1 scalar field.
pub fn sample_signed_field(m: &BinaryMask) -> ScalarGrid {
    ScalarGrid {
        geometry: m.geometry,
        values: m.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn geom(dims: [usize; 3], spacing: f64) -> GridGeometry {
        GridGeometry::new(dims, [spacing; 3], [0.0; 3], 2).unwrap()
    }

    fn legend(names: &[(u8, &str)]) -> BTreeMap<u8, String> {
        names.iter().map(|(i, n)| (*i, n.to_string())).collect()
    }

    #[test]
    fn rejects_size_mismatch_and_unknown_labels() {
        let g = geom([2, 2, 2], 1.0);
        let err = LabelVolume::new(g, vec![0; 7], legend(&[(1, "SAT")])).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        let err = LabelVolume::new(g, vec![0, 0, 0, 0, 0, 0, 0, 5], legend(&[(1, "SAT")]))
            .unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        assert!(GridGeometry::new([2, 2, 2], [1.0, 0.0, 1.0], [0.0; 3], 2).is_err());
    }

    #[test]
    fn body_mask_marks_labeled_voxels() {
        let g = geom([3, 3, 3], 1.0);
        let zero = LabelVolume::new(g, vec![0; 27], legend(&[])).unwrap();
        assert_eq!(body_mask(&zero).count(), 0);
        let mut vox = vec![0; 27];
        vox[13] = 3;
        let one = LabelVolume::new(g, vox, legend(&[(3, "VAT")])).unwrap();
        let m = body_mask(&one);
        assert_eq!(m.count(), 1);
        assert!(m.bits[13]);
    }

    #[test]
    fn fill_cavities_closes_ring() {
        let g = geom([5, 5, 1], 1.0);
        let mut bits = vec![false; 25];
        for j in 1..4 {
            for i in 1..4 {
                bits[i + 5 * j] = !(i == 2 && j == 2);
            }
        }
        let filled = fill_cavities(&BinaryMask { geometry: g, bits: bits.clone() });
        assert!(filled.bits[2 + 5 * 2]);
        assert_eq!(filled.count(), 9);
        // an open notch reaching the border stays open
        let mut notched = bits;
        notched[2 + 5 * 3] = false;
        let filled = fill_cavities(&BinaryMask { geometry: g, bits: notched.clone() });
        assert_eq!(filled.bits, notched);
    }

    #[test]
    fn fill_cavities_respects_height_axis() {
        // cavity enclosed in the x-y plane but the slices are x-z planes
        let g = GridGeometry::new([3, 3, 3], [1.0; 3], [0.0; 3], 1).unwrap();
        let mut bits = vec![true; 27];
        bits[g.index(1, 1, 1)] = false;
        bits[g.index(1, 1, 0)] = false;
        let filled = fill_cavities(&BinaryMask { geometry: g, bits: bits.clone() });
        // the hole touches the z=0 border within the y=1 slice
        assert!(!filled.bits[g.index(1, 1, 1)]);
        let g2 = GridGeometry { height_axis: 2, ..g };
        let filled = fill_cavities(&BinaryMask { geometry: g2, bits });
        assert!(filled.bits[g.index(1, 1, 1)]);
    }

    #[test]
    fn tissue_volume_examples() {
        let g = geom([25, 10, 1], 1.0);
        let v = LabelVolume::new(g, vec![1; 250], legend(&[(1, "SAT")])).unwrap();
        assert!((tissue_volumes(&v)["SAT"] - 0.00025).abs() < 1e-18);
        let g = geom([1, 1, 1], 2.0);
        let v = LabelVolume::new(g, vec![1], legend(&[(1, "SAT")])).unwrap();
        assert!((tissue_volumes(&v)["SAT"] - 8e-6).abs() < 1e-20);
    }

    #[test]
    fn signed_field_maps_bits() {
        let g = geom([2, 1, 1], 1.0);
        let f = sample_signed_field(&BinaryMask { geometry: g, bits: vec![true, false] });
        assert_eq!(f.values, vec![1.0, 0.0]);
    }

    /// Independent per-slice flood fill: iterative relaxation until no change.
    fn relaxation_fill(m: &BinaryMask) -> Vec<bool> {
        let g = m.geometry;
        let [nx, ny, nz] = g.dims;
        let mut reach = vec![false; m.bits.len()];
        for z in 0..nz {
            loop {
                let mut changed = false;
                for y in 0..ny {
                    for x in 0..nx {
                        let k = g.index(x, y, z);
                        if m.bits[k] || reach[k] {
                            continue;
                        }
                        let border = x == 0 || y == 0 || x + 1 == nx || y + 1 == ny;
                        let nb = (x > 0 && reach[g.index(x - 1, y, z)])
                            || (x + 1 < nx && reach[g.index(x + 1, y, z)])
                            || (y > 0 && reach[g.index(x, y - 1, z)])
                            || (y + 1 < ny && reach[g.index(x, y + 1, z)]);
                        if border || nb {
                            reach[k] = true;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
        }
        reach.iter().map(|r| !r).collect()
    }

    proptest! {
        #[test]
        fn fill_matches_relaxation_oracle(seed in any::<u64>(), density in 0.3f64..0.8) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = geom([9, 8, 3], 1.0);
            let bits: Vec<bool> = (0..g.len()).map(|_| rng.random::<f64>() < density).collect();
            let m = BinaryMask { geometry: g, bits };
            let filled = fill_cavities(&m);
            prop_assert_eq!(&filled.bits, &relaxation_fill(&m));
            for (a, b) in m.bits.iter().zip(&filled.bits) {
                prop_assert!(!a || *b);
            }
            prop_assert_eq!(fill_cavities(&filled), filled);
        }

        #[test]
        fn volumes_match_histogram_and_partition(seed in any::<u64>(), s in 0.5f64..3.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = GridGeometry::new([7, 5, 4], [s, s * 1.5, s * 0.5], [0.0; 3], 2).unwrap();
            let vox: Vec<u8> = (0..g.len()).map(|_| rng.random_range(0..4u8)).collect();
            let v = LabelVolume::new(
                g,
                vox.clone(),
                legend(&[(1, "SAT"), (2, "VAT"), (3, "MUSCLE")]),
            )
            .unwrap();
            let vols = tissue_volumes(&v);
            let voxel_mm3 = s * (s * 1.5) * (s * 0.5);
            let voxel = voxel_mm3 / 1e6;
            for (id, name) in [(1u8, "SAT"), (2, "VAT"), (3, "MUSCLE")] {
                let n = vox.iter().filter(|&&l| l == id).count();
                prop_assert_eq!(vols[name], n as f64 * voxel_mm3 / 1e6);
            }
            let nonzero = vox.iter().filter(|&&l| l > 0).count();
            prop_assert_eq!(body_mask(&v).count(), nonzero);
            let total: u64 = [0u8, 1, 2, 3]
                .iter()
                .map(|id| vox.iter().filter(|&&l| l == *id).count() as u64)
                .sum();
            prop_assert_eq!(total, g.len() as u64);
            let sum: f64 = vols.values().sum::<f64>() + background_volume(&v);
            prop_assert!((sum - g.len() as f64 * voxel).abs() <= 1e-12 * sum.max(1.0));
        }
    }
}
