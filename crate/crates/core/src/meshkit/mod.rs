//! Triangle meshes and oriented point clouds: isosurface extraction,
//! Laplacian smoothing, area-weighted surface sampling and enclosed volume.

mod marching;
mod sample;
mod smooth;
mod table;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};

pub use marching::marching_cubes;
pub use sample::{sample_surface, SAMPLE_BLOCK};
pub use smooth::{laplacian_smooth, SmoothConfig};

/// Default number of surface samples per body.
pub const DEFAULT_SURFACE_SAMPLES: usize = 800_000;

/// Indexed triangle mesh in millimeters with unit outward vertex normals.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    normals: Vec<Vec3>,
}

impl TriMesh {
    pub fn empty() -> Self {
        Self { vertices: Vec::new(), triangles: Vec::new(), normals: Vec::new() }
    }

    /// Builds a mesh, dropping zero-area triangles and computing
    /// area-weighted vertex normals.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(Error::Format(format!("triangle {t:?} indexes past {n} vertices")));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Format("non-finite vertex coordinate".into()));
        }
        let triangles = triangles
            .into_iter()
            .filter(|t| {
                let [a, b, c] = t.map(|i| vertices[i as usize]);
                geom::norm(geom::cross(geom::sub(b, a), geom::sub(c, a))) > 0.0
            })
            .collect();
        let mut mesh = Self { vertices, triangles, normals: Vec::new() };
        mesh.recompute_normals();
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Area-weighted average of incident face normals. Vertices without a
    /// usable face get +z.
    pub fn recompute_normals(&mut self) {
        let mut acc = vec![[0.0; 3]; self.vertices.len()];
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| self.vertices[i as usize]);
            // |cross| is twice the area, so the raw cross product is the weight
            let n = geom::cross(geom::sub(b, a), geom::sub(c, a));
            for &i in t {
                acc[i as usize] = geom::add(acc[i as usize], n);
            }
        }
        self.normals = acc.into_iter().map(|n| geom::normalize(n).unwrap_or([0.0, 0.0, 1.0])).collect();
    }

    pub(crate) fn with_vertices(&self, vertices: Vec<Vec3>) -> Self {
        let mut mesh =
            Self { vertices, triangles: self.triangles.clone(), normals: Vec::new() };
        mesh.recompute_normals();
        mesh
    }

    /// Reverses every triangle's winding.
    pub fn flipped(&self) -> Self {
        let triangles = self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect();
        let mut mesh = Self { vertices: self.vertices.clone(), triangles, normals: Vec::new() };
        mesh.recompute_normals();
        mesh
    }

    /// Applies `f` to every vertex position.
    pub fn map_vertices(&self, f: impl Fn(Vec3) -> Vec3) -> Self {
        self.with_vertices(self.vertices.iter().map(|&v| f(v)).collect())
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i as usize]);
        0.5 * geom::norm(geom::cross(geom::sub(b, a), geom::sub(c, a)))
    }

    /// Number of distinct undirected edges.
    pub fn edge_count(&self) -> usize {
        let mut edges: Vec<(u32, u32)> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }
}

/// Signed enclosed volume in mm³ (positive for outward winding).
pub fn signed_volume_mm3(m: &TriMesh) -> f64 {
    m.triangles
        .iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| m.vertices[i as usize]);
            geom::dot(a, geom::cross(b, c))
        })
        .sum::<f64>()
        / 6.0
}

/// Enclosed volume in liters via the divergence theorem.
pub fn mesh_volume(m: &TriMesh) -> f64 {
    libm::fabs(signed_volume_mm3(m)) / 1e6
}

/// Points with unit normals, optionally tagged by source.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OrientedPointCloud {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub tags: Option<Vec<u8>>,
}

impl OrientedPointCloud {
    pub fn new(points: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        if points.len() != normals.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} normals",
                points.len(),
                normals.len()
            )));
        }
        if let Some(n) = normals.iter().find(|n| libm::fabs(geom::norm(**n) - 1.0) > 1e-6) {
            return Err(Error::InvalidInput(format!("normal {n:?} is not unit length")));
        }
        Ok(Self { points, normals, tags: None })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keeps the entries at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: indices.iter().map(|&i| self.normals[i]).collect(),
            tags: self.tags.as_ref().map(|t| indices.iter().map(|&i| t[i]).collect()),
        }
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.is_empty() {
            return None;
        }
        let s = self.points.iter().fold([0.0; 3], |acc, p| geom::add(acc, *p));
        Some(geom::scale(s, 1.0 / self.len() as f64))
    }
}
