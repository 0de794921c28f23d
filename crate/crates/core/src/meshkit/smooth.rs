use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::TriMesh;
use crate::error::{Error, Result};
use crate::geom;

/// Laplacian smoothing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothConfig {
    pub lambda: f64,
    pub iterations: usize,
}

impl Default for SmoothConfig {
    fn default() -> Self {
        Self { lambda: 0.5, iterations: 10 }
    }
}

/// Moves each vertex toward the mean of its 1-ring by `lambda`, `iters`
/// times (Jacobi updates). Connectivity is untouched and isolated vertices
/// stay put. Normals are recomputed afterwards.
pub fn laplacian_smooth(m: &TriMesh, lambda: f64, iters: usize) -> Result<TriMesh> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidInput(alloc::format!("lambda {lambda} outside (0, 1]")));
    }
    if iters == 0 {
        return Ok(m.clone());
    }
    let (offsets, neighbors) = one_rings(m);
    let mut cur = m.vertices().to_vec();
    let mut next = cur.clone();
    for _ in 0..iters {
        for (i, out) in next.iter_mut().enumerate() {
            let ring = &neighbors[offsets[i]..offsets[i + 1]];
            if ring.is_empty() {
                *out = cur[i];
                continue;
            }
            let sum = ring.iter().fold([0.0; 3], |acc, &j| geom::add(acc, cur[j as usize]));
            let mean = geom::scale(sum, 1.0 / ring.len() as f64);
            *out = geom::add(cur[i], geom::scale(geom::sub(mean, cur[i]), lambda));
        }
        core::mem::swap(&mut cur, &mut next);
    }
    Ok(m.with_vertices(cur))
}

/// CSR adjacency of unique vertex neighbors.
fn one_rings(m: &TriMesh) -> (Vec<usize>, Vec<u32>) {
    let n = m.vertices().len();
    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(m.triangles().len() * 6);
    for &[a, b, c] in m.triangles() {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            pairs.push((u, v));
            pairs.push((v, u));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let mut offsets = vec![0usize; n + 1];
    for &(u, _) in &pairs {
        offsets[u as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    (offsets, pairs.into_iter().map(|(_, v)| v).collect())
}
