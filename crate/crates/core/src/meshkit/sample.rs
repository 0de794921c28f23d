use alloc::vec::Vec;

use rand::Rng;

use super::{OrientedPointCloud, TriMesh};
use crate::error::{Error, Result};
use crate::geom;
use crate::{par, rng};

/// Points per independently seeded RNG block.
pub const SAMPLE_BLOCK: usize = 4096;

/// Draws `n` points uniformly over the surface area of `m`.
///
/// Triangles are picked proportionally to area, points are placed with
/// uniform barycentric coordinates, and normals interpolate the vertex
/// normals. Block `b` of the output uses stream `b` of `seed`, so the result
/// is independent of thread count.
pub fn sample_surface(m: &TriMesh, n: usize, seed: u64) -> Result<OrientedPointCloud> {
    if m.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let mut cumulative = Vec::with_capacity(m.triangles().len());
    let mut total = 0.0;
    for t in 0..m.triangles().len() {
        total += m.triangle_area(t);
        cumulative.push(total);
    }
    let blocks = n.div_ceil(SAMPLE_BLOCK);
    let chunks = par::map_indexed(blocks, |b| {
        let mut rng = rng::stream(seed, b as u64);
        let count = SAMPLE_BLOCK.min(n - b * SAMPLE_BLOCK);
        let mut pts = Vec::with_capacity(count);
        let mut nrm = Vec::with_capacity(count);
        for _ in 0..count {
            let u = rng.random::<f64>() * total;
            let t = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let s = libm::sqrt(r1);
            let w = [1.0 - s, s * (1.0 - r2), s * r2];
            let tri = m.triangles()[t];
            let [a, b, c] = tri.map(|i| m.vertices()[i as usize]);
            let p = geom::add(geom::add(geom::scale(a, w[0]), geom::scale(b, w[1])), geom::scale(c, w[2]));
            let [na, nb, nc] = tri.map(|i| m.normals()[i as usize]);
            let blended =
                geom::add(geom::add(geom::scale(na, w[0]), geom::scale(nb, w[1])), geom::scale(nc, w[2]));
            let normal = geom::normalize(blended)
                .or_else(|| geom::normalize(geom::cross(geom::sub(b, a), geom::sub(c, a))))
                .unwrap_or([0.0, 0.0, 1.0]);
            pts.push(p);
            nrm.push(normal);
        }
        (pts, nrm)
    });
    let mut cloud = OrientedPointCloud { points: Vec::with_capacity(n), normals: Vec::with_capacity(n), tags: None };
    for (p, nr) in chunks {
        cloud.points.extend(p);
        cloud.normals.extend(nr);
    }
    Ok(cloud)
}
