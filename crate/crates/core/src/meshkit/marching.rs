use alloc::vec;
use alloc::vec::Vec;

use super::table::TRI_TABLE;
use super::TriMesh;
use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::volgrid::ScalarGrid;

/// Corner offsets in table order.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Each table edge as (start corner offset, axis).
const EDGES: [([usize; 3], usize); 12] = [
    ([0, 0, 0], 0),
    ([1, 0, 0], 1),
    ([0, 1, 0], 0),
    ([0, 0, 0], 1),
    ([0, 0, 1], 0),
    ([1, 0, 1], 1),
    ([0, 1, 1], 0),
    ([0, 0, 1], 1),
    ([0, 0, 0], 2),
    ([1, 0, 0], 2),
    ([1, 1, 0], 2),
    ([0, 1, 0], 2),
];

const UNSET: u32 = u32::MAX;

/// Extracts the `iso` level set of `grid` as an indexed mesh whose normals
/// point away from the region with values `>= iso`.
///
/// Vertices are shared between neighboring cells, so a closed level set yields
/// a closed mesh. No crossing yields an empty mesh.
pub fn marching_cubes(grid: &ScalarGrid, iso: f64) -> Result<TriMesh> {
    let g = &grid.geometry;
    let [nx, ny, nz] = g.dims;
    if nx < 2 || ny < 2 || nz < 2 {
        return Err(Error::InvalidInput(alloc::format!(
            "marching cubes needs at least 2 samples per axis, got {:?}",
            g.dims
        )));
    }
    let layer = nx * ny;
    // x/y edges of the lower and upper plane of the current slab, z edges of the slab
    let mut lower = [vec![UNSET; layer], vec![UNSET; layer]];
    let mut upper = [vec![UNSET; layer], vec![UNSET; layer]];
    let mut vertical = vec![UNSET; layer];
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();

    for z in 0..nz - 1 {
        vertical.iter_mut().for_each(|e| *e = UNSET);
        for y in 0..ny - 1 {
            for x in 0..nx - 1 {
                let mut values = [0.0; 8];
                let mut case = 0usize;
                for (c, off) in CORNERS.iter().enumerate() {
                    values[c] = grid.get(x + off[0], y + off[1], z + off[2]);
                    if values[c] < iso {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let mut edge_vertex = [UNSET; 12];
                let row = &TRI_TABLE[case];
                for &e in row.iter().take_while(|&&e| e >= 0) {
                    let e = e as usize;
                    if edge_vertex[e] != UNSET {
                        continue;
                    }
                    let (off, axis) = EDGES[e];
                    let (px, py) = (x + off[0], y + off[1]);
                    let slot = px + nx * py;
                    let cache = match axis {
                        2 => &mut vertical[slot],
                        a if off[2] == 0 => &mut lower[a][slot],
                        a => &mut upper[a][slot],
                    };
                    if *cache == UNSET {
                        let p = [px, py, z + off[2]];
                        let mut q = p;
                        q[axis] += 1;
                        let va = grid.get(p[0], p[1], p[2]);
                        let vb = grid.get(q[0], q[1], q[2]);
                        let t = if vb != va { (iso - va) / (vb - va) } else { 0.5 };
                        let pa = g.position(p[0], p[1], p[2]);
                        let pb = g.position(q[0], q[1], q[2]);
                        *cache = vertices.len() as u32;
                        vertices.push(geom::lerp(pa, pb, t));
                    }
                    edge_vertex[e] = *cache;
                }
                for tri in row.chunks(3).take_while(|t| t[0] >= 0) {
                    triangles.push([
                        edge_vertex[tri[0] as usize],
                        edge_vertex[tri[1] as usize],
                        edge_vertex[tri[2] as usize],
                    ]);
                }
            }
        }
        core::mem::swap(&mut lower, &mut upper);
        for a in &mut upper {
            a.iter_mut().for_each(|e| *e = UNSET);
        }
    }
    TriMesh::new(vertices, triangles)
}
