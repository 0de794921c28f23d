//! Height and girth measurement from meshes: planar cross-sections and 2D
//! convex hull perimeters. The vertical axis is z.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meshkit::TriMesh;

/// Default chest, waist, hip keypoints as fractions of body height.
pub const DEFAULT_KEYPOINTS: [f64; 3] = [0.72, 0.62, 0.53];

/// Intersection of a mesh with a horizontal plane.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub height_mm: f64,
    /// (x, y) of every triangle/plane intersection segment endpoint.
    pub points: Vec<[f64; 2]>,
    /// Closed-contour id per point; contours are numbered from 0.
    pub contour: Vec<u32>,
}

impl CrossSection {
    pub fn contour_count(&self) -> usize {
        self.contour.iter().map(|&c| c as usize + 1).max().unwrap_or(0)
    }

    /// The points of one contour.
    pub fn contour_points(&self, id: u32) -> Vec<[f64; 2]> {
        self.points
            .iter()
            .zip(&self.contour)
            .filter(|(_, &c)| c == id)
            .map(|(p, _)| *p)
            .collect()
    }

    /// Restricts the section to the contour with the largest convex-hull
    /// area, i.e. the trunk when limbs are cut by the same plane.
    pub fn largest_contour(&self) -> CrossSection {
        let best = (0..self.contour_count() as u32)
            .map(|id| (id, hull_area(&convex_hull(&self.contour_points(id)))))
            .fold(None, |acc: Option<(u32, f64)>, (id, a)| match acc {
                Some((_, best)) if best >= a => acc,
                _ => Some((id, a)),
            });
        match best {
            Some((id, _)) => {
                let points = self.contour_points(id);
                let contour = alloc::vec![0; points.len()];
                CrossSection { height_mm: self.height_mm, points, contour }
            }
            None => self.clone(),
        }
    }
}

/// Chest, waist and hip girths in cm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circumferences {
    pub chest_cm: f64,
    pub waist_cm: f64,
    pub hip_cm: f64,
}

fn z_extent(m: &TriMesh) -> Result<(f64, f64)> {
    if m.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in m.triangles() {
        for &i in t {
            let z = m.vertices()[i as usize][2];
            lo = lo.min(z);
            hi = hi.max(z);
        }
    }
    Ok((lo, hi))
}

/// Vertical extent of the mesh in cm.
pub fn measure_height(m: &TriMesh) -> Result<f64> {
    let (lo, hi) = z_extent(m)?;
    Ok((hi - lo) / 10.0)
}

/// Slices `m` with the plane `z = h_mm`.
///
/// Vertices with `z >= h` count as above the plane, so every crossing
/// triangle contributes exactly one segment. Segments are chained into
/// contours through the mesh edges they lie on.
pub fn cross_section(m: &TriMesh, h_mm: f64) -> CrossSection {
    let v = m.vertices();
    let mut keys: Vec<(u32, u32)> = Vec::new();
    let mut points = Vec::new();
    let mut segments: Vec<(usize, usize)> = Vec::new();
    let mut slot: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for &[a, b, c] in m.triangles() {
        let mut hits = [0usize; 2];
        let mut n = 0;
        for (p, q) in [(a, b), (b, c), (c, a)] {
            let (zp, zq) = (v[p as usize][2], v[q as usize][2]);
            if (zp >= h_mm) == (zq >= h_mm) {
                continue;
            }
            let key = (p.min(q), p.max(q));
            let id = *slot.entry(key).or_insert_with(|| {
                let (lo, hi) = (v[key.0 as usize], v[key.1 as usize]);
                let t = (h_mm - lo[2]) / (hi[2] - lo[2]);
                points.push([lo[0] + t * (hi[0] - lo[0]), lo[1] + t * (hi[1] - lo[1])]);
                keys.push(key);
                points.len() - 1
            });
            if n < 2 {
                hits[n] = id;
            }
            n += 1;
        }
        if n == 2 {
            segments.push((hits[0], hits[1]));
        }
    }
    let contour = label_components(points.len(), &segments);
    CrossSection { height_mm: h_mm, points, contour }
}

fn label_components(n: usize, edges: &[(usize, usize)]) -> Vec<u32> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut ids = BTreeMap::new();
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            let next = ids.len() as u32;
            *ids.entry(r).or_insert(next)
        })
        .collect()
}

fn orient(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; returns the hull counter-clockwise without
/// collinear points. Coordinates are shifted to the first point's frame
/// before the orientation tests.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let Some(&anchor) = points.first() else {
        return Vec::new();
    };
    let mut pts: Vec<[f64; 2]> =
        points.iter().map(|p| [p[0] - anchor[0], p[1] - anchor[1]]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts.into_iter().map(|p| [p[0] + anchor[0], p[1] + anchor[1]]).collect();
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    // lower chain left to right, then upper chain right to left
    for &p in &pts {
        while hull.len() >= 2 && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull.into_iter().map(|p| [p[0] + anchor[0], p[1] + anchor[1]]).collect()
}

fn hull_area(hull: &[[f64; 2]]) -> f64 {
    if hull.len() < 3 {
        return 0.0;
    }
    let o = hull[0];
    hull.windows(2).map(|w| orient(o, w[0], w[1])).sum::<f64>() / 2.0
}

/// Perimeter of the convex hull of the section, in cm.
pub fn hull_perimeter(s: &CrossSection) -> Result<f64> {
    if s.points.len() < 3 {
        return Err(Error::DegenerateSection(format!(
            "{} points at z = {} mm",
            s.points.len(),
            s.height_mm
        )));
    }
    let hull = convex_hull(&s.points);
    if hull.len() < 3 {
        return Err(Error::DegenerateSection(format!("collinear points at z = {} mm", s.height_mm)));
    }
    let mut perimeter = 0.0;
    for i in 0..hull.len() {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        perimeter += libm::hypot(b[0] - a[0], b[1] - a[1]);
    }
    Ok(perimeter / 10.0)
}

/// Girths at `keypoints` (chest, waist, hip) given as fractions of body
/// height above the lowest vertex. Each girth is the hull perimeter of the
/// largest contour at that height.
pub fn measure_circumferences(m: &TriMesh, keypoints: [f64; 3]) -> Result<Circumferences> {
    if let Some(f) = keypoints.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
        return Err(Error::InvalidInput(format!("keypoint fraction {f} outside (0, 1)")));
    }
    let (lo, hi) = z_extent(m)?;
    let names = ["chest", "waist", "hip"];
    let mut out = [0.0; 3];
    for (k, (&f, name)) in keypoints.iter().zip(names).enumerate() {
        let section = cross_section(m, lo + f * (hi - lo)).largest_contour();
        out[k] = hull_perimeter(&section).map_err(|e| match e {
            Error::DegenerateSection(msg) => Error::DegenerateSection(format!("{name}: {msg}")),
            other => other,
        })?;
    }
    Ok(Circumferences { chest_cm: out[0], waist_cm: out[1], hip_cm: out[2] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshkit::test_shapes::{cylinder, unit_cube};
    use alloc::vec;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn section(points: Vec<[f64; 2]>) -> CrossSection {
        let contour = vec![0; points.len()];
        CrossSection { height_mm: 0.0, points, contour }
    }

    #[test]
    fn height_of_shapes() {
        let c = cylinder(10.0, 1700.0, 32);
        assert!((measure_height(&c).unwrap() - 170.0).abs() < 1e-12);
        let moved = c.map_vertices(|v| [v[0], v[1], v[2] + 123.0]);
        assert!((measure_height(&moved).unwrap() - 170.0).abs() < 1e-9);
        let big = c.map_vertices(|v| [v[0] * 1.1, v[1] * 1.1, v[2] * 1.1]);
        assert!((measure_height(&big).unwrap() - 187.0).abs() < 1e-9);
        assert_eq!(measure_height(&TriMesh::empty()), Err(Error::EmptyMesh));
    }

    #[test]
    fn cube_mid_section_is_unit_square() {
        let s = cross_section(&unit_cube(), 0.5);
        assert_eq!(s.contour_count(), 1);
        for p in &s.points {
            let on_edge = p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0;
            assert!(on_edge && (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
        }
        assert!((hull_perimeter(&s).unwrap() - 0.4).abs() < 1e-12);
        assert!(cross_section(&unit_cube(), 2.0).points.is_empty());
    }

    #[test]
    fn cylinder_section_points_on_circle() {
        let c = cylinder(100.0, 50.0, 720);
        let s = cross_section(&c, 25.0);
        for p in &s.points {
            assert!((libm::hypot(p[0], p[1]) - 100.0).abs() < 100.0 * (1.0 - libm::cos(PI / 720.0)) + 1e-9);
        }
        let perim = hull_perimeter(&s).unwrap();
        assert!((perim - 2.0 * PI * 10.0).abs() / (2.0 * PI * 10.0) < 0.005);
    }

    #[test]
    fn square_and_polygon_perimeters() {
        let sq = section(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        assert!((hull_perimeter(&sq).unwrap() - 0.4).abs() < 1e-15);
        let ngon: Vec<_> = (0..360)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 360.0;
                [100.0 * libm::cos(t), 100.0 * libm::sin(t)]
            })
            .collect();
        let p = hull_perimeter(&section(ngon)).unwrap();
        assert!((p - 62.832).abs() / 62.832 < 0.001);
    }

    #[test]
    fn degenerate_sections_fail() {
        assert!(hull_perimeter(&section(vec![[0.0, 0.0], [1.0, 1.0]])).is_err());
        let line = section(vec![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]);
        assert!(matches!(hull_perimeter(&line), Err(Error::DegenerateSection(_))));
    }

    /// Hull vertices by brute force: points not inside any triangle of others.
    fn brute_force_hull_perimeter(pts: &[[f64; 2]]) -> f64 {
        let n = pts.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                // (i, j) is a ccw hull edge when no point is strictly to its right
                if pts.iter().all(|&p| orient(pts[i], pts[j], p) >= 0.0) {
                    let collinear_between = pts.iter().any(|&p| {
                        p != pts[i]
                            && p != pts[j]
                            && orient(pts[i], pts[j], p) == 0.0
                            && (p[0] - pts[i][0]) * (p[0] - pts[j][0]) <= 0.0
                            && (p[1] - pts[i][1]) * (p[1] - pts[j][1]) <= 0.0
                    });
                    if !collinear_between {
                        edges.push(libm::hypot(pts[j][0] - pts[i][0], pts[j][1] - pts[i][1]));
                    }
                }
            }
        }
        edges.iter().sum::<f64>() / 10.0
    }

    #[test]
    fn star_polygon_hull_is_shorter() {
        let star: Vec<[f64; 2]> = (0..10)
            .map(|k| {
                let r = if k % 2 == 0 { 50.0 } else { 20.0 };
                let t = PI * k as f64 / 5.0;
                [r * libm::cos(t), r * libm::sin(t)]
            })
            .collect();
        let mut polygon = 0.0;
        for i in 0..10 {
            let (a, b) = (star[i], star[(i + 1) % 10]);
            polygon += libm::hypot(b[0] - a[0], b[1] - a[1]) / 10.0;
        }
        let hull = hull_perimeter(&section(star.clone())).unwrap();
        assert!((hull - brute_force_hull_perimeter(&star)).abs() < 1e-12);
        assert!(hull < polygon);
    }

    #[test]
    fn ellipse_perimeter_matches_quadrature() {
        let (a, b) = (150.0, 100.0);
        let pts: Vec<_> = (0..2000)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 2000.0;
                [a * libm::cos(t), b * libm::sin(t)]
            })
            .collect();
        // Simpson quadrature of the arc length integral
        let n = 10_000;
        let f = |t: f64| libm::hypot(a * libm::sin(t), b * libm::cos(t));
        let h = 2.0 * PI / n as f64;
        let mut s = f(0.0) + f(2.0 * PI);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let exact_cm = s * h / 3.0 / 10.0;
        let p = hull_perimeter(&section(pts)).unwrap();
        assert!((p - exact_cm).abs() / exact_cm < 0.005);
    }

    #[test]
    fn largest_contour_drops_limbs() {
        // trunk cylinder plus a thin "arm" cylinder off to the side
        let trunk = cylinder(100.0, 400.0, 64);
        let arm = cylinder(20.0, 400.0, 32).map_vertices(|v| [v[0] + 200.0, v[1], v[2]]);
        let offset = trunk.vertices().len() as u32;
        let mut verts = trunk.vertices().to_vec();
        verts.extend_from_slice(arm.vertices());
        let mut tris = trunk.triangles().to_vec();
        tris.extend(arm.triangles().iter().map(|t| t.map(|i| i + offset)));
        let body = TriMesh::new(verts, tris).unwrap();
        let s = cross_section(&body, 200.0);
        assert_eq!(s.contour_count(), 2);
        let girths = measure_circumferences(&body, [0.5, 0.5, 0.5]).unwrap();
        let expected = hull_perimeter(&cross_section(&trunk, 200.0)).unwrap();
        assert!((girths.waist_cm - expected).abs() < 1e-9);
    }

    #[test]
    fn circumference_errors_name_keypoint() {
        let c = cylinder(10.0, 100.0, 16);
        assert!(measure_circumferences(&c, [0.5, 1.0, 0.5]).is_err());
        assert!(measure_circumferences(&TriMesh::empty(), DEFAULT_KEYPOINTS).is_err());
    }

    proptest! {
        #[test]
        fn hull_perimeter_is_rigid_invariant(
            pts in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
            angle in 0.0f64..6.3,
            dx in -1e3f64..1e3,
            dy in -1e3f64..1e3,
        ) {
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
            let Ok(base) = hull_perimeter(&section(pts.clone())) else { return Ok(()); };
            let (c, s) = (libm::cos(angle), libm::sin(angle));
            let moved: Vec<_> = pts.iter().map(|p| [c * p[0] - s * p[1] + dx, s * p[0] + c * p[1] + dy]).collect();
            let p = hull_perimeter(&section(moved)).unwrap();
            prop_assert!((p - base).abs() <= 1e-9 * base);
        }

        #[test]
        fn interior_points_do_not_change_hull(
            pts in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..30),
            w in proptest::collection::vec(0.0f64..1.0, 3),
        ) {
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
            let Ok(base) = hull_perimeter(&section(pts.clone())) else { return Ok(()); };
            // convex combination of three input points lies inside the hull
            let total: f64 = w.iter().sum::<f64>().max(1e-9);
            let p = [0, 1, 2].iter().fold([0.0, 0.0], |acc, &i| {
                [acc[0] + w[i] / total * pts[i][0], acc[1] + w[i] / total * pts[i][1]]
            });
            let mut more = pts.clone();
            more.push(p);
            let q = hull_perimeter(&section(more)).unwrap();
            prop_assert!((q - base).abs() <= 1e-9 * base);
            let brute = brute_force_hull_perimeter(&pts);
            prop_assert!((brute - base).abs() <= 1e-9 * base.max(1.0));
        }
    }
}
