//! ASCII OBJ subset: `v x y z` and triangular `f i j k` records, in mm.

use std::fmt::Write as _;
use std::path::Path;

use mmbody_core::meshkit::TriMesh;

use crate::error::{Error, Result};
use crate::fsutil::{read, write_atomic};

pub fn obj_string(m: &TriMesh) -> String {
    let mut s = String::with_capacity(m.vertices().len() * 40 + m.triangles().len() * 24);
    for v in m.vertices() {
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    for t in m.triangles() {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

pub fn write_obj(path: &Path, m: &TriMesh) -> Result<()> {
    write_atomic(path, obj_string(m).as_bytes())
}

/// Parses `v` and `f` records; texture and normal indices after `/` are
/// dropped, other record types are skipped.
pub fn parse_obj(path: &Path, text: &str) -> Result<TriMesh> {
    let mut verts = Vec::new();
    let mut tris = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let bad = |msg: &str| Error::format(path, format!("line {}: {msg}", no + 1));
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it.take(3).map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| bad("bad vertex"))?;
                if c.len() != 3 {
                    return Err(bad("vertex needs 3 coordinates"));
                }
                verts.push([c[0], c[1], c[2]]);
            }
            Some("f") => {
                let idx: Vec<&str> = it.collect();
                if idx.len() != 3 {
                    return Err(bad("only triangular faces are supported"));
                }
                let mut t = [0u32; 3];
                for (k, tok) in idx.iter().enumerate() {
                    let i: i64 = tok.split('/').next().unwrap_or("").parse().map_err(|_| bad("bad face index"))?;
                    let i = if i < 0 { verts.len() as i64 + i } else { i - 1 };
                    if i < 0 {
                        return Err(bad("face index out of range"));
                    }
                    t[k] = i as u32;
                }
                tris.push(t);
            }
            _ => {}
        }
    }
    TriMesh::new(verts, tris).map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_obj(path: &Path) -> Result<TriMesh> {
    let bytes = read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::format(path, "not UTF-8"))?;
    parse_obj(path, text)
}
