//! Binary little-endian PLY point clouds with float32 `x y z nx ny nz`.

use std::path::Path;

use mmbody_core::meshkit::OrientedPointCloud;

use crate::error::{Error, Result};
use crate::fsutil::{read, write_atomic};

const PROPS: [&str; 6] = ["x", "y", "z", "nx", "ny", "nz"];

pub fn ply_bytes(pc: &OrientedPointCloud) -> Vec<u8> {
    let mut out = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n{}end_header\n",
        pc.len(),
        PROPS.iter().map(|p| format!("property float {p}\n")).collect::<String>()
    )
    .into_bytes();
    out.reserve(pc.len() * 24);
    for (p, n) in pc.points.iter().zip(&pc.normals) {
        for v in p.iter().chain(n) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_ply(path: &Path, pc: &OrientedPointCloud) -> Result<()> {
    write_atomic(path, &ply_bytes(pc))
}

pub fn parse_ply(path: &Path, bytes: &[u8]) -> Result<OrientedPointCloud> {
    let bad = |msg: &str| Error::format(path, msg.to_string());
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| bad("missing end_header"))?
        + END.len();
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not ASCII"))?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(bad("missing ply magic"));
    }
    let mut count = None;
    let mut props = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "binary_little_endian", "1.0"] => {}
            ["format", ..] => return Err(bad("only binary_little_endian 1.0 is supported")),
            ["element", "vertex", n] => count = Some(n.parse::<usize>().map_err(|_| bad("bad vertex count"))?),
            ["element", ..] => return Err(bad("only a vertex element is supported")),
            ["property", "float" | "float32", name] => {
                if count.is_none() {
                    return Err(bad("property before element"));
                }
                props.push(*name);
            }
            ["property", ..] => return Err(bad("only float properties are supported")),
            ["comment", ..] | ["obj_info", ..] | ["end_header"] | [] => {}
            _ => return Err(bad(&format!("unexpected header line {line:?}"))),
        }
    }
    let n = count.ok_or_else(|| bad("missing vertex element"))?;
    let slot: Vec<usize> = PROPS
        .iter()
        .map(|p| props.iter().position(|q| q == p).ok_or_else(|| bad(&format!("missing property {p}"))))
        .collect::<Result<_>>()?;
    let stride = props.len() * 4;
    let body = &bytes[end..];
    if body.len() != n * stride {
        return Err(bad(&format!("payload has {} bytes, header needs {}", body.len(), n * stride)));
    }
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for rec in body.chunks_exact(stride) {
        let f = |k: usize| {
            let o = slot[k] * 4;
            f32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]) as f64
        };
        points.push([f(0), f(1), f(2)]);
        normals.push([f(3), f(4), f(5)]);
    }
    OrientedPointCloud::new(points, normals).map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_ply(path: &Path) -> Result<OrientedPointCloud> {
    parse_ply(path, &read(path)?)
}
