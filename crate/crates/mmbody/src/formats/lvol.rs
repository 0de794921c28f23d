//! Two-file volumes: a JSON header (`*.lvol.json`) next to a raw
//! little-endian payload (`*.lvol.raw`), x fastest, then y, then z.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mmbody_core::scan::{IntensityVolume, Panel};
use mmbody_core::volgrid::{GridGeometry, LabelVolume};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{read, read_json, write_atomic, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    U8,
    F32,
}

fn is_u8(d: &Dtype) -> bool {
    *d == Dtype::U8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LvolHeader {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
    pub height_axis: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, String>,
    #[serde(default = "default_dtype", skip_serializing_if = "is_u8")]
    pub dtype: Dtype,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel: Option<Panel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_axis: Option<usize>,
}

fn default_dtype() -> Dtype {
    Dtype::U8
}

impl LvolHeader {
    fn geometry(&self, path: &Path) -> Result<GridGeometry> {
        GridGeometry::new(self.dims, self.spacing_mm, self.origin_mm, self.height_axis)
            .map_err(|e| Error::format(path, e.to_string()))
    }

    fn from_geometry(g: &GridGeometry) -> Self {
        Self {
            dims: g.dims,
            spacing_mm: g.spacing_mm,
            origin_mm: g.origin_mm,
            height_axis: g.height_axis,
            labels: BTreeMap::new(),
            dtype: Dtype::U8,
            panel: None,
            depth_axis: None,
        }
    }
}

/// `a/b.lvol.json` → `a/b.lvol.raw`.
pub fn payload_path(header: &Path) -> Result<PathBuf> {
    let name = header.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let stem = name
        .strip_suffix(".lvol.json")
        .ok_or_else(|| Error::format(header, "volume header must end in .lvol.json"))?;
    Ok(header.with_file_name(format!("{stem}.lvol.raw")))
}

pub fn write_label_volume(path: &Path, v: &LabelVolume) -> Result<()> {
    let raw = payload_path(path)?;
    let mut h = LvolHeader::from_geometry(v.geometry());
    h.labels = v.legend().iter().map(|(k, n)| (k.to_string(), n.clone())).collect();
    write_atomic(&raw, v.voxels())?;
    write_json(path, &h)
}

fn read_header(path: &Path) -> Result<(LvolHeader, GridGeometry, Vec<u8>)> {
    let h: LvolHeader = read_json(path)?;
    let g = h.geometry(path)?;
    let bytes = read(&payload_path(path)?)?;
    Ok((h, g, bytes))
}

pub fn read_label_volume(path: &Path) -> Result<LabelVolume> {
    let (h, g, bytes) = read_header(path)?;
    if h.dtype != Dtype::U8 {
        return Err(Error::format(path, "label volumes must have dtype u8"));
    }
    let mut legend = BTreeMap::new();
    for (k, name) in &h.labels {
        let id: u8 = k.parse().map_err(|_| Error::format(path, format!("label id {k:?} is not in 0..=255")))?;
        legend.insert(id, name.clone());
    }
    LabelVolume::new(g, bytes, legend).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_intensity_volume(path: &Path, v: &IntensityVolume) -> Result<()> {
    let raw = payload_path(path)?;
    let mut h = LvolHeader::from_geometry(&v.geometry);
    h.dtype = Dtype::F32;
    h.panel = Some(v.panel);
    h.depth_axis = Some(v.depth_axis);
    let bytes: Vec<u8> = v.intensities.iter().flat_map(|x| x.to_le_bytes()).collect();
    write_atomic(&raw, &bytes)?;
    write_json(path, &h)
}

pub fn read_intensity_volume(path: &Path) -> Result<IntensityVolume> {
    let (h, g, bytes) = read_header(path)?;
    if h.dtype != Dtype::F32 {
        return Err(Error::format(path, "intensity volumes must have dtype f32"));
    }
    let panel = h.panel.ok_or_else(|| Error::format(path, "intensity volume needs a panel field"))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::format(path, "payload length is not a multiple of 4"));
    }
    let values = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    let depth_axis = h.depth_axis.unwrap_or(1);
    IntensityVolume::new(g, depth_axis, values, panel).map_err(|e| Error::format(path, e.to_string()))
}
