//! Label volume to smoothed body surface.

use crate::error::Result;
use crate::meshkit::{laplacian_smooth, marching_cubes, SmoothConfig, TriMesh};
use crate::volgrid::{body_mask, fill_cavities, sample_signed_field, LabelVolume};

/// Iso level used on binary body masks.
pub const BODY_ISO: f64 = 0.5;

/// Body mask, per-slice cavity fill, marching cubes at `iso`, then
/// Laplacian smoothing (skipped when `smooth.iterations == 0`).
pub fn extract_surface(v: &LabelVolume, iso: f64, smooth: SmoothConfig) -> Result<TriMesh> {
    let mask = fill_cavities(&body_mask(v));
    let mesh = marching_cubes(&sample_signed_field(&mask), iso)?;
    if smooth.iterations == 0 || mesh.is_empty() {
        return Ok(mesh);
    }
    laplacian_smooth(&mesh, smooth.lambda, smooth.iterations)
}
