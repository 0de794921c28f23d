//! The ten regression targets and their presence mask.

use alloc::string::String;

use serde::{Deserialize, Serialize};

pub const TARGET_COUNT: usize = 10;

/// Canonical target order: height; chest, waist, hip; SAT, IMVAT, VAT,
/// body, LT (lean tissue), MV (muscle volume).
pub const TARGET_NAMES: [&str; TARGET_COUNT] =
    ["height", "chest", "waist", "hip", "SAT", "IMVAT", "VAT", "body", "LT", "MV"];

pub const TARGET_UNITS: [&str; TARGET_COUNT] = ["cm", "cm", "cm", "cm", "L", "L", "L", "L", "L", "L"];

pub mod index {
    pub const HEIGHT: usize = 0;
    pub const CHEST: usize = 1;
    pub const WAIST: usize = 2;
    pub const HIP: usize = 3;
    pub const SAT: usize = 4;
    pub const IMVAT: usize = 5;
    pub const VAT: usize = 6;
    pub const BODY: usize = 7;
    pub const LT: usize = 8;
    pub const MV: usize = 9;
}

pub fn target_index(name: &str) -> Option<usize> {
    TARGET_NAMES.iter().position(|n| *n == name)
}

/// Target values with a per-target presence bit. Values behind a cleared
/// bit carry no meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedTargetVector {
    pub id: String,
    pub values: [f64; TARGET_COUNT],
    pub mask: [bool; TARGET_COUNT],
}

impl MaskedTargetVector {
    pub fn get(&self, j: usize) -> Option<f64> {
        self.mask[j].then_some(self.values[j])
    }

    /// Copy with only the targets in `keep` left labeled.
    pub fn restricted(&self, keep: &[usize]) -> Self {
        let mut out = self.clone();
        for (j, m) in out.mask.iter_mut().enumerate() {
            *m = *m && keep.contains(&j);
        }
        out
    }
}
