//! Target normalization, masked per-head Huber loss and dynamic weight
//! averaging across heads.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::targets::{MaskedTargetVector, TARGET_COUNT};

/// How the per-head batch mean is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadCount {
    /// Samples with at least one label in the head.
    #[default]
    Labeled,
    /// Every sample in the batch.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub huber_delta: f64,
    pub epsilon: f64,
    pub temperature: f64,
    pub head_count: HeadCount,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { huber_delta: 1.0, epsilon: 1e-8, temperature: 2.0, head_count: HeadCount::Labeled }
    }
}

impl LossConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.huber_delta) && ok(self.epsilon) && ok(self.temperature) {
            Ok(())
        } else {
            Err(crate::Error::InvalidInput("huber_delta, epsilon and temperature must be positive".into()))
        }
    }
}

pub fn huber(r: f64, delta: f64) -> f64 {
    let a = r.abs();
    if a <= delta {
        0.5 * r * r
    } else {
        delta * (a - 0.5 * delta)
    }
}

pub fn huber_grad(r: f64, delta: f64) -> f64 {
    r.clamp(-delta, delta)
}

/// Masked Huber loss of one sample on one head:
/// `Σ huber(ŷ_j − y_j)·M_j / (Σ M_j + ε)`. Slices are head-local.
pub fn masked_sample_loss(pred: &[f64], target: &[f64], mask: &[bool], cfg: &LossConfig) -> f64 {
    masked_sample_loss_grad(pred, target, mask, cfg).0
}

/// Loss and its gradient with respect to `pred`. Masked entries get an
/// exact zero.
pub fn masked_sample_loss_grad(pred: &[f64], target: &[f64], mask: &[bool], cfg: &LossConfig) -> (f64, Vec<f64>) {
    let labeled = mask.iter().filter(|&&m| m).count() as f64;
    let denom = labeled + cfg.epsilon;
    let mut sum = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for j in 0..pred.len() {
        if mask[j] {
            let r = pred[j] - target[j];
            sum += huber(r, cfg.huber_delta);
            grad[j] = huber_grad(r, cfg.huber_delta) / denom;
        }
    }
    (sum / denom, grad)
}

/// `N_h` for one batch given each head's target indices.
pub fn head_counts(masks: &[[bool; TARGET_COUNT]], heads: &[Vec<usize>], mode: HeadCount) -> Vec<usize> {
    heads
        .iter()
        .map(|t| {
            let labeled = masks.iter().filter(|m| t.iter().any(|&j| m[j])).count();
            match (mode, labeled) {
                (_, 0) => 0,
                (HeadCount::Labeled, n) => n,
                (HeadCount::All, _) => masks.len(),
            }
        })
        .collect()
}

/// `Σ_h w_h · (1/N_h) Σ_i ℓ_{i,h}` over a batch of per-sample head losses
/// `losses[i][h]`. Heads with `N_h = 0` contribute nothing and report a
/// `None` mean.
pub fn total_loss(losses: &[Vec<f64>], counts: &[usize], weights: &[f64]) -> (f64, Vec<Option<f64>>) {
    let means: Vec<Option<f64>> = (0..counts.len())
        .map(|h| (counts[h] > 0).then(|| losses.iter().map(|l| l[h]).sum::<f64>() / counts[h] as f64))
        .collect();
    let total = means.iter().zip(weights).map(|(m, w)| m.map_or(0.0, |m| w * m)).sum();
    (total, means)
}

/// `w_h = H·exp(r_h/T) / Σ_k exp(r_k/T)`.
pub fn softmax_weights(ratios: &[f64], temperature: f64) -> Vec<f64> {
    let h = ratios.len() as f64;
    let top = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = ratios.iter().map(|r| libm::exp((r - top) / temperature)).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| h * v / z).collect()
}

/// Per-head epoch-mean loss history driving the head weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwaState {
    pub heads: usize,
    pub temperature: f64,
    /// One entry per finished epoch; `None` where the head saw no labels.
    pub history: Vec<Vec<Option<f64>>>,
}

impl DwaState {
    pub fn new(heads: usize, temperature: f64) -> Self {
        Self { heads, temperature, history: Vec::new() }
    }

    /// Records the mean head losses of a finished epoch.
    pub fn push(&mut self, means: Vec<Option<f64>>) {
        debug_assert_eq!(means.len(), self.heads);
        self.history.push(means);
    }

    /// Weights for the next epoch and the heads whose descent rate fell
    /// back to 1 because the older loss was zero or missing.
    pub fn weights(&self) -> (Vec<f64>, Vec<usize>) {
        let n = self.history.len();
        if n < 2 {
            return (vec![1.0; self.heads], Vec::new());
        }
        let (prev, older) = (&self.history[n - 1], &self.history[n - 2]);
        let mut neutral = Vec::new();
        let ratios: Vec<f64> = (0..self.heads)
            .map(|h| match (prev[h], older[h]) {
                (Some(a), Some(b)) if b != 0.0 => a / b,
                _ => {
                    neutral.push(h);
                    1.0
                }
            })
            .collect();
        (softmax_weights(&ratios, self.temperature), neutral)
    }
}

/// Per-target z-score statistics over labeled training values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: [f64; TARGET_COUNT],
    pub std: [f64; TARGET_COUNT],
}

impl Normalizer {
    /// Population statistics per target over labeled entries. Targets
    /// with fewer than two labels or zero spread keep `std = 1`.
    pub fn fit<'a, I: IntoIterator<Item = &'a MaskedTargetVector>>(samples: I) -> Self {
        let samples: Vec<&MaskedTargetVector> = samples.into_iter().collect();
        let mut mean = [0.0; TARGET_COUNT];
        let mut std = [1.0; TARGET_COUNT];
        for j in 0..TARGET_COUNT {
            let vals: Vec<f64> = samples.iter().filter_map(|s| s.get(j)).collect();
            if vals.is_empty() {
                continue;
            }
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            mean[j] = m;
            let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
            if vals.len() >= 2 && var > 0.0 {
                std[j] = libm::sqrt(var);
            }
        }
        Self { mean, std }
    }

    pub fn identity() -> Self {
        Self { mean: [0.0; TARGET_COUNT], std: [1.0; TARGET_COUNT] }
    }

    /// Masked entries pass through untouched.
    pub fn normalize(&self, t: &MaskedTargetVector) -> MaskedTargetVector {
        let mut out = t.clone();
        for j in 0..TARGET_COUNT {
            if t.mask[j] {
                out.values[j] = (t.values[j] - self.mean[j]) / self.std[j];
            }
        }
        out
    }

    pub fn denormalize(&self, t: &MaskedTargetVector) -> MaskedTargetVector {
        let mut out = t.clone();
        for j in 0..TARGET_COUNT {
            if t.mask[j] {
                out.values[j] = self.denormalize_value(j, t.values[j]);
            }
        }
        out
    }

    pub fn denormalize_value(&self, j: usize, z: f64) -> f64 {
        z * self.std[j] + self.mean[j]
    }
}
