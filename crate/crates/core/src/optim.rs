//! AdamW with decoupled weight decay, global-norm clipping and a warmup +
//! cosine learning rate schedule.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamBlock;

/// Linear ramp from 0 over `warmup` epochs, then cosine decay to 0 at
/// `epochs`. `t` may be fractional.
pub fn lr_schedule(t: f64, base: f64, warmup: f64, epochs: f64) -> f64 {
    if t < warmup {
        return base * t / warmup;
    }
    if epochs <= warmup {
        return base;
    }
    let p = ((t - warmup) / (epochs - warmup)).min(1.0);
    base * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * p))
}

pub fn global_norm(grad: &[f64]) -> f64 {
    libm::sqrt(grad.iter().map(|g| g * g).sum())
}

/// Rescales `grad` to norm at most `max_norm`; returns the norm before
/// clipping.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let n = global_norm(grad);
    if n > max_norm && n > 0.0 {
        let s = max_norm / n;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    n
}

/// Errors with the name of the first block holding a NaN or infinity.
pub fn check_finite(grad: &[f64], blocks: &[ParamBlock]) -> Result<()> {
    for b in blocks {
        if grad[b.offset..b.offset + b.len].iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { block: b.name.clone() });
        }
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { block: String::from("<unnamed>") });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamW {
    pub fn new(n: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    /// One update. Each range in `groups` uses its own learning rate; decay
    /// is applied to the parameters directly, apart from the moments.
    pub fn update(&mut self, params: &mut [f64], grad: &[f64], groups: &[(Range<usize>, f64)], weight_decay: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - libm::pow(self.beta1, t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, t as f64);
        for (range, lr) in groups {
            for i in range.clone() {
                let g = grad[i];
                self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                let mhat = self.m[i] / c1;
                let vhat = self.v[i] / c2;
                params[i] -= lr * weight_decay * params[i];
                params[i] -= lr * mhat / (libm::sqrt(vhat) + self.eps);
            }
        }
    }
}
