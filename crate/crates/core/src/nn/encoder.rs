use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::mlp::{DenseSpec, Mlp, MlpCache, ParamBlock};
use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Input channels per point: normalized xyz, duplicated.
pub const INPUT_CHANNELS: usize = 6;
/// Millimetres per input unit.
pub const INPUT_SCALE_MM: f64 = 1000.0;

/// Centers a cloud on its centroid, converts mm to m and duplicates the
/// coordinates into six channels.
pub fn input_features(points: &[Vec3]) -> Result<Vec<[f64; INPUT_CHANNELS]>> {
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for k in 0..3 {
            c[k] += p[k];
        }
    }
    let c = c.map(|v| v / n);
    Ok(points
        .iter()
        .map(|p| {
            let q = [0, 1, 2].map(|k| (p[k] - c[k]) / INPUT_SCALE_MM);
            [q[0], q[1], q[2], q[0], q[1], q[2]]
        })
        .collect())
}

/// Point cloud encoder producing a fixed-size feature from a variable
/// number of points. Parameters live in a caller-owned flat slice.
pub trait PointEncoder: Send + Sync {
    type Cache: Send;

    fn feature_dim(&self) -> usize;
    fn param_count(&self) -> usize;
    fn blocks(&self, prefix: &str, base: usize) -> Vec<ParamBlock>;
    fn init<R: Rng + ?Sized>(&self, rng: &mut R, params: &mut [f64]);
    fn forward(&self, params: &[f64], input: &[[f64; INPUT_CHANNELS]]) -> Result<(Vec<f64>, Self::Cache)>;
    /// Accumulates `∂feature/∂params · d_feature` into `grad`.
    fn backward(
        &self,
        params: &[f64],
        input: &[[f64; INPUT_CHANNELS]],
        cache: &Self::Cache,
        d_feature: &[f64],
        grad: &mut [f64],
    );
}

/// Shared per-point MLP followed by a channelwise max over points.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPoolEncoder {
    mlp: Mlp,
}

impl MaxPoolEncoder {
    /// `widths` are the per-point layer outputs; the last is the feature size.
    pub fn new(widths: &[usize]) -> Self {
        assert!(!widths.is_empty());
        let mut n_in = INPUT_CHANNELS;
        let layers = widths
            .iter()
            .map(|&n_out| {
                let s = DenseSpec { n_in, n_out, activate: true, dropout: false };
                n_in = n_out;
                s
            })
            .collect();
        Self { mlp: Mlp::new(layers, 0.0) }
    }

    pub fn widths(&self) -> Vec<usize> {
        self.mlp.layers().iter().map(|l| l.n_out).collect()
    }

    /// Per-point activations before pooling.
    pub fn point_feature(&self, params: &[f64], x: &[f64; INPUT_CHANNELS]) -> Vec<f64> {
        self.mlp.forward(params, x)
    }
}

impl PointEncoder for MaxPoolEncoder {
    /// Index of the winning point per channel.
    type Cache = Vec<u32>;

    fn feature_dim(&self) -> usize {
        self.mlp.n_out()
    }

    fn param_count(&self) -> usize {
        self.mlp.param_count()
    }

    fn blocks(&self, prefix: &str, base: usize) -> Vec<ParamBlock> {
        self.mlp.blocks(prefix, base)
    }

    fn init<R: Rng + ?Sized>(&self, rng: &mut R, params: &mut [f64]) {
        self.mlp.init(rng, params);
    }

    fn forward(&self, params: &[f64], input: &[[f64; INPUT_CHANNELS]]) -> Result<(Vec<f64>, Vec<u32>)> {
        if input.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let d = self.feature_dim();
        let mut best = vec![f64::NEG_INFINITY; d];
        let mut arg = vec![0u32; d];
        for (i, x) in input.iter().enumerate() {
            let f = self.point_feature(params, x);
            for c in 0..d {
                if f[c] > best[c] {
                    best[c] = f[c];
                    arg[c] = i as u32;
                }
            }
        }
        Ok((best, arg))
    }

    fn backward(
        &self,
        params: &[f64],
        input: &[[f64; INPUT_CHANNELS]],
        cache: &Vec<u32>,
        d_feature: &[f64],
        grad: &mut [f64],
    ) {
        let mut winners: Vec<u32> = cache.clone();
        winners.sort_unstable();
        winners.dedup();
        for w in winners {
            let dy: Vec<f64> = cache
                .iter()
                .zip(d_feature)
                .map(|(&a, &g)| if a == w { g } else { 0.0 })
                .collect();
            if dy.iter().all(|&g| g == 0.0) {
                continue;
            }
            let (_, c): (_, MlpCache) = self.mlp.forward_cached::<crate::rng::StreamRng>(params, &input[w as usize], None);
            self.mlp.backward(params, &c, &dy, grad);
        }
    }
}
