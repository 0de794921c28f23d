use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::layers::{gelu, gelu_grad, layer_norm, layer_norm_backward, linear, linear_backward};

/// One dense layer, optionally followed by layer norm, GELU and dropout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseSpec {
    pub n_in: usize,
    pub n_out: usize,
    pub activate: bool,
    pub dropout: bool,
}

impl DenseSpec {
    fn param_count(&self) -> usize {
        self.n_out * self.n_in + self.n_out + if self.activate { 2 * self.n_out } else { 0 }
    }
}

/// Named slice of a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Stack of dense layers over a contiguous parameter slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseSpec>,
    dropout: f64,
}

/// Activations saved for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    inputs: Vec<Vec<f64>>,
    normed: Vec<Vec<f64>>,
    xhat: Vec<Vec<f64>>,
    inv_std: Vec<f64>,
    keep: Vec<Vec<bool>>,
}

struct LayerParams<'a> {
    w: &'a [f64],
    b: &'a [f64],
    gamma: &'a [f64],
    beta: &'a [f64],
}

impl Mlp {
    pub fn new(layers: Vec<DenseSpec>, dropout: f64) -> Self {
        Self { layers, dropout }
    }

    pub fn layers(&self) -> &[DenseSpec] {
        &self.layers
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseSpec::param_count).sum()
    }

    /// Per-tensor blocks, offsets relative to `base`.
    pub fn blocks(&self, prefix: &str, base: usize) -> Vec<ParamBlock> {
        let mut out = Vec::new();
        let mut off = base;
        for (l, spec) in self.layers.iter().enumerate() {
            let mut push = |name: &str, len: usize| {
                out.push(ParamBlock { name: format!("{prefix}.{l}.{name}"), offset: off, len });
                off += len;
            };
            push("weight", spec.n_out * spec.n_in);
            push("bias", spec.n_out);
            if spec.activate {
                push("norm_gamma", spec.n_out);
                push("norm_beta", spec.n_out);
            }
        }
        out
    }

    fn split<'a>(&self, params: &'a [f64]) -> Vec<LayerParams<'a>> {
        let mut rest = params;
        self.layers
            .iter()
            .map(|s| {
                let (w, r) = rest.split_at(s.n_out * s.n_in);
                let (b, r) = r.split_at(s.n_out);
                let (gamma, beta, r) = if s.activate {
                    let (g, r) = r.split_at(s.n_out);
                    let (bt, r) = r.split_at(s.n_out);
                    (g, bt, r)
                } else {
                    (&r[..0], &r[..0], r)
                };
                rest = r;
                LayerParams { w, b, gamma, beta }
            })
            .collect()
    }

    /// Uniform `±sqrt(3 / fan_in)` weights (unit gain) and unit norm gains.
    /// Biases of normalized layers are uniform `±1/sqrt(fan_in)`, since a
    /// zero bias would make the normalized output blind to input scale.
    /// Output biases start at zero.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R, params: &mut [f64]) {
        let mut off = 0;
        for s in &self.layers {
            let bound = libm::sqrt(3.0 / s.n_in as f64);
            for p in &mut params[off..off + s.n_out * s.n_in] {
                *p = rng.random_range(-bound..bound);
            }
            off += s.n_out * s.n_in;
            let bias_bound = 1.0 / libm::sqrt(s.n_in as f64);
            for p in &mut params[off..off + s.n_out] {
                *p = if s.activate { rng.random_range(-bias_bound..bias_bound) } else { 0.0 };
            }
            off += s.n_out;
            if s.activate {
                params[off..off + s.n_out].iter_mut().for_each(|p| *p = 1.0);
                off += s.n_out;
                params[off..off + s.n_out].iter_mut().for_each(|p| *p = 0.0);
                off += s.n_out;
            }
        }
    }

    /// Forward pass without caching.
    pub fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for (s, p) in self.layers.iter().zip(self.split(params)) {
            h = linear(p.w, p.b, &h);
            if s.activate {
                h = layer_norm(p.gamma, p.beta, &h).0.into_iter().map(gelu).collect();
            }
        }
        h
    }

    /// Forward pass keeping activations. Dropout is applied only when `rng`
    /// is given.
    pub fn forward_cached<R: Rng + ?Sized>(
        &self,
        params: &[f64],
        x: &[f64],
        mut rng: Option<&mut R>,
    ) -> (Vec<f64>, MlpCache) {
        let mut cache = MlpCache::default();
        let mut h = x.to_vec();
        let scale = 1.0 / (1.0 - self.dropout);
        for (s, p) in self.layers.iter().zip(self.split(params)) {
            let z = linear(p.w, p.b, &h);
            cache.inputs.push(h);
            if s.activate {
                let (normed, xhat, inv) = layer_norm(p.gamma, p.beta, &z);
                let mut out: Vec<f64> = normed.iter().map(|v| gelu(*v)).collect();
                let mut keep = Vec::new();
                if let (true, Some(r)) = (s.dropout && self.dropout > 0.0, rng.as_deref_mut()) {
                    keep = (0..out.len()).map(|_| r.random::<f64>() >= self.dropout).collect();
                    for (o, k) in out.iter_mut().zip(&keep) {
                        *o = if *k { *o * scale } else { 0.0 };
                    }
                }
                cache.normed.push(normed);
                cache.xhat.push(xhat);
                cache.inv_std.push(inv);
                cache.keep.push(keep);
                h = out;
            } else {
                cache.normed.push(Vec::new());
                cache.xhat.push(Vec::new());
                cache.inv_std.push(0.0);
                cache.keep.push(Vec::new());
                h = z;
            }
        }
        (h, cache)
    }

    /// Accumulates parameter gradients into `grad` (same layout as
    /// `params`) and returns the input gradient.
    pub fn backward(&self, params: &[f64], cache: &MlpCache, dy: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let layer_params = self.split(params);
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for s in &self.layers {
            offsets.push(off);
            off += s.param_count();
        }
        let scale = 1.0 / (1.0 - self.dropout);
        let mut d = dy.to_vec();
        for l in (0..self.layers.len()).rev() {
            let s = self.layers[l];
            let p = &layer_params[l];
            let g = &mut grad[offsets[l]..offsets[l] + s.param_count()];
            let (gw, rest) = g.split_at_mut(s.n_out * s.n_in);
            let (gb, rest) = rest.split_at_mut(s.n_out);
            if s.activate {
                if !cache.keep[l].is_empty() {
                    for (v, k) in d.iter_mut().zip(&cache.keep[l]) {
                        *v = if *k { *v * scale } else { 0.0 };
                    }
                }
                for (v, z) in d.iter_mut().zip(&cache.normed[l]) {
                    *v *= gelu_grad(*z);
                }
                let (gg, gbeta) = rest.split_at_mut(s.n_out);
                d = layer_norm_backward(p.gamma, &cache.xhat[l], cache.inv_std[l], &d, gg, gbeta);
            }
            d = linear_backward(p.w, &cache.inputs[l], &d, gw, gb);
        }
        d
    }
}
