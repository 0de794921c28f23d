use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use super::encoder::{MaxPoolEncoder, PointEncoder, INPUT_CHANNELS};
use super::mlp::{DenseSpec, Mlp, MlpCache, ParamBlock};
use crate::error::{Error, Result};
use crate::rng;
use crate::targets::TARGET_COUNT;

/// A regression head and the canonical target indices it predicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub name: String,
    pub targets: Vec<usize>,
}

/// Height, anthropometry and body composition heads.
pub fn default_heads() -> Vec<HeadSpec> {
    let h = |name: &str, targets: &[usize]| HeadSpec { name: name.to_string(), targets: targets.to_vec() };
    vec![h("H", &[0]), h("A", &[1, 2, 3]), h("BC", &[4, 5, 6, 7, 8, 9])]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub encoder_widths: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub dropout: f64,
    pub heads: Vec<HeadSpec>,
}

impl ModelConfig {
    /// 512-d shared feature.
    pub fn full() -> Self {
        Self { encoder_widths: vec![64, 128, 512], head_hidden: vec![256, 128], dropout: 0.1, heads: default_heads() }
    }

    /// 128-d shared feature for quick runs.
    pub fn desk() -> Self {
        Self { encoder_widths: vec![32, 64, 128], ..Self::full() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_widths.is_empty() || self.encoder_widths.contains(&0) || self.head_hidden.contains(&0) {
            return Err(Error::InvalidInput("layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidInput("dropout must be in [0, 1)".into()));
        }
        let mut seen = [false; TARGET_COUNT];
        for h in &self.heads {
            if h.targets.is_empty() {
                return Err(Error::InvalidInput(alloc::format!("head {} has no targets", h.name)));
            }
            for &t in &h.targets {
                if t >= TARGET_COUNT || seen[t] {
                    return Err(Error::InvalidInput(alloc::format!("head {}: bad or repeated target {t}", h.name)));
                }
                seen[t] = true;
            }
        }
        Ok(())
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// Which parameters a gradient or learning rate applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Encoder,
    Head(usize),
}

/// Shared encoder plus one MLP head per target group, all parameters in a
/// single flat vector: encoder first, then heads in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<E: PointEncoder = MaxPoolEncoder> {
    pub encoder: E,
    heads: Vec<HeadSpec>,
    head_mlps: Vec<Mlp>,
    pub params: Vec<f64>,
}

/// Activations from one forward pass over a sample.
pub struct ForwardPass<C> {
    pub feature: Vec<f64>,
    encoder_cache: C,
    /// `None` for heads that were not evaluated.
    pub outputs: Vec<Option<Vec<f64>>>,
    head_caches: Vec<Option<MlpCache>>,
}

fn head_mlp(n_in: usize, hidden: &[usize], n_out: usize, dropout: f64) -> Mlp {
    let mut layers = Vec::new();
    let mut prev = n_in;
    for &h in hidden {
        layers.push(DenseSpec { n_in: prev, n_out: h, activate: true, dropout: true });
        prev = h;
    }
    layers.push(DenseSpec { n_in: prev, n_out, activate: false, dropout: false });
    Mlp::new(layers, dropout)
}

impl Model<MaxPoolEncoder> {
    /// Max-pool encoder model with seeded initialization.
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut m = Self::with_encoder(MaxPoolEncoder::new(&config.encoder_widths), config)?;
        m.init(seed);
        Ok(m)
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            encoder_widths: self.encoder.widths(),
            head_hidden: self.head_mlps.first().map_or_else(Vec::new, |m| {
                m.layers()[..m.layers().len() - 1].iter().map(|l| l.n_out).collect()
            }),
            dropout: self.head_mlps.first().map_or(0.1, Mlp::dropout),
            heads: self.heads.clone(),
        }
    }
}

impl<E: PointEncoder> Model<E> {
    /// Zero parameters; call [`Model::init`] or assign `params`.
    pub fn with_encoder(encoder: E, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let d = encoder.feature_dim();
        let head_mlps: Vec<Mlp> = config
            .heads
            .iter()
            .map(|h| head_mlp(d, &config.head_hidden, h.targets.len(), config.dropout))
            .collect();
        let n = encoder.param_count() + head_mlps.iter().map(Mlp::param_count).sum::<usize>();
        Ok(Self { encoder, heads: config.heads.clone(), head_mlps, params: vec![0.0; n] })
    }

    /// Encoder on stream 0, head `h` on stream `h + 1`.
    pub fn init(&mut self, seed: u64) {
        let enc = self.encoder_len();
        self.encoder.init(&mut rng::stream(seed, 0), &mut self.params[..enc]);
        for h in 0..self.heads.len() {
            let r = self.head_range(h);
            self.head_mlps[h].init(&mut rng::stream(seed, h as u64 + 1), &mut self.params[r]);
        }
    }

    pub fn heads(&self) -> &[HeadSpec] {
        &self.heads
    }

    pub fn head_index(&self, name: &str) -> Option<usize> {
        self.heads.iter().position(|h| h.name == name)
    }

    pub fn encoder_len(&self) -> usize {
        self.encoder.param_count()
    }

    pub fn head_range(&self, h: usize) -> Range<usize> {
        let start = self.encoder_len() + self.head_mlps[..h].iter().map(Mlp::param_count).sum::<usize>();
        start..start + self.head_mlps[h].param_count()
    }

    pub fn group_ranges(&self) -> Vec<(ParamGroup, Range<usize>)> {
        let mut out = vec![(ParamGroup::Encoder, 0..self.encoder_len())];
        out.extend((0..self.heads.len()).map(|h| (ParamGroup::Head(h), self.head_range(h))));
        out
    }

    /// Named tensors in parameter order.
    pub fn blocks(&self) -> Vec<ParamBlock> {
        let mut out = self.encoder.blocks("encoder", 0);
        for (h, spec) in self.heads.iter().enumerate() {
            let prefix = alloc::format!("head_{}", spec.name);
            out.extend(self.head_mlps[h].blocks(&prefix, self.head_range(h).start));
        }
        out
    }

    /// Drops a head and its parameters; other parameters are unchanged.
    pub fn without_head(&self, name: &str) -> Option<Self>
    where
        E: Clone,
    {
        let h = self.head_index(name)?;
        let r = self.head_range(h);
        let mut params = self.params[..r.start].to_vec();
        params.extend_from_slice(&self.params[r.end..]);
        let mut heads = self.heads.clone();
        heads.remove(h);
        let mut head_mlps = self.head_mlps.clone();
        head_mlps.remove(h);
        Some(Self { encoder: self.encoder.clone(), heads, head_mlps, params })
    }

    /// Forward pass with parameters `params`. `active[h] == false` skips head
    /// `h`. Dropout is on iff `dropout_seed` is given; each head draws from a
    /// stream keyed by its first target so heads do not perturb each other.
    pub fn forward_with(
        &self,
        params: &[f64],
        input: &[[f64; INPUT_CHANNELS]],
        active: &[bool],
        dropout_seed: Option<u64>,
    ) -> Result<ForwardPass<E::Cache>> {
        let enc = self.encoder_len();
        let (feature, encoder_cache) = self.encoder.forward(&params[..enc], input)?;
        let mut outputs = Vec::with_capacity(self.heads.len());
        let mut head_caches = Vec::with_capacity(self.heads.len());
        for h in 0..self.heads.len() {
            if !active.get(h).copied().unwrap_or(true) {
                outputs.push(None);
                head_caches.push(None);
                continue;
            }
            let p = &params[self.head_range(h)];
            let (y, c) = match dropout_seed {
                Some(s) => {
                    let mut r = rng::stream(s, self.heads[h].targets[0] as u64);
                    self.head_mlps[h].forward_cached(p, &feature, Some(&mut r))
                }
                None => self.head_mlps[h].forward_cached::<rng::StreamRng>(p, &feature, None),
            };
            outputs.push(Some(y));
            head_caches.push(Some(c));
        }
        Ok(ForwardPass { feature, encoder_cache, outputs, head_caches })
    }

    /// Accumulates parameter gradients given `d_outputs[h]`, the loss
    /// gradient for each evaluated head (`None` skips the head).
    pub fn backward_with(
        &self,
        params: &[f64],
        input: &[[f64; INPUT_CHANNELS]],
        pass: &ForwardPass<E::Cache>,
        d_outputs: &[Option<Vec<f64>>],
        grad: &mut [f64],
    ) {
        let mut d_feature = vec![0.0; pass.feature.len()];
        let mut any = false;
        for h in 0..self.heads.len() {
            let (Some(dy), Some(cache)) = (d_outputs.get(h).and_then(Option::as_ref), &pass.head_caches[h]) else {
                continue;
            };
            let r = self.head_range(h);
            let dx = self.head_mlps[h].backward(&params[r.clone()], cache, dy, &mut grad[r]);
            for (a, b) in d_feature.iter_mut().zip(&dx) {
                *a += b;
            }
            any = true;
        }
        if any {
            let enc = self.encoder_len();
            self.encoder.backward(&params[..enc], input, &pass.encoder_cache, &d_feature, &mut grad[..enc]);
        }
    }

    /// Evaluation-mode prediction in normalized units, scattered to the
    /// canonical target order. Targets without a head are NaN.
    pub fn predict(&self, input: &[[f64; INPUT_CHANNELS]]) -> Result<[f64; TARGET_COUNT]> {
        let pass = self.forward_with(&self.params, input, &[], None)?;
        let mut out = [f64::NAN; TARGET_COUNT];
        for (spec, y) in self.heads.iter().zip(&pass.outputs) {
            for (&t, v) in spec.targets.iter().zip(y.as_ref().unwrap()) {
                out[t] = *v;
            }
        }
        Ok(out)
    }
}
