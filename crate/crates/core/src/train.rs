//! Seeded mini-batch training of the multi-head model.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::loss::{head_counts, masked_sample_loss_grad, total_loss, DwaState, LossConfig, Normalizer};
use crate::nn::{input_features, Model, ModelConfig, ParamGroup, INPUT_CHANNELS};
use crate::optim::{check_finite, clip_global_norm, lr_schedule, AdamW};
use crate::targets::{MaskedTargetVector, TARGET_COUNT};
use crate::{par, rng};

/// A point cloud in mm with its (unnormalized) targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub points: Vec<Vec3>,
    pub targets: MaskedTargetVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_encoder: f64,
    pub lr_heads: f64,
    pub warmup_epochs: usize,
    pub weight_decay: f64,
    /// `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub seed: u64,
    pub dwa: bool,
    pub loss: LossConfig,
    pub model: ModelConfig,
    /// Points fed to the encoder per sample, subsampled once per sample id.
    pub points_per_sample: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            batch_size: 6,
            lr_encoder: 5e-5,
            lr_heads: 1e-4,
            warmup_epochs: 10,
            weight_decay: 0.01,
            clip_norm: Some(1.0),
            seed: 0,
            dwa: true,
            loss: LossConfig::default(),
            model: ModelConfig::desk(),
            points_per_sample: 1024,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.into()));
        if self.epochs == 0 || self.batch_size == 0 || self.points_per_sample == 0 {
            return bad("epochs, batch_size and points_per_sample must be positive");
        }
        if !(self.lr_encoder > 0.0 && self.lr_heads > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.warmup_epochs > self.epochs {
            return bad("warmup_epochs exceeds epochs");
        }
        if !(self.weight_decay >= 0.0) || self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return bad("weight_decay must be >= 0 and clip_norm > 0");
        }
        self.loss.validate()?;
        self.model.validate()
    }
}

/// Trained weights plus everything needed to reproduce predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub params: Vec<f64>,
    pub normalizer: Normalizer,
    pub seed: u64,
    pub points_per_sample: usize,
    /// Epoch (1-based) the weights were taken from.
    pub epoch: usize,
}

impl Checkpoint {
    pub fn build_model(&self) -> Result<Model> {
        let mut m = Model::new(&self.model, 0)?;
        if m.params.len() != self.params.len() {
            return Err(Error::Format(alloc::format!(
                "parameter count {} does not match architecture ({})",
                self.params.len(),
                m.params.len()
            )));
        }
        m.params.clone_from(&self.params);
        Ok(m)
    }

    /// Predictions in target units; targets without a head are NaN.
    /// `id` keys the point subsample exactly as during training.
    pub fn predict(&self, model: &Model, id: &str, points: &[Vec3]) -> Result<[f64; TARGET_COUNT]> {
        let x = prepare_input(points, id, self.points_per_sample, self.seed)?;
        self.predict_prepared(model, &x)
    }

    pub fn predict_prepared(&self, model: &Model, x: &[[f64; INPUT_CHANNELS]]) -> Result<[f64; TARGET_COUNT]> {
        let z = model.predict(x)?;
        Ok(core::array::from_fn(|j| self.normalizer.denormalize_value(j, z[j])))
    }
}

/// One record per epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr_encoder: f64,
    pub lr_heads: f64,
    pub weights: Vec<f64>,
    /// Epoch mean of batch head losses; `None` if the head saw no labels.
    pub head_losses: Vec<Option<f64>>,
    pub train_total: f64,
    pub val_total: Option<f64>,
    /// Heads whose descent rate fell back to 1.
    pub dwa_neutral: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Lowest validation loss, or the last epoch without a validation set.
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub head_names: Vec<String>,
    pub log: Vec<EpochRecord>,
}

/// Gradient of one optimizer step, before clipping.
pub struct StepView<'a> {
    pub epoch: usize,
    pub step: usize,
    pub head_counts: &'a [usize],
    pub grad: &'a [f64],
    pub model: &'a Model,
}

fn id_hash(id: &str) -> u64 {
    // FNV-1a
    id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Deterministic subsample (keyed by seed and sample id) followed by the
/// encoder input transform.
pub fn prepare_input(points: &[Vec3], id: &str, n: usize, seed: u64) -> Result<Vec<[f64; INPUT_CHANNELS]>> {
    if points.len() <= n {
        return input_features(points);
    }
    let mut r = rng::stream(rng::child_seed(seed, id_hash(id)), 0);
    let mut idx = rand::seq::index::sample(&mut r, points.len(), n).into_vec();
    idx.sort_unstable();
    let sub: Vec<Vec3> = idx.into_iter().map(|i| points[i]).collect();
    input_features(&sub)
}

struct Prepared {
    input: Vec<[f64; INPUT_CHANNELS]>,
    target: MaskedTargetVector,
}

fn prepare_all(samples: &[Sample], norm: &Normalizer, cfg: &TrainConfig) -> Result<Vec<Prepared>> {
    par::map_indexed(samples.len(), |i| {
        let s = &samples[i];
        Ok(Prepared {
            input: prepare_input(&s.points, &s.id, cfg.points_per_sample, cfg.seed)?,
            target: norm.normalize(&s.targets),
        })
    })
    .into_iter()
    .collect()
}

fn head_slices(t: &MaskedTargetVector, targets: &[usize]) -> (Vec<f64>, Vec<bool>) {
    (targets.iter().map(|&j| t.values[j]).collect(), targets.iter().map(|&j| t.mask[j]).collect())
}

/// Uniform-weight loss over a split in evaluation mode.
fn split_loss(model: &Model, data: &[Prepared], cfg: &TrainConfig) -> Result<Option<f64>> {
    if data.is_empty() {
        return Ok(None);
    }
    let targets: Vec<Vec<usize>> = model.heads().iter().map(|h| h.targets.clone()).collect();
    let per_sample: Vec<Result<Vec<f64>>> = par::map_indexed(data.len(), |i| {
        let pass = model.forward_with(&model.params, &data[i].input, &[], None)?;
        Ok(targets
            .iter()
            .zip(&pass.outputs)
            .map(|(t, y)| {
                let (v, m) = head_slices(&data[i].target, t);
                masked_sample_loss_grad(y.as_ref().unwrap(), &v, &m, &cfg.loss).0
            })
            .collect())
    });
    let losses = per_sample.into_iter().collect::<Result<Vec<_>>>()?;
    let masks: Vec<_> = data.iter().map(|p| p.target.mask).collect();
    let counts = head_counts(&masks, &targets, cfg.loss.head_count);
    Ok(Some(total_loss(&losses, &counts, &vec![1.0; targets.len()]).0))
}

/// Loss and summed parameter gradient of one batch.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    /// `losses[i][h]`, zero where sample `i` has no label in head `h`.
    pub losses: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    pub head_means: Vec<Option<f64>>,
    pub total: f64,
    pub grad: Vec<f64>,
}

/// Weighted masked loss over a batch of normalized targets and its exact
/// gradient. Heads without labels for a sample are neither evaluated nor
/// backpropagated for it. Dropout is on iff `dropout_seed` is given.
pub fn batch_gradient(
    model: &Model,
    inputs: &[&[[f64; INPUT_CHANNELS]]],
    targets: &[&MaskedTargetVector],
    weights: &[f64],
    loss: &LossConfig,
    dropout_seed: Option<u64>,
) -> Result<BatchGradient> {
    let head_targets: Vec<Vec<usize>> = model.heads().iter().map(|h| h.targets.clone()).collect();
    let n_heads = head_targets.len();
    let masks: Vec<_> = targets.iter().map(|t| t.mask).collect();
    let counts = head_counts(&masks, &head_targets, loss.head_count);
    let per_sample: Vec<Result<(Vec<f64>, Vec<f64>)>> = par::map_indexed(inputs.len(), |k| {
        let t = targets[k];
        let active: Vec<bool> = head_targets
            .iter()
            .enumerate()
            .map(|(h, ts)| counts[h] > 0 && ts.iter().any(|&j| t.mask[j]))
            .collect();
        let seed = dropout_seed.map(|s| rng::child_seed(s, k as u64));
        let pass = model.forward_with(&model.params, inputs[k], &active, seed)?;
        let mut losses = vec![0.0; n_heads];
        let mut d_out = vec![None; n_heads];
        for h in 0..n_heads {
            let Some(y) = &pass.outputs[h] else { continue };
            let (v, m) = head_slices(t, &head_targets[h]);
            let (l, g) = masked_sample_loss_grad(y, &v, &m, loss);
            losses[h] = l;
            let c = weights[h] / counts[h] as f64;
            d_out[h] = Some(g.into_iter().map(|x| x * c).collect::<Vec<f64>>());
        }
        let mut grad = vec![0.0; model.params.len()];
        model.backward_with(&model.params, inputs[k], &pass, &d_out, &mut grad);
        Ok((losses, grad))
    });
    let mut grad = vec![0.0; model.params.len()];
    let mut losses = Vec::with_capacity(inputs.len());
    for r in per_sample {
        let (l, g) = r?;
        losses.push(l);
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    let (total, head_means) = total_loss(&losses, &counts, weights);
    Ok(BatchGradient { losses, counts, head_means, total, grad })
}

pub fn train(train_set: &[Sample], val_set: &[Sample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_observed(train_set, val_set, cfg, &mut |_| {})
}

/// Like [`train`], calling `observe` with every step's raw gradient.
pub fn train_observed(
    train_set: &[Sample],
    val_set: &[Sample],
    cfg: &TrainConfig,
    observe: &mut dyn FnMut(&StepView),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let normalizer = Normalizer::fit(train_set.iter().map(|s| &s.targets));
    let train_data = prepare_all(train_set, &normalizer, cfg)?;
    let val_data = prepare_all(val_set, &normalizer, cfg)?;

    let mut model = Model::new(&cfg.model, cfg.seed)?;
    let blocks = model.blocks();
    let groups = model.group_ranges();
    let n_heads = model.heads().len();
    let mut opt = AdamW::new(model.params.len());
    let mut dwa = DwaState::new(n_heads, cfg.loss.temperature);
    let steps = train_data.len().div_ceil(cfg.batch_size);
    let snapshot = |m: &Model, epoch: usize| Checkpoint {
        model: cfg.model.clone(),
        params: m.params.clone(),
        normalizer: normalizer.clone(),
        seed: cfg.seed,
        points_per_sample: cfg.points_per_sample,
        epoch,
    };

    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, Checkpoint)> = None;
    for epoch in 0..cfg.epochs {
        let (weights, dwa_neutral) = if cfg.dwa { dwa.weights() } else { (vec![1.0; n_heads], Vec::new()) };
        let epoch_seed = rng::child_seed(cfg.seed, epoch as u64);
        let mut order: Vec<usize> = (0..train_data.len()).collect();
        order.shuffle(&mut rng::stream(epoch_seed, 0));

        let mut head_sum = vec![0.0; n_heads];
        let mut head_batches = vec![0usize; n_heads];
        let mut total_sum = 0.0;
        let mut first_lrs = (0.0, 0.0);
        for step in 0..steps {
            let t = epoch as f64 + step as f64 / steps as f64;
            let (w, e) = (cfg.warmup_epochs as f64, cfg.epochs as f64);
            let lr_enc = lr_schedule(t, cfg.lr_encoder, w, e);
            let lr_head = lr_schedule(t, cfg.lr_heads, w, e);
            if step == 0 {
                first_lrs = (lr_enc, lr_head);
            }
            let batch = &order[step * cfg.batch_size..((step + 1) * cfg.batch_size).min(order.len())];

            let inputs: Vec<_> = batch.iter().map(|&i| train_data[i].input.as_slice()).collect();
            let targets: Vec<_> = batch.iter().map(|&i| &train_data[i].target).collect();
            let drop_seed = rng::child_seed(epoch_seed, step as u64 + 1);
            let bg = batch_gradient(&model, &inputs, &targets, &weights, &cfg.loss, Some(drop_seed))?;
            let (counts, mut grad) = (bg.counts, bg.grad);
            let (total, means) = (bg.total, bg.head_means);
            total_sum += total;
            for h in 0..n_heads {
                if let Some(m) = means[h] {
                    head_sum[h] += m;
                    head_batches[h] += 1;
                }
            }
            observe(&StepView { epoch, step, head_counts: &counts, grad: &grad, model: &model });
            check_finite(&grad, &blocks)?;
            if let Some(c) = cfg.clip_norm {
                clip_global_norm(&mut grad, c);
            }
            let lr_groups: Vec<_> = groups
                .iter()
                .map(|(g, r)| (r.clone(), if *g == ParamGroup::Encoder { lr_enc } else { lr_head }))
                .collect();
            opt.update(&mut model.params, &grad, &lr_groups, cfg.weight_decay);
        }
        let head_losses: Vec<Option<f64>> =
            (0..n_heads).map(|h| (head_batches[h] > 0).then(|| head_sum[h] / head_batches[h] as f64)).collect();
        dwa.push(head_losses.clone());
        let val_total = split_loss(&model, &val_data, cfg)?;
        if let Some(v) = val_total {
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, snapshot(&model, epoch + 1)));
            }
        }
        log.push(EpochRecord {
            epoch: epoch + 1,
            lr_encoder: first_lrs.0,
            lr_heads: first_lrs.1,
            weights,
            head_losses,
            train_total: total_sum / steps as f64,
            val_total,
            dwa_neutral,
        });
    }
    let last = snapshot(&model, cfg.epochs);
    Ok(TrainOutcome {
        best: best.map_or_else(|| last.clone(), |(_, c)| c),
        last,
        head_names: model.heads().iter().map(|h| h.name.clone()).collect(),
        log,
    })
}
