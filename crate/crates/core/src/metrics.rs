//! Error metrics, derived body fat percentage and per-dataset reports.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::targets::{index, MaskedTargetVector, TARGET_COUNT, TARGET_NAMES, TARGET_UNITS};
use crate::train::{Checkpoint, Sample};
use crate::par;

/// Mean and population standard deviation of `|pred − target|`.
pub fn mae(pred: &[f64], target: &[f64]) -> Result<(f64, f64)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::InvalidInput("mae needs equal, non-empty inputs".into()));
    }
    let n = pred.len() as f64;
    let err: Vec<f64> = pred.iter().zip(target).map(|(p, t)| (p - t).abs()).collect();
    let mean = err.iter().sum::<f64>() / n;
    let var = err.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    Ok((mean, libm::sqrt(var)))
}

/// Product-moment correlation, clamped to [-1, 1].
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidInput("pearson needs two equal inputs of length >= 2".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sab / libm::sqrt(saa * sbb)).clamp(-1.0, 1.0))
}

/// `100·(IMVAT or VAT + SAT) / body`, preferring IMVAT.
pub fn derive_bfp(sat: f64, imvat: Option<f64>, vat: Option<f64>, body: f64) -> Result<f64> {
    if !(body > 0.0) {
        return Err(Error::InvalidInput("body volume must be positive".into()));
    }
    let visceral = imvat.or(vat).ok_or_else(|| Error::InvalidInput("BFP needs IMVAT or VAT".into()))?;
    Ok(100.0 * (visceral + sat) / body)
}

/// BFP from a labeled target vector, if the needed labels are present.
pub fn bfp_of(t: &MaskedTargetVector) -> Option<f64> {
    derive_bfp(t.get(index::SAT)?, t.get(index::IMVAT), t.get(index::VAT), t.get(index::BODY)?).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub name: String,
    pub unit: String,
    pub n: usize,
    pub mae: f64,
    pub std: f64,
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfpReport {
    pub n: usize,
    pub mae: f64,
    pub std: f64,
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub dataset: String,
    pub per_target: Vec<TargetReport>,
    pub bfp: Option<BfpReport>,
    pub notes: Vec<String>,
}

/// (reference, prediction) pairs for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct Scatter {
    pub name: String,
    pub pairs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: Report,
    pub scatter: Vec<Scatter>,
}

fn summarize(name: &str, pairs: &[(f64, f64)], notes: &mut Vec<String>) -> Result<(usize, f64, f64, Option<f64>)> {
    let (t, p): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let (m, s) = mae(&p, &t)?;
    let r = match pearson(&p, &t) {
        Ok(r) => Some(r),
        Err(e) => {
            notes.push(format!("{name}: correlation undefined ({e})"));
            None
        }
    };
    Ok((pairs.len(), m, s, r))
}

/// Report over predictions in target units. Targets predicted as NaN or
/// never labeled are omitted with a note.
pub fn evaluate_predictions(dataset: &str, preds: &[[f64; TARGET_COUNT]], truth: &[MaskedTargetVector]) -> Result<Evaluation> {
    if preds.len() != truth.len() {
        return Err(Error::InvalidInput("prediction and target counts differ".into()));
    }
    let mut notes = Vec::new();
    let mut per_target = Vec::new();
    let mut scatter = Vec::new();
    for j in 0..TARGET_COUNT {
        let pairs: Vec<(f64, f64)> = truth
            .iter()
            .zip(preds)
            .filter_map(|(t, p)| Some((t.get(j)?, p[j])).filter(|(_, p)| !p.is_nan()))
            .collect();
        if pairs.is_empty() {
            notes.push(format!("{}: no labeled predictions, omitted", TARGET_NAMES[j]));
            continue;
        }
        let (n, m, s, r) = summarize(TARGET_NAMES[j], &pairs, &mut notes)?;
        per_target.push(TargetReport { name: TARGET_NAMES[j].to_string(), unit: TARGET_UNITS[j].to_string(), n, mae: m, std: s, pearson: r });
        scatter.push(Scatter { name: TARGET_NAMES[j].to_string(), pairs });
    }
    let bfp_pairs: Vec<(f64, f64)> = truth
        .iter()
        .zip(preds)
        .filter_map(|(t, p)| {
            let reference = bfp_of(t)?;
            let visceral = if t.mask[index::IMVAT] { p[index::IMVAT] } else { p[index::VAT] };
            let pred = derive_bfp(p[index::SAT], Some(visceral), None, p[index::BODY]).ok()?;
            (!pred.is_nan()).then_some((reference, pred))
        })
        .collect();
    let bfp = if bfp_pairs.is_empty() {
        notes.push("BFP: not computable, omitted".to_string());
        None
    } else {
        let (n, m, s, r) = summarize("BFP", &bfp_pairs, &mut notes)?;
        scatter.push(Scatter { name: "BFP".to_string(), pairs: bfp_pairs });
        Some(BfpReport { n, mae: m, std: s, pearson: r })
    };
    Ok(Evaluation { report: Report { dataset: dataset.to_string(), per_target, bfp, notes }, scatter })
}

/// Runs the checkpointed model over `samples` and reports against their
/// labels.
pub fn evaluate(ckpt: &Checkpoint, samples: &[Sample], dataset: &str) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let model = ckpt.build_model()?;
    let preds = par::map_indexed(samples.len(), |i| ckpt.predict(&model, &samples[i].id, &samples[i].points))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<_> = samples.iter().map(|s| s.targets.clone()).collect();
    evaluate_predictions(dataset, &preds, &truth)
}
