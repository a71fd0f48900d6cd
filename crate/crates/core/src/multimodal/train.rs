use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{sample_tensors, Ablation, AugmentationConfig, FocalLossConfig, FusionConfig, FusionModel, MultimodalSample};
use crate::fsd::class_weights;
use crate::nn::{Sgd, Tensor};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionTrainConfig {
    pub model: FusionConfig,
    pub augmentation: AugmentationConfig,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for FusionTrainConfig {
    fn default() -> Self {
        Self {
            model: FusionConfig::default(),
            augmentation: AugmentationConfig::default(),
            gamma: 2.0,
            learning_rate: 0.05,
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FusionHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

fn class_counts(samples: &[&MultimodalSample]) -> (u64, u64) {
    let pos = samples.iter().filter(|s| s.interaction).count() as u64;
    (pos, samples.len() as u64 - pos)
}

fn mean_loss(model: &mut FusionModel, samples: &[&MultimodalSample], focal: &FocalLossConfig) -> Result<f64> {
    let probs = model.predict_batch(samples)?;
    let total: f64 = probs.iter().zip(samples).map(|(&p, s)| super::focal_loss(p, s.interaction, focal)).sum();
    Ok(total / samples.len() as f64)
}

/// Mini-batch SGD on the weighted focal loss with early stopping on
/// validation loss; the best-validation weights are restored at the end.
pub fn train_fusion(
    train: &[&MultimodalSample],
    val: &[&MultimodalSample],
    cfg: &FusionTrainConfig,
) -> Result<FusionModel> {
    let (pos, neg) = class_counts(train);
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateData(format!("training set has {pos} positives and {neg} negatives")));
    }
    if val.is_empty() {
        return Err(Error::DegenerateData("validation set is empty".into()));
    }
    if cfg.batch_size == 0 || cfg.max_epochs == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidConfig("batch size, epochs, and learning rate must be positive".into()));
    }
    let focal = FocalLossConfig::from_class_weights(cfg.gamma, &class_weights(pos, neg)?);
    focal.validate()?;
    let augmenting = cfg.model.ablation != Ablation::NoAugmentation;
    if augmenting {
        cfg.augmentation.validate()?;
    }

    let mut model = FusionModel::new(&cfg.model, derive_seed(cfg.seed, 0x1417))?;
    let sgd = Sgd { lr: cfg.learning_rate };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = seeded(derive_seed(cfg.seed, 0x5EED));
    let mut aug_rng = seeded(derive_seed(cfg.seed, cfg.augmentation.seed ^ 0xA06));

    let mut best = (f64::INFINITY, model.export());
    let mut since_best = 0;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0;
        for batch in order.chunks(cfg.batch_size) {
            // Batch statistics of a single sample are degenerate.
            if batch.len() < 2 {
                continue;
            }
            let samples: Vec<&MultimodalSample> = batch.iter().map(|&i| train[i]).collect();
            let aug = augmenting.then_some((&cfg.augmentation, &mut aug_rng));
            let x = sample_tensors(&samples, &cfg.model, aug)?;
            model.zero_grad();
            let z = model.forward_logits(&x, true)?;
            let mut dz = Tensor::zeros(batch.len(), 1, 1, 1);
            for (k, s) in samples.iter().enumerate() {
                let (l, g) = super::focal_logit(z.data[k], s.interaction, &focal);
                epoch_loss += l;
                dz.data[k] = g / batch.len() as f64;
            }
            seen += batch.len();
            model.backward(&dz);
            sgd.step(&mut model.params_mut());
        }
        model.history.train_loss.push(epoch_loss / seen.max(1) as f64);
        let vl = mean_loss(&mut model, val, &focal)?;
        model.history.val_loss.push(vl);
        if vl < best.0 {
            best = (vl, model.export());
            model.history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                model.history.stopped_early = true;
                break;
            }
        }
    }
    model.import(&best.1)?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantCounts {
    pub participant: String,
    pub positives: u64,
    pub negatives: u64,
}

impl ParticipantCounts {
    fn imbalance(&self) -> u64 {
        self.positives.abs_diff(self.negatives)
    }
}

pub fn participant_counts(samples: &[MultimodalSample]) -> Vec<ParticipantCounts> {
    let mut map: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for s in samples {
        let e = map.entry(s.participant.as_str()).or_default();
        if s.interaction { e.0 += 1 } else { e.1 += 1 }
    }
    map.into_iter()
        .map(|(p, (positives, negatives))| ParticipantCounts { participant: p.into(), positives, negatives })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LopocvIteration {
    pub test: String,
    pub validation: [String; 2],
    pub train: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LopocvPlan {
    pub iterations: Vec<LopocvIteration>,
}

/// One iteration per participant (in id order). Among the others, the two
/// with the smallest `|positives - negatives|` validate, ties going to the
/// lower id; the rest train.
pub fn lopocv_plan(participants: &[ParticipantCounts]) -> Result<LopocvPlan> {
    if participants.len() < 4 {
        return Err(Error::InvalidPlan(format!("need at least 4 participants, got {}", participants.len())));
    }
    let mut sorted: Vec<&ParticipantCounts> = participants.iter().collect();
    sorted.sort_by(|a, b| a.participant.cmp(&b.participant));
    if let Some(w) = sorted.windows(2).find(|w| w[0].participant == w[1].participant) {
        return Err(Error::InvalidPlan(format!("participant {} listed twice", w[0].participant)));
    }
    let iterations = sorted
        .iter()
        .map(|test| {
            let mut rest: Vec<&ParticipantCounts> =
                sorted.iter().copied().filter(|p| p.participant != test.participant).collect();
            rest.sort_by(|a, b| a.imbalance().cmp(&b.imbalance()).then_with(|| a.participant.cmp(&b.participant)));
            let validation = [rest[0].participant.clone(), rest[1].participant.clone()];
            let mut train: Vec<String> = rest[2..].iter().map(|p| p.participant.clone()).collect();
            train.sort();
            LopocvIteration { test: test.participant.clone(), validation, train }
        })
        .collect();
    Ok(LopocvPlan { iterations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOutPrediction {
    pub probe: u64,
    pub participant: String,
    pub interaction: bool,
    pub probability: f64,
}

/// Runs every plan iteration and returns the test participant's
/// predictions, so each sample is scored by a model that never saw its
/// participant.
pub fn cross_validate(
    samples: &[MultimodalSample],
    plan: &LopocvPlan,
    cfg: &FusionTrainConfig,
) -> Result<Vec<HeldOutPrediction>> {
    let mut out = Vec::new();
    for (i, it) in plan.iterations.iter().enumerate() {
        let pick = |ids: &[&String]| -> Vec<&MultimodalSample> {
            samples.iter().filter(|s| ids.iter().any(|id| **id == s.participant)).collect()
        };
        let train = pick(&it.train.iter().collect::<Vec<_>>());
        let val = pick(&it.validation.iter().collect::<Vec<_>>());
        let test = pick(&[&it.test]);
        let run_cfg = FusionTrainConfig { seed: derive_seed(cfg.seed, i as u64), ..cfg.clone() };
        let mut model = train_fusion(&train, &val, &run_cfg)?;
        let probs = model.predict_batch(&test)?;
        out.extend(test.iter().zip(probs).map(|(s, probability)| HeldOutPrediction {
            probe: s.probe,
            participant: s.participant.clone(),
            interaction: s.interaction,
            probability,
        }));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    /// Worst error per parameter tensor, in `params_mut` order.
    pub per_param: Vec<f64>,
    pub checked: usize,
}

const FD_STEP: f64 = 1e-4;
/// Gradients smaller than this are compared in absolute terms.
const FD_FLOOR: f64 = 1e-6;

fn batch_loss(model: &mut FusionModel, inputs: &[Tensor], labels: &[bool], focal: &FocalLossConfig) -> Result<f64> {
    let z = model.forward_logits(inputs, true)?;
    let total: f64 = z.data.iter().zip(labels).map(|(&v, &y)| super::focal_logit(v, y, focal).0).sum();
    Ok(total / labels.len() as f64)
}

/// Compares backpropagated gradients of the mean focal loss against
/// central finite differences for every parameter. Uses training-mode
/// batch norm, which makes the loss a smooth function of the weights.
pub fn gradient_check(
    model: &mut FusionModel,
    inputs: &[Tensor],
    labels: &[bool],
    focal: &FocalLossConfig,
) -> Result<GradientCheck> {
    if inputs.first().map(|t| t.n) != Some(labels.len()) {
        return Err(Error::shape(format!("{} labels", inputs.first().map_or(0, |t| t.n)), format!("{}", labels.len())));
    }
    model.zero_grad();
    let z = model.forward_logits(inputs, true)?;
    let mut dz = Tensor::zeros(labels.len(), 1, 1, 1);
    for (k, &y) in labels.iter().enumerate() {
        dz.data[k] = super::focal_logit(z.data[k], y, focal).1 / labels.len() as f64;
    }
    model.backward(&dz);
    let analytic: Vec<Vec<f64>> = model.params_mut().iter().map(|p| p.grad.clone()).collect();

    let mut per_param = Vec::with_capacity(analytic.len());
    let mut checked = 0;
    for (j, grads) in analytic.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for (k, &a) in grads.iter().enumerate() {
            let orig = model.params_mut()[j].value[k];
            model.params_mut()[j].value[k] = orig + FD_STEP;
            let up = batch_loss(model, inputs, labels, focal)?;
            model.params_mut()[j].value[k] = orig - FD_STEP;
            let down = batch_loss(model, inputs, labels, focal)?;
            model.params_mut()[j].value[k] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let denom = a.abs().max(numeric.abs()).max(FD_FLOOR);
            worst = worst.max((a - numeric).abs() / denom);
            checked += 1;
        }
        per_param.push(worst);
    }
    let max_relative_error = per_param.iter().copied().fold(0.0, f64::max);
    Ok(GradientCheck { max_relative_error, per_param, checked })
}
