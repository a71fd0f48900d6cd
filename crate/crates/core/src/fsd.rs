//! Foreground speech detection.
//!
//! A one-second instance has two 0.48 s frames. A small MLP is trained on
//! frames that inherit their instance's label (weak supervision), and a
//! meta-learner maps the two frame probabilities to the instance decision.
//! Evaluation follows a stratified 10-fold protocol where each held-out fold
//! is split in half and used twice, once with each half as the test set.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::audiofrontend::{AudioFrame, SyntheticProvider};
use crate::evaluation::{metrics_from_confusion, Confusion, MetricsReport};
use crate::meta::{MetaAlgorithm, MetaLearner};
use crate::nn::{Adam, Dense, Layer, Relu, Sequential, Tensor};
use crate::rng::{derive_seed, seeded};
use crate::{math, Error, Result};

pub const NUM_FOLDS: usize = 10;
/// Smallest per-class count accepted by [`make_fold_plan`].
pub const MIN_PER_CLASS: usize = 2 * NUM_FOLDS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpeechLabel {
    #[serde(rename = "fg")]
    Foreground,
    #[serde(rename = "bg")]
    Background,
}

impl SpeechLabel {
    pub fn is_foreground(self) -> bool {
        self == SpeechLabel::Foreground
    }

    pub fn from_bool(fg: bool) -> Self {
        if fg {
            SpeechLabel::Foreground
        } else {
            SpeechLabel::Background
        }
    }
}

/// One labeled second: the dataset record format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsdInstance {
    pub id: String,
    pub label: SpeechLabel,
    pub embedding_frame1: Vec<f64>,
    pub embedding_frame2: Vec<f64>,
}

impl FsdInstance {
    pub fn frames(&self) -> [&[f64]; 2] {
        [&self.embedding_frame1, &self.embedding_frame2]
    }
}

/// `weight_c = N / (2 n_c)`, so each class contributes `N/2` in total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub n_fg: u64,
    pub n_bg: u64,
    pub fg: f64,
    pub bg: f64,
}

impl ClassWeights {
    pub fn total(&self) -> u64 {
        self.n_fg + self.n_bg
    }

    pub fn weight(&self, foreground: bool) -> f64 {
        if foreground {
            self.fg
        } else {
            self.bg
        }
    }
}

pub fn class_weights(n_fg: u64, n_bg: u64) -> Result<ClassWeights> {
    if n_fg == 0 || n_bg == 0 {
        return Err(Error::InvalidCount(format!("class counts must be positive, got fg={n_fg}, bg={n_bg}")));
    }
    let n = (n_fg + n_bg) as f64;
    Ok(ClassWeights { n_fg, n_bg, fg: n / (2.0 * n_fg as f64), bg: n / (2.0 * n_bg as f64) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameClassifierConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for FrameClassifierConfig {
    fn default() -> Self {
        Self { hidden: vec![256, 64], learning_rate: 1e-3, batch_size: 32, max_epochs: 25, patience: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch (0-based) whose weights were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// MLP over one frame embedding; outputs the foreground probability.
#[derive(Debug, Clone)]
pub struct FrameClassifier {
    pub dim: usize,
    pub hidden: Vec<usize>,
    net: Sequential,
    pub history: TrainHistory,
}

fn mlp(dim: usize, hidden: &[usize], seed: u64) -> Sequential {
    let mut rng = seeded(seed);
    let mut layers = Vec::new();
    let mut width = dim;
    for &h in hidden {
        layers.push(Layer::Dense(Dense::new(width, h, &mut rng)));
        layers.push(Layer::Relu(Relu::default()));
        width = h;
    }
    layers.push(Layer::Dense(Dense::new(width, 1, &mut rng)));
    Sequential::new(layers)
}

/// Weighted binary cross-entropy on a logit, and its derivative.
fn weighted_bce(logit: f64, target: bool, weight: f64) -> (f64, f64) {
    let y = if target { 1.0 } else { 0.0 };
    // softplus(z) - y z, evaluated stably
    let sp = if logit > 0.0 { logit + math::ln(1.0 + math::exp(-logit)) } else { math::ln(1.0 + math::exp(logit)) };
    (weight * (sp - y * logit), weight * (math::sigmoid(logit) - y))
}

impl FrameClassifier {
    /// Fresh, untrained network (useful for loading checkpoints).
    pub fn untrained(dim: usize, hidden: &[usize], seed: u64) -> Self {
        Self { dim, hidden: hidden.to_vec(), net: mlp(dim, hidden, seed), history: TrainHistory::default() }
    }

    fn logits(&mut self, rows: &[&[f64]]) -> Result<Vec<f64>> {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for r in rows {
            if r.len() != self.dim {
                return Err(Error::shape(format!("{}-d embedding", self.dim), format!("{}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(self.net.forward(&Tensor::from_vec(rows.len(), self.dim, 1, 1, data), false).data)
    }

    pub fn predict(&mut self, embedding: &[f64]) -> Result<f64> {
        Ok(math::sigmoid(self.logits(&[embedding])?[0]))
    }

    pub fn predict_batch(&mut self, rows: &[&[f64]]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(256) {
            out.extend(self.logits(chunk)?.into_iter().map(math::sigmoid));
        }
        Ok(out)
    }

    pub fn subwindow_probabilities(&mut self, inst: &FsdInstance) -> Result<SubwindowProbabilities> {
        let p = self.predict_batch(&inst.frames())?;
        SubwindowProbabilities::new(p[0], p[1])
    }

    pub fn export(&mut self) -> Vec<Vec<f64>> {
        self.net.export()
    }

    pub fn import(&mut self, tensors: &[Vec<f64>]) -> Result<()> {
        self.net.import(tensors)
    }

    fn mean_loss(&mut self, frames: &[(&[f64], bool)], weights: &ClassWeights) -> Result<f64> {
        let rows: Vec<&[f64]> = frames.iter().map(|f| f.0).collect();
        let mut total = 0.0;
        for (chunk, labels) in rows.chunks(256).zip(frames.chunks(256)) {
            for (z, (_, y)) in self.logits(chunk)?.into_iter().zip(labels) {
                total += weighted_bce(z, *y, weights.weight(*y)).0;
            }
        }
        Ok(total / frames.len() as f64)
    }
}

fn frames_of<'a>(set: &[&'a FsdInstance]) -> Vec<(&'a [f64], bool)> {
    set.iter()
        .flat_map(|inst| {
            let y = inst.label.is_foreground();
            [(inst.embedding_frame1.as_slice(), y), (inst.embedding_frame2.as_slice(), y)]
        })
        .collect()
}

fn count_classes(set: &[&FsdInstance]) -> (u64, u64) {
    let fg = set.iter().filter(|i| i.label.is_foreground()).count() as u64;
    (fg, set.len() as u64 - fg)
}

/// Trains on weakly labeled frames with class-weighted BCE and Adam, keeping
/// the weights of the epoch with the lowest validation loss.
pub fn train_frame_classifier(
    train: &[&FsdInstance],
    val: &[&FsdInstance],
    cfg: &FrameClassifierConfig,
) -> Result<FrameClassifier> {
    let (tr_fg, tr_bg) = count_classes(train);
    if tr_fg == 0 || tr_bg == 0 {
        return Err(Error::DegenerateData(format!("training set has fg={tr_fg}, bg={tr_bg}")));
    }
    let (va_fg, va_bg) = count_classes(val);
    if va_fg == 0 || va_bg == 0 {
        return Err(Error::DegenerateData(format!("validation set has fg={va_fg}, bg={va_bg}")));
    }
    if cfg.batch_size == 0 || cfg.max_epochs == 0 {
        return Err(Error::InvalidConfig("batch size and epochs must be positive".into()));
    }
    let dim = train[0].embedding_frame1.len();
    let weights = class_weights(tr_fg, tr_bg)?;
    let train_frames = frames_of(train);
    let val_frames = frames_of(val);

    let mut model = FrameClassifier::untrained(dim, &cfg.hidden, derive_seed(cfg.seed, 0x1417));
    let mut opt = Adam::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..train_frames.len()).collect();
    let mut shuffle_rng = seeded(derive_seed(cfg.seed, 0x5EED));

    let mut best = (f64::INFINITY, model.export());
    let mut since_best = 0;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut data = Vec::with_capacity(batch.len() * dim);
            for &i in batch {
                data.extend_from_slice(train_frames[i].0);
            }
            let x = Tensor::from_vec(batch.len(), dim, 1, 1, data);
            model.net.zero_grad();
            let z = model.net.forward(&x, true);
            let mut dz = Tensor::zeros(batch.len(), 1, 1, 1);
            for (k, &i) in batch.iter().enumerate() {
                let y = train_frames[i].1;
                let (l, g) = weighted_bce(z.data[k], y, weights.weight(y));
                epoch_loss += l;
                dz.data[k] = g / batch.len() as f64;
            }
            model.net.backward(&dz);
            opt.step(&mut model.net.params_mut());
        }
        model.history.train_loss.push(epoch_loss / train_frames.len() as f64);
        let vl = model.mean_loss(&val_frames, &weights)?;
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
    model.net.import(&best.1)?;
    Ok(model)
}

/// Foreground probabilities of a second's two frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubwindowProbabilities {
    pub p1: f64,
    pub p2: f64,
}

impl SubwindowProbabilities {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        for (name, p) in [("p1", p1), ("p2", p2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::validation(name, format!("{p} is outside [0, 1]")));
            }
        }
        Ok(Self { p1, p2 })
    }

    pub fn as_vec(&self) -> Vec<f64> {
        vec![self.p1, self.p2]
    }

    /// The fixed rule the meta-learner replaces: foreground only when both
    /// frames exceed 0.5.
    pub fn naive_both(&self) -> bool {
        self.p1 > 0.5 && self.p2 > 0.5
    }

    /// Frames fall on opposite sides of 0.5.
    pub fn disagree(&self) -> bool {
        (self.p1 > 0.5) != (self.p2 > 0.5)
    }
}

pub fn train_meta(pairs: &[SubwindowProbabilities], labels: &[bool], algorithm: MetaAlgorithm) -> Result<MetaLearner> {
    let features: Vec<Vec<f64>> = pairs.iter().map(SubwindowProbabilities::as_vec).collect();
    MetaLearner::fit(&features, labels, algorithm)
}

pub fn classify_second(inst: &SubwindowProbabilities, meta: &MetaLearner) -> Result<SpeechLabel> {
    Ok(SpeechLabel::from_bool(meta.predict(&inst.as_vec())?))
}

/// Per-second foreground decision used by the detector.
pub trait SlotClassifier {
    /// `frames` holds the second's two frames.
    fn is_foreground(&mut self, frames: &[AudioFrame]) -> Result<bool>;
}

/// Frame classifier plus meta-learner.
#[derive(Debug, Clone)]
pub struct FsdModel {
    pub classifier: FrameClassifier,
    pub meta: MetaLearner,
}

impl FsdModel {
    /// Trains the frame classifier, then fits the meta-learner on the
    /// classifier's probabilities for the training instances.
    pub fn train(
        train: &[&FsdInstance],
        val: &[&FsdInstance],
        cfg: &FrameClassifierConfig,
        algorithm: MetaAlgorithm,
    ) -> Result<Self> {
        let mut classifier = train_frame_classifier(train, val, cfg)?;
        let mut pairs = Vec::with_capacity(train.len());
        for inst in train {
            pairs.push(classifier.subwindow_probabilities(inst)?);
        }
        let labels: Vec<bool> = train.iter().map(|i| i.label.is_foreground()).collect();
        let meta = train_meta(&pairs, &labels, algorithm)?;
        Ok(Self { classifier, meta })
    }

    pub fn classify(&mut self, frame1: &[f64], frame2: &[f64]) -> Result<SpeechLabel> {
        let p = self.classifier.predict_batch(&[frame1, frame2])?;
        classify_second(&SubwindowProbabilities::new(p[0], p[1])?, &self.meta)
    }
}

impl SlotClassifier for FsdModel {
    fn is_foreground(&mut self, frames: &[AudioFrame]) -> Result<bool> {
        if frames.len() != 2 {
            return Err(Error::shape("2 frames", format!("{}", frames.len())));
        }
        Ok(self.classify(&frames[0].embedding.0, &frames[1].embedding.0)?.is_foreground())
    }
}

impl<T: SlotClassifier + ?Sized> SlotClassifier for Box<T> {
    fn is_foreground(&mut self, frames: &[AudioFrame]) -> Result<bool> {
        (**self).is_foreground(frames)
    }
}

/// Share of an interaction's recorded seconds that are cue seconds classified
/// as foreground. Non-cue seconds count as background.
pub fn fs_fraction(cue_mask: &[bool], foreground: &[bool]) -> Result<f64> {
    if cue_mask.len() != foreground.len() {
        return Err(Error::shape(format!("{} classifications", cue_mask.len()), format!("{}", foreground.len())));
    }
    if cue_mask.is_empty() {
        return Err(Error::UndefinedFraction("interaction has no recorded slots".into()));
    }
    let hits = cue_mask.iter().zip(foreground).filter(|(&c, &f)| c && f).count();
    Ok(hits as f64 / cue_mask.len() as f64)
}

/// One train/validation/test assignment of the swap protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldRun {
    pub fold: usize,
    pub swapped: bool,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Vec<usize>>,
    pub runs: Vec<FoldRun>,
}

/// Stratified folds dealt round-robin per class after a seeded shuffle, each
/// split into stratified halves A and B. Fold `k` yields two runs: (val A,
/// test B) and (val B, test A), both training on the other nine folds.
pub fn make_fold_plan(labels: &[bool], seed: u64) -> Result<FoldPlan> {
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if pos.len() < MIN_PER_CLASS || neg.len() < MIN_PER_CLASS {
        return Err(Error::InvalidData(format!(
            "need at least {MIN_PER_CLASS} instances per class, got {} positive and {} negative",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = seeded(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    // Dealing continues across classes so fold sizes differ by at most one.
    let mut folds_pos = vec![Vec::new(); NUM_FOLDS];
    let mut folds_neg = vec![Vec::new(); NUM_FOLDS];
    for (k, &i) in pos.iter().enumerate() {
        folds_pos[k % NUM_FOLDS].push(i);
    }
    for (k, &i) in neg.iter().enumerate() {
        folds_neg[(k + pos.len()) % NUM_FOLDS].push(i);
    }

    let mut folds = Vec::with_capacity(NUM_FOLDS);
    let mut halves = Vec::with_capacity(NUM_FOLDS);
    for f in 0..NUM_FOLDS {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let mut k = 0;
        for members in [&folds_pos[f], &folds_neg[f]] {
            for &i in members.iter() {
                if k % 2 == 0 { a.push(i) } else { b.push(i) }
                k += 1;
            }
        }
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        folds.push(all);
        halves.push((a, b));
    }

    let mut runs = Vec::with_capacity(2 * NUM_FOLDS);
    for (f, (a, b)) in halves.iter().enumerate() {
        let mut train: Vec<usize> = folds.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, v)| v.iter().copied()).collect();
        train.sort_unstable();
        for (swapped, val, test) in [(false, a, b), (true, b, a)] {
            runs.push(FoldRun { fold: f, swapped, train: train.clone(), validation: val.clone(), test: test.clone() });
        }
    }
    Ok(FoldPlan { folds, runs })
}

/// Per-run and pooled outcome of the swap protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsdEvaluation {
    pub algorithm: MetaAlgorithm,
    /// Pooled over all test halves, meta-learner decisions.
    pub confusion: Confusion,
    pub metrics: MetricsReport,
    /// Same instances under the naive both-frames rule.
    pub baseline_confusion: Confusion,
    /// Instances whose two frame probabilities disagree.
    pub disagreement: Confusion,
    pub disagreement_baseline: Confusion,
    /// Number of times each instance was tested.
    pub test_counts: Vec<u32>,
    pub run_balanced_accuracy: Vec<f64>,
}

/// Runs every fold of `plan`, retraining from scratch per run.
pub fn evaluate_protocol(
    data: &[FsdInstance],
    plan: &FoldPlan,
    cfg: &FrameClassifierConfig,
    algorithm: MetaAlgorithm,
) -> Result<FsdEvaluation> {
    let mut confusion = Confusion::default();
    let mut baseline = Confusion::default();
    let mut disagreement = Confusion::default();
    let mut disagreement_baseline = Confusion::default();
    let mut test_counts = vec![0u32; data.len()];
    let mut run_ba = Vec::with_capacity(plan.runs.len());

    for (r, run) in plan.runs.iter().enumerate() {
        let pick = |ids: &[usize]| -> Vec<&FsdInstance> { ids.iter().map(|&i| &data[i]).collect() };
        let run_cfg = FrameClassifierConfig { seed: derive_seed(cfg.seed, r as u64), ..cfg.clone() };
        let mut model = FsdModel::train(&pick(&run.train), &pick(&run.validation), &run_cfg, algorithm)?;
        let mut run_conf = Confusion::default();
        for &i in &run.test {
            test_counts[i] += 1;
            let y = data[i].label.is_foreground();
            let p = model.classifier.subwindow_probabilities(&data[i])?;
            let pred = classify_second(&p, &model.meta)?.is_foreground();
            run_conf.record(pred, y);
            baseline.record(p.naive_both(), y);
            if p.disagree() {
                disagreement.record(pred, y);
                disagreement_baseline.record(p.naive_both(), y);
            }
        }
        run_ba.push(metrics_from_confusion(&run_conf).map(|m| m.balanced_accuracy)?);
        confusion.merge(&run_conf);
    }
    Ok(FsdEvaluation {
        algorithm,
        metrics: metrics_from_confusion(&confusion)?,
        confusion,
        baseline_confusion: baseline,
        disagreement,
        disagreement_baseline,
        test_counts,
        run_balanced_accuracy: run_ba,
    })
}

/// Synthetic instances from the provider's two-cluster embedding model.
/// Exactly `round(n * fg_share)` instances are foreground.
pub fn synthetic_dataset(provider: &SyntheticProvider, n: usize, fg_share: f64, seed: u64) -> Result<Vec<FsdInstance>> {
    if !(0.0..=1.0).contains(&fg_share) {
        return Err(Error::InvalidConfig(format!("foreground share {fg_share} outside [0, 1]")));
    }
    let n_fg = math::round(n as f64 * fg_share) as usize;
    let mut labels: Vec<bool> = (0..n).map(|i| i < n_fg).collect();
    labels.shuffle(&mut seeded(seed));
    labels
        .into_iter()
        .enumerate()
        .map(|(i, fg)| {
            let [a, b] = provider.frames_for_slot(derive_seed(seed, i as u64), 0, fg)?;
            Ok(FsdInstance {
                id: format!("syn-{i:06}"),
                label: SpeechLabel::from_bool(fg),
                embedding_frame1: a.embedding.0,
                embedding_frame2: b.embedding.0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weights_for_corpus_counts() {
        let w = class_weights(26_991, 86_829).unwrap();
        assert!((w.fg - 2.1085).abs() < 1e-3);
        assert!((w.bg - 0.6554).abs() < 1e-3);
        assert_eq!(class_weights(5, 5).unwrap().fg, 1.0);
        assert!(matches!(class_weights(0, 3), Err(Error::InvalidCount(_))));
    }

    proptest! {
        #[test]
        fn weight_identity(a in 1u64..1_000_000, b in 1u64..1_000_000) {
            let w = class_weights(a, b).unwrap();
            let half = (a + b) as f64 / 2.0;
            prop_assert!((w.fg * a as f64 - half).abs() <= half * 1e-15);
            prop_assert!((w.bg * b as f64 - half).abs() <= half * 1e-15);
        }
    }

    #[test]
    fn fs_fraction_examples() {
        let cue = vec![true; 60];
        let fg: Vec<bool> = (0..60).map(|i| i < 10).collect();
        assert!((fs_fraction(&cue, &fg).unwrap() - 10.0 / 60.0).abs() < 1e-15);
        assert_eq!(fs_fraction(&[false; 4], &[true; 4]).unwrap(), 0.0);
        assert_eq!(fs_fraction(&[true; 4], &[true; 4]).unwrap(), 1.0);
        assert!(matches!(fs_fraction(&[], &[]), Err(Error::UndefinedFraction(_))));
    }

    fn labels(n: usize, pos: usize) -> Vec<bool> {
        (0..n).map(|i| i % (n / pos) == 0 && i / (n / pos) < pos).collect()
    }

    #[test]
    fn fold_plan_stratifies_and_covers() {
        let y = labels(1000, 300);
        assert_eq!(y.iter().filter(|&&v| v).count(), 300);
        let plan = make_fold_plan(&y, 7).unwrap();
        for f in &plan.folds {
            let p = f.iter().filter(|&&i| y[i]).count();
            assert!((29..=31).contains(&p), "{p} positives in a fold of {}", f.len());
        }
        let mut tested: Vec<usize> = plan.runs.iter().flat_map(|r| r.test.iter().copied()).collect();
        tested.sort_unstable();
        assert_eq!(tested, (0..1000).collect::<Vec<_>>());
        for run in &plan.runs {
            assert!(run.validation.iter().all(|v| !run.test.contains(v)));
            assert!(run.train.iter().all(|t| !plan.folds[run.fold].contains(t)));
            assert_eq!(run.train.len() + run.validation.len() + run.test.len(), 1000);
        }
        assert_eq!(plan, make_fold_plan(&y, 7).unwrap());
        assert_ne!(plan, make_fold_plan(&y, 8).unwrap());
    }

    #[test]
    fn fold_plan_rejects_small_classes() {
        let y = labels(500, 19);
        assert!(matches!(make_fold_plan(&y, 0), Err(Error::InvalidData(_))));
    }

    fn small_cfg(seed: u64) -> FrameClassifierConfig {
        FrameClassifierConfig { hidden: vec![32, 16], max_epochs: 25, seed, ..Default::default() }
    }

    fn separable(n: usize, seed: u64) -> Vec<FsdInstance> {
        let mut p = SyntheticProvider::new(8, seed).unwrap();
        p.mixed_rate = 0.0;
        synthetic_dataset(&p, n, 0.4, seed).unwrap()
    }

    #[test]
    fn classifier_separates_clusters_and_is_deterministic() {
        let data = separable(800, 3);
        let (tr, rest) = data.split_at(300);
        let tr: Vec<&FsdInstance> = tr.iter().collect();
        let (va, te) = rest.split_at(50);
        let va: Vec<&FsdInstance> = va.iter().collect();
        let mut m = train_frame_classifier(&tr, &va, &small_cfg(1)).unwrap();
        let mut conf = Confusion::default();
        for inst in te {
            for f in inst.frames() {
                conf.record(m.predict(f).unwrap() > 0.5, inst.label.is_foreground());
            }
        }
        let ba = metrics_from_confusion(&conf).unwrap().balanced_accuracy;
        assert!(ba >= 99.0, "{ba} {:?}", m.history);
        let h = &m.history;
        assert!(h.train_loss[h.best_epoch] < h.train_loss[0]);

        let mut again = train_frame_classifier(&tr, &va, &small_cfg(1)).unwrap();
        assert_eq!(m.export(), again.export());
    }

    #[test]
    fn all_foreground_training_is_degenerate() {
        let data = separable(100, 4);
        let fg: Vec<&FsdInstance> = data.iter().filter(|i| i.label.is_foreground()).collect();
        let all: Vec<&FsdInstance> = data.iter().collect();
        assert!(matches!(train_frame_classifier(&fg, &all, &small_cfg(0)), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn meta_decides_disagreeing_seconds() {
        let mut pairs = Vec::new();
        let mut y = Vec::new();
        for i in 0..50 {
            let e = i as f64 / 500.0;
            pairs.push(SubwindowProbabilities::new(0.95 - e, 0.9 + e).unwrap());
            y.push(true);
            pairs.push(SubwindowProbabilities::new(0.05 + e, 0.1 - e).unwrap());
            y.push(false);
        }
        let meta = train_meta(&pairs, &y, MetaAlgorithm::NearestCentroid).unwrap();
        let fg = |a, b| classify_second(&SubwindowProbabilities::new(a, b).unwrap(), &meta).unwrap();
        assert_eq!(fg(0.95, 0.9), SpeechLabel::Foreground);
        assert_eq!(fg(0.0, 0.0), SpeechLabel::Background);
        let mixed = SubwindowProbabilities::new(0.9, 0.45).unwrap();
        assert!(!mixed.naive_both());
        assert_eq!(classify_second(&mixed, &meta).unwrap(), SpeechLabel::Foreground);
    }

    #[test]
    fn probabilities_are_validated() {
        assert!(SubwindowProbabilities::new(1.2, 0.0).is_err());
    }

    #[test]
    fn dataset_has_exact_share() {
        let d = separable(101, 9);
        assert_eq!(d.iter().filter(|i| i.label.is_foreground()).count(), 40);
    }
}
