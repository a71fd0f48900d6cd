//! Residual-CNN fusion over per-modality spectrogram images, with the
//! training loop, leave-one-participant-out planning, and the window-level
//! interaction meta-learner that combines fusion outputs with audio cues.

mod augment;
mod features;
mod loss;
mod synthetic;
mod train;

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dsp::SpectrogramImage;
use crate::meta::{MetaAlgorithm, MetaLearner};
use crate::nn::{AvgPoolGrid, BatchNorm2d, Conv2d, Dense, GlobalAvgPool, Layer, Param, Relu, ResidualBlock, Sequential, Standardize, Tensor};
use crate::rng::{derive_seed, seeded, SeededRng};
use crate::{math, Error, Result};

pub use augment::{augment, flip_time, AugmentationConfig};
pub use features::{probe_images, sensor_image, FeatureRates};
pub use loss::{focal_logit, focal_loss, weighted_bce, FocalLossConfig};
pub use synthetic::{synthetic_fusion_dataset, SyntheticFusionSpec};
pub use train::{
    cross_validate, gradient_check, lopocv_plan, participant_counts, train_fusion, FusionHistory,
    FusionTrainConfig, GradientCheck, HeldOutPrediction, LopocvIteration, LopocvPlan, ParticipantCounts,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    Audio,
    Accel,
    Gravity,
    Light,
    Ppg,
}

impl Modality {
    pub const ALL: [Modality; 5] = [Self::Audio, Self::Accel, Self::Gravity, Self::Light, Self::Ppg];

    pub fn name(self) -> &'static str {
        match self {
            Self::Audio => "audio",
            Self::Accel => "accel",
            Self::Gravity => "gravity",
            Self::Light => "light",
            Self::Ppg => "ppg",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

/// Architecture variants used in the ablation study. `Whole` is the full
/// network; every other variant removes exactly one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Ablation {
    #[default]
    #[serde(rename = "whole")]
    Whole,
    #[serde(rename = "e_aug")]
    NoAugmentation,
    /// Replaces the residual preprocessor with per-sample feature scaling
    /// followed by coarse average pooling.
    #[serde(rename = "e_ResNetPro")]
    NoResNetPreprocessor,
    #[serde(rename = "e_Conv")]
    NoStem,
    #[serde(rename = "e_1st_resB")]
    NoFirstBlock,
    #[serde(rename = "e_mid_resB")]
    NoMiddleBlock,
    #[serde(rename = "e_last_resB")]
    NoLastBlock,
    #[serde(rename = "e_All3_resB")]
    NoBlocks,
    #[serde(rename = "e_1st_Dense")]
    NoFirstDense,
    #[serde(rename = "e_2nd_Dense")]
    NoSecondDense,
    #[serde(rename = "e_bothDense")]
    NoDense,
}

impl Ablation {
    pub const ALL: [Ablation; 11] = [
        Self::Whole,
        Self::NoAugmentation,
        Self::NoResNetPreprocessor,
        Self::NoStem,
        Self::NoFirstBlock,
        Self::NoMiddleBlock,
        Self::NoLastBlock,
        Self::NoBlocks,
        Self::NoFirstDense,
        Self::NoSecondDense,
        Self::NoDense,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Whole => "whole",
            Self::NoAugmentation => "e_aug",
            Self::NoResNetPreprocessor => "e_ResNetPro",
            Self::NoStem => "e_Conv",
            Self::NoFirstBlock => "e_1st_resB",
            Self::NoMiddleBlock => "e_mid_resB",
            Self::NoLastBlock => "e_last_resB",
            Self::NoBlocks => "e_All3_resB",
            Self::NoFirstDense => "e_1st_Dense",
            Self::NoSecondDense => "e_2nd_Dense",
            Self::NoDense => "e_bothDense",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    fn keeps_block(self, i: usize, n: usize) -> bool {
        match self {
            Self::NoFirstBlock => i != 0,
            Self::NoMiddleBlock => i != n / 2,
            Self::NoLastBlock => i + 1 != n,
            Self::NoBlocks => false,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub modalities: Vec<Modality>,
    /// Side length of the square input images.
    pub input_size: usize,
    /// Output channels of each residual block; the stem uses the first.
    pub widths: Vec<usize>,
    pub stem_stride: usize,
    pub block_stride: usize,
    pub dense: [usize; 2],
    /// Grid side of the pooling that stands in for the residual
    /// preprocessor under [`Ablation::NoResNetPreprocessor`].
    pub pool_grid: usize,
    pub ablation: Ablation,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            modalities: vec![Modality::Accel, Modality::Audio],
            input_size: crate::dsp::IMAGE_SIZE,
            widths: vec![16, 32, 64],
            stem_stride: 1,
            block_stride: 2,
            dense: [64, 32],
            pool_grid: 8,
            ablation: Ablation::Whole,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.modalities.is_empty() {
            return Err(Error::InvalidConfig("at least one modality is required".into()));
        }
        for (i, m) in self.modalities.iter().enumerate() {
            if self.modalities[..i].contains(m) {
                return Err(Error::InvalidConfig(format!("modality {} listed twice", m.name())));
            }
        }
        if self.input_size == 0 || self.stem_stride == 0 || self.block_stride == 0 {
            return Err(Error::InvalidConfig("input size and strides must be positive".into()));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::InvalidConfig("residual widths must be non-empty and positive".into()));
        }
        if self.dense.contains(&0) || self.pool_grid == 0 {
            return Err(Error::InvalidConfig("dense sizes and pool grid must be positive".into()));
        }
        if self.ablation == Ablation::NoResNetPreprocessor && self.pool_grid > self.input_size {
            return Err(Error::InvalidConfig("pool grid exceeds the input size".into()));
        }
        Ok(())
    }

    fn branch(&self, rng: &mut SeededRng) -> (Sequential, usize) {
        if self.ablation == Ablation::NoResNetPreprocessor {
            let layers = vec![Layer::Standardize(Standardize::default()), Layer::AvgPoolGrid(AvgPoolGrid::new(self.pool_grid))];
            return (Sequential::new(layers), self.pool_grid * self.pool_grid);
        }
        let mut layers = Vec::new();
        let mut channels = 1;
        if self.ablation != Ablation::NoStem {
            let stem = self.widths[0];
            layers.push(Layer::Conv(Conv2d::new(1, stem, 3, self.stem_stride, 1, rng)));
            layers.push(Layer::BatchNorm(BatchNorm2d::new(stem)));
            layers.push(Layer::Relu(Relu::default()));
            channels = stem;
        }
        let n = self.widths.len();
        for (i, &w) in self.widths.iter().enumerate() {
            if self.ablation.keeps_block(i, n) {
                layers.push(Layer::Residual(Box::new(ResidualBlock::new(channels, w, self.block_stride, rng))));
                channels = w;
            }
        }
        layers.push(Layer::GlobalAvgPool(GlobalAvgPool::default()));
        (Sequential::new(layers), channels)
    }

    fn head(&self, input: usize, rng: &mut SeededRng) -> Sequential {
        let hidden: Vec<usize> = match self.ablation {
            Ablation::NoFirstDense => vec![self.dense[1]],
            Ablation::NoSecondDense => vec![self.dense[0]],
            Ablation::NoDense => vec![],
            _ => self.dense.to_vec(),
        };
        let mut layers = Vec::new();
        let mut width = input;
        for h in hidden {
            layers.push(Layer::Dense(Dense::new(width, h, rng)));
            layers.push(Layer::Relu(Relu::default()));
            width = h;
        }
        layers.push(Layer::Dense(Dense::new(width, 1, rng)));
        Sequential::new(layers)
    }
}

/// One probe's images, keyed by modality, with its window label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalSample {
    pub probe: u64,
    pub participant: String,
    pub interaction: bool,
    pub images: BTreeMap<Modality, SpectrogramImage>,
}

/// Per-modality branches, concatenated features, and a dense head ending in
/// a single logit.
#[derive(Debug, Clone)]
pub struct FusionModel {
    pub config: FusionConfig,
    branches: Vec<Sequential>,
    branch_features: Vec<usize>,
    head: Sequential,
    pub history: FusionHistory,
}

impl FusionModel {
    /// He-initialized model; the seed fixes every weight.
    pub fn new(config: &FusionConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(derive_seed(seed, 0xF05E));
        let mut branches = Vec::new();
        let mut branch_features = Vec::new();
        for _ in &config.modalities {
            let (b, f) = config.branch(&mut rng);
            branches.push(b);
            branch_features.push(f);
        }
        let head = config.head(branch_features.iter().sum(), &mut rng);
        Ok(Self { config: config.clone(), branches, branch_features, head, history: FusionHistory::default() })
    }

    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn num_params(&mut self) -> usize {
        self.params_mut().iter().map(|p| p.len()).sum()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for b in &mut self.branches {
            out.extend(b.params_mut());
        }
        out.extend(self.head.params_mut());
        out
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    /// All persisted tensors: branches in modality order, then the head.
    pub fn export(&mut self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for b in &mut self.branches {
            out.extend(b.export());
        }
        out.extend(self.head.export());
        out
    }

    pub fn import(&mut self, tensors: &[Vec<f64>]) -> Result<()> {
        let mut rest = tensors;
        for b in &mut self.branches {
            let n = b.tensors_mut().len();
            if rest.len() < n {
                return Err(Error::shape("more tensors", format!("{}", tensors.len())));
            }
            b.import(&rest[..n])?;
            rest = &rest[n..];
        }
        self.head.import(rest)
    }

    fn check_inputs(&self, inputs: &[Tensor]) -> Result<usize> {
        if inputs.len() != self.branches.len() {
            return Err(Error::shape(format!("{} modality inputs", self.branches.len()), format!("{}", inputs.len())));
        }
        let n = inputs[0].n;
        let s = self.config.input_size;
        for t in inputs {
            if t.n != n || t.c != 1 || t.h != s || t.w != s {
                return Err(Error::shape(format!("{n}x1x{s}x{s}"), format!("{}x{}x{}x{}", t.n, t.c, t.h, t.w)));
            }
        }
        Ok(n)
    }

    /// Logits for a batch given one `n×1×S×S` tensor per modality.
    pub fn forward_logits(&mut self, inputs: &[Tensor], train: bool) -> Result<Tensor> {
        self.check_inputs(inputs)?;
        let feats: Vec<Tensor> = self.branches.iter_mut().zip(inputs).map(|(b, x)| b.forward(x, train)).collect();
        Ok(self.head.forward(&Tensor::concat_features(&feats), train))
    }

    /// Accumulates parameter gradients from the gradient w.r.t. the logits
    /// of the preceding `forward_logits` call.
    pub fn backward(&mut self, dlogits: &Tensor) {
        let dfeat = self.head.backward(dlogits);
        for (b, d) in self.branches.iter_mut().zip(dfeat.split_features(&self.branch_features)) {
            b.backward(&d);
        }
    }

    /// Stacks the configured modalities of each sample into input tensors.
    pub fn inputs_for(&self, samples: &[&MultimodalSample]) -> Result<Vec<Tensor>> {
        sample_tensors(samples, &self.config, None)
    }

    pub fn predict(&mut self, sample: &MultimodalSample) -> Result<f64> {
        Ok(self.predict_batch(&[sample])?[0])
    }

    /// Probabilities in evaluation mode (batch norm uses running statistics).
    pub fn predict_batch(&mut self, samples: &[&MultimodalSample]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(64) {
            let x = self.inputs_for(chunk)?;
            let z = self.forward_logits(&x, false)?;
            out.extend(z.data.iter().map(|&v| math::sigmoid(v)));
        }
        Ok(out)
    }
}

pub(crate) fn sample_tensors(
    samples: &[&MultimodalSample],
    cfg: &FusionConfig,
    mut aug: Option<(&AugmentationConfig, &mut SeededRng)>,
) -> Result<Vec<Tensor>> {
    let s = cfg.input_size;
    let mut out = Vec::with_capacity(cfg.modalities.len());
    for m in &cfg.modalities {
        let mut data = Vec::with_capacity(samples.len() * s * s);
        for sample in samples {
            let img = sample.images.get(m).ok_or_else(|| {
                let got: Vec<&str> = sample.images.keys().map(|k| k.name()).collect();
                Error::shape(format!("modality {}", m.name()), format!("probe {} with {:?}", sample.probe, got))
            })?;
            if img.pixels.rows != s || img.pixels.cols != s {
                return Err(Error::shape(format!("{s}x{s}"), format!("{}x{}", img.pixels.rows, img.pixels.cols)));
            }
            match aug.as_mut() {
                Some((cfg, rng)) => data.extend(augment(img, cfg, rng)?.pixels.data),
                None => data.extend_from_slice(&img.pixels.data),
            }
        }
        out.push(Tensor::from_vec(samples.len(), 1, s, s, data));
    }
    Ok(out)
}

/// Window-level inputs to the interaction meta-learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaFeatureVector {
    pub p_mm1: f64,
    pub p_mm2: f64,
    pub fs_pct: f64,
    pub cue_pct: f64,
}

impl MetaFeatureVector {
    pub fn new(p_mm1: f64, p_mm2: f64, fs_pct: f64, cue_pct: f64) -> Result<Self> {
        let v = Self { p_mm1, p_mm2, fs_pct, cue_pct };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("p_mm1", self.p_mm1), ("p_mm2", self.p_mm2), ("fs_pct", self.fs_pct), ("cue_pct", self.cue_pct)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::validation(name, format!("{x} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.p_mm1, self.p_mm2, self.fs_pct, self.cue_pct]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowDecision {
    pub interaction: bool,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionMeta {
    pub learner: MetaLearner,
}

/// Fits the window meta-learner. The fusion probabilities must come from
/// held-out predictions (see [`cross_validate`]) so the meta-learner never
/// sees a fusion score on data that model was trained on.
pub fn train_interaction_meta(
    features: &[MetaFeatureVector],
    labels: &[bool],
    algorithm: MetaAlgorithm,
) -> Result<InteractionMeta> {
    let rows = features
        .iter()
        .map(|f| f.validate().map(|_| f.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(InteractionMeta { learner: MetaLearner::fit(&rows, labels, algorithm)? })
}

impl InteractionMeta {
    pub fn predict(&self, features: &MetaFeatureVector) -> Result<WindowDecision> {
        features.validate()?;
        let x = features.to_vec();
        Ok(WindowDecision { interaction: self.learner.predict(&x)?, probability: self.learner.probability(&x)? })
    }
}
