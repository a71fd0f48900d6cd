use alloc::format;

use serde::{Deserialize, Serialize};

use crate::fsd::ClassWeights;
use crate::{math, Error, Result};

const P_MIN: f64 = 1e-7;

/// Weighted binary focal loss `-alpha_y (1 - p_t)^gamma ln p_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalLossConfig {
    pub gamma: f64,
    pub alpha_positive: f64,
    pub alpha_negative: f64,
}

impl Default for FocalLossConfig {
    fn default() -> Self {
        Self { gamma: 2.0, alpha_positive: 1.0, alpha_negative: 1.0 }
    }
}

impl FocalLossConfig {
    /// Alphas from inverse-frequency class weights; the positive class is
    /// the "foreground" side of `w`.
    pub fn from_class_weights(gamma: f64, w: &ClassWeights) -> Self {
        Self { gamma, alpha_positive: w.fg, alpha_negative: w.bg }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("focal gamma {} must be >= 0", self.gamma)));
        }
        if !(self.alpha_positive > 0.0 && self.alpha_negative > 0.0) {
            return Err(Error::InvalidConfig("focal alphas must be positive".into()));
        }
        Ok(())
    }

    pub fn alpha(&self, y: bool) -> f64 {
        if y { self.alpha_positive } else { self.alpha_negative }
    }
}

/// Loss for a predicted probability; `p` is clamped to `[1e-7, 1 - 1e-7]`.
pub fn focal_loss(p: f64, y: bool, cfg: &FocalLossConfig) -> f64 {
    let p = p.clamp(P_MIN, 1.0 - P_MIN);
    let pt = if y { p } else { 1.0 - p };
    -cfg.alpha(y) * math::powf(1.0 - pt, cfg.gamma) * math::ln(pt)
}

/// Loss and its derivative with respect to the logit `z`.
pub fn focal_logit(z: f64, y: bool, cfg: &FocalLossConfig) -> (f64, f64) {
    let p = math::sigmoid(z).clamp(P_MIN, 1.0 - P_MIN);
    let (pt, sign) = if y { (p, 1.0) } else { (1.0 - p, -1.0) };
    let a = cfg.alpha(y);
    let q = 1.0 - pt;
    let lnp = math::ln(pt);
    let loss = -a * math::powf(q, cfg.gamma) * lnp;
    let grad = sign * a * math::powf(q, cfg.gamma) * (cfg.gamma * pt * lnp - q);
    (loss, grad)
}

/// Class-weighted binary cross-entropy on a probability, with the same clamp.
pub fn weighted_bce(p: f64, y: bool, alpha: f64) -> f64 {
    let p = p.clamp(P_MIN, 1.0 - P_MIN);
    let t = if y { 1.0 } else { 0.0 };
    -alpha * (t * math::ln(p) + (1.0 - t) * math::ln(1.0 - p))
}
