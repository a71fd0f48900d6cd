//! Second-stage classifiers over low-dimensional score vectors: nearest
//! centroid, L2-regularized logistic regression, and a squared-hinge linear
//! margin classifier.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{math, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetaAlgorithm {
    NearestCentroid,
    Logistic,
    LinearMargin,
}

impl MetaAlgorithm {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nearest-centroid" | "nearestcentroid" => Some(Self::NearestCentroid),
            "logistic" | "logit" => Some(Self::Logistic),
            "linear-margin" | "linearsvc" => Some(Self::LinearMargin),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MetaParams {
    Centroids { positive: Vec<f64>, negative: Vec<f64> },
    Linear { weights: Vec<f64>, bias: f64 },
}

/// A fitted binary meta-learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaLearner {
    pub algorithm: MetaAlgorithm,
    pub dim: usize,
    pub params: MetaParams,
}

/// Inverse regularization strength, as in the usual `C` parameterization.
const C: f64 = 1.0;

impl MetaLearner {
    pub fn fit(features: &[Vec<f64>], labels: &[bool], algorithm: MetaAlgorithm) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::shape(
                format!("{} labels", features.len()),
                format!("{}", labels.len()),
            ));
        }
        let n_pos = labels.iter().filter(|&&l| l).count();
        if n_pos == 0 || n_pos == labels.len() {
            return Err(Error::DegenerateData("meta-learner needs both classes".into()));
        }
        let dim = features[0].len();
        if features.iter().any(|f| f.len() != dim) {
            return Err(Error::shape(format!("{dim}-d features"), "ragged rows"));
        }
        let params = match algorithm {
            MetaAlgorithm::NearestCentroid => {
                let mut pos = vec![0.0; dim];
                let mut neg = vec![0.0; dim];
                for (f, &l) in features.iter().zip(labels) {
                    let acc = if l { &mut pos } else { &mut neg };
                    acc.iter_mut().zip(f).for_each(|(a, v)| *a += v);
                }
                pos.iter_mut().for_each(|v| *v /= n_pos as f64);
                neg.iter_mut().for_each(|v| *v /= (labels.len() - n_pos) as f64);
                MetaParams::Centroids { positive: pos, negative: neg }
            }
            MetaAlgorithm::Logistic => newton_fit(features, labels, Loss::Logistic),
            MetaAlgorithm::LinearMargin => newton_fit(features, labels, Loss::SquaredHinge),
        };
        Ok(Self { algorithm, dim, params })
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::shape(format!("{}-d input", self.dim), format!("{}", x.len())));
        }
        Ok(())
    }

    /// Signed score: positive means the positive class.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(match &self.params {
            MetaParams::Centroids { positive, negative } => sq_dist(x, negative) - sq_dist(x, positive),
            MetaParams::Linear { weights, bias } => dot(weights, x) + bias,
        })
    }

    /// Ties (decision exactly 0) resolve to the negative class.
    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        Ok(self.decision(x)? > 0.0)
    }

    /// A score in `[0, 1]` that exceeds 0.5 exactly when `predict` is true.
    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        let d = self.decision(x)?;
        Ok(match &self.params {
            MetaParams::Centroids { positive, negative } => {
                let dp = math::sqrt(sq_dist(x, positive));
                let dn = math::sqrt(sq_dist(x, negative));
                if dp + dn == 0.0 { 0.5 } else { dn / (dp + dn) }
            }
            MetaParams::Linear { .. } => math::sigmoid(d),
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Clone, Copy)]
enum Loss {
    Logistic,
    SquaredHinge,
}

/// Minimizes `0.5 |w|² + C Σ loss(y, w·x + b)` (bias unpenalized) with
/// damped Newton steps. Deterministic.
fn newton_fit(features: &[Vec<f64>], labels: &[bool], loss: Loss) -> MetaParams {
    let d = features[0].len();
    let p = d + 1;
    let mut theta = vec![0.0; p];
    let objective = |theta: &[f64]| -> f64 {
        let reg = 0.5 * theta[..d].iter().map(|w| w * w).sum::<f64>();
        let data: f64 = features
            .iter()
            .zip(labels)
            .map(|(x, &l)| {
                let z = dot(&theta[..d], x) + theta[d];
                let y = if l { 1.0 } else { -1.0 };
                match loss {
                    Loss::Logistic => softplus(-y * z),
                    Loss::SquaredHinge => {
                        let m = (1.0 - y * z).max(0.0);
                        m * m
                    }
                }
            })
            .sum();
        reg + C * data
    };
    let mut current = objective(&theta);
    for _ in 0..100 {
        let mut grad = vec![0.0; p];
        let mut hess = vec![vec![0.0; p]; p];
        for i in 0..d {
            grad[i] = theta[i];
            hess[i][i] = 1.0;
        }
        hess[d][d] = 1e-8;
        for (x, &l) in features.iter().zip(labels) {
            let z = dot(&theta[..d], x) + theta[d];
            let y = if l { 1.0 } else { -1.0 };
            let (g, h) = match loss {
                Loss::Logistic => {
                    let s = math::sigmoid(-y * z);
                    (-y * s, s * (1.0 - s))
                }
                Loss::SquaredHinge => {
                    let m = 1.0 - y * z;
                    if m > 0.0 { (-2.0 * y * m, 2.0) } else { (0.0, 0.0) }
                }
            };
            for i in 0..p {
                let xi = if i < d { x[i] } else { 1.0 };
                grad[i] += C * g * xi;
                if h != 0.0 {
                    for j in 0..p {
                        let xj = if j < d { x[j] } else { 1.0 };
                        hess[i][j] += C * h * xi * xj;
                    }
                }
            }
        }
        let Some(step) = solve(hess, grad.clone()) else { break };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let obj = objective(&cand);
            if obj <= current {
                let done = current - obj < 1e-12 * (1.0 + current.abs());
                theta = cand;
                current = obj;
                improved = !done;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    MetaParams::Linear { weights: theta[..d].to_vec(), bias: theta[d] }
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 { z } else { math::ln(1.0 + math::exp(z)) }
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn centroid_model(pos: [f64; 2], neg: [f64; 2]) -> MetaLearner {
        MetaLearner {
            algorithm: MetaAlgorithm::NearestCentroid,
            dim: 2,
            params: MetaParams::Centroids { positive: pos.to_vec(), negative: neg.to_vec() },
        }
    }

    #[test]
    fn nearest_centroid_geometry() {
        let m = centroid_model([0.9, 0.9], [0.1, 0.1]);
        assert!(m.predict(&[0.7, 0.6]).unwrap());
        // equidistant: tie goes to background
        assert!(!m.predict(&[0.5, 0.5]).unwrap());
        assert!(!m.predict(&[0.9, 0.1]).unwrap());
        assert_eq!(m.probability(&[0.5, 0.5]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = vec![vec![0.1, 0.2], vec![0.3, 0.4]];
        for alg in [MetaAlgorithm::NearestCentroid, MetaAlgorithm::Logistic, MetaAlgorithm::LinearMargin] {
            assert!(matches!(MetaLearner::fit(&x, &[true, true], alg), Err(Error::DegenerateData(_))));
        }
    }

    #[test]
    fn linear_learners_separate_simple_data() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..50 {
            let t = i as f64 / 50.0;
            x.push(vec![0.7 + 0.3 * t, 0.8 - 0.1 * t]);
            y.push(true);
            x.push(vec![0.2 * t, 0.1 + 0.2 * t]);
            y.push(false);
        }
        for alg in [MetaAlgorithm::Logistic, MetaAlgorithm::LinearMargin] {
            let m = MetaLearner::fit(&x, &y, alg).unwrap();
            for (xi, &yi) in x.iter().zip(&y) {
                assert_eq!(m.predict(xi).unwrap(), yi, "{alg:?}");
                let p = m.probability(xi).unwrap();
                assert_eq!(p > 0.5, yi);
            }
            assert!(m.predict(&[0.95, 0.9]).unwrap());
            assert!(!m.predict(&[0.0, 0.0]).unwrap());
        }
    }

    #[test]
    fn logistic_gradient_vanishes_at_optimum() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37) % 1.0]).collect();
        let y: Vec<bool> = (0..40).map(|i| (i * 7) % 5 < 2).collect();
        let m = MetaLearner::fit(&x, &y, MetaAlgorithm::Logistic).unwrap();
        let MetaParams::Linear { weights, bias } = &m.params else { panic!() };
        let mut gw = weights[0];
        let mut gb = 0.0;
        for (xi, &l) in x.iter().zip(&y) {
            let p = math::sigmoid(weights[0] * xi[0] + bias);
            let t = if l { 1.0 } else { 0.0 };
            gw += (p - t) * xi[0];
            gb += p - t;
        }
        assert!(gw.abs() < 1e-6 && gb.abs() < 1e-6, "{gw} {gb}");
    }

    proptest! {
        #[test]
        fn nearest_centroid_matches_brute_force(
            pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, any::<bool>()), 4..60),
            queries in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..20),
        ) {
            let x: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.0, p.1]).collect();
            let y: Vec<bool> = pts.iter().map(|p| p.2).collect();
            prop_assume!(y.iter().any(|&l| l) && y.iter().any(|&l| !l));
            let m = MetaLearner::fit(&x, &y, MetaAlgorithm::NearestCentroid).unwrap();
            // oracle: recompute class means from scratch and compare distances
            let mean = |cls: bool| -> (f64, f64) {
                let sel: Vec<_> = pts.iter().filter(|p| p.2 == cls).collect();
                let n = sel.len() as f64;
                (sel.iter().map(|p| p.0).sum::<f64>() / n, sel.iter().map(|p| p.1).sum::<f64>() / n)
            };
            let (pa, pb) = mean(true);
            let (na, nb) = mean(false);
            for q in queries {
                let dp = (q.0 - pa).powi(2) + (q.1 - pb).powi(2);
                let dn = (q.0 - na).powi(2) + (q.1 - nb).powi(2);
                prop_assume!((dp - dn).abs() > 1e-12);
                prop_assert_eq!(m.predict(&[q.0, q.1]).unwrap(), dp < dn);
            }
        }
    }
}
