//! Small f64 neural-network toolkit with hand-written backpropagation:
//! dense, 2-d convolution, batch normalization, ReLU, residual blocks, and
//! pooling layers, plus SGD and Adam.

mod layers;
mod optim;

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};

use alloc::format;

use crate::math;
use crate::rng::SeededRng;
use crate::{Error, Result};

pub use layers::{AvgPoolGrid, BatchNorm2d, Conv2d, Dense, GlobalAvgPool, Relu, ResidualBlock, Standardize};
pub use optim::{Adam, Sgd};

/// Batch-major 4-d tensor `[n, c, h, w]`. Dense activations use `h = w = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w, data: vec![0.0; n * c * h * w] }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * c * h * w, "tensor data length");
        Self { n, c, h, w, data }
    }

    /// Values per sample.
    pub fn features(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let f = self.features();
        &self.data[i * f..(i + 1) * f]
    }

    /// Stacks per-sample feature rows, `[n, Σ f_i, 1, 1]`.
    pub fn concat_features(parts: &[Tensor]) -> Tensor {
        let n = parts[0].n;
        let total: usize = parts.iter().map(Tensor::features).sum();
        let mut data = Vec::with_capacity(n * total);
        for i in 0..n {
            for p in parts {
                data.extend_from_slice(p.sample(i));
            }
        }
        Tensor::from_vec(n, total, 1, 1, data)
    }

    /// Inverse of [`Tensor::concat_features`] given the part widths.
    pub fn split_features(&self, widths: &[usize]) -> Vec<Tensor> {
        let mut out: Vec<Vec<f64>> = widths.iter().map(|w| Vec::with_capacity(w * self.n)).collect();
        for i in 0..self.n {
            let row = self.sample(i);
            let mut off = 0;
            for (o, &w) in out.iter_mut().zip(widths) {
                o.extend_from_slice(&row[off..off + w]);
                off += w;
            }
        }
        out.into_iter()
            .zip(widths)
            .map(|(d, &w)| Tensor::from_vec(self.n, w, 1, 1, d))
            .collect()
    }

    fn add_assign(&mut self, other: &Tensor) {
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }
}

/// A trainable tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn new(value: Vec<f64>) -> Self {
        let grad = vec![0.0; value.len()];
        Self { value, grad }
    }

    /// He-normal initialization, `N(0, 2 / fan_in)`.
    pub fn he(len: usize, fan_in: usize, rng: &mut SeededRng) -> Self {
        let dist = Normal::new(0.0, math::sqrt(2.0 / fan_in as f64)).expect("valid sd");
        Self::new((0..len).map(|_| dist.sample(rng)).collect())
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Layers that can appear in a [`Sequential`].
#[derive(Debug, Clone)]
pub enum Layer {
    Dense(Dense),
    Conv(Conv2d),
    BatchNorm(BatchNorm2d),
    Relu(Relu),
    GlobalAvgPool(GlobalAvgPool),
    AvgPoolGrid(AvgPoolGrid),
    Standardize(Standardize),
    Residual(alloc::boxed::Box<ResidualBlock>),
}

macro_rules! dispatch {
    ($self:expr, $l:ident => $body:expr) => {
        match $self {
            Layer::Dense($l) => $body,
            Layer::Conv($l) => $body,
            Layer::BatchNorm($l) => $body,
            Layer::Relu($l) => $body,
            Layer::GlobalAvgPool($l) => $body,
            Layer::AvgPoolGrid($l) => $body,
            Layer::Standardize($l) => $body,
            Layer::Residual($l) => $body,
        }
    };
}

impl Layer {
    pub fn forward(&mut self, x: &Tensor, train: bool) -> Tensor {
        dispatch!(self, l => l.forward(x, train))
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        dispatch!(self, l => l.backward(dy))
    }

    pub fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param>) {
        dispatch!(self, l => l.params_mut(out))
    }

    /// Every persisted tensor (parameters and running statistics) in
    /// declaration order.
    pub fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Vec<f64>>) {
        dispatch!(self, l => l.tensors_mut(out))
    }
}

/// Layers applied in order.
#[derive(Debug, Clone, Default)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn forward(&mut self, x: &Tensor, train: bool) -> Tensor {
        let mut cur = x.clone();
        for l in &mut self.layers {
            cur = l.forward(&cur, train);
        }
        cur
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let mut cur = dy.clone();
        for l in self.layers.iter_mut().rev() {
            cur = l.backward(&cur);
        }
        cur
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            l.params_mut(&mut out);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            l.tensors_mut(&mut out);
        }
        out
    }

    /// Copies of all persisted tensors in declaration order.
    pub fn export(&mut self) -> Vec<Vec<f64>> {
        self.tensors_mut().into_iter().map(|t| t.clone()).collect()
    }

    /// Loads tensors produced by [`Sequential::export`] on the same
    /// architecture.
    pub fn import(&mut self, tensors: &[Vec<f64>]) -> Result<()> {
        let mut slots = self.tensors_mut();
        if slots.len() != tensors.len() {
            return Err(Error::shape(format!("{} tensors", slots.len()), format!("{}", tensors.len())));
        }
        for (i, (dst, src)) in slots.iter_mut().zip(tensors).enumerate() {
            if dst.len() != src.len() {
                return Err(Error::shape(format!("tensor {i} of length {}", dst.len()), format!("{}", src.len())));
            }
            dst.copy_from_slice(src);
        }
        Ok(())
    }

    pub fn num_params(&mut self) -> usize {
        self.params_mut().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }
}

#[cfg(test)]
mod tests;
