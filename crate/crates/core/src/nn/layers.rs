use alloc::vec;
use alloc::vec::Vec;

use super::{Param, Tensor};
use crate::math;
use crate::rng::SeededRng;

/// Fully connected layer over the flattened per-sample features.
#[derive(Debug, Clone)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
    /// Row-major `[output, input]`.
    pub weight: Param,
    pub bias: Param,
    cache: Option<Tensor>,
}

impl Dense {
    pub fn new(input: usize, output: usize, rng: &mut SeededRng) -> Self {
        Self {
            input,
            output,
            weight: Param::he(input * output, input, rng),
            bias: Param::new(vec![0.0; output]),
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor, _train: bool) -> Tensor {
        assert_eq!(x.features(), self.input, "dense input width");
        let mut y = Tensor::zeros(x.n, self.output, 1, 1);
        for i in 0..x.n {
            let xi = x.sample(i);
            for o in 0..self.output {
                let w = &self.weight.value[o * self.input..(o + 1) * self.input];
                let dot: f64 = w.iter().zip(xi).map(|(a, b)| a * b).sum();
                y.data[i * self.output + o] = dot + self.bias.value[o];
            }
        }
        self.cache = Some(x.clone());
        y
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let x = self.cache.as_ref().expect("forward before backward");
        let mut dx = Tensor::zeros(x.n, x.c, x.h, x.w);
        for i in 0..x.n {
            let xi = x.sample(i);
            for o in 0..self.output {
                let g = dy.data[i * self.output + o];
                if g == 0.0 {
                    continue;
                }
                self.bias.grad[o] += g;
                let row = o * self.input;
                for k in 0..self.input {
                    self.weight.grad[row + k] += g * xi[k];
                    dx.data[i * self.input + k] += g * self.weight.value[row + k];
                }
            }
        }
        dx
    }

    pub fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param>) {
        out.push(&mut self.weight);
        out.push(&mut self.bias);
    }

    pub fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Vec<f64>>) {
        out.push(&mut self.weight.value);
        out.push(&mut self.bias.value);
    }
}

/// Square-kernel 2-d convolution with zero padding.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    /// `[out_c, in_c, k, k]`.
    pub weight: Param,
    pub bias: Param,
    cache: Option<Tensor>,
}

/// Output positions `ox` whose input column `ox*s + k - p` lies in `[0, len)`.
fn valid_range(len: usize, out: usize, stride: usize, k: usize, pad: usize) -> (usize, usize) {
    let lo = if k >= pad { 0 } else { (pad - k).div_ceil(stride) };
    if len + pad <= k {
        return (0, 0);
    }
    let hi = ((len - 1 + pad - k) / stride + 1).min(out);
    (lo.min(hi), hi)
}

impl Conv2d {
    pub fn new(in_c: usize, out_c: usize, kernel: usize, stride: usize, pad: usize, rng: &mut SeededRng) -> Self {
        let fan_in = in_c * kernel * kernel;
        Self {
            in_c,
            out_c,
            kernel,
            stride,
            pad,
            weight: Param::he(out_c * fan_in, fan_in, rng),
            bias: Param::new(vec![0.0; out_c]),
            cache: None,
        }
    }

    pub fn out_dim(&self, len: usize) -> usize {
        (len + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn forward(&mut self, x: &Tensor, _train: bool) -> Tensor {
        assert_eq!(x.c, self.in_c, "conv input channels");
        let (oh, ow) = (self.out_dim(x.h), self.out_dim(x.w));
        let (k, s, p) = (self.kernel, self.stride, self.pad);
        let mut y = Tensor::zeros(x.n, self.out_c, oh, ow);
        for ni in 0..x.n {
            for oc in 0..self.out_c {
                let yo = &mut y.data[(ni * self.out_c + oc) * oh * ow..][..oh * ow];
                yo.iter_mut().for_each(|v| *v = self.bias.value[oc]);
                for ic in 0..self.in_c {
                    let xin = &x.data[(ni * self.in_c + ic) * x.h * x.w..][..x.h * x.w];
                    for kh in 0..k {
                        let (ylo, yhi) = valid_range(x.h, oh, s, kh, p);
                        for kw in 0..k {
                            let wv = self.weight.value[((oc * self.in_c + ic) * k + kh) * k + kw];
                            let (xlo, xhi) = valid_range(x.w, ow, s, kw, p);
                            for oy in ylo..yhi {
                                let iy = oy * s + kh - p;
                                let row = &xin[iy * x.w..];
                                let out = &mut yo[oy * ow..];
                                for ox in xlo..xhi {
                                    out[ox] += wv * row[ox * s + kw - p];
                                }
                            }
                        }
                    }
                }
            }
        }
        self.cache = Some(x.clone());
        y
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let x = self.cache.as_ref().expect("forward before backward");
        let (oh, ow) = (dy.h, dy.w);
        let (k, s, p) = (self.kernel, self.stride, self.pad);
        let mut dx = Tensor::zeros(x.n, x.c, x.h, x.w);
        for ni in 0..x.n {
            for oc in 0..self.out_c {
                let g = &dy.data[(ni * self.out_c + oc) * oh * ow..][..oh * ow];
                self.bias.grad[oc] += g.iter().sum::<f64>();
                for ic in 0..self.in_c {
                    let base = (ni * self.in_c + ic) * x.h * x.w;
                    let xin = &x.data[base..base + x.h * x.w];
                    let dxin = &mut dx.data[base..base + x.h * x.w];
                    for kh in 0..k {
                        let (ylo, yhi) = valid_range(x.h, oh, s, kh, p);
                        for kw in 0..k {
                            let wi = ((oc * self.in_c + ic) * k + kh) * k + kw;
                            let wv = self.weight.value[wi];
                            let (xlo, xhi) = valid_range(x.w, ow, s, kw, p);
                            let mut acc = 0.0;
                            for oy in ylo..yhi {
                                let iy = oy * s + kh - p;
                                for ox in xlo..xhi {
                                    let gi = g[oy * ow + ox];
                                    let xi = iy * x.w + ox * s + kw - p;
                                    acc += gi * xin[xi];
                                    dxin[xi] += gi * wv;
                                }
                            }
                            self.weight.grad[wi] += acc;
                        }
                    }
                }
            }
        }
        dx
    }

    pub fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param>) {
        out.push(&mut self.weight);
        out.push(&mut self.bias);
    }

    pub fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Vec<f64>>) {
        out.push(&mut self.weight.value);
        out.push(&mut self.bias.value);
    }
}

/// Per-channel batch normalization over `(n, h, w)`.
#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub channels: usize,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    x_hat: Tensor,
    inv_std: Vec<f64>,
    train: bool,
}

impl BatchNorm2d {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: Param::new(vec![1.0; channels]),
            beta: Param::new(vec![0.0; channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor, train: bool) -> Tensor {
        assert_eq!(x.c, self.channels, "batch-norm channels");
        let hw = x.h * x.w;
        let m = (x.n * hw) as f64;
        let mut x_hat = Tensor::zeros(x.n, x.c, x.h, x.w);
        let mut y = Tensor::zeros(x.n, x.c, x.h, x.w);
        let mut inv_std = vec![0.0; x.c];
        for c in 0..x.c {
            let chan = |i: usize| &x.data[(i * x.c + c) * hw..][..hw];
            let (mean, var) = if train {
                let mean = (0..x.n).map(|i| chan(i).iter().sum::<f64>()).sum::<f64>() / m;
                let ss: f64 = (0..x.n)
                    .map(|i| chan(i).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>())
                    .sum();
                let var = ss / m;
                let unbiased = if m > 1.0 { ss / (m - 1.0) } else { var };
                self.running_mean[c] = (1.0 - self.momentum) * self.running_mean[c] + self.momentum * mean;
                self.running_var[c] = (1.0 - self.momentum) * self.running_var[c] + self.momentum * unbiased;
                (mean, var)
            } else {
                (self.running_mean[c], self.running_var[c])
            };
            let is = 1.0 / math::sqrt(var + self.eps);
            inv_std[c] = is;
            for i in 0..x.n {
                let off = (i * x.c + c) * hw;
                for j in 0..hw {
                    let xh = (x.data[off + j] - mean) * is;
                    x_hat.data[off + j] = xh;
                    y.data[off + j] = self.gamma.value[c] * xh + self.beta.value[c];
                }
            }
        }
        self.cache = Some(BnCache { x_hat, inv_std, train });
        y
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let cache = self.cache.as_ref().expect("forward before backward");
        let xh = &cache.x_hat;
        let hw = xh.h * xh.w;
        let m = (xh.n * hw) as f64;
        let mut dx = Tensor::zeros(xh.n, xh.c, xh.h, xh.w);
        for c in 0..xh.c {
            let mut sum_dy = 0.0;
            let mut sum_dy_xh = 0.0;
            for i in 0..xh.n {
                let off = (i * xh.c + c) * hw;
                for j in 0..hw {
                    sum_dy += dy.data[off + j];
                    sum_dy_xh += dy.data[off + j] * xh.data[off + j];
                }
            }
            self.gamma.grad[c] += sum_dy_xh;
            self.beta.grad[c] += sum_dy;
            let scale = self.gamma.value[c] * cache.inv_std[c];
            for i in 0..xh.n {
                let off = (i * xh.c + c) * hw;
                for j in 0..hw {
                    dx.data[off + j] = if cache.train {
                        scale / m * (m * dy.data[off + j] - sum_dy - xh.data[off + j] * sum_dy_xh)
                    } else {
                        scale * dy.data[off + j]
                    };
                }
            }
        }
        dx
    }

    pub fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param>) {
        out.push(&mut self.gamma);
        out.push(&mut self.beta);
    }

    pub fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Vec<f64>>) {
        out.push(&mut self.gamma.value);
        out.push(&mut self.beta.value);
        out.push(&mut self.running_mean);
        out.push(&mut self.running_var);
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Vec<bool>,
}

impl Relu {
    pub fn forward(&mut self, x: &Tensor, _train: bool) -> Tensor {
        self.mask = x.data.iter().map(|&v| v > 0.0).collect();
        let data = x.data.iter().map(|&v| v.max(0.0)).collect();
        Tensor::from_vec(x.n, x.c, x.h, x.w, data)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let data = dy.data.iter().zip(&self.mask).map(|(&g, &m)| if m { g } else { 0.0 }).collect();
        Tensor::from_vec(dy.n, dy.c, dy.h, dy.w, data)
    }

    pub fn params_mut<'a>(&'a mut self, _out: &mut Vec<&'a mut Param>) {}

    pub fn tensors_mut<'a>(&'a mut self, _out: &mut Vec<&'a mut Vec<f64>>) {}
}

/// Mean over the spatial dimensions, `[n, c, h, w] -> [n, c, 1, 1]`.
#[derive(Debug, Clone, Default)]
pub struct GlobalAvgPool {
    shape: (usize, usize),
}

impl GlobalAvgPool {
    pub fn forward(&mut self, x: &Tensor, _train: bool) -> Tensor {
        let hw = x.h * x.w;
        self.shape = (x.h, x.w);
        let data = x.data.chunks(hw).map(|ch| ch.iter().sum::<f64>() / hw as f64).collect();
        Tensor::from_vec(x.n, x.c, 1, 1, data)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let (h, w) = self.shape;
        let hw = (h * w) as f64;
        let data = dy.data.iter().flat_map(|&g| core::iter::repeat_n(g / hw, h * w)).collect();
        Tensor::from_vec(dy.n, dy.c, h, w, data)
    }

    pub fn params_mut<'a>(&'a mut self, _out: &mut Vec<&'a mut Param>) {}

    pub fn tensors_mut<'a>(&'a mut self, _out: &mut Vec<&'a mut Vec<f64>>) {}
}

/// Adaptive average pooling onto a fixed `grid × grid` output.
#[derive(Debug, Clone)]
pub struct AvgPoolGrid {
    pub grid: usize,
    shape: (usize, usize),
}

fn bin(i: usize, len: usize, grid: usize) -> (usize, usize) {
    let lo = i * len / grid;
    let hi = ((i + 1) * len).div_ceil(grid);
    (lo, hi.max(lo + 1))
}

impl AvgPoolGrid {
    pub fn new(grid: usize) -> Self {
        Self { grid, shape: (0, 0) }
    }

    pub fn forward(&mut self, x: &Tensor, _train: bool) -> Tensor {
        let g = self.grid;
        self.shape = (x.h, x.w);
        let mut y = Tensor::zeros(x.n, x.c, g, g);
        for (plane, out) in x.data.chunks(x.h * x.w).zip(y.data.chunks_mut(g * g)) {
            for gy in 0..g {
                let (y0, y1) = bin(gy, x.h, g);
                for gx in 0..g {
                    let (x0, x1) = bin(gx, x.w, g);
                    let mut s = 0.0;
                    for r in y0..y1 {
                        s += plane[r * x.w + x0..r * x.w + x1].iter().sum::<f64>();
                    }
                    out[gy * g + gx] = s / ((y1 - y0) * (x1 - x0)) as f64;
                }
            }
        }
        y
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let g = self.grid;
        let (h, w) = self.shape;
        let mut dx = Tensor::zeros(dy.n, dy.c, h, w);
        for (plane, gout) in dx.data.chunks_mut(h * w).zip(dy.data.chunks(g * g)) {
            for gy in 0..g {
                let (y0, y1) = bin(gy, h, g);
                for gx in 0..g {
                    let (x0, x1) = bin(gx, w, g);
                    let share = gout[gy * g + gx] / ((y1 - y0) * (x1 - x0)) as f64;
                    for r in y0..y1 {
                        plane[r * w + x0..r * w + x1].iter_mut().for_each(|v| *v += share);
                    }
                }
            }
        }
        dx
    }

    pub fn params_mut<'a>(&'a mut self, _out: &mut Vec<&'a mut Param>) {}

    pub fn tensors_mut<'a>(&'a mut self, _out: &mut Vec<&'a mut Vec<f64>>) {}
}

/// Per-sample z-scoring across all of a sample's values.
#[derive(Debug, Clone)]
pub struct Standardize {
    pub eps: f64,
    cache: Option<(Tensor, Vec<f64>)>,
}

impl Default for Standardize {
    fn default() -> Self {
        Self { eps: 1e-5, cache: None }
    }
}

impl Standardize {
    pub fn forward(&mut self, x: &Tensor, _train: bool) -> Tensor {
        let f = x.features();
        let mut y = x.clone();
        let mut inv = Vec::with_capacity(x.n);
        for row in y.data.chunks_mut(f) {
            let mean = row.iter().sum::<f64>() / f as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / f as f64;
            let is = 1.0 / math::sqrt(var + self.eps);
            row.iter_mut().for_each(|v| *v = (*v - mean) * is);
            inv.push(is);
        }
        self.cache = Some((y.clone(), inv));
        y
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let (y, inv) = self.cache.as_ref().expect("forward before backward");
        let f = y.features();
        let mut dx = dy.clone();
        for ((g, yr), is) in dx.data.chunks_mut(f).zip(y.data.chunks(f)).zip(inv) {
            let mean_g = g.iter().sum::<f64>() / f as f64;
            let mean_gy = g.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / f as f64;
            for (gv, yv) in g.iter_mut().zip(yr) {
                *gv = is * (*gv - mean_g - yv * mean_gy);
            }
        }
        dx
    }

    pub fn params_mut<'a>(&'a mut self, _out: &mut Vec<&'a mut Param>) {}

    pub fn tensors_mut<'a>(&'a mut self, _out: &mut Vec<&'a mut Vec<f64>>) {}
}

/// Two 3×3 conv/BN stages with an identity or projected shortcut.
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    conv1: Conv2d,
    bn1: BatchNorm2d,
    relu1: Relu,
    conv2: Conv2d,
    bn2: BatchNorm2d,
    shortcut: Option<(Conv2d, BatchNorm2d)>,
    relu_out: Relu,
}

impl ResidualBlock {
    pub fn new(in_c: usize, out_c: usize, stride: usize, rng: &mut SeededRng) -> Self {
        let conv1 = Conv2d::new(in_c, out_c, 3, stride, 1, rng);
        let conv2 = Conv2d::new(out_c, out_c, 3, 1, 1, rng);
        let shortcut = (stride != 1 || in_c != out_c)
            .then(|| (Conv2d::new(in_c, out_c, 1, stride, 0, rng), BatchNorm2d::new(out_c)));
        Self {
            conv1,
            bn1: BatchNorm2d::new(out_c),
            relu1: Relu::default(),
            conv2,
            bn2: BatchNorm2d::new(out_c),
            shortcut,
            relu_out: Relu::default(),
        }
    }

    pub fn forward(&mut self, x: &Tensor, train: bool) -> Tensor {
        let a = self.conv1.forward(x, train);
        let a = self.bn1.forward(&a, train);
        let a = self.relu1.forward(&a, train);
        let b = self.conv2.forward(&a, train);
        let mut b = self.bn2.forward(&b, train);
        match &mut self.shortcut {
            Some((conv, bn)) => {
                let s = conv.forward(x, train);
                b.add_assign(&bn.forward(&s, train));
            }
            None => b.add_assign(x),
        }
        self.relu_out.forward(&b, train)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let d = self.relu_out.backward(dy);
        let da = self.bn2.backward(&d);
        let da = self.conv2.backward(&da);
        let da = self.relu1.backward(&da);
        let da = self.bn1.backward(&da);
        let mut dx = self.conv1.backward(&da);
        match &mut self.shortcut {
            Some((conv, bn)) => {
                let ds = bn.backward(&d);
                dx.add_assign(&conv.backward(&ds));
            }
            None => dx.add_assign(&d),
        }
        dx
    }

    pub fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param>) {
        self.conv1.params_mut(out);
        self.bn1.params_mut(out);
        self.conv2.params_mut(out);
        self.bn2.params_mut(out);
        if let Some((c, b)) = &mut self.shortcut {
            c.params_mut(out);
            b.params_mut(out);
        }
    }

    pub fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Vec<f64>>) {
        self.conv1.tensors_mut(out);
        self.bn1.tensors_mut(out);
        self.conv2.tensors_mut(out);
        self.bn2.tensors_mut(out);
        if let Some((c, b)) = &mut self.shortcut {
            c.tensors_mut(out);
            b.tensors_mut(out);
        }
    }
}
