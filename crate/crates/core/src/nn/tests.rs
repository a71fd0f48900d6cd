use super::*;
use crate::rng::seeded;
use rand::Rng;

fn random_tensor(n: usize, c: usize, h: usize, w: usize, seed: u64) -> Tensor {
    let mut rng = seeded(seed);
    Tensor::from_vec(n, c, h, w, (0..n * c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Loss `Σ y·r` for fixed random `r`; its gradient w.r.t. `y` is `r`.
fn probe_loss(net: &mut Sequential, x: &Tensor, r: &[f64]) -> f64 {
    net.forward(x, true).data.iter().zip(r).map(|(a, b)| a * b).sum()
}

fn max_rel_err(net: &mut Sequential, x: &Tensor) -> f64 {
    let y = net.forward(x, true);
    let mut rng = seeded(99);
    let r: Vec<f64> = (0..y.data.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    net.zero_grad();
    net.forward(x, true);
    let dx = net.backward(&Tensor::from_vec(y.n, y.c, y.h, y.w, r.clone()));

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut check = |analytic: f64, plus: f64, minus: f64| {
        let numeric = (plus - minus) / (2.0 * h);
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
        worst = worst.max(err);
    };

    let mut xs = x.clone();
    for i in (0..x.data.len()).step_by(3) {
        let orig = xs.data[i];
        xs.data[i] = orig + h;
        let p = probe_loss(net, &xs, &r);
        xs.data[i] = orig - h;
        let m = probe_loss(net, &xs, &r);
        xs.data[i] = orig;
        check(dx.data[i], p, m);
    }

    let grads: Vec<Vec<f64>> = net.params_mut().iter().map(|p| p.grad.clone()).collect();
    for (pi, g) in grads.iter().enumerate() {
        for i in (0..g.len()).step_by(5) {
            let orig = net.params_mut()[pi].value[i];
            net.params_mut()[pi].value[i] = orig + h;
            let p = probe_loss(net, x, &r);
            net.params_mut()[pi].value[i] = orig - h;
            let m = probe_loss(net, x, &r);
            net.params_mut()[pi].value[i] = orig;
            check(g[i], p, m);
        }
    }
    worst
}

#[test]
fn dense_gradients() {
    let mut rng = seeded(1);
    let mut net = Sequential::new(vec![
        Layer::Dense(Dense::new(6, 4, &mut rng)),
        Layer::Relu(Relu::default()),
        Layer::Dense(Dense::new(4, 2, &mut rng)),
    ]);
    assert!(max_rel_err(&mut net, &random_tensor(3, 6, 1, 1, 2)) < 1e-5);
}

#[test]
fn conv_gradients_with_stride_and_padding() {
    let mut rng = seeded(3);
    for (stride, pad) in [(1, 1), (2, 1), (2, 0), (1, 0)] {
        let mut net = Sequential::new(vec![Layer::Conv(Conv2d::new(2, 3, 3, stride, pad, &mut rng))]);
        let err = max_rel_err(&mut net, &random_tensor(2, 2, 7, 6, 4));
        assert!(err < 1e-6, "stride {stride} pad {pad}: {err}");
    }
}

#[test]
fn conv_matches_direct_formula() {
    let mut rng = seeded(5);
    let mut conv = Conv2d::new(2, 2, 3, 2, 1, &mut rng);
    let x = random_tensor(1, 2, 5, 5, 6);
    let y = conv.forward(&x, false);
    assert_eq!((y.h, y.w), (3, 3));
    for oc in 0..2 {
        for oy in 0..3 {
            for ox in 0..3 {
                let mut acc = conv.bias.value[oc];
                for ic in 0..2 {
                    for kh in 0..3 {
                        for kw in 0..3 {
                            let iy = (oy * 2 + kh) as isize - 1;
                            let ix = (ox * 2 + kw) as isize - 1;
                            if (0..5).contains(&iy) && (0..5).contains(&ix) {
                                acc += conv.weight.value[((oc * 2 + ic) * 3 + kh) * 3 + kw]
                                    * x.data[(ic * 5 + iy as usize) * 5 + ix as usize];
                            }
                        }
                    }
                }
                assert!((y.data[(oc * 3 + oy) * 3 + ox] - acc).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn batchnorm_gradients_and_normalization() {
    let mut bn = BatchNorm2d::new(2);
    let x = random_tensor(4, 2, 3, 3, 7);
    let y = bn.forward(&x, true);
    for c in 0..2 {
        let vals: Vec<f64> = (0..4).flat_map(|i| y.data[(i * 2 + c) * 9..][..9].to_vec()).collect();
        let mean = vals.iter().sum::<f64>() / 36.0;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 36.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-3);
    }
    let mut rng = seeded(8);
    let mut net = Sequential::new(vec![
        Layer::Conv(Conv2d::new(2, 2, 3, 1, 1, &mut rng)),
        Layer::BatchNorm(BatchNorm2d::new(2)),
    ]);
    assert!(max_rel_err(&mut net, &x) < 1e-5);
}

#[test]
fn residual_block_gradients() {
    let mut rng = seeded(9);
    for (in_c, out_c, stride) in [(2, 2, 1), (2, 3, 2)] {
        let mut net = Sequential::new(vec![
            Layer::Residual(alloc::boxed::Box::new(ResidualBlock::new(in_c, out_c, stride, &mut rng))),
            Layer::GlobalAvgPool(GlobalAvgPool::default()),
            Layer::Dense(Dense::new(out_c, 1, &mut rng)),
        ]);
        let err = max_rel_err(&mut net, &random_tensor(3, in_c, 6, 6, 10));
        assert!(err < 1e-4, "{in_c}->{out_c}/{stride}: {err}");
    }
}

#[test]
fn pooling_and_standardize_gradients() {
    let mut rng = seeded(11);
    let mut net = Sequential::new(vec![
        Layer::Standardize(Standardize::default()),
        Layer::AvgPoolGrid(AvgPoolGrid::new(4)),
        Layer::Dense(Dense::new(2 * 16, 3, &mut rng)),
    ]);
    assert!(max_rel_err(&mut net, &random_tensor(2, 2, 10, 9, 12)) < 1e-5);
}

#[test]
fn grid_pool_of_even_split_is_block_mean() {
    let mut pool = AvgPoolGrid::new(2);
    let x = Tensor::from_vec(1, 1, 4, 4, (0..16).map(f64::from).collect());
    let y = pool.forward(&x, false);
    assert_eq!(y.data, vec![2.5, 4.5, 10.5, 12.5]);
}

#[test]
fn eval_mode_uses_running_statistics() {
    let mut bn = BatchNorm2d::new(1);
    let x = Tensor::from_vec(4, 1, 1, 1, vec![1.0, 2.0, 3.0, 4.0]);
    bn.forward(&x, true);
    assert!((bn.running_mean[0] - 0.25).abs() < 1e-12);
    let var_unbiased = 5.0 / 3.0;
    assert!((bn.running_var[0] - (0.9 + 0.1 * var_unbiased)).abs() < 1e-12);
    let y = bn.forward(&Tensor::from_vec(1, 1, 1, 1, vec![0.25]), false);
    assert!(y.data[0].abs() < 1e-12);
}

#[test]
fn concat_split_roundtrip() {
    let a = random_tensor(3, 2, 1, 1, 1);
    let b = random_tensor(3, 4, 1, 1, 2);
    let cat = Tensor::concat_features(&[a.clone(), b.clone()]);
    assert_eq!(cat.features(), 6);
    let parts = cat.split_features(&[2, 4]);
    assert_eq!(parts[0], a);
    assert_eq!(parts[1], b);
}

#[test]
fn adam_minimizes_quadratic() {
    let mut p = Param::new(vec![3.0, -2.0]);
    let mut opt = Adam::new(0.05);
    for _ in 0..2000 {
        p.grad = p.value.iter().map(|v| 2.0 * (v - 1.0)).collect();
        opt.step(&mut [&mut p]);
    }
    assert!(p.value.iter().all(|v| (v - 1.0).abs() < 1e-3));
}

#[test]
fn sgd_step_is_lr_times_grad() {
    let mut p = Param::new(vec![1.0]);
    p.grad[0] = 2.0;
    Sgd { lr: 0.1 }.step(&mut [&mut p]);
    assert!((p.value[0] - 0.8).abs() < 1e-15);
}

#[test]
fn tensors_cover_params_and_buffers() {
    let mut rng = seeded(1);
    let mut net = Sequential::new(vec![
        Layer::Conv(Conv2d::new(1, 2, 3, 1, 1, &mut rng)),
        Layer::BatchNorm(BatchNorm2d::new(2)),
    ]);
    assert_eq!(net.params_mut().len(), 4);
    assert_eq!(net.tensors_mut().len(), 6);
    assert_eq!(net.num_params(), 2 * 9 + 2 + 2 + 2);
}
