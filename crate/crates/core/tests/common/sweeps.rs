//! Randomised engine-vs-oracle sweeps and finite-difference checks, shared by
//! the engine tests and the acceptance suite. Each returns the worst error seen.

#![allow(dead_code)]

use rand::Rng;
use rflab_core::engine::{self, GruParams, Mode, Tensor};

use super::*;

fn tensor(shape: &[usize], v: &[f64]) -> Tensor<f64> {
    Tensor::from_f64(shape, v).unwrap()
}

pub fn conv1d_sweep(instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let c_in = r.gen_range(1..4);
        let c_out = r.gen_range(1..5);
        let k = r.gen_range(1..8);
        let stride = r.gen_range(1..4);
        let padding = r.gen_range(0..3);
        let len = r.gen_range(k.max(1)..40);
        let x = randn_vec(&mut r, c_in * len, 2.0);
        let w = randn_vec(&mut r, c_out * c_in * k, 1.0);
        let b = randn_vec(&mut r, c_out, 1.0);
        let got = engine::conv1d(
            &tensor(&[c_in, len], &x),
            &tensor(&[c_out, c_in, k], &w),
            &tensor(&[c_out], &b),
            stride,
            padding,
        )
        .unwrap();
        let want = conv1d_oracle(&reshape2(&x, c_in), &reshape3(&w, c_out, c_in), &b, stride, padding);
        let flat: Vec<f64> = want.concat();
        assert_eq!(got.len(), flat.len());
        for (a, b) in got.data().iter().zip(&flat) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

pub fn maxpool_sweep(instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let c = r.gen_range(1..4);
        let window = r.gen_range(1..9);
        let len = r.gen_range(window..60);
        let x = randn_vec(&mut r, c * len, 3.0);
        let (got, _) = engine::maxpool1d(&tensor(&[c, len], &x), window).unwrap();
        let want: Vec<f64> = maxpool_oracle(&reshape2(&x, c), window).concat();
        for (a, b) in got.data().iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

pub fn dense_sweep(instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n_in = r.gen_range(1..70);
        let n_out = r.gen_range(1..20);
        let x = randn_vec(&mut r, n_in, 2.0);
        let w = randn_vec(&mut r, n_out * n_in, 1.0);
        let b = randn_vec(&mut r, n_out, 1.0);
        let got = engine::dense(&tensor(&[n_in], &x), &tensor(&[n_out, n_in], &w), &tensor(&[n_out], &b)).unwrap();
        let want = dense_oracle(&x, &reshape2(&w, n_out), &b);
        for (a, b) in got.data().iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

pub fn activation_sweep(instances: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let (mut w_prelu, mut w_silu) = (0.0f64, 0.0f64);
    for _ in 0..instances {
        let n = r.gen_range(1..50);
        let x = randn_vec(&mut r, n, 6.0);
        let a = r.gen_range(-0.5..0.5);
        let t = tensor(&[n], &x);
        for (got, &xi) in engine::prelu(&t, a).data().iter().zip(&x) {
            w_prelu = w_prelu.max((got - prelu_oracle(xi, a)).abs());
        }
        for (got, &xi) in engine::silu(&t).data().iter().zip(&x) {
            w_silu = w_silu.max((got - silu_oracle(xi)).abs());
        }
    }
    (w_prelu, w_silu)
}

pub fn random_gru(r: &mut ChaCha8Rng, input: usize, hidden: usize, layers: usize, scale: f64) -> GruParams<f64> {
    let mut p = GruParams::<f64>::zeros(input, hidden, layers).unwrap();
    for layer in p.layers.iter_mut() {
        for t in layer.tensors_mut() {
            for v in t.data_mut() {
                *v = r.gen_range(-1.0..1.0) * scale;
            }
        }
    }
    p
}

pub fn to_oracle_layers(p: &GruParams<f64>) -> Vec<OracleGruLayer> {
    p.layers
        .iter()
        .map(|l| {
            let h = l.hidden_size();
            OracleGruLayer {
                w: [reshape2(l.w_u.data(), h), reshape2(l.w_r.data(), h), reshape2(l.w_h.data(), h)],
                r: [reshape2(l.r_u.data(), h), reshape2(l.r_r.data(), h), reshape2(l.r_h.data(), h)],
                b: [l.b_u.data().to_vec(), l.b_r.data().to_vec(), l.b_h.data().to_vec()],
            }
        })
        .collect()
}

pub fn gru_sweep(instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let f = r.gen_range(1..4);
        let h = r.gen_range(1..6);
        let layers = r.gen_range(1..4);
        let steps = r.gen_range(1..8);
        let p = random_gru(&mut r, f, h, layers, 0.8);
        let seq = randn_vec(&mut r, steps * f, 1.5);
        let h0 = randn_vec(&mut r, layers * h, 0.5);
        let (out, h_t) = engine::gru_forward(&tensor(&[steps, f], &seq), &p, &tensor(&[layers, h], &h0)).unwrap();
        let (want_out, want_h) = gru_oracle(&reshape2(&seq, steps), &to_oracle_layers(&p), &reshape2(&h0, layers));
        for (a, b) in out.data().iter().zip(want_out.concat().iter()) {
            worst = worst.max((a - b).abs());
        }
        for (a, b) in h_t.data().iter().zip(want_h.concat().iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// Weighted-sum loss `sum(out * weights)` so the upstream gradient is `weights`.
fn weighted(out: &[f64], w: &[f64]) -> f64 {
    out.iter().zip(w).map(|(a, b)| a * b).sum()
}

const FD_STEP: f64 = 1e-5;

/// Finite-difference checks for every differentiable kernel. Returns the
/// worst relative error over inputs and parameters.
pub fn kernel_gradient_sweep(instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        // conv1d
        let (c_in, c_out, k) = (r.gen_range(1..3), r.gen_range(1..4), r.gen_range(1..5));
        let (stride, padding) = (r.gen_range(1..3), r.gen_range(0..2));
        let len = r.gen_range(k + 1..15);
        let x = randn_vec(&mut r, c_in * len, 1.0);
        let w = randn_vec(&mut r, c_out * c_in * k, 1.0);
        let b = randn_vec(&mut r, c_out, 1.0);
        let xs = [c_in, len];
        let ws = [c_out, c_in, k];
        let out_len = engine::conv1d_output_len(len, k, stride, padding).unwrap();
        let up = randn_vec(&mut r, c_out * out_len, 1.0);
        let (gx, gw, gb) = engine::conv1d_backward(
            &tensor(&xs, &x),
            &tensor(&ws, &w),
            stride,
            padding,
            &tensor(&[c_out, out_len], &up),
        )
        .unwrap();
        let conv = |x: &[f64], w: &[f64], b: &[f64]| {
            engine::conv1d(&tensor(&xs, x), &tensor(&ws, w), &tensor(&[c_out], b), stride, padding)
                .unwrap()
                .into_data()
        };
        let nx = fd_grad(&mut |v| weighted(&conv(v, &w, &b), &up), &x, FD_STEP);
        let nw = fd_grad(&mut |v| weighted(&conv(&x, v, &b), &up), &w, FD_STEP);
        let nb = fd_grad(&mut |v| weighted(&conv(&x, &w, v), &up), &b, FD_STEP);
        worst = worst.max(rel_err(gx.data(), &nx)).max(rel_err(gw.data(), &nw)).max(rel_err(gb.data(), &nb));

        // maxpool (inputs spread apart so no tie sits within the FD step)
        let window = r.gen_range(1..4);
        let plen = window * r.gen_range(1..6) + r.gen_range(0..window);
        let px: Vec<f64> = (0..2 * plen).map(|i| (i as f64 * 0.37).sin() * 3.0 + i as f64 * 1e-3).collect();
        let (po, arg) = engine::maxpool1d(&tensor(&[2, plen], &px), window).unwrap();
        let pup = randn_vec(&mut r, po.len(), 1.0);
        let pg = engine::maxpool1d_backward(&[2, plen], &arg, &tensor(po.shape(), &pup)).unwrap();
        let npg = fd_grad(
            &mut |v| weighted(engine::maxpool1d(&tensor(&[2, plen], v), window).unwrap().0.data(), &pup),
            &px,
            FD_STEP,
        );
        worst = worst.max(rel_err(pg.data(), &npg));

        // dense
        let (n_in, n_out) = (r.gen_range(1..8), r.gen_range(1..6));
        let dx = randn_vec(&mut r, n_in, 1.0);
        let dw = randn_vec(&mut r, n_out * n_in, 1.0);
        let db = randn_vec(&mut r, n_out, 1.0);
        let dup = randn_vec(&mut r, n_out, 1.0);
        let (gdx, gdw, gdb) =
            engine::dense_backward(&tensor(&[n_in], &dx), &tensor(&[n_out, n_in], &dw), &tensor(&[n_out], &dup)).unwrap();
        let dn = |x: &[f64], w: &[f64], b: &[f64]| {
            engine::dense(&tensor(&[n_in], x), &tensor(&[n_out, n_in], w), &tensor(&[n_out], b))
                .unwrap()
                .into_data()
        };
        worst = worst
            .max(rel_err(gdx.data(), &fd_grad(&mut |v| weighted(&dn(v, &dw, &db), &dup), &dx, FD_STEP)))
            .max(rel_err(gdw.data(), &fd_grad(&mut |v| weighted(&dn(&dx, v, &db), &dup), &dw, FD_STEP)))
            .max(rel_err(gdb.data(), &fd_grad(&mut |v| weighted(&dn(&dx, &dw, v), &dup), &db, FD_STEP)));

        // prelu / silu, inputs kept away from the PReLU kink
        let n = r.gen_range(1..10);
        let ax: Vec<f64> = randn_vec(&mut r, n, 2.0)
            .into_iter()
            .map(|v| if v.abs() < 0.05 { v + 0.1 } else { v })
            .collect();
        let slope = r.gen_range(0.0..0.5);
        let aup = randn_vec(&mut r, n, 1.0);
        let (gpx, gpa) = engine::prelu_backward(&tensor(&[n], &ax), slope, &tensor(&[n], &aup));
        let npx = fd_grad(&mut |v| weighted(engine::prelu(&tensor(&[n], v), slope).data(), &aup), &ax, FD_STEP);
        let npa = fd_grad(&mut |a| weighted(engine::prelu(&tensor(&[n], &ax), a[0]).data(), &aup), &[slope], FD_STEP);
        worst = worst.max(rel_err(gpx.data(), &npx)).max(rel_err(&[gpa], &npa));
        let gsx = engine::silu_backward(&tensor(&[n], &ax), &tensor(&[n], &aup));
        let nsx = fd_grad(&mut |v| weighted(engine::silu(&tensor(&[n], v)).data(), &aup), &ax, FD_STEP);
        worst = worst.max(rel_err(gsx.data(), &nsx));

        // softmax cross-entropy with respect to logits
        let c = r.gen_range(2..8);
        let logits = randn_vec(&mut r, c, 3.0);
        let label = r.gen_range(0..c);
        let (_, probs) = engine::softmax_xent(&tensor(&[c], &logits), label).unwrap();
        let mut g = probs.into_data();
        g[label] -= 1.0;
        let ng = fd_grad(
            &mut |v| engine::softmax_xent(&tensor(&[c], v), label).unwrap().0,
            &logits,
            FD_STEP,
        );
        worst = worst.max(rel_err(&g, &ng));

        // gru: all parameters, the input sequence and h0
        worst = worst.max(gru_gradient_check(&mut r));
    }
    worst
}

fn gru_gradient_check(r: &mut ChaCha8Rng) -> f64 {
    let (f, h, layers, steps) = (r.gen_range(1..3), r.gen_range(1..4), r.gen_range(1..4), r.gen_range(1..5));
    let p = random_gru(r, f, h, layers, 0.7);
    let seq = randn_vec(r, steps * f, 1.0);
    let h0 = randn_vec(r, layers * h, 0.5);
    let up_out = randn_vec(r, steps * h, 1.0);
    let up_h = randn_vec(r, layers * h, 1.0);
    let loss = |p: &GruParams<f64>, seq: &[f64], h0: &[f64]| {
        let (o, ht) = engine::gru_forward(&tensor(&[steps, f], seq), p, &tensor(&[layers, h], h0)).unwrap();
        weighted(o.data(), &up_out) + weighted(ht.data(), &up_h)
    };
    let mut unused = rng(0);
    let (_, _, trace) = engine::gru_forward_traced(
        &tensor(&[steps, f], &seq),
        &p,
        &tensor(&[layers, h], &h0),
        0.0,
        Mode::Eval,
        &mut unused,
    )
    .unwrap();
    let grads = engine::gru_backward(&p, &trace, Some(&tensor(&[steps, h], &up_out)), &tensor(&[layers, h], &up_h)).unwrap();
    let mut worst = rel_err(grads.seq.data(), &fd_grad(&mut |v| loss(&p, v, &h0), &seq, FD_STEP));
    worst = worst.max(rel_err(grads.h0.data(), &fd_grad(&mut |v| loss(&p, &seq, v), &h0, FD_STEP)));
    for l in 0..layers {
        for ti in 0..9 {
            let base = p.layers[l].tensors()[ti].data().to_vec();
            let numeric = fd_grad(
                &mut |v| {
                    let mut q = p.clone();
                    q.layers[l].tensors_mut()[ti].data_mut().copy_from_slice(v);
                    loss(&q, &seq, &h0)
                },
                &base,
                FD_STEP,
            );
            worst = worst.max(rel_err(grads.layers[l].tensors()[ti].data(), &numeric));
        }
    }
    worst
}
