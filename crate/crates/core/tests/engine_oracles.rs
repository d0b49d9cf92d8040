mod common;

use common::sweeps;
use proptest::prelude::*;
use rflab_core::engine::{self, Tensor};

#[test]
fn conv1d_matches_loop_oracle() {
    assert!(sweeps::conv1d_sweep(150, 11) <= 1e-10);
}

#[test]
fn conv1d_strided_instance() {
    // 3x50 input, 4x3x7 kernels, stride 3
    let mut r = common::rng(3);
    let x = common::randn_vec(&mut r, 150, 1.0);
    let w = common::randn_vec(&mut r, 84, 1.0);
    let b = common::randn_vec(&mut r, 4, 1.0);
    let got = engine::conv1d(
        &Tensor::<f64>::from_f64(&[3, 50], &x).unwrap(),
        &Tensor::from_f64(&[4, 3, 7], &w).unwrap(),
        &Tensor::from_f64(&[4], &b).unwrap(),
        3,
        0,
    )
    .unwrap();
    let want = common::conv1d_oracle(&common::reshape2(&x, 3), &common::reshape3(&w, 4, 3), &b, 3, 0);
    assert_eq!(got.shape(), &[4, 15]);
    for (a, e) in got.data().iter().zip(want.concat()) {
        assert!((a - e).abs() <= 1e-12);
    }
}

#[test]
fn maxpool_matches_loop_oracle() {
    assert_eq!(sweeps::maxpool_sweep(150, 12), 0.0);
    let mut r = common::rng(5);
    let x = common::randn_vec(&mut r, 200, 1.0);
    let (got, _) = engine::maxpool1d(&Tensor::<f64>::from_f64(&[2, 100], &x).unwrap(), 8).unwrap();
    assert_eq!(got.data(), common::maxpool_oracle(&common::reshape2(&x, 2), 8).concat().as_slice());
}

#[test]
fn dense_matches_loop_oracle() {
    assert!(sweeps::dense_sweep(150, 13) <= 1e-12);
}

#[test]
fn activations_match_formula() {
    let (p, s) = sweeps::activation_sweep(150, 14);
    assert_eq!(p, 0.0);
    assert!(s <= 1e-12);
}

#[test]
fn gru_matches_layerwise_oracle() {
    assert!(sweeps::gru_sweep(150, 15) <= 1e-10);
}

#[test]
fn gru_three_layer_instance() {
    let mut r = common::rng(21);
    let p = sweeps::random_gru(&mut r, 2, 4, 3, 1.0);
    let seq = common::randn_vec(&mut r, 10, 1.0);
    let h0 = vec![0.0; 12];
    let (out, _) = engine::gru_forward(
        &Tensor::from_f64(&[5, 2], &seq).unwrap(),
        &p,
        &Tensor::from_f64(&[3, 4], &h0).unwrap(),
    )
    .unwrap();
    let (want, _) = common::gru_oracle(&common::reshape2(&seq, 5), &sweeps::to_oracle_layers(&p), &common::reshape2(&h0, 3));
    for (a, e) in out.data().iter().zip(want.concat()) {
        assert!((a - e).abs() <= 1e-10);
    }
}

#[test]
fn kernel_gradients_match_finite_differences() {
    let worst = sweeps::kernel_gradient_sweep(25, 16);
    assert!(worst <= 1e-4, "worst relative error {worst}");
}

#[test]
fn softmax_gradient_single_case() {
    let logits = [0.3, -1.2, 2.0, 0.0];
    let (_, p) = engine::softmax_xent(&Tensor::from_f64(&[4], &logits).unwrap(), 2).unwrap();
    let mut g = p.into_data();
    g[2] -= 1.0;
    let n = common::fd_grad(
        &mut |v| engine::softmax_xent(&Tensor::from_f64(&[4], v).unwrap(), 2).unwrap().0,
        &logits,
        1e-6,
    );
    assert!(common::rel_err(&g, &n) <= 1e-6);
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(logits in proptest::collection::vec(-50.0f64..50.0, 1..20)) {
        let p = engine::softmax(&Tensor::from_vec(logits));
        let sum: f64 = p.data().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
        prop_assert!(p.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn kernels_are_deterministic(seed in 0u64..1000) {
        prop_assert_eq!(sweeps::conv1d_sweep(2, seed), sweeps::conv1d_sweep(2, seed));
        let x = Tensor::<f32>::full(&[32], 1.0);
        let a = engine::dropout(&x, 0.4, engine::Mode::Train, &mut common::rng(seed)).unwrap().0;
        let b = engine::dropout(&x, 0.4, engine::Mode::Train, &mut common::rng(seed)).unwrap().0;
        prop_assert_eq!(a, b);
    }
}
