//! Whole-network checks: a layer-by-layer oracle replay of a built graph and a
//! finite-difference gradient check of the composed Mbed-ATN.

#![allow(dead_code)]

use std::collections::HashMap;

use rflab_core::engine::{softmax_xent, Mode, Tensor};
use rflab_core::model::{build_mbed_atn, LayerSpec, MbedAtn};
use rflab_core::seed;

use super::*;

type Params = HashMap<String, Vec<f64>>;

fn params_of(net: &MbedAtn<f64>) -> Params {
    net.named_tensors().into_iter().map(|(n, t)| (n, t.data().to_vec())).collect()
}

/// Replays `layers` in evaluation mode with the nested-loop oracles.
/// Activations are `channels x length` nested vectors.
pub fn replay(layers: &[LayerSpec], prefix: &str, p: &Params, x: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut cur = x;
    for (i, spec) in layers.iter().enumerate() {
        let get = |n: &str| &p[&format!("{prefix}.{i}.{n}")];
        cur = match spec {
            LayerSpec::Conv1d { in_channels, out_channels, stride, padding, .. } => {
                let w = reshape3(get("weight"), *out_channels, *in_channels);
                conv1d_oracle(&cur, &w, get("bias"), *stride, *padding)
            }
            LayerSpec::Maxpool { window } => maxpool_oracle(&cur, *window),
            LayerSpec::Dense { out_features, .. } => {
                let w = reshape2(get("weight"), *out_features);
                vec![dense_oracle(&cur[0], &w, get("bias"))]
            }
            LayerSpec::Prelu => {
                let a = get("slope")[0];
                cur.iter().map(|r| r.iter().map(|&v| prelu_oracle(v, a)).collect()).collect()
            }
            LayerSpec::Relu => cur.iter().map(|r| r.iter().map(|&v| v.max(0.0)).collect()).collect(),
            LayerSpec::Silu => cur.iter().map(|r| r.iter().map(|&v| silu_oracle(v)).collect()).collect(),
            LayerSpec::Dropout { .. } | LayerSpec::Concat { .. } => cur,
            LayerSpec::Flatten => vec![cur.concat()],
            LayerSpec::Gru { input_size, hidden, layers: nl, .. } => {
                let seq: Vec<Vec<f64>> = cur[0].chunks(*input_size).map(|c| c.to_vec()).collect();
                let oracle_layers: Vec<OracleGruLayer> = (0..*nl)
                    .map(|l| {
                        let g = |n: &str| get(&format!("l{l}.{n}"));
                        OracleGruLayer {
                            w: [reshape2(g("w_u"), *hidden), reshape2(g("w_r"), *hidden), reshape2(g("w_h"), *hidden)],
                            r: [reshape2(g("r_u"), *hidden), reshape2(g("r_r"), *hidden), reshape2(g("r_h"), *hidden)],
                            b: [g("b_u").clone(), g("b_r").clone(), g("b_h").clone()],
                        }
                    })
                    .collect();
                let (_, finals) = gru_oracle(&seq, &oracle_layers, &vec![vec![0.0; *hidden]; *nl]);
                vec![finals[nl - 1].clone()]
            }
            LayerSpec::Softmax => {
                let row = &cur[0];
                let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = row.iter().map(|v| (v - mx).exp()).collect();
                let s: f64 = e.iter().sum();
                vec![e.iter().map(|v| v / s).collect()]
            }
        };
    }
    cur
}

/// Eval-mode class probabilities of the full network, computed by the oracles.
pub fn oracle_probs(net: &MbedAtn<f64>, x: &[Vec<f64>]) -> Vec<f64> {
    let p = params_of(net);
    let f = replay(&net.graph.mbed.layers, "mbed", &p, x.to_vec());
    let mut a = Vec::new();
    for (b, layers) in net.graph.atn.branches.iter().enumerate() {
        a.extend(replay(layers, &format!("atn.branch{}", b + 1), &p, f.clone()).concat());
    }
    replay(&net.graph.atn.head, "atn.head", &p, vec![a]).concat()
}

/// Finite-difference check of every parameter of a composed Mbed-ATN in
/// training mode (dropout masks pinned by reseeding). Returns the relative
/// error between analytic and numeric gradients over all parameters.
pub fn full_model_gradient_check(scale: f64, m: usize, classes: usize, seed_value: u64) -> f64 {
    let graph = build_mbed_atn(3, m, scale, classes, 1).unwrap();
    let mut net = MbedAtn::<f64>::new(graph, seed_value).unwrap();
    // nonzero biases so every bias path is exercised
    let mut r = rng(seed_value ^ 0xb1a5);
    for (name, t) in net.named_tensors().into_iter().map(|(n, t)| (n, t.len())).collect::<Vec<_>>() {
        if name.ends_with(".bias") {
            let v = randn_vec(&mut r, t, 0.05);
            let idx = net.named_tensors().iter().position(|(n, _)| *n == name).unwrap();
            let mut all: Vec<_> = net.records();
            all[idx].values = v.iter().map(|&x| x as f32).collect();
            let rec = vec![all[idx].clone()];
            net.load_records(&rec).unwrap();
        }
    }
    let x = Tensor::from_f64(&[3, m], &randn_vec(&mut r, 3 * m, 1.0)).unwrap();
    let label = 1 % classes;
    let stream = [seed_value, seed::tag("fd-dropout")];

    let loss_of = |net: &MbedAtn<f64>| -> f64 {
        let mut rr = seed::rng(&stream);
        let z = net.logits(&x, Mode::Train, &mut rr).unwrap();
        softmax_xent(&z.reshape(&[classes]).unwrap(), label).unwrap().0
    };

    let mut rr = seed::rng(&stream);
    let (f, mtrace) = net.embed_traced(&x, Mode::Train, &mut rr).unwrap();
    let (z, atrace) = net.atn_logits_traced(&f, Mode::Train, &mut rr).unwrap();
    let (_, probs) = softmax_xent(&z.clone().reshape(&[classes]).unwrap(), label).unwrap();
    let mut gz = probs.data().to_vec();
    gz[label] -= 1.0;
    let gz = Tensor::new(&[1, classes], gz).unwrap();
    let (gf, bgrads, hgrads) = net.atn_backward(&atrace, &gz).unwrap();
    let (_, mgrads) = net.mbed_backward(&mtrace, &gf).unwrap();

    let mut analytic = Vec::new();
    for g in &mgrads {
        analytic.extend(g.named().into_iter().flat_map(|(_, t)| t.data().to_vec()));
    }
    for b in &bgrads {
        for g in b {
            analytic.extend(g.named().into_iter().flat_map(|(_, t)| t.data().to_vec()));
        }
    }
    for g in &hgrads {
        analytic.extend(g.named().into_iter().flat_map(|(_, t)| t.data().to_vec()));
    }

    // flat parameter vector in the same order: mbed, branches, head
    let flat = |net: &MbedAtn<f64>| -> Vec<f64> {
        net.mbed_named()
            .into_iter()
            .chain(net.atn_named())
            .flat_map(|(_, t)| t.data().to_vec())
            .collect()
    };
    let theta = flat(&net);
    assert_eq!(theta.len(), analytic.len());
    let mut probe = net.clone();
    let mut f_eval = |v: &[f64]| -> f64 {
        let mut off = 0;
        for t in probe.mbed_tensors_mut().into_iter().chain(Vec::new()) {
            let n = t.len();
            t.data_mut().copy_from_slice(&v[off..off + n]);
            off += n;
        }
        for t in probe.atn_tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&v[off..off + n]);
            off += n;
        }
        loss_of(&probe)
    };
    let numeric = fd_grad(&mut f_eval, &theta, 1e-6);
    rel_err(&analytic, &numeric)
}
