//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the engine kernels: every oracle is a direct
//! nested-loop transcription of the defining formula.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0) * scale).collect()
}

/// `input[ci][l]`, `kernels[co][ci][k]`.
pub fn conv1d_oracle(
    input: &[Vec<f64>],
    kernels: &[Vec<Vec<f64>>],
    bias: &[f64],
    stride: usize,
    padding: usize,
) -> Vec<Vec<f64>> {
    let len = input[0].len() as isize;
    let k = kernels[0][0].len() as isize;
    let out_len = ((len + 2 * padding as isize - k) / stride as isize + 1) as usize;
    let mut out = vec![vec![0.0; out_len]; kernels.len()];
    for (co, kc) in kernels.iter().enumerate() {
        for t in 0..out_len {
            let mut acc = bias[co];
            for (ci, row) in input.iter().enumerate() {
                for kk in 0..k {
                    let pos = (t * stride) as isize + kk - padding as isize;
                    if pos >= 0 && pos < len {
                        acc += kc[ci][kk as usize] * row[pos as usize];
                    }
                }
            }
            out[co][t] = acc;
        }
    }
    out
}

pub fn maxpool_oracle(input: &[Vec<f64>], window: usize) -> Vec<Vec<f64>> {
    input
        .iter()
        .map(|row| {
            (0..row.len() / window)
                .map(|j| {
                    let mut m = f64::NEG_INFINITY;
                    for i in 0..window {
                        if row[j * window + i] > m {
                            m = row[j * window + i];
                        }
                    }
                    m
                })
                .collect()
        })
        .collect()
}

pub fn dense_oracle(x: &[f64], w: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    for i in 0..w.len() {
        out[i] = b[i];
        for j in 0..x.len() {
            out[i] += w[i][j] * x[j];
        }
    }
    out
}

pub fn prelu_oracle(x: f64, a: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        a * x
    }
}

pub fn silu_oracle(x: f64) -> f64 {
    x * (1.0 / (1.0 + (-x).exp()))
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One GRU layer's weights as nested vectors: `[w_u, w_r, w_h]` are `H x F`,
/// `[r_u, r_r, r_h]` are `H x H`, `[b_u, b_r, b_h]` are `H`.
pub struct OracleGruLayer {
    pub w: [Vec<Vec<f64>>; 3],
    pub r: [Vec<Vec<f64>>; 3],
    pub b: [Vec<f64>; 3],
}

/// Layer-by-layer scalar GRU. Returns `(last layer outputs per step, final state per layer)`.
pub fn gru_oracle(seq: &[Vec<f64>], layers: &[OracleGruLayer], h0: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut inputs: Vec<Vec<f64>> = seq.to_vec();
    let mut finals = Vec::new();
    for (l, p) in layers.iter().enumerate() {
        let hsz = p.b[0].len();
        let mut h = h0[l].clone();
        let mut outs = Vec::new();
        for x in &inputs {
            let mut u = vec![0.0; hsz];
            let mut r = vec![0.0; hsz];
            for i in 0..hsz {
                let mut su = p.b[0][i];
                let mut sr = p.b[1][i];
                for j in 0..x.len() {
                    su += p.w[0][i][j] * x[j];
                    sr += p.w[1][i][j] * x[j];
                }
                for j in 0..hsz {
                    su += p.r[0][i][j] * h[j];
                    sr += p.r[1][i][j] * h[j];
                }
                u[i] = sig(su);
                r[i] = sig(sr);
            }
            let mut next = vec![0.0; hsz];
            for i in 0..hsz {
                let mut sh = p.b[2][i];
                for j in 0..x.len() {
                    sh += p.w[2][i][j] * x[j];
                }
                for j in 0..hsz {
                    sh += p.r[2][i][j] * (r[j] * h[j]);
                }
                let cand = sh.tanh();
                next[i] = (1.0 - u[i]) * h[i] + u[i] * cand;
            }
            h = next;
            outs.push(h.clone());
        }
        finals.push(h);
        inputs = outs;
    }
    (inputs, finals)
}

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_grad(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + h;
            let fp = f(&xp);
            xp[i] = orig - h;
            let fm = f(&xp);
            xp[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = na.max(nb);
    if denom < 1e-12 {
        0.0
    } else {
        diff / denom
    }
}

pub fn reshape2(v: &[f64], rows: usize) -> Vec<Vec<f64>> {
    let cols = v.len() / rows;
    v.chunks(cols).map(|c| c.to_vec()).collect()
}

pub fn reshape3(v: &[f64], a: usize, b: usize) -> Vec<Vec<Vec<f64>>> {
    let c = v.len() / (a * b);
    v.chunks(b * c).map(|blk| blk.chunks(c).map(|r| r.to_vec()).collect()).collect()
}

pub mod sweeps;
pub mod model_checks;
pub mod toy;
pub mod kpi;
