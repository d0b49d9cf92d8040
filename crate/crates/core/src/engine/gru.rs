//! Multi-layer GRU with update gate `u`, reset gate `r` and candidate state:
//!
//! ```text
//! u_t = σ(W_u x_t + R_u h_{t-1} + b_u)
//! r_t = σ(W_r x_t + R_r h_{t-1} + b_r)
//! ĥ_t = tanh(W_h x_t + R_h (r_t ⊙ h_{t-1}) + b_h)
//! h_t = (1 - u_t) ⊙ h_{t-1} + u_t ⊙ ĥ_t
//! ```

use rand::Rng;

use super::dropout::{dropout, Mode};
use super::ops::{dot, sigmoid};
use super::tensor::{Scalar, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GruLayer<T> {
    pub w_u: Tensor<T>,
    pub w_r: Tensor<T>,
    pub w_h: Tensor<T>,
    pub r_u: Tensor<T>,
    pub r_r: Tensor<T>,
    pub r_h: Tensor<T>,
    pub b_u: Tensor<T>,
    pub b_r: Tensor<T>,
    pub b_h: Tensor<T>,
}

pub const GRU_TENSOR_NAMES: [&str; 9] = ["w_u", "w_r", "w_h", "r_u", "r_r", "r_h", "b_u", "b_r", "b_h"];

impl<T: Scalar> GruLayer<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Tensor::zeros(&[hidden, input]);
        let r = || Tensor::zeros(&[hidden, hidden]);
        let b = || Tensor::zeros(&[hidden]);
        GruLayer {
            w_u: w(),
            w_r: w(),
            w_h: w(),
            r_u: r(),
            r_r: r(),
            r_h: r(),
            b_u: b(),
            b_r: b(),
            b_h: b(),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_u.dim(1)
    }

    pub fn hidden_size(&self) -> usize {
        self.w_u.dim(0)
    }

    /// Tensors in the fixed order of [`GRU_TENSOR_NAMES`].
    pub fn tensors(&self) -> [&Tensor<T>; 9] {
        [
            &self.w_u, &self.w_r, &self.w_h, &self.r_u, &self.r_r, &self.r_h, &self.b_u, &self.b_r,
            &self.b_h,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor<T>; 9] {
        [
            &mut self.w_u,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.r_u,
            &mut self.r_r,
            &mut self.r_h,
            &mut self.b_u,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruParams<T> {
    pub layers: Vec<GruLayer<T>>,
}

impl<T: Scalar> GruParams<T> {
    pub fn zeros(input: usize, hidden: usize, num_layers: usize) -> Result<Self> {
        if input == 0 || hidden == 0 || num_layers == 0 {
            return Err(Error::Argument("gru: sizes must be positive".into()));
        }
        let layers = (0..num_layers)
            .map(|l| GruLayer::zeros(if l == 0 { input } else { hidden }, hidden))
            .collect();
        Ok(GruParams { layers })
    }

    pub fn hidden_size(&self) -> usize {
        self.layers[0].hidden_size()
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    fn validate(&self) -> Result<()> {
        let h = self.hidden_size();
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 && layer.input_size() != h {
                return Err(Error::dim("gru", "layer_input", h, layer.input_size()));
            }
            if layer.hidden_size() != h {
                return Err(Error::dim("gru", "hidden", h, layer.hidden_size()));
            }
        }
        Ok(())
    }
}

/// Forward activations retained for backpropagation through time.
#[derive(Debug, Clone)]
pub struct GruTrace<T> {
    steps: usize,
    layers: Vec<LayerTrace<T>>,
    /// Dropout scale masks applied to the input of layers `1..`.
    masks: Vec<Option<Vec<T>>>,
}

#[derive(Debug, Clone)]
struct LayerTrace<T> {
    input: Vec<T>,
    /// `steps + 1` hidden states, index 0 is the initial state.
    h: Vec<T>,
    u: Vec<T>,
    r: Vec<T>,
    cand: Vec<T>,
}

fn matvec_acc<T: Scalar>(m: &[T], x: &[T], out: &mut [T]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

fn run_layer<T: Scalar>(layer: &GruLayer<T>, input: &[T], steps: usize, h0: &[T]) -> LayerTrace<T> {
    let f = layer.input_size();
    let hs = layer.hidden_size();
    let mut h = Vec::with_capacity((steps + 1) * hs);
    h.extend_from_slice(h0);
    let mut u = vec![T::zero(); steps * hs];
    let mut r = vec![T::zero(); steps * hs];
    let mut cand = vec![T::zero(); steps * hs];
    let mut pre_u = vec![T::zero(); hs];
    let mut pre_r = vec![T::zero(); hs];
    let mut pre_h = vec![T::zero(); hs];
    let mut rh = vec![T::zero(); hs];
    for t in 0..steps {
        let x = &input[t * f..(t + 1) * f];
        let hp = &h[t * hs..(t + 1) * hs];
        pre_u.copy_from_slice(layer.b_u.data());
        pre_r.copy_from_slice(layer.b_r.data());
        pre_h.copy_from_slice(layer.b_h.data());
        matvec_acc(layer.w_u.data(), x, &mut pre_u);
        matvec_acc(layer.w_r.data(), x, &mut pre_r);
        matvec_acc(layer.w_h.data(), x, &mut pre_h);
        matvec_acc(layer.r_u.data(), hp, &mut pre_u);
        matvec_acc(layer.r_r.data(), hp, &mut pre_r);
        let ut = &mut u[t * hs..(t + 1) * hs];
        let rt = &mut r[t * hs..(t + 1) * hs];
        for i in 0..hs {
            ut[i] = sigmoid(pre_u[i]);
            rt[i] = sigmoid(pre_r[i]);
            rh[i] = rt[i] * hp[i];
        }
        matvec_acc(layer.r_h.data(), &rh, &mut pre_h);
        let ct = &mut cand[t * hs..(t + 1) * hs];
        let mut next = Vec::with_capacity(hs);
        for i in 0..hs {
            ct[i] = pre_h[i].tanh();
            next.push((T::one() - ut[i]) * hp[i] + ut[i] * ct[i]);
        }
        h.extend_from_slice(&next);
    }
    LayerTrace {
        input: input.to_vec(),
        h,
        u,
        r,
        cand,
    }
}

fn check_inputs<T: Scalar>(seq: &Tensor<T>, params: &GruParams<T>, h0: &Tensor<T>) -> Result<()> {
    params.validate()?;
    if seq.rank() != 2 {
        return Err(Error::dim("gru_forward", "rank", 2, seq.rank()));
    }
    if seq.dim(1) != params.input_size() {
        return Err(Error::dim("gru_forward", "features", params.input_size(), seq.dim(1)));
    }
    let want = [params.num_layers(), params.hidden_size()];
    if h0.shape() != want {
        return Err(Error::dim("gru_forward", "h0", want[0] * want[1], h0.len()));
    }
    Ok(())
}

/// Traced forward pass. Dropout with `dropout_rate` is applied between layers
/// in training mode only.
pub fn gru_forward_traced<T: Scalar, R: Rng + ?Sized>(
    seq: &Tensor<T>,
    params: &GruParams<T>,
    h0: &Tensor<T>,
    dropout_rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Tensor<T>, Tensor<T>, GruTrace<T>)> {
    check_inputs(seq, params, h0)?;
    let steps = seq.dim(0);
    let hs = params.hidden_size();
    let mut layers = Vec::with_capacity(params.num_layers());
    let mut masks = Vec::with_capacity(params.num_layers().saturating_sub(1));
    let mut input = seq.data().to_vec();
    let mut h_last = Vec::with_capacity(params.num_layers() * hs);
    for (l, layer) in params.layers.iter().enumerate() {
        if l > 0 {
            let prev = Tensor::new(&[steps, hs], input)?;
            let (dropped, mask) = dropout(&prev, dropout_rate, mode, rng)?;
            masks.push(mask);
            input = dropped.into_data();
        }
        let trace = run_layer(layer, &input, steps, &h0.data()[l * hs..(l + 1) * hs]);
        h_last.extend_from_slice(&trace.h[steps * hs..]);
        input = trace.h[hs..].to_vec();
        layers.push(trace);
    }
    let outputs = Tensor::new(&[steps, hs], input)?;
    let h_t = Tensor::new(&[params.num_layers(), hs], h_last)?;
    Ok((outputs, h_t, GruTrace { steps, layers, masks }))
}

/// Evaluation forward pass: returns `(outputs of last layer, final hidden state per layer)`.
pub fn gru_forward<T: Scalar>(
    seq: &Tensor<T>,
    params: &GruParams<T>,
    h0: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let mut unused = rand::rngs::mock::StepRng::new(0, 0);
    let (out, h_t, _) = gru_forward_traced(seq, params, h0, 0.0, Mode::Eval, &mut unused)?;
    Ok((out, h_t))
}

#[derive(Debug, Clone)]
pub struct GruGrads<T> {
    pub layers: Vec<GruLayer<T>>,
    pub seq: Tensor<T>,
    pub h0: Tensor<T>,
}

fn outer_acc<T: Scalar>(g: &mut [T], a: &[T], b: &[T]) {
    let cols = b.len();
    for (row, &ai) in g.chunks_exact_mut(cols).zip(a) {
        if ai == T::zero() {
            continue;
        }
        for (v, &bj) in row.iter_mut().zip(b) {
            *v += ai * bj;
        }
    }
}

fn matvec_t_acc<T: Scalar>(m: &[T], d: &[T], out: &mut [T]) {
    let cols = out.len();
    for (row, &di) in m.chunks_exact(cols).zip(d) {
        if di == T::zero() {
            continue;
        }
        for (o, &w) in out.iter_mut().zip(row) {
            *o += w * di;
        }
    }
}

/// Backpropagation through time.
///
/// `grad_outputs` is the gradient on the last layer's per-step outputs
/// (`steps x hidden`, optional for many-to-one use) and `grad_h_t` the
/// gradient on the final hidden state of every layer.
pub fn gru_backward<T: Scalar>(
    params: &GruParams<T>,
    trace: &GruTrace<T>,
    grad_outputs: Option<&Tensor<T>>,
    grad_h_t: &Tensor<T>,
) -> Result<GruGrads<T>> {
    let steps = trace.steps;
    let hs = params.hidden_size();
    let nl = params.num_layers();
    if grad_h_t.len() != nl * hs {
        return Err(Error::dim("gru_backward", "grad_h_t", nl * hs, grad_h_t.len()));
    }
    let mut d_out = match grad_outputs {
        Some(g) if g.len() != steps * hs => {
            return Err(Error::dim("gru_backward", "grad_outputs", steps * hs, g.len()))
        }
        Some(g) => g.data().to_vec(),
        None => vec![T::zero(); steps * hs],
    };
    let mut grads: Vec<GruLayer<T>> = params
        .layers
        .iter()
        .map(|l| GruLayer::zeros(l.input_size(), hs))
        .collect();
    let mut grad_h0 = vec![T::zero(); nl * hs];
    let one = T::one();

    for l in (0..nl).rev() {
        let layer = &params.layers[l];
        let tr = &trace.layers[l];
        let f = layer.input_size();
        let g = &mut grads[l];
        let mut d_in = vec![T::zero(); steps * f];
        let mut dh: Vec<T> = grad_h_t.data()[l * hs..(l + 1) * hs].to_vec();
        let mut d_pre_u = vec![T::zero(); hs];
        let mut d_pre_r = vec![T::zero(); hs];
        let mut d_pre_h = vec![T::zero(); hs];
        let mut d_rh = vec![T::zero(); hs];
        let mut rh = vec![T::zero(); hs];
        for t in (0..steps).rev() {
            for (a, &b) in dh.iter_mut().zip(&d_out[t * hs..(t + 1) * hs]) {
                *a += b;
            }
            let hp = &tr.h[t * hs..(t + 1) * hs];
            let ut = &tr.u[t * hs..(t + 1) * hs];
            let rt = &tr.r[t * hs..(t + 1) * hs];
            let ct = &tr.cand[t * hs..(t + 1) * hs];
            let x = &tr.input[t * f..(t + 1) * f];
            let mut dh_prev = vec![T::zero(); hs];
            for i in 0..hs {
                let d_cand = dh[i] * ut[i];
                let d_u = dh[i] * (ct[i] - hp[i]);
                dh_prev[i] = dh[i] * (one - ut[i]);
                d_pre_h[i] = d_cand * (one - ct[i] * ct[i]);
                d_pre_u[i] = d_u * ut[i] * (one - ut[i]);
                rh[i] = rt[i] * hp[i];
            }
            // candidate path
            outer_acc(g.w_h.data_mut(), &d_pre_h, x);
            outer_acc(g.r_h.data_mut(), &d_pre_h, &rh);
            d_rh.iter_mut().for_each(|v| *v = T::zero());
            matvec_t_acc(layer.r_h.data(), &d_pre_h, &mut d_rh);
            for i in 0..hs {
                let d_r = d_rh[i] * hp[i];
                dh_prev[i] += d_rh[i] * rt[i];
                d_pre_r[i] = d_r * rt[i] * (one - rt[i]);
            }
            // gates
            outer_acc(g.w_u.data_mut(), &d_pre_u, x);
            outer_acc(g.w_r.data_mut(), &d_pre_r, x);
            outer_acc(g.r_u.data_mut(), &d_pre_u, hp);
            outer_acc(g.r_r.data_mut(), &d_pre_r, hp);
            for i in 0..hs {
                g.b_u.data_mut()[i] += d_pre_u[i];
                g.b_r.data_mut()[i] += d_pre_r[i];
                g.b_h.data_mut()[i] += d_pre_h[i];
            }
            let dx = &mut d_in[t * f..(t + 1) * f];
            matvec_t_acc(layer.w_u.data(), &d_pre_u, dx);
            matvec_t_acc(layer.w_r.data(), &d_pre_r, dx);
            matvec_t_acc(layer.w_h.data(), &d_pre_h, dx);
            matvec_t_acc(layer.r_u.data(), &d_pre_u, &mut dh_prev);
            matvec_t_acc(layer.r_r.data(), &d_pre_r, &mut dh_prev);
            dh = dh_prev;
        }
        grad_h0[l * hs..(l + 1) * hs].copy_from_slice(&dh);
        if l > 0 {
            if let Some(mask) = &trace.masks[l - 1] {
                d_in.iter_mut().zip(mask).for_each(|(d, &m)| *d *= m);
            }
        }
        d_out = d_in;
    }
    Ok(GruGrads {
        layers: grads,
        seq: Tensor::new(&[steps, params.input_size()], d_out)?,
        h0: Tensor::new(&[nl, hs], grad_h0)?,
    })
}
