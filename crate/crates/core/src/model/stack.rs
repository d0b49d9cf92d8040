use rand::Rng;

use super::graph::LayerSpec;
use crate::engine::{
    conv1d, conv1d_backward, dense, dense_backward, dropout, dropout_backward, gru_backward, gru_forward_traced,
    maxpool1d, maxpool1d_backward, prelu, prelu_backward, relu, relu_backward, silu, silu_backward, softmax,
    GruParams, GruTrace, Mode, Scalar, Tensor, GRU_TENSOR_NAMES,
};
use crate::{seed, Error, Result};

/// Learnable state of one layer (also used for its gradient).
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams<T> {
    None,
    Affine { weight: Tensor<T>, bias: Tensor<T> },
    Slope(Tensor<T>),
    Gru(GruParams<T>),
}

impl<T: Scalar> LayerParams<T> {
    fn zeros_for(spec: &LayerSpec) -> Result<Self> {
        Ok(match spec {
            LayerSpec::Conv1d { in_channels, out_channels, kernel, .. } => LayerParams::Affine {
                weight: Tensor::zeros(&[*out_channels, *in_channels, *kernel]),
                bias: Tensor::zeros(&[*out_channels]),
            },
            LayerSpec::Dense { in_features, out_features } => LayerParams::Affine {
                weight: Tensor::zeros(&[*out_features, *in_features]),
                bias: Tensor::zeros(&[*out_features]),
            },
            LayerSpec::Prelu => LayerParams::Slope(Tensor::zeros(&[1])),
            LayerSpec::Gru { input_size, hidden, layers, .. } => {
                LayerParams::Gru(GruParams::zeros(*input_size, *hidden, *layers)?)
            }
            _ => LayerParams::None,
        })
    }

    /// `(suffix, tensor)` pairs in serialisation order.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        match self {
            LayerParams::None => vec![],
            LayerParams::Affine { weight, bias } => vec![("weight".into(), weight), ("bias".into(), bias)],
            LayerParams::Slope(a) => vec![("slope".into(), a)],
            LayerParams::Gru(p) => p
                .layers
                .iter()
                .enumerate()
                .flat_map(|(l, layer)| {
                    GRU_TENSOR_NAMES
                        .iter()
                        .zip(layer.tensors())
                        .map(move |(n, t)| (format!("l{l}.{n}"), t))
                })
                .collect(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            LayerParams::None => vec![],
            LayerParams::Affine { weight, bias } => vec![weight, bias],
            LayerParams::Slope(a) => vec![a],
            LayerParams::Gru(p) => p.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect(),
        }
    }

    fn add_assign(&mut self, other: &Self) {
        let src: Vec<&Tensor<T>> = other.named().into_iter().map(|(_, t)| t).collect();
        for (dst, s) in self.tensors_mut().into_iter().zip(src) {
            for (d, &v) in dst.data_mut().iter_mut().zip(s.data()) {
                *d += v;
            }
        }
    }
}

/// Values a layer keeps from its forward pass for the backward pass.
#[derive(Debug, Clone)]
pub enum Cache<T> {
    Input(Tensor<T>),
    Pool { shape: Vec<usize>, argmax: Vec<usize> },
    Mask(Option<Vec<T>>),
    Gru { seq_shape: Vec<usize>, trace: GruTrace<T> },
    Shape(Vec<usize>),
    Probs(Tensor<T>),
    Nothing,
}

/// A sequential list of layers with instantiated parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack<T> {
    pub specs: Vec<LayerSpec>,
    pub params: Vec<LayerParams<T>>,
}

impl<T: Scalar> Stack<T> {
    pub fn zeros(specs: &[LayerSpec]) -> Result<Self> {
        let params = specs.iter().map(LayerParams::zeros_for).collect::<Result<_>>()?;
        Ok(Stack { specs: specs.to_vec(), params })
    }

    /// Kaiming-uniform (fan-in) conv/dense weights, zero biases, PReLU slopes
    /// of 0.25 and GRU entries uniform in `±1/sqrt(hidden)`. Every tensor draws
    /// from its own stream keyed by `(seed, name)`.
    pub fn init(specs: &[LayerSpec], prefix: &str, seed_value: u64) -> Result<Self> {
        let mut stack = Self::zeros(specs)?;
        for (i, (spec, p)) in stack.specs.iter().zip(stack.params.iter_mut()).enumerate() {
            let names: Vec<String> = p.named().into_iter().map(|(n, _)| format!("{prefix}.{i}.{n}")).collect();
            let bound = match spec {
                LayerSpec::Conv1d { in_channels, kernel, .. } => 1.0 / ((in_channels * kernel) as f64).sqrt(),
                LayerSpec::Dense { in_features, .. } => 1.0 / (*in_features as f64).sqrt(),
                LayerSpec::Gru { hidden, .. } => 1.0 / (*hidden as f64).sqrt(),
                _ => 0.0,
            };
            let is_gru = matches!(spec, LayerSpec::Gru { .. });
            for (name, t) in names.iter().zip(p.tensors_mut()) {
                let mut rng = seed::rng(&[seed_value, seed::tag(name)]);
                let fill = |rng: &mut rand_chacha::ChaCha8Rng| T::lit(rng.gen_range(-bound..=bound));
                if name.ends_with(".slope") {
                    t.data_mut().iter_mut().for_each(|v| *v = T::lit(0.25));
                } else if is_gru || name.ends_with(".weight") {
                    t.data_mut().iter_mut().for_each(|v| *v = fill(&mut rng));
                }
            }
        }
        Ok(stack)
    }

    pub fn named(&self, prefix: &str) -> Vec<(String, &Tensor<T>)> {
        self.params
            .iter()
            .enumerate()
            .flat_map(|(i, p)| p.named().into_iter().map(move |(n, t)| (format!("{prefix}.{i}.{n}"), t)))
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.params.iter_mut().flat_map(|p| p.tensors_mut()).collect()
    }

    pub fn num_params(&self) -> usize {
        self.named("").iter().map(|(_, t)| t.len()).sum()
    }

    pub fn zero_grads(&self) -> Vec<LayerParams<T>> {
        self.specs.iter().map(|s| LayerParams::zeros_for(s).expect("validated spec")).collect()
    }

    pub fn accumulate(into: &mut [LayerParams<T>], grads: &[LayerParams<T>]) {
        for (a, g) in into.iter_mut().zip(grads) {
            a.add_assign(g);
        }
    }

    /// Runs layers `0..end`, retaining caches when `trace` is set.
    pub fn forward_to<R: Rng + ?Sized>(
        &self,
        end: usize,
        x: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
        trace: bool,
    ) -> Result<(Tensor<T>, Vec<Cache<T>>)> {
        let mut caches = Vec::with_capacity(if trace { end } else { 0 });
        let mut cur = x.clone();
        for (spec, p) in self.specs[..end].iter().zip(&self.params) {
            let (next, cache) = step(spec, p, &cur, mode, rng, trace)?;
            if trace {
                caches.push(cache);
            }
            cur = next;
        }
        Ok((cur, caches))
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
        trace: bool,
    ) -> Result<(Tensor<T>, Vec<Cache<T>>)> {
        self.forward_to(self.specs.len(), x, mode, rng, trace)
    }

    /// Number of layers before a trailing softmax.
    pub fn logits_end(&self) -> usize {
        match self.specs.last() {
            Some(LayerSpec::Softmax) => self.specs.len() - 1,
            _ => self.specs.len(),
        }
    }

    /// Backpropagates `grad` through the first `caches.len()` layers.
    pub fn backward(&self, caches: &[Cache<T>], grad: &Tensor<T>) -> Result<(Tensor<T>, Vec<LayerParams<T>>)> {
        let mut grads = self.zero_grads();
        let mut g = grad.clone();
        for i in (0..caches.len()).rev() {
            let (gx, gp) = step_back(&self.specs[i], &self.params[i], &caches[i], &g)?;
            grads[i] = gp;
            g = gx;
        }
        Ok((g, grads))
    }
}

fn affine<T>(p: &LayerParams<T>) -> (&Tensor<T>, &Tensor<T>) {
    match p {
        LayerParams::Affine { weight, bias } => (weight, bias),
        _ => unreachable!("affine layer without affine parameters"),
    }
}

fn slope<T: Scalar>(p: &LayerParams<T>) -> T {
    match p {
        LayerParams::Slope(a) => a.data()[0],
        _ => unreachable!("prelu layer without a slope"),
    }
}

fn step<T: Scalar, R: Rng + ?Sized>(
    spec: &LayerSpec,
    p: &LayerParams<T>,
    x: &Tensor<T>,
    mode: Mode,
    rng: &mut R,
    trace: bool,
) -> Result<(Tensor<T>, Cache<T>)> {
    let keep = |t: &Tensor<T>| if trace { Cache::Input(t.clone()) } else { Cache::Nothing };
    Ok(match spec {
        LayerSpec::Conv1d { stride, padding, .. } => {
            let (w, b) = affine(p);
            (conv1d(x, w, b, *stride, *padding)?, keep(x))
        }
        LayerSpec::Maxpool { window } => {
            let (y, argmax) = maxpool1d(x, *window)?;
            (y, Cache::Pool { shape: x.shape().to_vec(), argmax })
        }
        LayerSpec::Dense { out_features, .. } => {
            let (w, b) = affine(p);
            (dense(x, w, b)?.reshape(&[1, *out_features])?, keep(x))
        }
        LayerSpec::Prelu => (prelu(x, slope(p)), keep(x)),
        LayerSpec::Relu => (relu(x), keep(x)),
        LayerSpec::Silu => (silu(x), keep(x)),
        LayerSpec::Dropout { rate } => {
            let (y, mask) = dropout(x, *rate, mode, rng)?;
            (y, Cache::Mask(mask))
        }
        LayerSpec::Gru { input_size, hidden, layers, dropout } => {
            let LayerParams::Gru(gp) = p else { unreachable!("gru layer without gru parameters") };
            let seq = x.clone().reshape(&[x.len() / input_size, *input_size])?;
            let h0 = Tensor::zeros(&[*layers, *hidden]);
            let (_, h_t, tr) = gru_forward_traced(&seq, gp, &h0, *dropout, mode, rng)?;
            let top = h_t.data()[(layers - 1) * hidden..].to_vec();
            let cache = if trace { Cache::Gru { seq_shape: x.shape().to_vec(), trace: tr } } else { Cache::Nothing };
            (Tensor::new(&[1, *hidden], top)?, cache)
        }
        LayerSpec::Flatten => (x.clone().reshape(&[1, x.len()])?, Cache::Shape(x.shape().to_vec())),
        LayerSpec::Concat { widths } => {
            let total: usize = widths.iter().sum();
            if x.len() != total {
                return Err(Error::dim("concat", "width", total, x.len()));
            }
            (x.clone(), Cache::Nothing)
        }
        LayerSpec::Softmax => {
            let y = softmax(&x.clone().reshape(&[x.len()])?).reshape(x.shape())?;
            let cache = if trace { Cache::Probs(y.clone()) } else { Cache::Nothing };
            (y, cache)
        }
    })
}

fn step_back<T: Scalar>(
    spec: &LayerSpec,
    p: &LayerParams<T>,
    cache: &Cache<T>,
    g: &Tensor<T>,
) -> Result<(Tensor<T>, LayerParams<T>)> {
    let input = || match cache {
        Cache::Input(x) => Ok(x),
        _ => Err(Error::Argument(format!("{} backward needs a traced forward pass", spec.name()))),
    };
    Ok(match spec {
        LayerSpec::Conv1d { stride, padding, .. } => {
            let (w, _) = affine(p);
            let (gx, gw, gb) = conv1d_backward(input()?, w, *stride, *padding, g)?;
            (gx, LayerParams::Affine { weight: gw, bias: gb })
        }
        LayerSpec::Maxpool { .. } => {
            let Cache::Pool { shape, argmax } = cache else { unreachable!("maxpool cache") };
            (maxpool1d_backward(shape, argmax, g)?, LayerParams::None)
        }
        LayerSpec::Dense { .. } => {
            let (w, _) = affine(p);
            let (gx, gw, gb) = dense_backward(input()?, w, g)?;
            (gx, LayerParams::Affine { weight: gw, bias: gb })
        }
        LayerSpec::Prelu => {
            let (gx, ga) = prelu_backward(input()?, slope(p), g);
            (gx, LayerParams::Slope(Tensor::from_vec(vec![ga])))
        }
        LayerSpec::Relu => (relu_backward(input()?, g), LayerParams::None),
        LayerSpec::Silu => (silu_backward(input()?, g), LayerParams::None),
        LayerSpec::Dropout { .. } => {
            let Cache::Mask(mask) = cache else { unreachable!("dropout cache") };
            (dropout_backward(mask.as_deref(), g), LayerParams::None)
        }
        LayerSpec::Gru { hidden, layers, .. } => {
            let LayerParams::Gru(gp) = p else { unreachable!("gru parameters") };
            let Cache::Gru { seq_shape, trace } = cache else {
                return Err(Error::Argument("gru backward needs a traced forward pass".into()));
            };
            let mut gh = vec![T::zero(); layers * hidden];
            gh[(layers - 1) * hidden..].copy_from_slice(g.data());
            let grads = gru_backward(gp, trace, None, &Tensor::new(&[*layers, *hidden], gh)?)?;
            (grads.seq.reshape(seq_shape)?, LayerParams::Gru(GruParams { layers: grads.layers }))
        }
        LayerSpec::Flatten => {
            let Cache::Shape(shape) = cache else { unreachable!("flatten cache") };
            (g.clone().reshape(shape)?, LayerParams::None)
        }
        LayerSpec::Concat { .. } => (g.clone(), LayerParams::None),
        LayerSpec::Softmax => {
            let Cache::Probs(pr) = cache else { unreachable!("softmax cache") };
            let dot: T = pr.data().iter().zip(g.data()).map(|(&p, &gv)| p * gv).sum();
            let gx = pr.data().iter().zip(g.data()).map(|(&p, &gv)| p * (gv - dot)).collect();
            (Tensor::new(g.shape(), gx)?, LayerParams::None)
        }
    })
}
