use rand::Rng;

use super::graph::ModelGraph;
use super::stack::{Cache, LayerParams, Stack};
use crate::dsp::FeatureTensor;
use crate::engine::params::NamedTensor;
use crate::engine::{softmax, Mode, Scalar, Tensor};
use crate::{Error, Result};

/// Instantiated Mbed-ATN network with the temporary stage-one head.
#[derive(Debug, Clone, PartialEq)]
pub struct MbedAtn<T> {
    pub graph: ModelGraph,
    pub mbed: Stack<T>,
    pub temp_head: Stack<T>,
    pub branches: Vec<Stack<T>>,
    pub head: Stack<T>,
}

#[derive(Debug, Clone)]
pub struct MbedTrace<T> {
    caches: Vec<Cache<T>>,
}

#[derive(Debug, Clone)]
pub struct AtnTrace<T> {
    branches: Vec<Vec<Cache<T>>>,
    widths: Vec<usize>,
    head: Vec<Cache<T>>,
}

/// Per-layer gradients mirroring the structure of [`MbedAtn`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrads<T> {
    pub mbed: Vec<LayerParams<T>>,
    pub temp_head: Vec<LayerParams<T>>,
    pub branches: Vec<Vec<LayerParams<T>>>,
    pub head: Vec<LayerParams<T>>,
}

pub(crate) const MBED: &str = "mbed";
pub(crate) const TEMP_HEAD: &str = "stage1_head";
pub(crate) const ATN_HEAD: &str = "atn.head";

fn branch_prefix(b: usize) -> String {
    format!("atn.branch{}", b + 1)
}

impl<T: Scalar> MbedAtn<T> {
    pub fn new(graph: ModelGraph, seed: u64) -> Result<Self> {
        graph.validate()?;
        Ok(MbedAtn {
            mbed: Stack::init(&graph.mbed.layers, MBED, seed)?,
            temp_head: Stack::init(&graph.temp_head, TEMP_HEAD, seed)?,
            branches: graph
                .atn
                .branches
                .iter()
                .enumerate()
                .map(|(b, layers)| Stack::init(layers, &branch_prefix(b), seed))
                .collect::<Result<_>>()?,
            head: Stack::init(&graph.atn.head, ATN_HEAD, seed)?,
            graph,
        })
    }

    pub fn zeros(graph: ModelGraph) -> Result<Self> {
        graph.validate()?;
        Ok(MbedAtn {
            mbed: Stack::zeros(&graph.mbed.layers)?,
            temp_head: Stack::zeros(&graph.temp_head)?,
            branches: graph.atn.branches.iter().map(|l| Stack::zeros(l)).collect::<Result<_>>()?,
            head: Stack::zeros(&graph.atn.head)?,
            graph,
        })
    }

    /// Converts a feature tensor into the `rows x M` network input.
    pub fn input(&self, x: &FeatureTensor) -> Result<Tensor<T>> {
        let want = self.graph.mbed.input_shape();
        if x.rows() != want.channels {
            return Err(Error::dim("forward", "rows", want.channels, x.rows()));
        }
        if x.m != want.length {
            return Err(Error::dim("forward", "M", want.length, x.m));
        }
        Tensor::new(&[x.rows(), x.m], x.data.iter().map(|&v| T::lit(v as f64)).collect())
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let want = self.graph.mbed.input_shape();
        if x.shape() != [want.channels, want.length] {
            return Err(Error::dim("forward", "input", want.numel(), x.len()));
        }
        Ok(())
    }

    /// The embedding vector `f`, shaped `1 x width`.
    pub fn embed<R: Rng + ?Sized>(&self, x: &Tensor<T>, mode: Mode, rng: &mut R) -> Result<Tensor<T>> {
        self.check_input(x)?;
        Ok(self.mbed.forward(x, mode, rng, false)?.0)
    }

    pub fn embed_traced<R: Rng + ?Sized>(
        &self,
        x: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Tensor<T>, MbedTrace<T>)> {
        self.check_input(x)?;
        let (f, caches) = self.mbed.forward(x, mode, rng, true)?;
        Ok((f, MbedTrace { caches }))
    }

    pub fn mbed_backward(&self, trace: &MbedTrace<T>, grad_f: &Tensor<T>) -> Result<(Tensor<T>, Vec<LayerParams<T>>)> {
        self.mbed.backward(&trace.caches, grad_f)
    }

    /// Stage-one head logits for an embedding.
    pub fn temp_logits_traced<R: Rng + ?Sized>(
        &self,
        f: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Tensor<T>, Vec<Cache<T>>)> {
        self.temp_head.forward_to(self.temp_head.logits_end(), f, mode, rng, true)
    }

    pub fn temp_head_backward(
        &self,
        caches: &[Cache<T>],
        grad_logits: &Tensor<T>,
    ) -> Result<(Tensor<T>, Vec<LayerParams<T>>)> {
        self.temp_head.backward(caches, grad_logits)
    }

    fn atn_run<R: Rng + ?Sized>(
        &self,
        f: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
        trace: bool,
    ) -> Result<(Tensor<T>, AtnTrace<T>)> {
        if f.len() != self.graph.atn.in_width {
            return Err(Error::dim("atn", "in_width", self.graph.atn.in_width, f.len()));
        }
        let f = f.clone().reshape(&[1, f.len()])?;
        let mut concat = Vec::with_capacity(self.graph.atn.concat_width());
        let mut branch_caches = Vec::with_capacity(self.branches.len());
        let mut widths = Vec::with_capacity(self.branches.len());
        for b in &self.branches {
            let (o, c) = b.forward(&f, mode, rng, trace)?;
            widths.push(o.len());
            concat.extend_from_slice(o.data());
            branch_caches.push(c);
        }
        let a = Tensor::new(&[1, concat.len()], concat)?;
        let (logits, head) = self.head.forward_to(self.head.logits_end(), &a, mode, rng, trace)?;
        Ok((logits, AtnTrace { branches: branch_caches, widths, head }))
    }

    pub fn atn_logits<R: Rng + ?Sized>(&self, f: &Tensor<T>, mode: Mode, rng: &mut R) -> Result<Tensor<T>> {
        Ok(self.atn_run(f, mode, rng, false)?.0)
    }

    pub fn atn_logits_traced<R: Rng + ?Sized>(
        &self,
        f: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Tensor<T>, AtnTrace<T>)> {
        self.atn_run(f, mode, rng, true)
    }

    /// Returns the gradient on `f` plus per-branch and head gradients.
    pub fn atn_backward(
        &self,
        trace: &AtnTrace<T>,
        grad_logits: &Tensor<T>,
    ) -> Result<(Tensor<T>, Vec<Vec<LayerParams<T>>>, Vec<LayerParams<T>>)> {
        let (ga, head_grads) = self.head.backward(&trace.head, grad_logits)?;
        let mut grad_f = vec![T::zero(); self.graph.atn.in_width];
        let mut branch_grads = Vec::with_capacity(self.branches.len());
        let mut offset = 0;
        for ((b, caches), &w) in self.branches.iter().zip(&trace.branches).zip(&trace.widths) {
            let go = Tensor::new(&[1, w], ga.data()[offset..offset + w].to_vec())?;
            offset += w;
            let (gf, g) = b.backward(caches, &go)?;
            for (acc, &v) in grad_f.iter_mut().zip(gf.data()) {
                *acc += v;
            }
            branch_grads.push(g);
        }
        Ok((Tensor::new(&[1, grad_f.len()], grad_f)?, branch_grads, head_grads))
    }

    /// Full Mbed-ATN logits (before the softmax).
    pub fn logits<R: Rng + ?Sized>(&self, x: &Tensor<T>, mode: Mode, rng: &mut R) -> Result<Tensor<T>> {
        let f = self.embed(x, mode, rng)?;
        self.atn_logits(&f, mode, rng)
    }

    /// Class probabilities of the full network.
    pub fn forward<R: Rng + ?Sized>(&self, x: &Tensor<T>, mode: Mode, rng: &mut R) -> Result<Tensor<T>> {
        let z = self.logits(x, mode, rng)?;
        Ok(softmax(&z.reshape(&[self.graph.num_classes()])?))
    }

    pub fn zero_grads(&self) -> NetGrads<T> {
        NetGrads {
            mbed: self.mbed.zero_grads(),
            temp_head: self.temp_head.zero_grads(),
            branches: self.branches.iter().map(|b| b.zero_grads()).collect(),
            head: self.head.zero_grads(),
        }
    }

    /// Every parameter tensor with its stable name, Mbed first.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = self.mbed.named(MBED);
        out.extend(self.temp_head.named(TEMP_HEAD));
        out.extend(self.atn_named());
        out
    }

    pub fn mbed_named(&self) -> Vec<(String, &Tensor<T>)> {
        self.mbed.named(MBED)
    }

    pub fn atn_named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out: Vec<_> = self
            .branches
            .iter()
            .enumerate()
            .flat_map(|(b, s)| s.named(&branch_prefix(b)))
            .collect();
        out.extend(self.head.named(ATN_HEAD));
        out
    }

    pub fn num_params(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Parameters deployed at inference time (stage-one head excluded).
    pub fn num_deployed_params(&self) -> usize {
        self.num_params() - self.temp_head.num_params()
    }

    pub fn records(&self) -> Vec<NamedTensor> {
        self.named_tensors().into_iter().map(|(n, t)| NamedTensor::from_tensor(n, t)).collect()
    }

    /// Overwrites parameters from records; names and shapes must match the
    /// graph exactly. Names absent from `records` are left untouched.
    pub fn load_records(&mut self, records: &[NamedTensor]) -> Result<usize> {
        let mut loaded = 0;
        let names: Vec<(String, Vec<usize>)> = self
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        for r in records {
            let Some(idx) = names.iter().position(|(n, _)| *n == r.name) else {
                return Err(Error::Format(format!("checkpoint tensor `{}` is not part of this model", r.name)));
            };
            if names[idx].1 != r.shape {
                return Err(Error::Format(format!(
                    "checkpoint tensor `{}` has shape {:?}, model expects {:?}",
                    r.name, r.shape, names[idx].1
                )));
            }
            let t = r.to_tensor::<T>()?;
            *self.all_tensors_mut()[idx] = t;
            loaded += 1;
        }
        Ok(loaded)
    }

    fn all_tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = self.mbed.tensors_mut();
        out.extend(self.temp_head.tensors_mut());
        out.extend(self.branches.iter_mut().flat_map(|b| b.tensors_mut()));
        out.extend(self.head.tensors_mut());
        out
    }

    pub fn mbed_tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.mbed.tensors_mut()
    }

    pub fn temp_head_tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.temp_head.tensors_mut()
    }

    pub fn atn_tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out: Vec<_> = self.branches.iter_mut().flat_map(|b| b.tensors_mut()).collect();
        out.extend(self.head.tensors_mut());
        out
    }

    /// Converts every parameter to another float type.
    pub fn cast<U: Scalar>(&self) -> MbedAtn<U> {
        let cast_stack = |s: &Stack<T>| {
            let mut out = Stack::<U>::zeros(&s.specs).expect("validated specs");
            let src: Vec<Tensor<U>> = s.named("").into_iter().map(|(_, t)| t.cast()).collect();
            for (d, v) in out.tensors_mut().into_iter().zip(src) {
                *d = v;
            }
            out
        };
        MbedAtn {
            graph: self.graph.clone(),
            mbed: cast_stack(&self.mbed),
            temp_head: cast_stack(&self.temp_head),
            branches: self.branches.iter().map(cast_stack).collect(),
            head: cast_stack(&self.head),
        }
    }
}
