use super::tensor::{Scalar, Tensor};
use crate::{Error, Result};

fn expect_rank<T: Scalar>(op: &'static str, t: &Tensor<T>, rank: usize) -> Result<()> {
    if t.rank() != rank {
        return Err(Error::dim(op, "rank", rank, t.rank()));
    }
    Ok(())
}

/// Output length of a 1-D convolution, or `None` if the window does not fit.
pub fn conv1d_output_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    if stride == 0 || kernel == 0 || len + 2 * padding < kernel {
        return None;
    }
    Some((len + 2 * padding - kernel) / stride + 1)
}

/// Range of output positions `t` for which `t*stride + k - padding` is inside `[0, len)`.
#[inline]
fn valid_range(len: usize, out_len: usize, k: usize, stride: usize, padding: usize) -> (usize, usize) {
    let lo = if padding > k {
        (padding - k).div_ceil(stride)
    } else {
        0
    };
    // t*stride + k - padding <= len - 1
    let hi = if len + padding > k {
        ((len - 1 + padding - k) / stride + 1).min(out_len)
    } else {
        0
    };
    (lo, hi.max(lo))
}

struct ConvGeom {
    c_in: usize,
    len: usize,
    c_out: usize,
    kernel: usize,
    out_len: usize,
}

fn conv_geom<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<ConvGeom> {
    expect_rank("conv1d", input, 2)?;
    expect_rank("conv1d", kernels, 3)?;
    let (c_in, len) = (input.dim(0), input.dim(1));
    let (c_out, kc_in, kernel) = (kernels.dim(0), kernels.dim(1), kernels.dim(2));
    if kc_in != c_in {
        return Err(Error::dim("conv1d", "in_channels", kc_in, c_in));
    }
    if stride == 0 {
        return Err(Error::Argument("conv1d: stride must be positive".into()));
    }
    let out_len = conv1d_output_len(len, kernel, stride, padding)
        .ok_or_else(|| Error::dim("conv1d", "length", kernel, len + 2 * padding))?;
    Ok(ConvGeom {
        c_in,
        len,
        c_out,
        kernel,
        out_len,
    })
}

/// 1-D cross-correlation: `input` is `C_in x L`, `kernels` is `C_out x C_in x K`.
pub fn conv1d<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let g = conv_geom(input, kernels, stride, padding)?;
    if bias.len() != g.c_out {
        return Err(Error::dim("conv1d", "bias", g.c_out, bias.len()));
    }
    let x = input.data();
    let w = kernels.data();
    let mut out = vec![T::zero(); g.c_out * g.out_len];
    for co in 0..g.c_out {
        let row = &mut out[co * g.out_len..(co + 1) * g.out_len];
        row.iter_mut().for_each(|v| *v = bias.data()[co]);
        for ci in 0..g.c_in {
            let xin = &x[ci * g.len..(ci + 1) * g.len];
            let wk = &w[(co * g.c_in + ci) * g.kernel..(co * g.c_in + ci + 1) * g.kernel];
            for (k, &wv) in wk.iter().enumerate() {
                let (lo, hi) = valid_range(g.len, g.out_len, k, stride, padding);
                if stride == 1 {
                    let base = lo + k - padding;
                    let src = &xin[base..base + (hi - lo)];
                    for (o, &xv) in row[lo..hi].iter_mut().zip(src) {
                        *o += wv * xv;
                    }
                } else {
                    for t in lo..hi {
                        row[t] += wv * xin[t * stride + k - padding];
                    }
                }
            }
        }
    }
    Tensor::new(&[g.c_out, g.out_len], out)
}

/// Gradients of [`conv1d`] with respect to input, kernels and bias.
pub fn conv1d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    stride: usize,
    padding: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let g = conv_geom(input, kernels, stride, padding)?;
    if grad_out.shape() != [g.c_out, g.out_len] {
        return Err(Error::dim("conv1d_backward", "grad_out", g.c_out * g.out_len, grad_out.len()));
    }
    let x = input.data();
    let w = kernels.data();
    let go = grad_out.data();
    let mut gx = vec![T::zero(); g.c_in * g.len];
    let mut gw = vec![T::zero(); w.len()];
    let mut gb = vec![T::zero(); g.c_out];
    for co in 0..g.c_out {
        let grow = &go[co * g.out_len..(co + 1) * g.out_len];
        gb[co] = grow.iter().copied().sum();
        for ci in 0..g.c_in {
            let xin = &x[ci * g.len..(ci + 1) * g.len];
            let gxin = &mut gx[ci * g.len..(ci + 1) * g.len];
            let widx = (co * g.c_in + ci) * g.kernel;
            for k in 0..g.kernel {
                let wv = w[widx + k];
                let (lo, hi) = valid_range(g.len, g.out_len, k, stride, padding);
                let mut acc = T::zero();
                if stride == 1 {
                    let base = lo + k - padding;
                    for ((&gv, &xv), gxv) in grow[lo..hi]
                        .iter()
                        .zip(&xin[base..base + (hi - lo)])
                        .zip(gxin[base..base + (hi - lo)].iter_mut())
                    {
                        acc += gv * xv;
                        *gxv += wv * gv;
                    }
                } else {
                    for t in lo..hi {
                        let p = t * stride + k - padding;
                        acc += grow[t] * xin[p];
                        gxin[p] += wv * grow[t];
                    }
                }
                gw[widx + k] += acc;
            }
        }
    }
    Ok((
        Tensor::new(input.shape(), gx)?,
        Tensor::new(kernels.shape(), gw)?,
        Tensor::new(&[g.c_out], gb)?,
    ))
}

/// Non-overlapping max pooling over the last axis of a `C x L` tensor.
///
/// Returns the pooled tensor and, per output element, the flat input index of
/// the first maximum in its window.
pub fn maxpool1d<T: Scalar>(input: &Tensor<T>, window: usize) -> Result<(Tensor<T>, Vec<usize>)> {
    expect_rank("maxpool1d", input, 2)?;
    let (c, len) = (input.dim(0), input.dim(1));
    if window == 0 || window > len {
        return Err(Error::dim("maxpool1d", "length", window, len));
    }
    let out_len = len / window;
    let x = input.data();
    let mut out = Vec::with_capacity(c * out_len);
    let mut arg = Vec::with_capacity(c * out_len);
    for ch in 0..c {
        for j in 0..out_len {
            let start = ch * len + j * window;
            let mut best = start;
            for i in start + 1..start + window {
                // strict comparison keeps the first maximum on ties
                if x[i] > x[best] {
                    best = i;
                }
            }
            out.push(x[best]);
            arg.push(best);
        }
    }
    Ok((Tensor::new(&[c, out_len], out)?, arg))
}

pub fn maxpool1d_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    if argmax.len() != grad_out.len() {
        return Err(Error::dim("maxpool1d_backward", "grad_out", argmax.len(), grad_out.len()));
    }
    let mut gx = Tensor::zeros(input_shape);
    let d = gx.data_mut();
    for (&i, &g) in argmax.iter().zip(grad_out.data()) {
        d[i] += g;
    }
    Ok(gx)
}

/// Affine map `weight * input + bias` with `weight` shaped `N_out x N_in`.
pub fn dense<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    expect_rank("dense", weight, 2)?;
    let (n_out, n_in) = (weight.dim(0), weight.dim(1));
    if input.len() != n_in {
        return Err(Error::dim("dense", "in_features", n_in, input.len()));
    }
    if bias.len() != n_out {
        return Err(Error::dim("dense", "bias", n_out, bias.len()));
    }
    let x = input.data();
    let out = weight
        .data()
        .chunks_exact(n_in)
        .zip(bias.data())
        .map(|(row, &b)| dot(row, x) + b)
        .collect();
    Tensor::new(&[n_out], out)
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    // four accumulators so the loop vectorises without reassociating a single sum
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for (j, slot) in acc.iter_mut().enumerate() {
            *slot += a[4 * i + j] * b[4 * i + j];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Returns `(grad_input, grad_weight, grad_bias)`.
pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    expect_rank("dense_backward", weight, 2)?;
    let (n_out, n_in) = (weight.dim(0), weight.dim(1));
    if input.len() != n_in {
        return Err(Error::dim("dense_backward", "in_features", n_in, input.len()));
    }
    if grad_out.len() != n_out {
        return Err(Error::dim("dense_backward", "out_features", n_out, grad_out.len()));
    }
    let x = input.data();
    let mut gx = vec![T::zero(); n_in];
    let mut gw = vec![T::zero(); n_out * n_in];
    for ((row, grow), &g) in weight
        .data()
        .chunks_exact(n_in)
        .zip(gw.chunks_exact_mut(n_in))
        .zip(grad_out.data())
    {
        if g == T::zero() {
            continue;
        }
        for ((gxv, &wv), (gwv, &xv)) in gx.iter_mut().zip(row).zip(grow.iter_mut().zip(x)) {
            *gxv += wv * g;
            *gwv = g * xv;
        }
    }
    Ok((
        Tensor::new(input.shape(), gx)?,
        Tensor::new(weight.shape(), gw)?,
        grad_out.clone().reshape(&[n_out])?,
    ))
}

/// Parametric ReLU with one learnable slope for negative inputs.
pub fn prelu<T: Scalar>(x: &Tensor<T>, slope: T) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { slope * v })
}

/// Returns `(grad_input, grad_slope)`; the slope gradient sums over non-positive inputs.
pub fn prelu_backward<T: Scalar>(x: &Tensor<T>, slope: T, grad_out: &Tensor<T>) -> (Tensor<T>, T) {
    let mut ga = T::zero();
    let gx = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| {
            if v > T::zero() {
                g
            } else {
                ga += g * v;
                g * slope
            }
        })
        .collect();
    (Tensor::new(x.shape(), gx).expect("prelu_backward shape"), ga)
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    prelu(x, T::zero())
}

pub fn relu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    prelu_backward(x, T::zero(), grad_out).0
}

#[inline]
pub fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// `x * sigmoid(x)` elementwise.
pub fn silu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v * sigmoid(v))
}

pub fn silu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let gx = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| {
            let s = sigmoid(v);
            g * (s + v * s * (T::one() - s))
        })
        .collect();
    Tensor::new(x.shape(), gx).expect("silu_backward shape")
}
