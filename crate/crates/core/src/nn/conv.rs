//! Same-padded 2-D convolution with a fused activation.

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

use super::{Activation, ConvSpec, Params};

/// Leading pad and output length of a same-padded window of size `k`
/// sliding with `stride` over `len` cells.
pub fn same_padding(len: usize, k: usize, stride: usize) -> (usize, usize) {
    let out = len.div_ceil(stride);
    let total = ((out - 1) * stride + k).saturating_sub(len);
    (total / 2, out)
}

fn check_input(input: &Tensor4, spec: &ConvSpec, layer: usize) -> Result<()> {
    let s = input.sample_shape();
    if s.c != spec.in_channels {
        return Err(Error::shape(
            layer,
            format!(
                "conv expects {} input channels, got {}",
                spec.in_channels, s.c
            ),
        ));
    }
    if s.h == 0 || s.w == 0 {
        return Err(Error::shape(layer, "conv input has an empty spatial dim"));
    }
    Ok(())
}

/// Range of output columns whose input column `o*stride + k - pad` lies in
/// `0..len`.
#[inline]
fn valid_range(out_len: usize, len: usize, k: usize, pad: usize, stride: usize) -> (usize, usize) {
    // o*stride + k >= pad
    let lo = if k >= pad {
        0
    } else {
        (pad - k).div_ceil(stride)
    };
    // o*stride + k - pad < len  =>  o*stride < len + pad - k
    let lim = len + pad;
    let hi = if lim <= k {
        0
    } else {
        (lim - k).div_ceil(stride)
    };
    (lo.min(out_len), hi.min(out_len))
}

/// Pre-activation convolution output.
pub fn conv_pre_activation(input: &Tensor4, spec: &ConvSpec, params: &Params) -> Result<Tensor4> {
    conv_pre_activation_at(input, spec, params, 0)
}

pub(crate) fn conv_pre_activation_at(
    input: &Tensor4,
    spec: &ConvSpec,
    params: &Params,
    layer: usize,
) -> Result<Tensor4> {
    check_input(input, spec, layer)?;
    let [n, c_in, h, w] = input.dims();
    let (pt, oh_n) = same_padding(h, spec.kh, spec.stride);
    let (pl, ow_n) = same_padding(w, spec.kw, spec.stride);
    let s = spec.stride;
    let mut out = Tensor4::zeros([n, spec.filters, oh_n, ow_n]);
    let x = input.data();
    let wts = &params.weights;
    let plane = oh_n * ow_n;
    let o = out.data_mut();
    for b in 0..n {
        for f in 0..spec.filters {
            let base = (b * spec.filters + f) * plane;
            o[base..base + plane].fill(params.bias[f]);
            for c in 0..c_in {
                let xin = &x[((b * c_in + c) * h) * w..((b * c_in + c) * h + h) * w];
                for ki in 0..spec.kh {
                    let (r0, r1) = valid_range(oh_n, h, ki, pt, s);
                    for kj in 0..spec.kw {
                        let wv = wts[((f * c_in + c) * spec.kh + ki) * spec.kw + kj];
                        let (c0, c1) = valid_range(ow_n, w, kj, pl, s);
                        if c0 >= c1 {
                            continue;
                        }
                        for oh in r0..r1 {
                            let ih = oh * s + ki - pt;
                            let row = &xin[ih * w..(ih + 1) * w];
                            let orow = &mut o[base + oh * ow_n..base + (oh + 1) * ow_n];
                            if s == 1 {
                                let off = c0 + kj - pl;
                                let src = &row[off..off + (c1 - c0)];
                                for (dst, &xv) in orow[c0..c1].iter_mut().zip(src) {
                                    *dst += wv * xv;
                                }
                            } else {
                                for ow in c0..c1 {
                                    orow[ow] += wv * row[ow * s + kj - pl];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Convolution followed by the layer's activation.
pub fn conv_forward(input: &Tensor4, spec: &ConvSpec, params: &Params) -> Result<Tensor4> {
    let mut out = conv_pre_activation(input, spec, params)?;
    spec.activation.apply(out.data_mut());
    Ok(out)
}

/// Gradients of one convolution.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor4,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Backward pass given the cached input and pre-activation.
pub fn conv_backward(
    grad_out: &Tensor4,
    cached_input: &Tensor4,
    cached_pre: &Tensor4,
    spec: &ConvSpec,
    params: &Params,
) -> Result<ConvGrads> {
    conv_backward_at(grad_out, cached_input, cached_pre, spec, params, 0)
}

pub(crate) fn conv_backward_at(
    grad_out: &Tensor4,
    cached_input: &Tensor4,
    cached_pre: &Tensor4,
    spec: &ConvSpec,
    params: &Params,
    layer: usize,
) -> Result<ConvGrads> {
    check_input(cached_input, spec, layer)?;
    let [n, c_in, h, w] = cached_input.dims();
    let (pt, oh_n) = same_padding(h, spec.kh, spec.stride);
    let (pl, ow_n) = same_padding(w, spec.kw, spec.stride);
    let expect = [n, spec.filters, oh_n, ow_n];
    if grad_out.dims() != expect || cached_pre.dims() != expect {
        return Err(Error::shape(
            layer,
            format!(
                "conv gradient dims {:?} do not match output dims {:?}",
                grad_out.dims(),
                expect
            ),
        ));
    }
    let s = spec.stride;
    let mut g = grad_out.data().to_vec();
    spec.activation.backprop(cached_pre.data(), &mut g);

    let mut grad_in = Tensor4::zeros(cached_input.dims());
    let mut grad_w = vec![0.0; params.weights.len()];
    let mut grad_b = vec![0.0; spec.filters];
    let x = cached_input.data();
    let gi = grad_in.data_mut();
    let plane = oh_n * ow_n;
    for b in 0..n {
        for f in 0..spec.filters {
            let base = (b * spec.filters + f) * plane;
            let gplane = &g[base..base + plane];
            grad_b[f] += gplane.iter().sum::<f64>();
            for c in 0..c_in {
                let xoff = (b * c_in + c) * h * w;
                for ki in 0..spec.kh {
                    let (r0, r1) = valid_range(oh_n, h, ki, pt, s);
                    for kj in 0..spec.kw {
                        let widx = ((f * c_in + c) * spec.kh + ki) * spec.kw + kj;
                        let wv = params.weights[widx];
                        let (c0, c1) = valid_range(ow_n, w, kj, pl, s);
                        if c0 >= c1 {
                            continue;
                        }
                        let mut acc = 0.0;
                        for oh in r0..r1 {
                            let ih = oh * s + ki - pt;
                            let grow = &gplane[oh * ow_n..(oh + 1) * ow_n];
                            let rstart = xoff + ih * w;
                            if s == 1 {
                                let off = c0 + kj - pl;
                                let xs = &x[rstart + off..rstart + off + (c1 - c0)];
                                let gs = &grow[c0..c1];
                                for (&gv, &xv) in gs.iter().zip(xs) {
                                    acc += gv * xv;
                                }
                                let dst = &mut gi[rstart + off..rstart + off + (c1 - c0)];
                                for (d, &gv) in dst.iter_mut().zip(gs) {
                                    *d += wv * gv;
                                }
                            } else {
                                for ow in c0..c1 {
                                    let xi = rstart + ow * s + kj - pl;
                                    acc += grow[ow] * x[xi];
                                    gi[xi] += wv * grow[ow];
                                }
                            }
                        }
                        grad_w[widx] += acc;
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: grad_in,
        weights: grad_w,
        bias: grad_b,
    })
}

impl Activation {
    pub fn apply(self, v: &mut [f64]) {
        match self {
            Activation::Relu => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            Activation::Sigmoid => v.iter_mut().for_each(|x| *x = sigmoid(*x)),
        }
    }

    /// Multiplies `grad` in place by the activation derivative at `pre`.
    pub fn backprop(self, pre: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Relu => {
                for (g, &p) in grad.iter_mut().zip(pre) {
                    if p <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            Activation::Sigmoid => {
                for (g, &p) in grad.iter_mut().zip(pre) {
                    let s = sigmoid(p);
                    *g *= s * (1.0 - s);
                }
            }
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
