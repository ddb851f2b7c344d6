//! Minimal CPU convolutional network engine.
//!
//! A [`Network`] is a flat list of [`Layer`]s applied in order to a
//! [`Tensor4`] batch. Training keeps per-layer caches on a [`Tape`] so the
//! backward pass can replay the forward pass in reverse.

mod conv;
mod dense;
pub mod io;
mod loss;
mod optim;
mod pool;
mod resize;
pub mod train;

use std::hash::{DefaultHasher, Hash, Hasher};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{Shape3, Tensor4};

pub use conv::{conv_backward, conv_forward, conv_pre_activation, same_padding, ConvGrads};
pub use dense::{dense_backward, dense_forward};
pub use loss::{dense_softmax_head, mse, reconstruction_accuracy, softmax_cross_entropy};
pub use optim::sgd_momentum_step;
pub use pool::{maxpool_backward, maxpool_forward};
pub use resize::{crop_backward, crop_forward, upsample_backward, upsample_forward};
pub use train::{train_individual, train_network, Objective, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub filters: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub activation: Activation,
}

impl ConvSpec {
    pub fn weight_len(&self) -> usize {
        self.filters * self.in_channels * self.kh * self.kw
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kh * self.kw
    }
}

/// Layer vocabulary of the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv(ConvSpec),
    MaxPool { ph: usize, pw: usize },
    Upsample { fh: usize, fw: usize },
    Flatten,
    Dense { inputs: usize, units: usize },
    Crop { h: usize, w: usize },
}

impl LayerKind {
    pub fn output_shape(&self, input: Shape3, layer: usize) -> Result<Shape3> {
        match *self {
            LayerKind::Conv(spec) => {
                if input.c != spec.in_channels {
                    return Err(Error::shape(
                        layer,
                        format!(
                            "conv expects {} channels, got {}",
                            spec.in_channels, input.c
                        ),
                    ));
                }
                Ok(Shape3::new(
                    spec.filters,
                    input.h.div_ceil(spec.stride),
                    input.w.div_ceil(spec.stride),
                ))
            }
            LayerKind::MaxPool { ph, pw } => Ok(Shape3::new(
                input.c,
                input.h.div_ceil(ph),
                input.w.div_ceil(pw),
            )),
            LayerKind::Upsample { fh, fw } => Ok(Shape3::new(input.c, input.h * fh, input.w * fw)),
            LayerKind::Flatten => Ok(Shape3::new(input.len(), 1, 1)),
            LayerKind::Dense { inputs, units } => {
                if input.len() != inputs {
                    return Err(Error::shape(
                        layer,
                        format!("dense expects {inputs} features, got {}", input.len()),
                    ));
                }
                Ok(Shape3::new(units, 1, 1))
            }
            LayerKind::Crop { h, w } => {
                if h > input.h || w > input.w {
                    return Err(Error::shape(
                        layer,
                        format!("crop to {h}x{w} exceeds input {}x{}", input.h, input.w),
                    ));
                }
                Ok(Shape3::new(input.c, h, w))
            }
        }
    }

    /// (weight count, bias count, fan-in) for parameterised layers.
    fn param_shape(&self) -> Option<(usize, usize, usize)> {
        match *self {
            LayerKind::Conv(spec) => Some((spec.weight_len(), spec.filters, spec.fan_in())),
            LayerKind::Dense { inputs, units } => Some((inputs * units, units, inputs)),
            _ => None,
        }
    }

    pub fn has_params(&self) -> bool {
        self.param_shape().is_some()
    }
}

/// Trainable parameters plus their momentum buffers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub vel_weights: Vec<f64>,
    pub vel_bias: Vec<f64>,
}

impl Params {
    pub fn new(weights: Vec<f64>, bias: Vec<f64>) -> Self {
        Params {
            vel_weights: vec![0.0; weights.len()],
            vel_bias: vec![0.0; bias.len()],
            weights,
            bias,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty() && self.bias.is_empty()
    }
}

/// Fresh zero-mean Gaussian weights with std `1/sqrt(fan_in)`, zero biases.
pub fn init_params<R: Rng + ?Sized>(kind: &LayerKind, rng: &mut R) -> Params {
    match kind.param_shape() {
        Some((nw, nb, fan_in)) => {
            let normal = Normal::new(0.0, 1.0 / (fan_in.max(1) as f64).sqrt())
                .expect("std is finite and positive");
            let w = (0..nw).map(|_| normal.sample(rng)).collect();
            Params::new(w, vec![0.0; nb])
        }
        None => Params::default(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub kind: LayerKind,
    pub params: Params,
}

/// Cached forward state of one layer.
#[derive(Debug, Clone)]
enum Cache {
    Conv {
        input: Tensor4,
        pre: Tensor4,
    },
    Pool {
        dims: [usize; 4],
        argmax: Vec<usize>,
    },
    Upsample,
    Crop {
        dims: [usize; 4],
    },
    Flatten {
        dims: [usize; 4],
    },
    Dense {
        input: Tensor4,
    },
}

/// Forward caches recorded during a training pass.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    entries: Vec<Cache>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Hash of every piecewise-linear branch taken in the recorded pass
    /// (ReLU signs and pooling argmaxes). Two passes with equal signatures
    /// lie on the same smooth piece of the network function.
    pub fn branch_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for e in &self.entries {
            match e {
                Cache::Conv { pre, .. } => {
                    for &v in pre.data() {
                        (v > 0.0).hash(&mut h);
                    }
                }
                Cache::Pool { argmax, .. } => argmax.hash(&mut h),
                _ => {}
            }
        }
        h.finish()
    }
}

/// Parameter gradients for one layer (empty for parameterless layers).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input: Shape3,
    layers: Vec<Layer>,
}

impl Network {
    /// Builds a network with freshly initialised parameters.
    pub fn new<R: Rng + ?Sized>(input: Shape3, kinds: &[LayerKind], rng: &mut R) -> Result<Self> {
        let layers = kinds
            .iter()
            .map(|k| Layer {
                kind: *k,
                params: init_params(k, rng),
            })
            .collect();
        Network::from_layers(input, layers)
    }

    /// Assembles a network from existing layers, checking shapes and
    /// parameter lengths.
    pub fn from_layers(input: Shape3, layers: Vec<Layer>) -> Result<Self> {
        let net = Network { input, layers };
        net.check()?;
        Ok(net)
    }

    fn check(&self) -> Result<()> {
        let mut shape = self.input;
        for (i, layer) in self.layers.iter().enumerate() {
            shape = layer.kind.output_shape(shape, i)?;
            let (nw, nb) = layer.kind.param_shape().map_or((0, 0), |(w, b, _)| (w, b));
            let p = &layer.params;
            if p.weights.len() != nw
                || p.bias.len() != nb
                || p.vel_weights.len() != nw
                || p.vel_bias.len() != nb
            {
                return Err(Error::shape(
                    i,
                    format!(
                        "parameter lengths ({}, {}) do not match layer ({nw}, {nb})",
                        p.weights.len(),
                        p.bias.len()
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn input_shape(&self) -> Shape3 {
        self.input
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn kinds(&self) -> Vec<LayerKind> {
        self.layers.iter().map(|l| l.kind).collect()
    }

    /// Per-sample shapes from the input through every layer.
    pub fn shapes(&self) -> Vec<Shape3> {
        let mut out = vec![self.input];
        let mut s = self.input;
        for (i, l) in self.layers.iter().enumerate() {
            s = l.kind.output_shape(s, i).expect("checked at construction");
            out.push(s);
        }
        out
    }

    pub fn output_shape(&self) -> Shape3 {
        *self.shapes().last().expect("shapes is never empty")
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.params.weights.len() + l.params.bias.len())
            .sum()
    }

    /// The first `n` layers as a standalone network.
    pub fn prefix(&self, n: usize) -> Result<Network> {
        if n > self.layers.len() {
            return Err(Error::Precondition(format!(
                "prefix of {n} layers from a {}-layer network",
                self.layers.len()
            )));
        }
        Network::from_layers(self.input, self.layers[..n].to_vec())
    }

    /// `self` followed by `next`; `next` must accept this network's output.
    pub fn then(&self, next: &Network) -> Result<Network> {
        if self.output_shape() != next.input {
            return Err(Error::shape(
                self.layers.len(),
                format!(
                    "output {} does not feed input {}",
                    self.output_shape(),
                    next.input
                ),
            ));
        }
        let mut layers = self.layers.clone();
        layers.extend(next.layers.iter().cloned());
        Network::from_layers(self.input, layers)
    }

    fn check_input(&self, x: &Tensor4) -> Result<()> {
        if x.sample_shape() != self.input {
            return Err(Error::shape(
                0,
                format!(
                    "network input {} does not match sample shape {}",
                    self.input,
                    x.sample_shape()
                ),
            ));
        }
        Ok(())
    }

    /// Inference pass.
    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match layer.kind {
                LayerKind::Conv(spec) => {
                    let mut out = conv::conv_pre_activation_at(&cur, &spec, &layer.params, i)?;
                    spec.activation.apply(out.data_mut());
                    out
                }
                LayerKind::MaxPool { ph, pw } => pool::maxpool_forward_at(&cur, ph, pw, i)?.0,
                LayerKind::Upsample { fh, fw } => upsample_forward(&cur, fh, fw)?,
                LayerKind::Crop { h, w } => crop_forward(&cur, h, w).map_err(|e| at_layer(e, i))?,
                LayerKind::Flatten => flatten(cur)?,
                LayerKind::Dense { inputs, units } => {
                    dense_forward(&cur, inputs, units, &layer.params).map_err(|e| at_layer(e, i))?
                }
            };
        }
        Ok(cur)
    }

    /// Training pass recording caches on `tape` (cleared first).
    pub fn forward_tape(&self, x: &Tensor4, tape: &mut Tape) -> Result<Tensor4> {
        self.check_input(x)?;
        tape.entries.clear();
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match layer.kind {
                LayerKind::Conv(spec) => {
                    let pre = conv::conv_pre_activation_at(&cur, &spec, &layer.params, i)?;
                    let mut out = pre.clone();
                    spec.activation.apply(out.data_mut());
                    tape.entries.push(Cache::Conv { input: cur, pre });
                    out
                }
                LayerKind::MaxPool { ph, pw } => {
                    let dims = cur.dims();
                    let (out, argmax) = pool::maxpool_forward_at(&cur, ph, pw, i)?;
                    tape.entries.push(Cache::Pool { dims, argmax });
                    out
                }
                LayerKind::Upsample { fh, fw } => {
                    tape.entries.push(Cache::Upsample);
                    upsample_forward(&cur, fh, fw)?
                }
                LayerKind::Crop { h, w } => {
                    tape.entries.push(Cache::Crop { dims: cur.dims() });
                    crop_forward(&cur, h, w).map_err(|e| at_layer(e, i))?
                }
                LayerKind::Flatten => {
                    tape.entries.push(Cache::Flatten { dims: cur.dims() });
                    flatten(cur)?
                }
                LayerKind::Dense { inputs, units } => {
                    let out = dense_forward(&cur, inputs, units, &layer.params)
                        .map_err(|e| at_layer(e, i))?;
                    tape.entries.push(Cache::Dense { input: cur });
                    out
                }
            };
        }
        Ok(cur)
    }

    /// Backpropagates `grad_out` through the pass recorded on `tape`.
    /// Returns the input gradient and one [`ParamGrads`] per layer.
    pub fn backward(&self, tape: &Tape, grad_out: &Tensor4) -> Result<(Tensor4, Vec<ParamGrads>)> {
        if tape.entries.len() != self.layers.len() {
            return Err(Error::Precondition(
                "tape was not recorded by this network".into(),
            ));
        }
        let mut grads = vec![ParamGrads::default(); self.layers.len()];
        let mut g = grad_out.clone();
        for (i, (layer, cache)) in self.layers.iter().zip(&tape.entries).enumerate().rev() {
            g = match (&layer.kind, cache) {
                (LayerKind::Conv(spec), Cache::Conv { input, pre }) => {
                    let cg = conv::conv_backward_at(&g, input, pre, spec, &layer.params, i)?;
                    grads[i] = ParamGrads {
                        weights: cg.weights,
                        bias: cg.bias,
                    };
                    cg.input
                }
                (LayerKind::MaxPool { .. }, Cache::Pool { dims, argmax }) => {
                    maxpool_backward(&g, *dims, argmax).map_err(|e| at_layer(e, i))?
                }
                (LayerKind::Upsample { fh, fw }, Cache::Upsample) => {
                    upsample_backward(&g, *fh, *fw).map_err(|e| at_layer(e, i))?
                }
                (LayerKind::Crop { .. }, Cache::Crop { dims }) => {
                    crop_backward(&g, *dims).map_err(|e| at_layer(e, i))?
                }
                (LayerKind::Flatten, Cache::Flatten { dims }) => g.reshape(*dims)?,
                (LayerKind::Dense { inputs, units }, Cache::Dense { input }) => {
                    let (gi, gw, gb) = dense_backward(&g, input, *inputs, *units, &layer.params)
                        .map_err(|e| at_layer(e, i))?;
                    grads[i] = ParamGrads {
                        weights: gw,
                        bias: gb,
                    };
                    gi
                }
                _ => {
                    return Err(Error::Precondition(format!(
                        "tape entry {i} does not match layer kind"
                    )))
                }
            };
        }
        Ok((g, grads))
    }

    /// Applies one momentum-SGD update to every parameterised layer.
    pub fn sgd_step(&mut self, grads: &[ParamGrads], lr: f64, momentum: f64) {
        for (layer, g) in self.layers.iter_mut().zip(grads) {
            if g.weights.is_empty() && g.bias.is_empty() {
                continue;
            }
            let p = &mut layer.params;
            sgd_momentum_step(&mut p.weights, &g.weights, &mut p.vel_weights, lr, momentum);
            sgd_momentum_step(&mut p.bias, &g.bias, &mut p.vel_bias, lr, momentum);
        }
    }

    /// Zeroes every momentum buffer.
    pub fn reset_momentum(&mut self) {
        for l in &mut self.layers {
            l.params.vel_weights.iter_mut().for_each(|v| *v = 0.0);
            l.params.vel_bias.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn params_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.params.weights.iter().all(|v| v.is_finite())
                && l.params.bias.iter().all(|v| v.is_finite())
        })
    }
}

fn flatten(t: Tensor4) -> Result<Tensor4> {
    let [n, c, h, w] = t.dims();
    t.reshape([n, c * h * w, 1, 1])
}

fn at_layer(e: Error, layer: usize) -> Error {
    match e {
        Error::Shape { msg, .. } => Error::Shape { layer, msg },
        other => other,
    }
}
