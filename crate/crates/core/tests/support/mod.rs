//! Independent reference implementations used as test oracles. Shared by
//! the core integration tests and the CLI acceptance suite.
#![allow(dead_code)]

use caevo_core::genome::{Genome, GenomeKind, IndividualId, LayerGene};
use caevo_core::nn::{Activation, ConvSpec, LayerKind, Network, Tape};
use caevo_core::selection::Pair;
use caevo_core::tensor::{Shape3, Tensor4};
use rand::Rng;

/// Central-difference step.
pub const FD_EPS: f64 = 1e-4;
/// Denominator floor of the relative error, so that gradients that are
/// zero up to rounding are compared absolutely.
pub const FD_FLOOR: f64 = 1e-6;

#[derive(Debug, Default, Clone)]
pub struct FdStats {
    pub checked: usize,
    /// Entries whose ±eps probes crossed a ReLU or max-pool switch.
    pub skipped: usize,
    pub max_rel: f64,
    pub worst: String,
}

impl FdStats {
    pub fn merge(&mut self, o: FdStats) {
        self.checked += o.checked;
        self.skipped += o.skipped;
        if o.max_rel > self.max_rel {
            self.max_rel = o.max_rel;
            self.worst = o.worst;
        }
    }
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FD_FLOOR)
}

/// Loss used for probing: sum(out * r) for a fixed random `r`.
fn probe_loss(net: &Network, x: &Tensor4, r: &[f64]) -> (f64, u64) {
    let mut tape = Tape::new();
    let out = net.forward_tape(x, &mut tape).expect("forward");
    let l = out.data().iter().zip(r).map(|(o, w)| o * w).sum();
    (l, tape.branch_signature())
}

/// Compares every analytic input and parameter gradient of `net` at `x`
/// with central differences.
pub fn fd_check_network<R: Rng>(net: &Network, x: &Tensor4, rng: &mut R) -> FdStats {
    let mut tape = Tape::new();
    let out = net.forward_tape(x, &mut tape).expect("forward");
    let base_sig = tape.branch_signature();
    let r: Vec<f64> = (0..out.len())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let grad_out = Tensor4::from_vec(out.dims(), r.clone()).unwrap();
    let (gi, gp) = net.backward(&tape, &grad_out).expect("backward");

    let mut stats = FdStats::default();
    let record =
        |stats: &mut FdStats, analytic: f64, plus: (f64, u64), minus: (f64, u64), what: String| {
            if plus.1 != base_sig || minus.1 != base_sig {
                stats.skipped += 1;
                return;
            }
            let numeric = (plus.0 - minus.0) / (2.0 * FD_EPS);
            let e = rel_err(analytic, numeric);
            stats.checked += 1;
            if e > stats.max_rel {
                stats.max_rel = e;
                stats.worst = format!("{what}: analytic {analytic:e} numeric {numeric:e}");
            }
        };

    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += FD_EPS;
        let plus = probe_loss(net, &xp, &r);
        xp.data_mut()[i] -= 2.0 * FD_EPS;
        let minus = probe_loss(net, &xp, &r);
        record(&mut stats, gi.data()[i], plus, minus, format!("input[{i}]"));
    }
    for (li, g) in gp.iter().enumerate() {
        for (which, grads) in [("w", &g.weights), ("b", &g.bias)] {
            for (j, &analytic) in grads.iter().enumerate() {
                let probe = |delta: f64| {
                    let mut n = net.clone();
                    let p = &mut n.layers_mut()[li].params;
                    let v = if which == "w" {
                        &mut p.weights
                    } else {
                        &mut p.bias
                    };
                    v[j] += delta;
                    probe_loss(&n, x, &r)
                };
                let plus = probe(FD_EPS);
                let minus = probe(-FD_EPS);
                record(
                    &mut stats,
                    analytic,
                    plus,
                    minus,
                    format!("layer {li} {which}[{j}]"),
                );
            }
        }
    }
    stats
}

/// Random stack of engine layers on an input with every dim ≤ 6.
pub fn random_stack<R: Rng>(rng: &mut R) -> (Shape3, Vec<LayerKind>) {
    loop {
        let input = Shape3::new(
            rng.random_range(1..=3),
            rng.random_range(1..=6),
            rng.random_range(1..=6),
        );
        let mut shape = input;
        let mut kinds = Vec::new();
        let depth = rng.random_range(1..=4);
        let mut ok = true;
        for _ in 0..depth {
            let k = match rng.random_range(0..5) {
                0 | 1 => LayerKind::Conv(ConvSpec {
                    in_channels: shape.c,
                    filters: rng.random_range(1..=4),
                    kh: rng.random_range(1..=3),
                    kw: rng.random_range(1..=3),
                    stride: rng.random_range(1..=2),
                    activation: if rng.random_bool(0.7) {
                        Activation::Relu
                    } else {
                        Activation::Sigmoid
                    },
                }),
                2 => LayerKind::MaxPool {
                    ph: rng.random_range(2..=3),
                    pw: rng.random_range(2..=3),
                },
                3 => LayerKind::Upsample {
                    fh: rng.random_range(1..=2),
                    fw: rng.random_range(1..=2),
                },
                _ => LayerKind::Crop {
                    h: rng.random_range(1..=shape.h),
                    w: rng.random_range(1..=shape.w),
                },
            };
            match k.output_shape(shape, kinds.len()) {
                Ok(s) if s.h <= 6 && s.w <= 6 => {
                    shape = s;
                    kinds.push(k);
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        if rng.random_bool(0.4) {
            kinds.push(LayerKind::Flatten);
            kinds.push(LayerKind::Dense {
                inputs: shape.len(),
                units: rng.random_range(1..=4),
            });
        }
        return (input, kinds);
    }
}

pub fn random_input<R: Rng>(input: Shape3, batch: usize, rng: &mut R) -> Tensor4 {
    let data = (0..batch * input.len())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Tensor4::from_vec([batch, input.c, input.h, input.w], data).unwrap()
}

/// Nested-loop convolution with TF "same" padding, pre-activation.
pub fn reference_conv(
    x: &Tensor4,
    weights: &[f64],
    bias: &[f64],
    f: usize,
    kh: usize,
    kw: usize,
    s: usize,
) -> Tensor4 {
    let [n, c, h, w] = x.dims();
    let oh = h.div_ceil(s);
    let ow = w.div_ceil(s);
    let pad = |len: usize, out: usize, k: usize| ((out - 1) * s + k).saturating_sub(len) / 2;
    let (pt, pl) = (pad(h, oh, kh), pad(w, ow, kw));
    let mut out = Tensor4::zeros([n, f, oh, ow]);
    for b in 0..n {
        for o in 0..f {
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = bias[o];
                    for ci in 0..c {
                        for dy in 0..kh {
                            for dx in 0..kw {
                                let iy = (y * s + dy) as isize - pt as isize;
                                let ix = (xo * s + dx) as isize - pl as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let wi = ((o * c + ci) * kh + dy) * kw + dx;
                                acc += weights[wi] * x.get(b, ci, iy as usize, ix as usize);
                            }
                        }
                    }
                    out.set(b, o, y, xo, acc);
                }
            }
        }
    }
    out
}

fn dominates(a: &Pair, b: &Pair) -> bool {
    a.compression >= b.compression
        && a.accuracy >= b.accuracy
        && (a.compression > b.compression || a.accuracy > b.accuracy)
}

/// Repeatedly peels off the members no remaining member dominates.
pub fn brute_force_fronts(points: &[Pair]) -> Vec<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !remaining.is_empty() {
        let front: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| !remaining.iter().any(|&j| dominates(&points[j], &points[i])))
            .collect();
        remaining.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

/// Closeness to (wc, wa) vs (0, 0) of the weighted point, written out.
pub fn topsis_hand(c: f64, a: f64, wc: f64, wa: f64) -> f64 {
    let (wc, wa) = (wc / (wc + wa), wa / (wc + wa));
    let (vc, va) = (wc * c, wa * a);
    let dp = ((wc - vc).powi(2) + (wa - va).powi(2)).sqrt();
    let dn = (vc * vc + va * va).sqrt();
    dn / (dp + dn)
}

/// Random encoder genome whose genes respect the caps; may or may not be
/// valid for a given input.
pub fn random_genome<R: Rng>(kind: GenomeKind, rng: &mut R) -> Genome {
    let n = rng.random_range(1..=5);
    let layers = (0..n)
        .map(|_| {
            if rng.random_bool(0.6) {
                LayerGene::Conv {
                    filters: [1, 2, 3, 4, 8, 16][rng.random_range(0..6)],
                    kh: rng.random_range(1..=5),
                    kw: rng.random_range(1..=5),
                    stride: rng.random_range(1..=3),
                }
            } else {
                LayerGene::Pool {
                    ph: rng.random_range(2..=4),
                    pw: rng.random_range(2..=4),
                }
            }
        })
        .collect();
    Genome {
        id: IndividualId::new("g").unwrap(),
        kind,
        layers,
        learning_rate: 0.01,
        parent_id: None,
        generation: rng.random_range(0..100),
        mutation: None,
    }
}

/// Random (genome, input) pair accepted by `validate_encoder`.
pub fn random_valid_encoder<R: Rng>(rng: &mut R) -> (Genome, Shape3) {
    loop {
        let input = Shape3::new(
            rng.random_range(1..=3),
            rng.random_range(2..=33),
            rng.random_range(2..=33),
        );
        let g = random_genome(GenomeKind::Encoder, rng);
        if g.validate_encoder(input).is_ok() {
            return (g, input);
        }
    }
}
