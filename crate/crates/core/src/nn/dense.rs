//! Fully connected layer over flattened samples.

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

use super::Params;

fn features(input: &Tensor4) -> usize {
    let [_, c, h, w] = input.dims();
    c * h * w
}

/// `out[b][u] = bias[u] + sum_i weights[u][i] * x[b][i]`; output dims
/// `(batch, units, 1, 1)`.
pub fn dense_forward(
    input: &Tensor4,
    inputs: usize,
    units: usize,
    params: &Params,
) -> Result<Tensor4> {
    if features(input) != inputs {
        return Err(Error::shape(
            0,
            format!("dense expects {inputs} features, got {}", features(input)),
        ));
    }
    let n = input.batch();
    let mut out = Tensor4::zeros([n, units, 1, 1]);
    let o = out.data_mut();
    for b in 0..n {
        let x = input.sample(b);
        for u in 0..units {
            let row = &params.weights[u * inputs..(u + 1) * inputs];
            o[b * units + u] = params.bias[u] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok(out)
}

/// Returns (grad_input, grad_weights, grad_bias). `grad_input` takes the
/// dims of `cached_input`.
pub fn dense_backward(
    grad_out: &Tensor4,
    cached_input: &Tensor4,
    inputs: usize,
    units: usize,
    params: &Params,
) -> Result<(Tensor4, Vec<f64>, Vec<f64>)> {
    let n = cached_input.batch();
    if grad_out.dims() != [n, units, 1, 1] || features(cached_input) != inputs {
        return Err(Error::shape(0, "dense gradient dims mismatch"));
    }
    let mut gi = Tensor4::zeros(cached_input.dims());
    let mut gw = vec![0.0; units * inputs];
    let mut gb = vec![0.0; units];
    let g = grad_out.data();
    for b in 0..n {
        let x = cached_input.sample(b);
        let gx = &mut gi.data_mut()[b * inputs..(b + 1) * inputs];
        for u in 0..units {
            let gv = g[b * units + u];
            if gv == 0.0 {
                continue;
            }
            gb[u] += gv;
            let row = &params.weights[u * inputs..(u + 1) * inputs];
            let grow = &mut gw[u * inputs..(u + 1) * inputs];
            for i in 0..inputs {
                grow[i] += gv * x[i];
                gx[i] += gv * row[i];
            }
        }
    }
    Ok((gi, gw, gb))
}
