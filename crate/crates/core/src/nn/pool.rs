//! Max pooling with truncated edge windows.

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

/// Forward pass. Returns the pooled tensor and, per output cell, the flat
/// input index of the window maximum (first occurrence on ties).
pub fn maxpool_forward(input: &Tensor4, ph: usize, pw: usize) -> Result<(Tensor4, Vec<usize>)> {
    maxpool_forward_at(input, ph, pw, 0)
}

pub(crate) fn maxpool_forward_at(
    input: &Tensor4,
    ph: usize,
    pw: usize,
    layer: usize,
) -> Result<(Tensor4, Vec<usize>)> {
    if ph < 2 || pw < 2 {
        return Err(Error::shape(layer, format!("pool dims {ph}x{pw} below 2")));
    }
    let [n, c, h, w] = input.dims();
    let (oh_n, ow_n) = (h.div_ceil(ph), w.div_ceil(pw));
    let mut out = Tensor4::zeros([n, c, oh_n, ow_n]);
    let mut argmax = Vec::with_capacity(out.len());
    let x = input.data();
    let o = out.data_mut();
    let mut k = 0;
    for plane in 0..n * c {
        let base = plane * h * w;
        for oh in 0..oh_n {
            let r1 = ((oh + 1) * ph).min(h);
            for ow in 0..ow_n {
                let c1 = ((ow + 1) * pw).min(w);
                let mut best = base + oh * ph * w + ow * pw;
                for r in oh * ph..r1 {
                    for col in ow * pw..c1 {
                        let i = base + r * w + col;
                        if x[i] > x[best] {
                            best = i;
                        }
                    }
                }
                o[k] = x[best];
                argmax.push(best);
                k += 1;
            }
        }
    }
    Ok((out, argmax))
}

/// Routes each output gradient to its window's argmax.
pub fn maxpool_backward(
    grad_out: &Tensor4,
    input_dims: [usize; 4],
    argmax: &[usize],
) -> Result<Tensor4> {
    if grad_out.len() != argmax.len() {
        return Err(Error::shape(
            0,
            format!(
                "pool gradient has {} cells, forward produced {}",
                grad_out.len(),
                argmax.len()
            ),
        ));
    }
    let mut gi = Tensor4::zeros(input_dims);
    let d = gi.data_mut();
    for (&g, &i) in grad_out.data().iter().zip(argmax) {
        d[i] += g;
    }
    Ok(gi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_takes_the_max() {
        let x = Tensor4::from_vec([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, arg) = maxpool_forward(&x, 2, 2).unwrap();
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(arg, vec![3]);
    }

    #[test]
    fn ties_route_to_first_cell_of_each_window() {
        let x = Tensor4::filled([1, 1, 4, 4], 0.7);
        let (y, arg) = maxpool_forward(&x, 2, 2).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.7));
        let g = Tensor4::filled(y.dims(), 1.0);
        let gi = maxpool_backward(&g, x.dims(), &arg).unwrap();
        let expect = [
            1.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 0.0, //
            1.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 0.0,
        ];
        assert_eq!(gi.data(), &expect);
    }

    #[test]
    fn edge_windows_are_truncated() {
        let x = Tensor4::from_vec([1, 1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let (y, _) = maxpool_forward(&x, 2, 2).unwrap();
        assert_eq!(y.dims(), [1, 1, 2, 2]);
        assert_eq!(y.data(), &[5.0, 6.0, 8.0, 9.0]);
    }

    #[test]
    fn pool_below_two_rejected() {
        let x = Tensor4::zeros([1, 1, 4, 4]);
        assert!(maxpool_forward(&x, 1, 2).is_err());
    }
}
