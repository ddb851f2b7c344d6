//! Losses and evaluation metrics.

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

use super::dense::{dense_backward, dense_forward};
use super::Params;

/// Mean cross-entropy of softmax(logits) against integer labels.
/// Returns `(loss, grad_logits, probabilities)`.
pub fn softmax_cross_entropy(logits: &Tensor4, labels: &[u8]) -> Result<(f64, Tensor4, Tensor4)> {
    let [n, k, _, _] = logits.dims();
    if labels.len() != n {
        return Err(Error::Precondition(format!(
            "{} labels for a batch of {n}",
            labels.len()
        )));
    }
    if !logits.all_finite() {
        return Err(Error::Diverged("non-finite logits".into()));
    }
    let per = logits.len() / n.max(1);
    if per != k {
        return Err(Error::Precondition(
            "logits must have dims (n, k, 1, 1)".into(),
        ));
    }
    let mut probs = logits.clone();
    let mut loss = 0.0;
    for b in 0..n {
        let row = &mut probs.data_mut()[b * k..(b + 1) * k];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
        let y = labels[b] as usize;
        if y >= k {
            return Err(Error::Precondition(format!(
                "label {y} outside {k} classes"
            )));
        }
        let z = &logits.data()[b * k..(b + 1) * k];
        loss += max + sum.ln() - z[y];
    }
    let scale = 1.0 / n as f64;
    let mut grad = probs.clone();
    for b in 0..n {
        let row = &mut grad.data_mut()[b * k..(b + 1) * k];
        row[labels[b] as usize] -= 1.0;
        row.iter_mut().for_each(|v| *v *= scale);
    }
    Ok((loss * scale, grad, probs))
}

/// Flatten + dense + softmax cross-entropy. Returns `(loss, grad_input,
/// grad_weights, grad_bias)`.
pub fn dense_softmax_head(
    input: &Tensor4,
    units: usize,
    params: &Params,
    labels: &[u8],
) -> Result<(f64, Tensor4, Vec<f64>, Vec<f64>)> {
    let [_, c, h, w] = input.dims();
    let inputs = c * h * w;
    let logits = dense_forward(input, inputs, units, params)?;
    let (loss, g, _) = softmax_cross_entropy(&logits, labels)?;
    let (gi, gw, gb) = dense_backward(&g, input, inputs, units, params)?;
    Ok((loss, gi, gw, gb))
}

/// Mean squared error over all elements and its gradient w.r.t. `pred`.
pub fn mse(pred: &Tensor4, target: &Tensor4) -> Result<(f64, Tensor4)> {
    if pred.dims() != target.dims() {
        return Err(Error::shape(
            0,
            format!("mse dims {:?} vs {:?}", pred.dims(), target.dims()),
        ));
    }
    let n = pred.len().max(1) as f64;
    let mut grad = Tensor4::zeros(pred.dims());
    let mut sum = 0.0;
    for ((g, &p), &t) in grad
        .data_mut()
        .iter_mut()
        .zip(pred.data())
        .zip(target.data())
    {
        let d = p - t;
        sum += d * d;
        *g = 2.0 * d / n;
    }
    Ok((sum / n, grad))
}

/// `clamp(1 - MSE, 0, 1)`.
pub fn reconstruction_accuracy(x: &Tensor4, x_recon: &Tensor4) -> Result<f64> {
    if x.dims() != x_recon.dims() {
        return Err(Error::shape(
            0,
            format!("reconstruction dims {:?} vs {:?}", x_recon.dims(), x.dims()),
        ));
    }
    let n = x.len().max(1) as f64;
    let err: f64 = x
        .data()
        .iter()
        .zip(x_recon.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    Ok(accuracy_from_mse(err))
}

pub(crate) fn accuracy_from_mse(err: f64) -> f64 {
    if err.is_nan() {
        0.0
    } else {
        (1.0 - err).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Tensor4::zeros([3, 10, 1, 1]);
        let (loss, _, probs) = softmax_cross_entropy(&logits, &[0, 4, 9]).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
        for b in 0..3 {
            let s: f64 = probs.sample(b).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn saturating_logits_drive_loss_to_zero() {
        let mut v = vec![0.0; 10];
        v[3] = 60.0;
        let logits = Tensor4::from_vec([1, 10, 1, 1], v).unwrap();
        let (loss, _, _) = softmax_cross_entropy(&logits, &[3]).unwrap();
        assert!(loss < 1e-20);
    }

    #[test]
    fn non_finite_logits_diverge() {
        let logits = Tensor4::from_vec([1, 2, 1, 1], vec![f64::NAN, 0.0]).unwrap();
        assert!(matches!(
            softmax_cross_entropy(&logits, &[0]),
            Err(Error::Diverged(_))
        ));
    }

    #[test]
    fn reconstruction_accuracy_cases() {
        let x = Tensor4::filled([2, 3, 4, 4], 0.5);
        assert_eq!(reconstruction_accuracy(&x, &x).unwrap(), 1.0);
        let ones = Tensor4::filled([1, 1, 2, 2], 1.0);
        let zeros = Tensor4::zeros([1, 1, 2, 2]);
        assert_eq!(reconstruction_accuracy(&ones, &zeros).unwrap(), 0.0);
        let r = Tensor4::filled([2, 3, 4, 4], 0.3);
        assert!((reconstruction_accuracy(&x, &r).unwrap() - 0.96).abs() < 1e-12);
        assert!(reconstruction_accuracy(&x, &zeros).is_err());
    }
}
