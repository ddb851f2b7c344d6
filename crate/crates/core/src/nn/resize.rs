//! Nearest-neighbour up-sampling and top-left cropping.

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

pub fn upsample_forward(input: &Tensor4, fh: usize, fw: usize) -> Result<Tensor4> {
    if fh < 1 || fw < 1 {
        return Err(Error::shape(0, "upsample factor must be positive"));
    }
    let [n, c, h, w] = input.dims();
    let (oh, ow) = (h * fh, w * fw);
    let mut out = Tensor4::zeros([n, c, oh, ow]);
    let x = input.data();
    let o = out.data_mut();
    for plane in 0..n * c {
        let src = &x[plane * h * w..(plane + 1) * h * w];
        let dst = &mut o[plane * oh * ow..(plane + 1) * oh * ow];
        for r in 0..oh {
            let srow = &src[(r / fh) * w..(r / fh + 1) * w];
            for (col, d) in dst[r * ow..(r + 1) * ow].iter_mut().enumerate() {
                *d = srow[col / fw];
            }
        }
    }
    Ok(out)
}

/// Sums the gradient over each replication block.
pub fn upsample_backward(grad_out: &Tensor4, fh: usize, fw: usize) -> Result<Tensor4> {
    let [n, c, oh, ow] = grad_out.dims();
    if oh % fh != 0 || ow % fw != 0 {
        return Err(Error::shape(
            0,
            format!("upsample gradient {oh}x{ow} not divisible by {fh}x{fw}"),
        ));
    }
    let (h, w) = (oh / fh, ow / fw);
    let mut gi = Tensor4::zeros([n, c, h, w]);
    let g = grad_out.data();
    let d = gi.data_mut();
    for plane in 0..n * c {
        for r in 0..oh {
            for col in 0..ow {
                d[plane * h * w + (r / fh) * w + col / fw] += g[plane * oh * ow + r * ow + col];
            }
        }
    }
    Ok(gi)
}

/// Keeps the top-left `th x tw` region.
pub fn crop_forward(input: &Tensor4, th: usize, tw: usize) -> Result<Tensor4> {
    let [n, c, h, w] = input.dims();
    if th > h || tw > w {
        return Err(Error::shape(
            0,
            format!("cannot crop {h}x{w} to larger {th}x{tw}"),
        ));
    }
    let mut out = Tensor4::zeros([n, c, th, tw]);
    let x = input.data();
    let o = out.data_mut();
    for plane in 0..n * c {
        for r in 0..th {
            let s = plane * h * w + r * w;
            let d = plane * th * tw + r * tw;
            o[d..d + tw].copy_from_slice(&x[s..s + tw]);
        }
    }
    Ok(out)
}

/// Zero-pads the gradient back to the pre-crop dims.
pub fn crop_backward(grad_out: &Tensor4, input_dims: [usize; 4]) -> Result<Tensor4> {
    let [n, c, th, tw] = grad_out.dims();
    let [_, _, h, w] = input_dims;
    if input_dims[0] != n || input_dims[1] != c || th > h || tw > w {
        return Err(Error::shape(0, "crop gradient does not fit input dims"));
    }
    let mut gi = Tensor4::zeros(input_dims);
    let g = grad_out.data();
    let d = gi.data_mut();
    for plane in 0..n * c {
        for r in 0..th {
            let s = plane * th * tw + r * tw;
            let t = plane * h * w + r * w;
            d[t..t + tw].copy_from_slice(&g[s..s + tw]);
        }
    }
    Ok(gi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upsample_replicates_blocks() {
        let x = Tensor4::from_vec([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = upsample_forward(&x, 2, 2).unwrap();
        assert_eq!(y.dims(), [1, 1, 4, 4]);
        #[rustfmt::skip]
        let expect = [
            1.0, 1.0, 2.0, 2.0,
            1.0, 1.0, 2.0, 2.0,
            3.0, 3.0, 4.0, 4.0,
            3.0, 3.0, 4.0, 4.0,
        ];
        assert_eq!(y.data(), &expect);
    }

    #[test]
    fn block_average_inverts_upsample() {
        let x = Tensor4::from_vec(
            [1, 2, 3, 2],
            (0..12).map(|i| i as f64 * 0.3 - 1.0).collect(),
        )
        .unwrap();
        let y = upsample_forward(&x, 2, 2).unwrap();
        // upsample_backward sums each block; dividing by the block size averages it.
        let mut avg = upsample_backward(&y, 2, 2).unwrap();
        avg.data_mut().iter_mut().for_each(|v| *v /= 4.0);
        assert_eq!(avg, x);
    }

    #[test]
    fn crop_then_backward_pads_zeros() {
        let x = Tensor4::from_vec([1, 1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let y = crop_forward(&x, 2, 2).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 4.0, 5.0]);
        let gi = crop_backward(&y, x.dims()).unwrap();
        assert_eq!(gi.data(), &[1.0, 2.0, 0.0, 4.0, 5.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(crop_forward(&x, 4, 1).is_err());
    }
}
