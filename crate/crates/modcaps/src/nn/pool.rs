//! 1-D average pooling along the length axis.

use super::tensor::{batched_dims, like_input};
use super::{conv1d_out_len, NnError, Result, Scalar, Tensor};

/// Average pooling with the given window and stride (valid extent only).
pub fn avgpool1d<T: Scalar>(input: &Tensor<T>, window: usize, stride: usize) -> Result<Tensor<T>> {
    let (batch, channels, len) = batched_dims(input, "avgpool1d")?;
    if stride == 0 {
        return Err(NnError::ZeroStride { op: "avgpool1d" });
    }
    if window == 0 {
        return Err(NnError::InvalidArgument {
            op: "avgpool1d",
            detail: "window must be at least 1".into(),
        });
    }
    let Some(out_len) = conv1d_out_len(len, window, stride) else {
        return Err(NnError::InputShorterThanKernel {
            op: "avgpool1d",
            len,
            kernel: window,
        });
    };
    let inv_w = T::from_f64(1.0 / window as f64);
    let x = input.data();
    let mut out = Tensor::zeros(&like_input(input.rank(), batch, channels, out_len));
    for bc in 0..batch * channels {
        let row = &x[bc * len..(bc + 1) * len];
        let dst = &mut out.data_mut()[bc * out_len..(bc + 1) * out_len];
        for (t, d) in dst.iter_mut().enumerate() {
            let mut acc = T::zero();
            for &v in &row[t * stride..t * stride + window] {
                acc += v;
            }
            *d = acc * inv_w;
        }
    }
    Ok(out)
}

/// Backward pass of [`avgpool1d`]: each input position receives
/// `grad / window` from every window that covered it.
pub fn avgpool1d_backward<T: Scalar>(
    input_shape: &[usize],
    window: usize,
    stride: usize,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    let mut input_grad = Tensor::zeros(input_shape);
    let (batch, channels, len) = batched_dims(&input_grad, "avgpool1d_backward")?;
    let Some(out_len) = conv1d_out_len(len, window, stride) else {
        return Err(NnError::InputShorterThanKernel {
            op: "avgpool1d_backward",
            len,
            kernel: window,
        });
    };
    let expect = like_input(input_shape.len(), batch, channels, out_len);
    if grad_out.shape() != expect.as_slice() {
        return Err(NnError::ShapeMismatch {
            op: "avgpool1d_backward",
            detail: format!("grad_out must be {expect:?}, got {:?}", grad_out.shape()),
        });
    }
    let inv_w = T::from_f64(1.0 / window as f64);
    let g = grad_out.data();
    for bc in 0..batch * channels {
        let dst = &mut input_grad.data_mut()[bc * len..(bc + 1) * len];
        let src = &g[bc * out_len..(bc + 1) * out_len];
        for (t, &gv) in src.iter().enumerate() {
            let spread = gv * inv_w;
            for d in &mut dst[t * stride..t * stride + window] {
                *d += spread;
            }
        }
    }
    Ok(input_grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{check_gradient, sum_of_squares, sum_of_squares_grad};

    #[test]
    fn network_pool_stage_length() {
        let x = Tensor::<f32>::zeros(&[64, 62]);
        let y = avgpool1d(&x, 8, 1).unwrap();
        assert_eq!(y.shape(), &[64, 55]);
    }

    #[test]
    fn averages_windows() {
        let x = Tensor::from_vec(&[1, 6], vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = avgpool1d(&x, 3, 2).unwrap();
        assert_eq!(y.shape(), &[1, 2]);
        assert!((y.data()[0] - 2.0).abs() < 1e-15);
        assert!((y.data()[1] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn window_one_is_identity() {
        let x = Tensor::from_vec(&[2, 4], (0..8).map(|i| i as f64).collect()).unwrap();
        let y = avgpool1d(&x, 1, 1).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn constant_input_is_preserved() {
        let x = Tensor::filled(&[1, 2, 10], 2.5f64);
        let y = avgpool1d(&x, 4, 2).unwrap();
        assert!(y.data().iter().all(|&v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn gradient_matches_finite_differences_with_overlap() {
        let x = Tensor::from_vec(&[1, 2, 9], (0..18).map(|i| (i as f64 * 0.7).sin()).collect())
            .unwrap();
        let y = avgpool1d(&x, 4, 2).unwrap();
        let grad = avgpool1d_backward(x.shape(), 4, 2, &sum_of_squares_grad(&y)).unwrap();
        let report = check_gradient(&x, &grad, 1e-6, |p| {
            sum_of_squares(&avgpool1d(p, 4, 2).unwrap())
        });
        assert!(report.max_rel_err < 1e-6, "{report:?}");
    }

    #[test]
    fn rejects_window_longer_than_input() {
        let x = Tensor::<f32>::zeros(&[1, 5]);
        assert!(avgpool1d(&x, 6, 1).is_err());
    }
}
