//! Strided 1-D convolution (valid padding) with explicit backward pass.
//!
//! Hot loops are written as broadcast–multiply–accumulate over contiguous
//! channel vectors: every output element owns a private accumulator chain
//! that is walked in a fixed order, so the compiler may vectorise freely
//! without changing results.

use super::tensor::{batched_dims, like_input};
use super::{NnError, Result, Scalar, Tensor};

/// Output length of a valid (no padding) strided convolution, or `None`
/// when the input is shorter than the kernel.
pub fn conv1d_out_len(input_len: usize, kernel_len: usize, stride: usize) -> Option<usize> {
    if kernel_len == 0 || stride == 0 || input_len < kernel_len {
        return None;
    }
    Some((input_len - kernel_len) / stride + 1)
}

/// Gradients of a convolution with respect to its input, kernel and bias.
#[derive(Debug, Clone)]
pub struct Conv1dGrad<T = f32> {
    /// `None` when the caller asked to skip it (first layer of a network).
    pub input_grad: Option<Tensor<T>>,
    pub kernel_grad: Tensor<T>,
    pub bias_grad: Tensor<T>,
}

fn check_conv_args<T: Scalar>(
    op: &'static str,
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
) -> Result<(usize, usize, usize, usize, usize, usize)> {
    let (batch, c_in, len) = batched_dims(input, op)?;
    let &[c_out, kc_in, k] = kernel.shape() else {
        return Err(NnError::ShapeMismatch {
            op,
            detail: format!(
                "kernel must be [out_channels, in_channels, kernel_len], got {:?}",
                kernel.shape()
            ),
        });
    };
    if kc_in != c_in {
        return Err(NnError::ShapeMismatch {
            op,
            detail: format!("kernel expects {kc_in} input channels, input has {c_in}"),
        });
    }
    if stride == 0 {
        return Err(NnError::ZeroStride { op });
    }
    let Some(out_len) = conv1d_out_len(len, k, stride) else {
        return Err(NnError::InputShorterThanKernel {
            op,
            len,
            kernel: k,
        });
    };
    Ok((batch, c_in, len, c_out, k, out_len))
}

/// Reorders a `[C_out, C_in, K]` kernel to `[C_in, K, C_out]` so the output
/// channel axis is contiguous in the inner loops.
fn transpose_kernel<T: Scalar>(kernel: &[T], c_out: usize, c_in: usize, k: usize) -> Vec<T> {
    let mut t = vec![T::zero(); kernel.len()];
    for co in 0..c_out {
        for ci in 0..c_in {
            for kk in 0..k {
                t[(ci * k + kk) * c_out + co] = kernel[(co * c_in + ci) * k + kk];
            }
        }
    }
    t
}

/// Valid strided 1-D convolution.
///
/// `input` is `[C_in, L]` or `[B, C_in, L]`, `kernel` is `[C_out, C_in, K]`,
/// `bias` is `[C_out]`. The output mirrors the input's rank with channel
/// count `C_out` and length `(L - K) / stride + 1`.
pub fn conv1d<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
) -> Result<Tensor<T>> {
    let (batch, c_in, len, c_out, k, out_len) = check_conv_args("conv1d", input, kernel, stride)?;
    if bias.shape() != [c_out] {
        return Err(NnError::ShapeMismatch {
            op: "conv1d",
            detail: format!("bias must be [{c_out}], got {:?}", bias.shape()),
        });
    }

    let kt = transpose_kernel(kernel.data(), c_out, c_in, k);
    let x = input.data();
    let b_data = bias.data();
    let mut out = Tensor::zeros(&like_input(input.rank(), batch, c_out, out_len));
    let y = out.data_mut();

    let mut acc = vec![T::zero(); c_out];
    for b in 0..batch {
        let x_sample = &x[b * c_in * len..(b + 1) * c_in * len];
        for t in 0..out_len {
            let base = t * stride;
            acc.copy_from_slice(b_data);
            for ci in 0..c_in {
                let window = &x_sample[ci * len + base..ci * len + base + k];
                let krows = &kt[ci * k * c_out..(ci + 1) * k * c_out];
                for (kk, &xv) in window.iter().enumerate() {
                    let krow = &krows[kk * c_out..(kk + 1) * c_out];
                    for (a, &w) in acc.iter_mut().zip(krow) {
                        *a += xv * w;
                    }
                }
            }
            let y_sample = &mut y[b * c_out * out_len..(b + 1) * c_out * out_len];
            for (co, &v) in acc.iter().enumerate() {
                y_sample[co * out_len + t] = v;
            }
        }
    }
    Ok(out)
}

/// Backward pass of [`conv1d`].
///
/// `grad_out` must have the forward output's shape. Set `want_input_grad`
/// to `false` for the first layer of a network to skip the (unused) input
/// gradient.
pub fn conv1d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    grad_out: &Tensor<T>,
    want_input_grad: bool,
) -> Result<Conv1dGrad<T>> {
    let (batch, c_in, len, c_out, k, out_len) =
        check_conv_args("conv1d_backward", input, kernel, stride)?;
    let expect = like_input(input.rank(), batch, c_out, out_len);
    if grad_out.shape() != expect.as_slice() {
        return Err(NnError::ShapeMismatch {
            op: "conv1d_backward",
            detail: format!("grad_out must be {expect:?}, got {:?}", grad_out.shape()),
        });
    }

    let x = input.data();
    let g = grad_out.data();
    let w = kernel.data();

    // Bias gradient: plain sum of grad_out over batch and positions.
    let mut bias_grad = Tensor::zeros(&[c_out]);
    for b in 0..batch {
        for co in 0..c_out {
            let row = &g[(b * c_out + co) * out_len..(b * c_out + co + 1) * out_len];
            bias_grad.data_mut()[co] += sum_slice(row);
        }
    }

    // Kernel gradient, accumulated in [C_in, K, C_out] layout so the inner
    // axpy runs over the contiguous output-channel axis, then transposed
    // back to the public [C_out, C_in, K] layout.
    let mut kg_t = vec![T::zero(); c_out * c_in * k];
    let mut g_col = vec![T::zero(); c_out];
    let mut input_grad = want_input_grad.then(|| Tensor::zeros(input.shape()));
    let mut u = vec![T::zero(); c_in * k];

    for b in 0..batch {
        let x_sample = &x[b * c_in * len..(b + 1) * c_in * len];
        let g_sample = &g[b * c_out * out_len..(b + 1) * c_out * out_len];
        for t in 0..out_len {
            let base = t * stride;
            for co in 0..c_out {
                g_col[co] = g_sample[co * out_len + t];
            }
            for ci in 0..c_in {
                let window = &x_sample[ci * len + base..ci * len + base + k];
                let rows = &mut kg_t[ci * k * c_out..(ci + 1) * k * c_out];
                for (kk, &xv) in window.iter().enumerate() {
                    let row = &mut rows[kk * c_out..(kk + 1) * c_out];
                    for (a, &gv) in row.iter_mut().zip(&g_col) {
                        *a += xv * gv;
                    }
                }
            }
            if let Some(ig) = input_grad.as_mut() {
                // u = W^T g_t over the flattened (ci, k) axis, then scatter
                // into the strided input window.
                u.iter_mut().for_each(|v| *v = T::zero());
                for co in 0..c_out {
                    let gv = g_col[co];
                    let wrow = &w[co * c_in * k..(co + 1) * c_in * k];
                    for (a, &wv) in u.iter_mut().zip(wrow) {
                        *a += gv * wv;
                    }
                }
                let ig_data = ig.data_mut();
                for ci in 0..c_in {
                    let dst =
                        &mut ig_data[(b * c_in + ci) * len + base..(b * c_in + ci) * len + base + k];
                    let src = &u[ci * k..(ci + 1) * k];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }

    let mut kernel_grad = Tensor::zeros(&[c_out, c_in, k]);
    let kg = kernel_grad.data_mut();
    for ci in 0..c_in {
        for kk in 0..k {
            for co in 0..c_out {
                kg[(co * c_in + ci) * k + kk] = kg_t[(ci * k + kk) * c_out + co];
            }
        }
    }

    Ok(Conv1dGrad {
        input_grad,
        kernel_grad,
        bias_grad,
    })
}

/// Sum of a slice through a fixed-shape 16-lane accumulator tree; the
/// reduction order is independent of how the loop is vectorised.
pub(crate) fn sum_slice<T: Scalar>(v: &[T]) -> T {
    const LANES: usize = 16;
    let mut acc = [T::zero(); LANES];
    let chunks = v.len() / LANES;
    for i in 0..chunks {
        let p = &v[i * LANES..(i + 1) * LANES];
        for j in 0..LANES {
            acc[j] += p[j];
        }
    }
    let mut tail = T::zero();
    for &x in &v[chunks * LANES..] {
        tail += x;
    }
    combine16(&acc) + tail
}

/// Dot product with the same fixed-tree reduction as [`sum_slice`].
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    const LANES: usize = 16;
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); LANES];
    let chunks = a.len() / LANES;
    for i in 0..chunks {
        let pa = &a[i * LANES..(i + 1) * LANES];
        let pb = &b[i * LANES..(i + 1) * LANES];
        for j in 0..LANES {
            acc[j] += pa[j] * pb[j];
        }
    }
    let mut tail = T::zero();
    for i in chunks * LANES..a.len() {
        tail += a[i] * b[i];
    }
    combine16(&acc) + tail
}

#[inline(always)]
fn combine16<T: Scalar>(acc: &[T; 16]) -> T {
    let mut h = [T::zero(); 8];
    for j in 0..8 {
        h[j] = acc[j] + acc[j + 8];
    }
    let q0 = h[0] + h[4];
    let q1 = h[1] + h[5];
    let q2 = h[2] + h[6];
    let q3 = h[3] + h[7];
    (q0 + q2) + (q1 + q3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::naive_conv1d;

    fn seq_tensor(shape: &[usize], scale: f64) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        Tensor::from_vec(
            shape,
            (0..n).map(|i| ((i * 7 % 23) as f64 - 11.0) * scale).collect(),
        )
        .unwrap()
    }

    #[test]
    fn out_len_matches_network_trace() {
        assert_eq!(conv1d_out_len(32768, 22, 9), Some(3639));
        assert_eq!(conv1d_out_len(3639, 23, 7), Some(517));
        assert_eq!(conv1d_out_len(517, 22, 8), Some(62));
        assert_eq!(conv1d_out_len(10, 11, 1), None);
        assert_eq!(conv1d_out_len(10, 3, 0), None);
    }

    #[test]
    fn identity_kernel_with_stride_subsamples() {
        let x = Tensor::from_vec(&[1, 8], (0..8).map(|i| i as f64).collect()).unwrap();
        let k = Tensor::from_vec(&[1, 1, 1], vec![1.0]).unwrap();
        let bias = Tensor::zeros(&[1]);
        let y = conv1d(&x, &k, &bias, 3).unwrap();
        assert_eq!(y.shape(), &[1, 3]);
        assert_eq!(y.data(), &[0.0, 3.0, 6.0]);
    }

    #[test]
    fn matches_naive_oracle_on_fixed_case() {
        let x = seq_tensor(&[2, 3, 50], 0.25);
        let k = seq_tensor(&[4, 3, 5], 0.125);
        let bias = seq_tensor(&[4], 0.5);
        let fast = conv1d(&x, &k, &bias, 3).unwrap();
        let slow = naive_conv1d(&x, &k, &bias, 3).unwrap();
        assert_eq!(fast.shape(), slow.shape());
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn linearity_in_the_input_without_bias() {
        let x = seq_tensor(&[2, 40], 0.2);
        let y = seq_tensor(&[2, 40], -0.15);
        let k = seq_tensor(&[3, 2, 7], 0.3);
        let bias = Tensor::zeros(&[3]);
        let (a, b) = (1.75, -0.5);
        let mixed = Tensor::from_vec(
            &[2, 40],
            x.data()
                .iter()
                .zip(y.data())
                .map(|(&xv, &yv)| a * xv + b * yv)
                .collect(),
        )
        .unwrap();
        let lhs = conv1d(&mixed, &k, &bias, 2).unwrap();
        let cx = conv1d(&x, &k, &bias, 2).unwrap();
        let cy = conv1d(&y, &k, &bias, 2).unwrap();
        for i in 0..lhs.len() {
            let rhs = a * cx.data()[i] + b * cy.data()[i];
            assert!((lhs.data()[i] - rhs).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let x = Tensor::<f32>::zeros(&[2, 30]);
        let k = Tensor::<f32>::zeros(&[4, 3, 5]);
        let bias = Tensor::<f32>::zeros(&[4]);
        assert!(matches!(
            conv1d(&x, &k, &bias, 1),
            Err(NnError::ShapeMismatch { .. })
        ));
        let k2 = Tensor::<f32>::zeros(&[4, 2, 31]);
        let bias4 = Tensor::<f32>::zeros(&[4]);
        assert!(matches!(
            conv1d(&x, &k2, &bias4, 1),
            Err(NnError::InputShorterThanKernel { .. })
        ));
        let k3 = Tensor::<f32>::zeros(&[4, 2, 5]);
        let bad_bias = Tensor::<f32>::zeros(&[3]);
        assert!(conv1d(&x, &k3, &bad_bias, 1).is_err());
        assert!(matches!(
            conv1d(&x, &k3, &bias, 0),
            Err(NnError::ZeroStride { .. })
        ));
    }

    #[test]
    fn batched_equals_per_sample() {
        let x = seq_tensor(&[3, 2, 20], 0.2);
        let k = seq_tensor(&[4, 2, 5], 0.1);
        let bias = seq_tensor(&[4], 1.0);
        let all = conv1d(&x, &k, &bias, 2).unwrap();
        for b in 0..3 {
            let sample = Tensor::from_vec(&[2, 20], x.data()[b * 40..(b + 1) * 40].to_vec()).unwrap();
            let single = conv1d(&sample, &k, &bias, 2).unwrap();
            let out_per = single.len();
            assert_eq!(
                &all.data()[b * out_per..(b + 1) * out_per],
                single.data()
            );
        }
    }

    #[test]
    fn fixed_tree_sum_matches_sequential() {
        let v: Vec<f64> = (0..103).map(|i| (i as f64).sin()).collect();
        let seq: f64 = v.iter().sum();
        assert!((sum_slice(&v) - seq).abs() < 1e-12);
        let a: Vec<f64> = (0..47).map(|i| (i as f64 * 0.37).cos()).collect();
        let b: Vec<f64> = (0..47).map(|i| (i as f64 * 0.11).sin()).collect();
        let seq_dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - seq_dot).abs() < 1e-12);
    }
}
