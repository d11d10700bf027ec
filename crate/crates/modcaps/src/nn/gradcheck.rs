//! Verification oracles: a deliberately naive convolution and a central
//! finite-difference gradient checker.
//!
//! Everything here trades speed for obviousness and stays independent of
//! the optimised implementations it cross-checks.

use super::{conv1d_out_len, NnError, Result, Scalar, Tensor};

/// Textbook triple-loop valid convolution. Slow; used only to validate
/// [`super::conv1d`].
pub fn naive_conv1d<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
) -> Result<Tensor<T>> {
    let (batch, c_in, len) = match *input.shape() {
        [c, l] => (1, c, l),
        [b, c, l] => (b, c, l),
        ref s => {
            return Err(NnError::ShapeMismatch {
                op: "naive_conv1d",
                detail: format!("bad input shape {s:?}"),
            })
        }
    };
    let &[c_out, kc_in, k] = kernel.shape() else {
        return Err(NnError::ShapeMismatch {
            op: "naive_conv1d",
            detail: format!("bad kernel shape {:?}", kernel.shape()),
        });
    };
    assert_eq!(kc_in, c_in, "naive_conv1d: channel mismatch");
    let out_len = conv1d_out_len(len, k, stride).ok_or(NnError::InputShorterThanKernel {
        op: "naive_conv1d",
        len,
        kernel: k,
    })?;

    let shape = if input.rank() == 2 {
        vec![c_out, out_len]
    } else {
        vec![batch, c_out, out_len]
    };
    let mut out = Tensor::zeros(&shape);
    for b in 0..batch {
        for co in 0..c_out {
            for t in 0..out_len {
                let mut acc = bias.data()[co];
                for ci in 0..c_in {
                    for kk in 0..k {
                        let xv = input.data()[(b * c_in + ci) * len + t * stride + kk];
                        let wv = kernel.data()[(co * c_in + ci) * k + kk];
                        acc = acc + xv * wv;
                    }
                }
                out.data_mut()[(b * c_out + co) * out_len + t] = acc;
            }
        }
    }
    Ok(out)
}

/// Result of comparing one analytic gradient tensor against central finite
/// differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Worst relative error across all perturbed coordinates.
    pub max_rel_err: f64,
    /// Coordinate index attaining the worst error.
    pub worst_index: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
}

/// Compares an analytic gradient against central finite differences of a
/// scalar loss.
///
/// `loss` evaluates the objective at a candidate parameter vector;
/// `analytic` is the gradient under test, aligned with `theta`. Relative
/// error uses a floor proportional to the gradient's own magnitude so that
/// near-zero coordinates do not blow up the ratio.
pub fn check_gradient<T: Scalar>(
    theta: &Tensor<T>,
    analytic: &Tensor<T>,
    epsilon: f64,
    loss: impl FnMut(&Tensor<T>) -> f64,
) -> GradCheckReport {
    let scale = analytic
        .data()
        .iter()
        .fold(0.0f64, |m, &g| m.max(g.to_f64().abs()))
        .max(1e-8);
    check_gradient_with_floor(theta, analytic, epsilon, 1e-4 * scale, loss)
}

/// [`check_gradient`] with an explicit denominator floor. The floor sets
/// the absolute scale below which coordinates are compared absolutely
/// instead of relatively: an error passes a tolerance `tol` iff
/// `|a - n| <= tol * max(|a|, |n|, floor)`. Single-precision forward
/// passes need a floor around `loss * f32-epsilon / epsilon`, the noise a
/// finite difference of a rounded loss cannot get below.
pub fn check_gradient_with_floor<T: Scalar>(
    theta: &Tensor<T>,
    analytic: &Tensor<T>,
    epsilon: f64,
    floor: f64,
    mut loss: impl FnMut(&Tensor<T>) -> f64,
) -> GradCheckReport {
    assert_eq!(theta.shape(), analytic.shape(), "gradient shape mismatch");
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_index: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
    };
    let mut probe = theta.clone();
    for i in 0..theta.len() {
        let orig = theta.data()[i];
        probe.data_mut()[i] = orig + T::from_f64(epsilon);
        let up = loss(&probe);
        probe.data_mut()[i] = orig - T::from_f64(epsilon);
        let down = loss(&probe);
        probe.data_mut()[i] = orig;

        let numeric = (up - down) / (2.0 * epsilon);
        let a = analytic.data()[i].to_f64();
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_index = i;
            report.analytic_at_worst = a;
            report.numeric_at_worst = numeric;
        }
    }
    report
}

/// Sum of squared elements — the quadratic probe loss used by the layer
/// gradient checks. Computed in `f64` regardless of the element type.
pub fn sum_of_squares<T: Scalar>(t: &Tensor<T>) -> f64 {
    t.data().iter().map(|&v| v.to_f64() * v.to_f64()).sum()
}

/// Gradient of [`sum_of_squares`] with respect to the tensor: `2x`.
pub fn sum_of_squares_grad<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    t.map(|v| v + v)
}
