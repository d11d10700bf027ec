//! Softmax, cross-entropy loss, and the scalar concatenation that fuses
//! capsule branch outputs into class logits.

use super::conv::sum_slice;
use super::{NnError, Result, Scalar, Tensor};

/// Probabilities below this are clamped inside the log of the loss so a
/// saturated wrong prediction yields a large finite loss instead of inf.
pub const DEFAULT_PROB_FLOOR: f64 = 1e-12;

fn logits_dims<T: Scalar>(op: &'static str, t: &Tensor<T>) -> Result<(usize, usize)> {
    match *t.shape() {
        [k] => Ok((1, k)),
        [b, k] => Ok((b, k)),
        ref s => Err(NnError::ShapeMismatch {
            op,
            detail: format!("expected [classes] or [batch, classes], got {s:?}"),
        }),
    }
}

/// Numerically stable softmax over the last axis of a `[K]` or `[B, K]`
/// tensor: the row maximum is subtracted before exponentiation.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let (batch, k) = logits_dims("softmax", logits)?;
    if k == 0 {
        return Err(NnError::InvalidArgument {
            op: "softmax",
            detail: "needs at least one class".into(),
        });
    }
    let mut out = Tensor::zeros(logits.shape());
    for b in 0..batch {
        let row = &logits.data()[b * k..(b + 1) * k];
        let dst = &mut out.data_mut()[b * k..(b + 1) * k];
        let max = row.iter().fold(row[0], |m, &v| if v > m { v } else { m });
        for (d, &v) in dst.iter_mut().zip(row) {
            *d = (v - max).exp();
        }
        let denom = sum_slice(dst);
        let inv = T::one() / denom;
        for d in dst.iter_mut() {
            *d *= inv;
        }
    }
    Ok(out)
}

/// Concatenates per-branch scalar outputs into a logit vector; the caller
/// states how many branches it expects.
pub fn depth_concat<T: Scalar>(inputs: &[T], expected: usize) -> Result<Tensor<T>> {
    if inputs.len() != expected {
        return Err(NnError::ShapeMismatch {
            op: "depth_concat",
            detail: format!("expected {expected} branch outputs, got {}", inputs.len()),
        });
    }
    Tensor::from_vec(&[expected], inputs.to_vec())
}

/// Mean cross-entropy `-log p[label]` over the batch, accumulated in `f64`.
pub fn cross_entropy<T: Scalar>(probs: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    let (batch, k) = logits_dims("cross_entropy", probs)?;
    if labels.len() != batch {
        return Err(NnError::ShapeMismatch {
            op: "cross_entropy",
            detail: format!("{} labels for batch of {batch}", labels.len()),
        });
    }
    let mut total = 0.0f64;
    for (b, &label) in labels.iter().enumerate() {
        if label >= k {
            return Err(NnError::InvalidArgument {
                op: "cross_entropy",
                detail: format!("label {label} out of range for {k} classes"),
            });
        }
        let p = probs.data()[b * k + label].to_f64();
        if !p.is_finite() {
            return Err(NnError::InvalidArgument {
                op: "cross_entropy",
                detail: format!("non-finite probability for sample {b}"),
            });
        }
        total -= p.max(DEFAULT_PROB_FLOOR).ln();
    }
    Ok(total / batch as f64)
}

/// Combined backward pass of softmax followed by mean cross-entropy:
/// `d logits = (p - onehot(label)) / batch`.
pub fn softmax_cross_entropy_backward<T: Scalar>(
    probs: &Tensor<T>,
    labels: &[usize],
) -> Result<Tensor<T>> {
    let (batch, k) = logits_dims("softmax_cross_entropy_backward", probs)?;
    if labels.len() != batch {
        return Err(NnError::ShapeMismatch {
            op: "softmax_cross_entropy_backward",
            detail: format!("{} labels for batch of {batch}", labels.len()),
        });
    }
    let inv_b = T::from_f64(1.0 / batch as f64);
    let mut grad = Tensor::zeros(probs.shape());
    for (b, &label) in labels.iter().enumerate() {
        if label >= k {
            return Err(NnError::InvalidArgument {
                op: "softmax_cross_entropy_backward",
                detail: format!("label {label} out of range for {k} classes"),
            });
        }
        for c in 0..k {
            let p = probs.data()[b * k + c];
            let target = if c == label { T::one() } else { T::zero() };
            grad.data_mut()[b * k + c] = (p - target) * inv_b;
        }
    }
    Ok(grad)
}
