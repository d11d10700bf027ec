//! Fully connected layer `y = W x + b`.

use super::conv::dot;
use super::{NnError, Result, Scalar, Tensor};

/// Gradients of a fully connected layer.
#[derive(Debug, Clone)]
pub struct FcGrad<T = f32> {
    pub input_grad: Tensor<T>,
    pub weight_grad: Tensor<T>,
    pub bias_grad: Tensor<T>,
}

fn check_fc_args<T: Scalar>(
    op: &'static str,
    input: &Tensor<T>,
    weight: &Tensor<T>,
    d_in_expect: Option<usize>,
) -> Result<(usize, usize, usize)> {
    let &[d_out, d_in] = weight.shape() else {
        return Err(NnError::ShapeMismatch {
            op,
            detail: format!("weight must be [out, in], got {:?}", weight.shape()),
        });
    };
    if let Some(expect) = d_in_expect {
        debug_assert_eq!(expect, d_in);
    }
    let (batch, width) = match *input.shape() {
        [w] => (1, w),
        [b, w] => (b, w),
        ref s => {
            return Err(NnError::ShapeMismatch {
                op,
                detail: format!("input must be [in] or [batch, in], got {s:?}"),
            })
        }
    };
    if width != d_in {
        return Err(NnError::ShapeMismatch {
            op,
            detail: format!("weight expects {d_in} inputs, input has {width}"),
        });
    }
    Ok((batch, d_in, d_out))
}

/// Applies `y = W x + b` to a `[in]` vector or `[batch, in]` matrix.
pub fn fully_connected<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (batch, d_in, d_out) = check_fc_args("fully_connected", input, weight, None)?;
    if bias.shape() != [d_out] {
        return Err(NnError::ShapeMismatch {
            op: "fully_connected",
            detail: format!("bias must be [{d_out}], got {:?}", bias.shape()),
        });
    }
    let shape = if input.rank() == 1 {
        vec![d_out]
    } else {
        vec![batch, d_out]
    };
    let mut out = Tensor::zeros(&shape);
    for b in 0..batch {
        let x = &input.data()[b * d_in..(b + 1) * d_in];
        let y = &mut out.data_mut()[b * d_out..(b + 1) * d_out];
        for o in 0..d_out {
            y[o] = dot(&weight.data()[o * d_in..(o + 1) * d_in], x) + bias.data()[o];
        }
    }
    Ok(out)
}

/// Backward pass of [`fully_connected`]:
/// `dx = W^T g`, `dW = g x^T` (summed over the batch), `db = sum(g)`.
pub fn fully_connected_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<FcGrad<T>> {
    let (batch, d_in, d_out) = check_fc_args("fully_connected_backward", input, weight, None)?;
    let expect = if input.rank() == 1 {
        vec![d_out]
    } else {
        vec![batch, d_out]
    };
    if grad_out.shape() != expect.as_slice() {
        return Err(NnError::ShapeMismatch {
            op: "fully_connected_backward",
            detail: format!("grad_out must be {expect:?}, got {:?}", grad_out.shape()),
        });
    }
    let mut input_grad = Tensor::zeros(input.shape());
    let mut weight_grad = Tensor::zeros(&[d_out, d_in]);
    let mut bias_grad = Tensor::zeros(&[d_out]);
    for b in 0..batch {
        let x = &input.data()[b * d_in..(b + 1) * d_in];
        let g = &grad_out.data()[b * d_out..(b + 1) * d_out];
        let dx = &mut input_grad.data_mut()[b * d_in..(b + 1) * d_in];
        for o in 0..d_out {
            let gv = g[o];
            bias_grad.data_mut()[o] += gv;
            let wrow = &weight.data()[o * d_in..(o + 1) * d_in];
            for (d, &w) in dx.iter_mut().zip(wrow) {
                *d += gv * w;
            }
            let wg_row = &mut weight_grad.data_mut()[o * d_in..(o + 1) * d_in];
            for (wg, &xv) in wg_row.iter_mut().zip(x) {
                *wg += gv * xv;
            }
        }
    }
    Ok(FcGrad {
        input_grad,
        weight_grad,
        bias_grad,
    })
}
