//! Element-wise activations.

use super::{Scalar, Tensor};

/// Supported activation functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

/// Applies the activation element-wise.
pub fn activation<T: Scalar>(input: &Tensor<T>, kind: Activation) -> Tensor<T> {
    match kind {
        Activation::Tanh => input.map(|v| v.tanh()),
        Activation::Relu => input.map(|v| if v > T::zero() { v } else { T::zero() }),
    }
}

/// Backward pass, written in terms of the forward *output* `y`:
/// tanh uses `(1 - y^2)`, relu uses `[y > 0]` (the derivative at exactly
/// zero is taken as zero).
pub fn activation_backward<T: Scalar>(
    output: &Tensor<T>,
    kind: Activation,
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    assert_eq!(
        output.shape(),
        grad_out.shape(),
        "activation_backward: shape mismatch"
    );
    let mut grad = Tensor::zeros(output.shape());
    match kind {
        Activation::Tanh => {
            for i in 0..output.len() {
                let y = output.data()[i];
                grad.data_mut()[i] = (T::one() - y * y) * grad_out.data()[i];
            }
        }
        Activation::Relu => {
            for i in 0..output.len() {
                grad.data_mut()[i] = if output.data()[i] > T::zero() {
                    grad_out.data()[i]
                } else {
                    T::zero()
                };
            }
        }
    }
    grad
}
