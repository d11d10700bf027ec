//! Stochastic gradient descent with classical momentum.
//!
//! Update rule per parameter tensor:
//! `v <- momentum * v - lr * grad; param <- param + v`.

use super::{GradSet, NnError, ParamSet, Result, Scalar, Tensor};

/// Per-parameter velocity buffers plus the current hyperparameters.
#[derive(Debug, Clone)]
pub struct OptimizerState<T = f32> {
    pub velocity: Vec<Tensor<T>>,
    pub momentum: f64,
    pub learning_rate: f64,
}

impl<T: Scalar> OptimizerState<T> {
    /// Zero-velocity state shaped like the parameter set.
    pub fn new(params: &ParamSet<T>, learning_rate: f64, momentum: f64) -> OptimizerState<T> {
        OptimizerState {
            velocity: params
                .iter()
                .map(|p| Tensor::zeros(p.value.shape()))
                .collect(),
            momentum,
            learning_rate,
        }
    }
}

/// Applies one SGDM update in place. Rejects non-finite gradients, naming
/// the offending parameter.
pub fn sgdm_step<T: Scalar>(
    params: &mut ParamSet<T>,
    grads: &GradSet<T>,
    state: &mut OptimizerState<T>,
) -> Result<()> {
    params.check_aligned(grads)?;
    if state.velocity.len() != params.len() {
        return Err(NnError::ShapeMismatch {
            op: "sgdm_step",
            detail: format!(
                "{} velocity buffers for {} parameters",
                state.velocity.len(),
                params.len()
            ),
        });
    }
    for (i, grad) in grads.iter().enumerate() {
        if !grad.all_finite() {
            return Err(NnError::NonFinite {
                name: params.get(i).name.clone(),
            });
        }
    }
    let lr = T::from_f64(state.learning_rate);
    let mom = T::from_f64(state.momentum);
    for i in 0..params.len() {
        let v = state.velocity[i].data_mut();
        let g = grads[i].data();
        let p = params.get_mut(i).value.data_mut();
        for j in 0..v.len() {
            v[j] = mom * v[j] - lr * g[j];
            p[j] += v[j];
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(w: f64) -> ParamSet<f64> {
        let mut set = ParamSet::new();
        set.push("w", Tensor::from_vec(&[1], vec![w]).unwrap());
        set
    }

    #[test]
    fn hand_iterated_two_step_trace() {
        // f(w) = w^2 from w0 = 1 with lr 0.1, momentum 0.9:
        // step 1: v = -0.2, w = 0.8; step 2: v = -0.34, w = 0.46.
        let mut params = single_param(1.0);
        let mut state = OptimizerState::new(&params, 0.1, 0.9);
        for expect in [0.8f64, 0.46] {
            let g = 2.0 * params.value(0).data()[0];
            let grads = vec![Tensor::from_vec(&[1], vec![g]).unwrap()];
            sgdm_step(&mut params, &grads, &mut state).unwrap();
            let w = params.value(0).data()[0];
            assert!((w - expect).abs() < 1e-12, "w = {w}, want {expect}");
        }
    }

    #[test]
    fn zero_momentum_reduces_to_gradient_descent() {
        let mut params = single_param(2.0);
        let mut state = OptimizerState::new(&params, 0.5, 0.0);
        let grads = vec![Tensor::from_vec(&[1], vec![3.0]).unwrap()];
        sgdm_step(&mut params, &grads, &mut state).unwrap();
        assert!((params.value(0).data()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_keeps_coasting_on_momentum() {
        let mut params = single_param(1.0);
        let mut state = OptimizerState::new(&params, 0.1, 0.9);
        let grads = vec![Tensor::from_vec(&[1], vec![1.0]).unwrap()];
        sgdm_step(&mut params, &grads, &mut state).unwrap();
        let w1 = params.value(0).data()[0];
        let zero = vec![Tensor::zeros(&[1])];
        sgdm_step(&mut params, &zero, &mut state).unwrap();
        let w2 = params.value(0).data()[0];
        // velocity was -0.1; with zero grad it decays to -0.09.
        assert!(((w2 - w1) - 0.9 * (w1 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_gradients_by_name() {
        let mut params = single_param(1.0);
        let mut state = OptimizerState::new(&params, 0.1, 0.9);
        let grads = vec![Tensor::from_vec(&[1], vec![f64::NAN]).unwrap()];
        match sgdm_step(&mut params, &grads, &mut state) {
            Err(NnError::NonFinite { name }) => assert_eq!(name, "w"),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn rejects_misaligned_gradients() {
        let mut params = single_param(1.0);
        let mut state = OptimizerState::new(&params, 0.1, 0.9);
        let grads = vec![Tensor::<f64>::zeros(&[2])];
        assert!(sgdm_step(&mut params, &grads, &mut state).is_err());
    }
}
