//! Batch normalization over the channel axis with running statistics.
//!
//! Activations are `[C, L]` (single sample) or `[B, C, L]`; each channel is
//! normalized over all `B * L` values it owns in the batch. Statistics are
//! accumulated in `f64` in a fixed order. Normalization uses the biased
//! variance, and the running estimates store the same quantity.

use super::tensor::batched_dims;
use super::{NnError, Result, Scalar, Tensor};

/// Whether batchnorm uses batch statistics (training) or the stored
/// running estimates (inference).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Inference,
}

/// Per-channel running mean/variance estimates, updated during training.
#[derive(Debug, Clone)]
pub struct RunningStats<T = f32> {
    pub mean: Tensor<T>,
    pub var: Tensor<T>,
}

impl<T: Scalar> RunningStats<T> {
    /// Fresh estimates: zero mean, unit variance.
    pub fn new(channels: usize) -> RunningStats<T> {
        RunningStats {
            mean: Tensor::zeros(&[channels]),
            var: Tensor::filled(&[channels], T::one()),
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

/// Activations cached by the training-mode forward pass for backward.
#[derive(Debug, Clone)]
pub struct BnCache<T = f32> {
    /// Normalized input `(x - mean) / sqrt(var + eps)`, same shape as `x`.
    pub xhat: Tensor<T>,
    /// Per-channel `1 / sqrt(var + eps)`.
    pub inv_std: Vec<T>,
}

/// Gradients of batchnorm with respect to input and affine parameters.
#[derive(Debug, Clone)]
pub struct BnGrad<T = f32> {
    pub input_grad: Tensor<T>,
    pub gamma_grad: Tensor<T>,
    pub beta_grad: Tensor<T>,
}

fn check_bn_args<T: Scalar>(
    op: &'static str,
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    stats_channels: usize,
) -> Result<(usize, usize, usize)> {
    let (batch, channels, len) = batched_dims(input, op)?;
    if gamma.shape() != [channels] || beta.shape() != [channels] {
        return Err(NnError::ShapeMismatch {
            op,
            detail: format!(
                "gamma/beta must be [{channels}], got {:?} and {:?}",
                gamma.shape(),
                beta.shape()
            ),
        });
    }
    if stats_channels != channels {
        return Err(NnError::ShapeMismatch {
            op,
            detail: format!("running stats cover {stats_channels} channels, input has {channels}"),
        });
    }
    Ok((batch, channels, len))
}

/// Training-mode batchnorm: normalizes with batch statistics, applies the
/// affine transform, and folds the batch statistics into `running` with
/// update `r <- momentum * r + (1 - momentum) * batch`.
pub fn batchnorm_train<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running: &mut RunningStats<T>,
    momentum: f64,
    eps: f64,
) -> Result<(Tensor<T>, BnCache<T>)> {
    let (batch, channels, len) =
        check_bn_args("batchnorm_train", input, gamma, beta, running.channels())?;
    let m = (batch * len) as f64;
    let x = input.data();
    let mut out = Tensor::zeros(input.shape());
    let mut xhat = Tensor::zeros(input.shape());
    let mut inv_std = vec![T::zero(); channels];

    for c in 0..channels {
        let mut sum = 0.0f64;
        for b in 0..batch {
            let row = &x[(b * channels + c) * len..(b * channels + c + 1) * len];
            for &v in row {
                sum += v.to_f64();
            }
        }
        let mean = sum / m;
        let mut sq = 0.0f64;
        for b in 0..batch {
            let row = &x[(b * channels + c) * len..(b * channels + c + 1) * len];
            for &v in row {
                let d = v.to_f64() - mean;
                sq += d * d;
            }
        }
        let var = sq / m;
        let istd = 1.0 / (var + eps).sqrt();
        inv_std[c] = T::from_f64(istd);

        let (g, be) = (gamma.data()[c], beta.data()[c]);
        let mean_t = T::from_f64(mean);
        let istd_t = T::from_f64(istd);
        for b in 0..batch {
            let base = (b * channels + c) * len;
            for i in base..base + len {
                let xh = (x[i] - mean_t) * istd_t;
                xhat.data_mut()[i] = xh;
                out.data_mut()[i] = g * xh + be;
            }
        }

        let mom = T::from_f64(momentum);
        let keep = T::from_f64(1.0 - momentum);
        running.mean.data_mut()[c] = mom * running.mean.data()[c] + keep * mean_t;
        running.var.data_mut()[c] = mom * running.var.data()[c] + keep * T::from_f64(var);
    }
    Ok((out, BnCache { xhat, inv_std }))
}

/// Inference-mode batchnorm: normalizes with the stored running estimates.
pub fn batchnorm_infer<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running: &RunningStats<T>,
    eps: f64,
) -> Result<Tensor<T>> {
    let (batch, channels, len) =
        check_bn_args("batchnorm_infer", input, gamma, beta, running.channels())?;
    let x = input.data();
    let mut out = Tensor::zeros(input.shape());
    for c in 0..channels {
        let mean = running.mean.data()[c];
        let istd = T::from_f64(1.0 / (running.var.data()[c].to_f64() + eps).sqrt());
        let (g, be) = (gamma.data()[c], beta.data()[c]);
        for b in 0..batch {
            let base = (b * channels + c) * len;
            for i in base..base + len {
                out.data_mut()[i] = g * (x[i] - mean) * istd + be;
            }
        }
    }
    Ok(out)
}

/// Mode-dispatching wrapper; the cache is present only in training mode.
#[allow(clippy::too_many_arguments)]
pub fn batchnorm<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    mode: BnMode,
    running: &mut RunningStats<T>,
    momentum: f64,
    eps: f64,
) -> Result<(Tensor<T>, Option<BnCache<T>>)> {
    match mode {
        BnMode::Train => {
            let (out, cache) = batchnorm_train(input, gamma, beta, running, momentum, eps)?;
            Ok((out, Some(cache)))
        }
        BnMode::Inference => Ok((batchnorm_infer(input, gamma, beta, running, eps)?, None)),
    }
}

/// Backward pass of training-mode batchnorm.
///
/// With `s1 = sum(dy)` and `s2 = sum(dy * xhat)` per channel over the
/// `m = B * L` batch values:
/// `dx = gamma * inv_std * (dy - s1/m - xhat * s2/m)`,
/// `dgamma = s2`, `dbeta = s1`.
pub fn batchnorm_backward<T: Scalar>(
    cache: &BnCache<T>,
    gamma: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<BnGrad<T>> {
    if grad_out.shape() != cache.xhat.shape() {
        return Err(NnError::ShapeMismatch {
            op: "batchnorm_backward",
            detail: format!(
                "grad_out {:?} does not match cached activations {:?}",
                grad_out.shape(),
                cache.xhat.shape()
            ),
        });
    }
    let (batch, channels, len) = batched_dims(&cache.xhat, "batchnorm_backward")?;
    let m = (batch * len) as f64;
    let g = grad_out.data();
    let xh = cache.xhat.data();

    let mut input_grad = Tensor::zeros(cache.xhat.shape());
    let mut gamma_grad = Tensor::zeros(&[channels]);
    let mut beta_grad = Tensor::zeros(&[channels]);

    for c in 0..channels {
        let mut s1 = 0.0f64;
        let mut s2 = 0.0f64;
        for b in 0..batch {
            let base = (b * channels + c) * len;
            for i in base..base + len {
                s1 += g[i].to_f64();
                s2 += g[i].to_f64() * xh[i].to_f64();
            }
        }
        gamma_grad.data_mut()[c] = T::from_f64(s2);
        beta_grad.data_mut()[c] = T::from_f64(s1);

        let k = gamma.data()[c] * cache.inv_std[c];
        let mean_dy = T::from_f64(s1 / m);
        let mean_dyxh = T::from_f64(s2 / m);
        for b in 0..batch {
            let base = (b * channels + c) * len;
            for i in base..base + len {
                input_grad.data_mut()[i] = k * (g[i] - mean_dy - xh[i] * mean_dyxh);
            }
        }
    }
    Ok(BnGrad {
        input_grad,
        gamma_grad,
        beta_grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::check_gradient;

    fn sample_input() -> Tensor<f64> {
        Tensor::from_vec(
            &[2, 3, 4],
            (0..24)
                .map(|i| ((i * 13 % 17) as f64 - 8.0) * 0.37 + if i % 3 == 0 { 2.0 } else { 0.0 })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn train_mode_standardizes_each_channel() {
        let x = sample_input();
        let gamma = Tensor::filled(&[3], 1.0f64);
        let beta = Tensor::zeros(&[3]);
        let mut stats = RunningStats::new(3);
        let (y, _) = batchnorm_train(&x, &gamma, &beta, &mut stats, 0.9, 1e-5).unwrap();
        for c in 0..3 {
            let mut vals = Vec::new();
            for b in 0..2 {
                for t in 0..4 {
                    vals.push(y.data()[(b * 3 + c) * 4 + t]);
                }
            }
            let mean: f64 = vals.iter().sum::<f64>() / 8.0;
            let var: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4, "var {var}");
        }
    }

    #[test]
    fn constant_channel_maps_to_beta() {
        let x = Tensor::filled(&[1, 2, 5], 3.0f64);
        let gamma = Tensor::filled(&[2], 2.0f64);
        let beta = Tensor::from_vec(&[2], vec![0.5, -1.0]).unwrap();
        let mut stats = RunningStats::new(2);
        let (y, _) = batchnorm_train(&x, &gamma, &beta, &mut stats, 0.9, 1e-5).unwrap();
        for t in 0..5 {
            assert!((y.data()[t] - 0.5).abs() < 1e-9);
            assert!((y.data()[5 + t] + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn running_stats_blend_with_momentum() {
        let x = Tensor::from_vec(&[1, 1, 4], vec![1.0f64, 3.0, 5.0, 7.0]).unwrap();
        let gamma = Tensor::filled(&[1], 1.0f64);
        let beta = Tensor::zeros(&[1]);
        let mut stats = RunningStats::new(1);
        batchnorm_train(&x, &gamma, &beta, &mut stats, 0.9, 1e-5).unwrap();
        // batch mean 4, biased variance 5; blended from (0, 1).
        assert!((stats.mean.data()[0] - 0.4).abs() < 1e-12);
        assert!((stats.var.data()[0] - (0.9 + 0.1 * 5.0)).abs() < 1e-12);
    }

    #[test]
    fn inference_uses_running_estimates() {
        let x = Tensor::from_vec(&[1, 1, 2], vec![2.0f64, 6.0]).unwrap();
        let gamma = Tensor::filled(&[1], 1.0f64);
        let beta = Tensor::zeros(&[1]);
        let stats = RunningStats {
            mean: Tensor::from_vec(&[1], vec![4.0f64]).unwrap(),
            var: Tensor::from_vec(&[1], vec![4.0f64]).unwrap(),
        };
        let y = batchnorm_infer(&x, &gamma, &beta, &stats, 0.0).unwrap();
        assert!((y.data()[0] + 1.0).abs() < 1e-12);
        assert!((y.data()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        // The probe loss must weight positions unevenly: a plain sum of
        // squares over a normalized channel is constant in the input (the
        // channel's mean and variance are pinned), leaving no signal for
        // the input-gradient check.
        let weight = |i: usize| 0.25 * (i % 7) as f64 - 0.5;
        let loss = |y: &Tensor<f64>| -> f64 {
            y.data()
                .iter()
                .enumerate()
                .map(|(i, &v)| weight(i) * v * v)
                .sum()
        };
        let loss_grad = |y: &Tensor<f64>| -> Tensor<f64> {
            let data = y
                .data()
                .iter()
                .enumerate()
                .map(|(i, &v)| 2.0 * weight(i) * v)
                .collect();
            Tensor::from_vec(y.shape(), data).unwrap()
        };

        let x = sample_input();
        let gamma = Tensor::from_vec(&[3], vec![1.2f64, 0.8, -0.5]).unwrap();
        let beta = Tensor::from_vec(&[3], vec![0.1f64, -0.2, 0.3]).unwrap();

        let fwd = |xv: &Tensor<f64>, gv: &Tensor<f64>, bv: &Tensor<f64>| {
            let mut stats = RunningStats::new(3);
            let (y, _) = batchnorm_train(xv, gv, bv, &mut stats, 0.9, 1e-5).unwrap();
            y
        };
        let mut stats = RunningStats::new(3);
        let (y, cache) = batchnorm_train(&x, &gamma, &beta, &mut stats, 0.9, 1e-5).unwrap();
        let grads = batchnorm_backward(&cache, &gamma, &loss_grad(&y)).unwrap();

        let rx = check_gradient(&x, &grads.input_grad, 1e-5, |p| loss(&fwd(p, &gamma, &beta)));
        assert!(rx.max_rel_err < 1e-6, "input grad: {rx:?}");
        let rg = check_gradient(&gamma, &grads.gamma_grad, 1e-5, |p| loss(&fwd(&x, p, &beta)));
        assert!(rg.max_rel_err < 1e-6, "gamma grad: {rg:?}");
        let rb = check_gradient(&beta, &grads.beta_grad, 1e-5, |p| loss(&fwd(&x, &gamma, p)));
        assert!(rb.max_rel_err < 1e-6, "beta grad: {rb:?}");
    }

    #[test]
    fn rejects_wrong_parameter_shapes() {
        let x = Tensor::<f32>::zeros(&[2, 3, 4]);
        let gamma = Tensor::<f32>::zeros(&[2]);
        let beta = Tensor::<f32>::zeros(&[3]);
        let mut stats = RunningStats::new(3);
        assert!(batchnorm_train(&x, &gamma, &beta, &mut stats, 0.9, 1e-5).is_err());
    }
}
