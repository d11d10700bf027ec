//! The capsule-style classifier: a shared convolutional feature stage
//! fanned out into one independent branch per modulation class, each
//! ending in a single logit; class probabilities come from a softmax over
//! the concatenated logits.
//!
//! The geometry is configured by [`NetworkConfig`] and checked up front by
//! [`NetworkConfig::shape_trace`]; building a model with an infeasible
//! geometry fails with the offending stage named.

mod checkpoint;
mod model;

pub use model::{argmax, BranchCache, ForwardCache, ModelState, Provenance};
#[cfg(test)]
pub(crate) use model::{small_config, tiny_config};

use crate::nn::{conv1d_out_len, NnError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from model construction, execution and persistence.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid network config at {stage}: {detail}")]
    InvalidConfig { stage: &'static str, detail: String },
    #[error("input mismatch: {0}")]
    InputMismatch(String),
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// One convolution stage: kernel length, stride, output channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel: usize,
    pub stride: usize,
    pub channels: usize,
}

/// Average-pooling stage geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub window: usize,
    pub stride: usize,
}

/// Complete network geometry plus the parameter-initialization seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// I and Q of the complex baseband signal.
    pub input_channels: usize,
    /// Samples per frame.
    pub input_len: usize,
    /// One branch (and one logit) per class.
    pub branch_count: usize,
    /// Shared feature stage.
    pub feature: ConvSpec,
    /// First convolution inside each branch.
    pub branch_conv1: ConvSpec,
    /// Second convolution inside each branch.
    pub branch_conv2: ConvSpec,
    /// Average pooling inside each branch.
    pub pool: PoolSpec,
    /// Width of the per-branch fully connected capsule layer.
    pub capsule_width: usize,
    /// Seed for parameter initialization.
    pub seed: u64,
}

impl Default for NetworkConfig {
    /// Reference geometry for 32768-sample frames and 8 classes.
    fn default() -> NetworkConfig {
        NetworkConfig {
            input_channels: 2,
            input_len: 32768,
            branch_count: 8,
            feature: ConvSpec {
                kernel: 22,
                stride: 9,
                channels: 64,
            },
            branch_conv1: ConvSpec {
                kernel: 23,
                stride: 7,
                channels: 48,
            },
            branch_conv2: ConvSpec {
                kernel: 22,
                stride: 8,
                channels: 64,
            },
            pool: PoolSpec { window: 8, stride: 1 },
            capsule_width: 32,
            seed: 0,
        }
    }
}

/// Per-stage activation shapes implied by a [`NetworkConfig`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeTrace {
    pub input: (usize, usize),
    pub feature_out: (usize, usize),
    pub branch_conv1_out: (usize, usize),
    pub branch_conv2_out: (usize, usize),
    pub pool_out: (usize, usize),
    pub fc_input: usize,
    pub capsule_width: usize,
    pub logits: usize,
}

impl NetworkConfig {
    /// Geometry for a given frame length: the reference net at full scale,
    /// the stride-relaxed variant for anything shorter.
    pub fn for_frame_len(
        input_len: usize,
        branch_count: usize,
        seed: u64,
    ) -> Result<NetworkConfig> {
        if input_len == NetworkConfig::default().input_len {
            Ok(NetworkConfig {
                branch_count,
                seed,
                ..NetworkConfig::default()
            })
        } else {
            NetworkConfig::scaled_for(input_len, branch_count, seed)
        }
    }

    /// Short-frame variant: keeps the reference kernel geometry and channel
    /// widths but picks milder strides so the trace stays feasible on
    /// frames much shorter than 32768 samples.
    pub fn scaled_for(input_len: usize, branch_count: usize, seed: u64) -> Result<NetworkConfig> {
        let mut cfg = NetworkConfig {
            input_len,
            branch_count,
            seed,
            ..NetworkConfig::default()
        };
        let l1 = conv1d_out_len(input_len, cfg.feature.kernel, cfg.feature.stride).ok_or(
            ModelError::InvalidConfig {
                stage: "feature",
                detail: format!("input of {input_len} samples is too short"),
            },
        )?;
        if l1 <= cfg.branch_conv1.kernel {
            return Err(ModelError::InvalidConfig {
                stage: "branch_conv1",
                detail: format!("feature stage output of {l1} is too short"),
            });
        }
        cfg.branch_conv1.stride = ((l1 - cfg.branch_conv1.kernel) / 45).max(1);
        let l2 = conv1d_out_len(l1, cfg.branch_conv1.kernel, cfg.branch_conv1.stride).unwrap();
        if l2 < cfg.branch_conv2.kernel {
            return Err(ModelError::InvalidConfig {
                stage: "branch_conv2",
                detail: format!("branch conv1 output of {l2} is too short"),
            });
        }
        cfg.branch_conv2.stride = ((l2 - cfg.branch_conv2.kernel) / 10).max(1);
        cfg.shape_trace()?;
        Ok(cfg)
    }

    /// Walks the geometry end to end, returning every intermediate shape or
    /// the first stage that cannot be realised.
    pub fn shape_trace(&self) -> Result<ShapeTrace> {
        let fail = |stage: &'static str, len: usize, spec: &ConvSpec| ModelError::InvalidConfig {
            stage,
            detail: format!(
                "kernel {} with stride {} does not fit a length-{len} input",
                spec.kernel, spec.stride
            ),
        };
        if self.input_channels == 0 || self.branch_count == 0 || self.capsule_width == 0 {
            return Err(ModelError::InvalidConfig {
                stage: "config",
                detail: "channels, branches and capsule width must be nonzero".into(),
            });
        }
        for (stage, spec) in [
            ("feature", &self.feature),
            ("branch_conv1", &self.branch_conv1),
            ("branch_conv2", &self.branch_conv2),
        ] {
            if spec.kernel == 0 || spec.stride == 0 || spec.channels == 0 {
                return Err(ModelError::InvalidConfig {
                    stage,
                    detail: "kernel, stride and channels must be nonzero".into(),
                });
            }
        }
        let l1 = conv1d_out_len(self.input_len, self.feature.kernel, self.feature.stride)
            .ok_or_else(|| fail("feature", self.input_len, &self.feature))?;
        let l2 = conv1d_out_len(l1, self.branch_conv1.kernel, self.branch_conv1.stride)
            .ok_or_else(|| fail("branch_conv1", l1, &self.branch_conv1))?;
        let l3 = conv1d_out_len(l2, self.branch_conv2.kernel, self.branch_conv2.stride)
            .ok_or_else(|| fail("branch_conv2", l2, &self.branch_conv2))?;
        if self.pool.window == 0 || self.pool.stride == 0 {
            return Err(ModelError::InvalidConfig {
                stage: "pool",
                detail: "window and stride must be nonzero".into(),
            });
        }
        let l4 = conv1d_out_len(l3, self.pool.window, self.pool.stride).ok_or(
            ModelError::InvalidConfig {
                stage: "pool",
                detail: format!(
                    "window {} does not fit the length-{l3} branch output",
                    self.pool.window
                ),
            },
        )?;
        Ok(ShapeTrace {
            input: (self.input_channels, self.input_len),
            feature_out: (self.feature.channels, l1),
            branch_conv1_out: (self.branch_conv1.channels, l2),
            branch_conv2_out: (self.branch_conv2.channels, l3),
            pool_out: (self.branch_conv2.channels, l4),
            fc_input: self.branch_conv2.channels * l4,
            capsule_width: self.capsule_width,
            logits: self.branch_count,
        })
    }
}
