//! Mini-batch SGDM training with validation-based model selection.
//!
//! One call to [`train`] owns its model exclusively: it builds the network
//! from the geometry config, iterates shuffled mini-batches, evaluates the
//! validation split after every epoch, and returns the parameters from the
//! best validation epoch together with a [`TrainReport`]. Every random
//! choice derives from `TrainConfig::seed`, so a repeated run is
//! bit-identical, report included.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::capsnet::{ModelError, ModelState, NetworkConfig, Provenance};
use crate::modsig::{frame_seed, ComplexSignal};
use crate::nn::{sgdm_step, NnError, OptimizerState, Tensor};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("bad training data: {0}")]
    Data(String),
    #[error("class {class} has no frames in the training split")]
    MissingClass { class: usize },
    #[error("training diverged at epoch {epoch}, batch {batch} (lr {learning_rate}): {detail}")]
    Diverged {
        epoch: usize,
        batch: usize,
        learning_rate: f64,
        detail: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

/// Optimizer and loop settings. Every field is overridable; the defaults
/// are conventional SGDM choices sized for the reference protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    /// Learning rate is multiplied by `lr_decay_factor` every
    /// `lr_decay_period` epochs.
    pub lr_decay_factor: f64,
    pub lr_decay_period: usize,
    /// Epochs without a new best validation accuracy before stopping.
    pub early_stop_patience: usize,
    pub seed: u64,
    /// Reproducibility contract flag. The compute path is order-fixed
    /// either way; consumers use this to keep wall-clock and thread-count
    /// noise out of artifacts they intend to diff.
    pub deterministic: bool,
    /// Normalize each frame to unit mean power before it enters the net.
    pub normalize_input: bool,
    /// Stamped into the returned model's provenance.
    pub dataset_tag: String,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            batch_size: 250,
            learning_rate: 0.01,
            momentum: 0.9,
            max_epochs: 30,
            lr_decay_factor: 0.1,
            lr_decay_period: 10,
            early_stop_patience: 5,
            seed: 0,
            deterministic: true,
            normalize_input: true,
            dataset_tag: String::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1".into()));
        }
        if self.early_stop_patience == 0 {
            return Err(TrainError::Config("patience must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TrainError::Config(format!(
                "learning_rate {} must be a positive real",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(TrainError::Config(format!(
                "momentum {} outside [0, 1)",
                self.momentum
            )));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(TrainError::Config(format!(
                "lr_decay_factor {} outside (0, 1]",
                self.lr_decay_factor
            )));
        }
        if self.lr_decay_period == 0 {
            return Err(TrainError::Config("lr_decay_period must be at least 1".into()));
        }
        Ok(())
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay_factor.powi((epoch / self.lr_decay_period) as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's batches, frame-weighted.
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub learning_rate: f64,
    /// Optimizer steps taken this epoch.
    pub steps: usize,
}

/// Per-epoch trace of a run. Contains no wall-clock fields so that
/// deterministic runs compare equal; timing belongs to the caller's logs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were returned; first epoch attaining the
    /// maximum validation accuracy. `None` when no epoch ran.
    pub best_epoch: Option<usize>,
}

impl TrainReport {
    pub fn best_accuracy(&self) -> Option<f64> {
        self.best_epoch.map(|e| self.epochs[e].val_accuracy)
    }

    /// Line-structured text log, one epoch per line.
    pub fn log_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&format!(
                "epoch {} loss {:.6} val_acc {:.6} lr {}\n",
                e.epoch, e.train_loss, e.val_accuracy, e.learning_rate
            ));
        }
        if let Some(best) = self.best_epoch {
            out.push_str(&format!("best_epoch {best}\n"));
        }
        out
    }
}

/// Accuracy bookkeeping for one index set.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitEval {
    pub correct: usize,
    pub total: usize,
    pub per_class_correct: Vec<usize>,
    pub per_class_total: Vec<usize>,
    /// Predicted label per evaluated frame, aligned with the index set.
    pub predictions: Vec<usize>,
}

impl SplitEval {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }

    /// Per-class accuracy; NaN for classes absent from the split.
    pub fn per_class_accuracy(&self) -> Vec<f64> {
        self.per_class_correct
            .iter()
            .zip(&self.per_class_total)
            .map(|(&c, &t)| c as f64 / t as f64)
            .collect()
    }
}

/// Frames evaluated per inference call. Inference batch-norm uses running
/// statistics, so chunking affects speed only.
const EVAL_BATCH: usize = 64;

/// Runs the model over `indices` and tallies accuracy against the labels.
pub fn evaluate_split(
    model: &ModelState,
    frames: &[ComplexSignal],
    indices: &[usize],
    normalize: bool,
) -> Result<SplitEval> {
    if indices.is_empty() {
        return Err(TrainError::Data("evaluation index set is empty".into()));
    }
    let classes = model.config.branch_count;
    check_frames(frames, indices, &model.config, classes)?;

    let mut eval = SplitEval {
        correct: 0,
        total: indices.len(),
        per_class_correct: vec![0; classes],
        per_class_total: vec![0; classes],
        predictions: Vec::with_capacity(indices.len()),
    };
    for chunk in indices.chunks(EVAL_BATCH) {
        let x = batch_tensor(frames, chunk, &model.config, normalize)?;
        let probs = model.forward_infer(&x)?;
        for (row, &frame_idx) in chunk.iter().enumerate() {
            let scores = &probs.data()[row * classes..(row + 1) * classes];
            let pred = crate::capsnet::argmax(scores);
            let label = frames[frame_idx].meta.label;
            eval.per_class_total[label] += 1;
            if pred == label {
                eval.correct += 1;
                eval.per_class_correct[label] += 1;
            }
            eval.predictions.push(pred);
        }
    }
    Ok(eval)
}

/// Trains a fresh model and returns the best-validation snapshot.
///
/// Epoch flow: reshuffle the train split (seeded per epoch), step SGDM once
/// per mini-batch keeping any short final batch, then score the validation
/// split. The snapshot with the highest validation accuracy wins, first
/// epoch on ties; training stops early once `early_stop_patience` epochs
/// pass without improvement.
pub fn train(
    net: &NetworkConfig,
    cfg: &TrainConfig,
    frames: &[ComplexSignal],
    train_idx: &[usize],
    val_idx: &[usize],
) -> Result<(ModelState, TrainReport)> {
    cfg.validate()?;
    let classes = net.branch_count;
    check_frames(frames, train_idx, net, classes)?;
    check_frames(frames, val_idx, net, classes)?;

    let mut seen = vec![false; classes];
    for &i in train_idx {
        seen[frames[i].meta.label] = true;
    }
    if let Some(class) = seen.iter().position(|s| !s) {
        return Err(TrainError::MissingClass { class });
    }

    let mut model = ModelState::build(net)?;
    let mut report = TrainReport::default();
    if cfg.max_epochs == 0 {
        return Ok((model, report));
    }
    if val_idx.is_empty() {
        return Err(TrainError::Data(
            "validation split is empty; model selection needs one".into(),
        ));
    }

    let mut opt = OptimizerState::new(&model.params, cfg.learning_rate, cfg.momentum);
    let mut best: Option<(usize, f64, ModelState)> = None;

    for epoch in 0..cfg.max_epochs {
        let lr = cfg.lr_at(epoch);
        opt.learning_rate = lr;

        let mut order = train_idx.to_vec();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(frame_seed(
            cfg.seed,
            1 + epoch as u64,
        )));

        let mut loss_sum = 0.0;
        let mut steps = 0;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let x = batch_tensor(frames, chunk, net, cfg.normalize_input)?;
            let labels: Vec<usize> = chunk.iter().map(|&i| frames[i].meta.label).collect();
            let (_, cache) = model.forward_train(&x)?;
            let (grads, loss) = model.backward(&cache, &labels)?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    batch,
                    learning_rate: lr,
                    detail: format!("loss {loss}"),
                });
            }
            match sgdm_step(&mut model.params, &grads, &mut opt) {
                Ok(()) => {}
                Err(NnError::NonFinite { name }) => {
                    return Err(TrainError::Diverged {
                        epoch,
                        batch,
                        learning_rate: lr,
                        detail: format!("non-finite gradient in {name}"),
                    })
                }
                Err(e) => return Err(e.into()),
            }
            loss_sum += loss * chunk.len() as f64;
            steps += 1;
        }

        let val = evaluate_split(&model, frames, val_idx, cfg.normalize_input)?;
        let val_accuracy = val.accuracy();
        report.epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / train_idx.len() as f64,
            val_accuracy,
            learning_rate: lr,
            steps,
        });

        let improved = best
            .as_ref()
            .map_or(true, |(_, acc, _)| val_accuracy > *acc);
        if improved {
            let mut snap = model.clone();
            snap.provenance = Provenance {
                dataset_tag: cfg.dataset_tag.clone(),
                epoch: epoch as u32,
                val_accuracy,
            };
            best = Some((epoch, val_accuracy, snap));
        } else if epoch - best.as_ref().unwrap().0 >= cfg.early_stop_patience {
            break;
        }
    }

    let (best_epoch, _, best_model) = best.unwrap();
    report.best_epoch = Some(best_epoch);
    Ok((best_model, report))
}

fn check_frames(
    frames: &[ComplexSignal],
    indices: &[usize],
    net: &NetworkConfig,
    classes: usize,
) -> Result<()> {
    for &i in indices {
        let f = frames.get(i).ok_or_else(|| {
            TrainError::Data(format!("index {i} outside dataset of {}", frames.len()))
        })?;
        if f.samples.len() != net.input_len {
            return Err(TrainError::Data(format!(
                "frame {i} has {} samples, model expects {}",
                f.samples.len(),
                net.input_len
            )));
        }
        if f.meta.label >= classes {
            return Err(TrainError::Data(format!(
                "frame {i} labeled {} but the model has {classes} classes",
                f.meta.label
            )));
        }
    }
    Ok(())
}

/// Stacks frames into a `[batch, 2, len]` tensor of I/Q rows.
fn batch_tensor(
    frames: &[ComplexSignal],
    indices: &[usize],
    net: &NetworkConfig,
    normalize: bool,
) -> Result<Tensor<f32>> {
    let len = net.input_len;
    let mut data = Vec::with_capacity(indices.len() * 2 * len);
    for &i in indices {
        data.extend_from_slice(&frames[i].iq_channels(normalize));
    }
    Tensor::from_vec(&[indices.len(), 2, len], data).map_err(TrainError::Nn)
}
