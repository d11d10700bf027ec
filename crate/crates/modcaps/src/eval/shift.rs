//! Dataset-shift experiment: train under one generation envelope, test
//! under another, and report the accuracy gap.

use std::path::Path;

use super::confusion::{confusion, ConfusionMatrix};
use super::{EvalError, Result};
use crate::capsnet::NetworkConfig;
use crate::dataio::{split_by_labels, SplitSpec};
use crate::modsig::{frame_seed, generate, validate_disjoint_cfo, DatasetProfile};
use crate::trainer::{train, TrainConfig, TrainReport};

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftReport {
    pub seed: u64,
    /// Confusion on the held-out test split of the training envelope.
    pub matched: ConfusionMatrix,
    /// Confusion on every frame generated under the shifted envelope.
    pub shifted: ConfusionMatrix,
    pub matched_accuracy: f64,
    pub shifted_accuracy: f64,
    /// `matched_accuracy - shifted_accuracy`.
    pub gap: f64,
    pub train_report: TrainReport,
    pub net: NetworkConfig,
    /// Class names in label order, from the training profile.
    pub scheme_names: Vec<String>,
}

impl ShiftReport {
    pub fn summary_lines(&self) -> String {
        format!(
            "seed {}\nmatched_accuracy {:.6}\nshifted_accuracy {:.6}\ngap {:.6}\nbest_epoch {}\n",
            self.seed,
            self.matched_accuracy,
            self.shifted_accuracy,
            self.gap,
            self.train_report.best_epoch.map_or(-1, |e| e as i64),
        )
    }

    /// Writes the two confusion CSVs and a summary, named by tag and seed.
    pub fn write_files(&self, dir: &Path, tag: &str) -> Result<()> {
        let names: Vec<&str> = self.scheme_names.iter().map(String::as_str).collect();
        let base = format!("{tag}-seed{}", self.seed);
        super::write_text(
            &dir.join(format!("{base}-matched.csv")),
            &self.matched.to_csv_named(&names),
        )?;
        super::write_text(
            &dir.join(format!("{base}-shifted.csv")),
            &self.shifted.to_csv_named(&names),
        )?;
        super::write_text(&dir.join(format!("{base}-summary.txt")), &self.summary_lines())
    }
}

/// Trains on `profile_a` and evaluates both in-distribution (its test
/// split) and on `profile_b` in full.
///
/// `scale` multiplies both profiles' frame counts, so the experiment runs
/// at desk size without editing the envelopes. All randomness (generation,
/// splits, initialization, batch order) derives from `seed`; `tcfg`'s own
/// seed is ignored. A custom geometry can be passed as `net`; by default
/// one is derived from the frame length and seeded from `seed`. Profiles
/// must give the shifted dataset a carrier-offset interval disjoint from
/// the training one, unless `allow_overlap` is set.
pub fn shift_experiment(
    profile_a: &DatasetProfile,
    profile_b: &DatasetProfile,
    scale: f64,
    seed: u64,
    allow_overlap: bool,
    tcfg: &TrainConfig,
    net: Option<&NetworkConfig>,
) -> Result<ShiftReport> {
    if !(scale.is_finite() && scale > 0.0 && scale <= 1.0) {
        return Err(EvalError::Invalid(format!("scale {scale} outside (0, 1]")));
    }
    if profile_a.schemes != profile_b.schemes {
        return Err(EvalError::Invalid(
            "profiles disagree on the scheme list; labels would not line up".into(),
        ));
    }
    if profile_a.frame_len != profile_b.frame_len {
        return Err(EvalError::Invalid(
            "profiles disagree on frame length; one model cannot serve both".into(),
        ));
    }
    if !allow_overlap {
        validate_disjoint_cfo(profile_a, profile_b)?;
    }

    let classes = profile_a.schemes.len();
    let scaled = |count: usize| (count as f64 * scale).round() as usize;
    let (n_a, n_b) = (scaled(profile_a.count), scaled(profile_b.count));
    if n_a < classes * 6 || n_b < classes {
        return Err(EvalError::Invalid(format!(
            "scale {scale} leaves too few frames ({n_a} train-side, {n_b} shifted) for {classes} classes"
        )));
    }

    let frames_a = generate(profile_a, n_a, frame_seed(seed, 0))?;
    let frames_b = generate(profile_b, n_b, frame_seed(seed, 1))?;

    let labels_a: Vec<usize> = frames_a.iter().map(|f| f.meta.label).collect();
    let splits = split_by_labels(
        &labels_a,
        &SplitSpec {
            seed: frame_seed(seed, 2),
            ..SplitSpec::default()
        },
    )?;

    let net = match net {
        Some(n) => {
            if n.input_len != profile_a.frame_len || n.branch_count != classes {
                return Err(EvalError::Invalid(format!(
                    "supplied net wants input {} x {} branches, profiles give {} x {}",
                    n.input_len, n.branch_count, profile_a.frame_len, classes
                )));
            }
            n.clone()
        }
        None => NetworkConfig::for_frame_len(profile_a.frame_len, classes, frame_seed(seed, 3))?,
    };
    let cfg = TrainConfig {
        seed: frame_seed(seed, 4),
        dataset_tag: profile_a.name.clone(),
        ..tcfg.clone()
    };
    let (model, train_report) = train(&net, &cfg, &frames_a, &splits.train, &splits.validation)?;

    let matched = confusion(&model, &frames_a, &splits.test, cfg.normalize_input)?;
    let all_b: Vec<usize> = (0..frames_b.len()).collect();
    let shifted = confusion(&model, &frames_b, &all_b, cfg.normalize_input)?;

    let matched_accuracy = matched.accuracy();
    let shifted_accuracy = shifted.accuracy();
    Ok(ShiftReport {
        seed,
        gap: matched_accuracy - shifted_accuracy,
        matched,
        shifted,
        matched_accuracy,
        shifted_accuracy,
        train_report,
        net,
        scheme_names: profile_a.schemes.iter().map(|s| s.name().to_string()).collect(),
    })
}
