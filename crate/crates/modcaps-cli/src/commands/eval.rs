//! `eval`: score a checkpoint against a dataset; writes the confusion
//! matrix, the accuracy-versus-SNR curve, and a summary.

use std::path::PathBuf;

use clap::Args;
use modcaps::capsnet::ModelState;
use modcaps::dataio::split_by_labels;
use modcaps::eval::{accuracy_vs_snr, confusion};

use super::{
    class_count, eval_err, label_names, open_dataset, read_uniform_frames, snapshot_split,
    write_text, Common, CommonArgs, SplitFlags,
};
use crate::config::{resolve, resolve_required};
use crate::{usage, Result};

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Checkpoint file to score.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Dataset directory to score against.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// SNR bin width for the accuracy curve, in dB.
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Frames to score: all, train, validation, or test.
    #[arg(long)]
    pub subset: Option<String>,
    #[command(flatten)]
    pub split: SplitFlags,
    /// Normalize frames to unit power, as during training.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalize: Option<bool>,
}

pub fn cmd_eval(args: EvalArgs) -> Result<()> {
    let common = Common::resolve(args.common, "eval")?;
    let checkpoint: PathBuf = resolve_required(args.checkpoint, &common.cfg, "checkpoint")?;
    let dataset: PathBuf = resolve_required(args.dataset, &common.cfg, "dataset")?;
    let bin_width = resolve(args.bin_width, &common.cfg, "bin_width", 2.0)?;
    let subset = resolve(args.subset, &common.cfg, "subset", "all".to_string())?;
    let normalize = resolve(args.normalize, &common.cfg, "normalize", true)?;
    let spec = args.split.resolve(&common)?;

    let model = ModelState::load(&checkpoint)
        .map_err(|e| usage(format!("checkpoint {}: {e}", checkpoint.display())))?;
    let mut reader = open_dataset(&dataset)?;
    let (frames, frame_len) = read_uniform_frames(&mut reader)?;
    let classes = class_count(&reader.manifest)?;
    if classes != model.config.branch_count {
        return Err(usage(format!(
            "class-set mismatch: checkpoint scores {} classes, dataset labels imply {classes}",
            model.config.branch_count
        )));
    }
    if frame_len != model.config.input_len {
        return Err(usage(format!(
            "frame length mismatch: checkpoint wants {}, dataset has {frame_len}",
            model.config.input_len
        )));
    }

    let indices: Vec<usize> = match subset.as_str() {
        "all" => (0..frames.len()).collect(),
        "train" | "validation" | "test" => {
            let splits = split_by_labels(&reader.manifest.labels(), &spec)
                .map_err(|e| usage(e.to_string()))?;
            match subset.as_str() {
                "train" => splits.train,
                "validation" => splits.validation,
                _ => splits.test,
            }
        }
        other => {
            return Err(usage(format!(
                "subset {other:?}; pick all, train, validation, or test"
            )))
        }
    };
    if indices.is_empty() {
        return Err(usage(format!("subset {subset} selects no frames")));
    }

    let out = common.out_dir()?;
    let cm = confusion(&model, &frames, &indices, normalize).map_err(eval_err)?;
    let curve = accuracy_vs_snr(&model, &frames, &indices, bin_width, normalize).map_err(eval_err)?;

    let names = label_names(&reader.manifest, classes);
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    write_text(&out.join("confusion.csv"), &cm.to_csv_named(&name_refs))?;
    write_text(&out.join("snr_curve.csv"), &curve.to_csv())?;

    let mut summary = format!(
        "frames_scored = {}\naccuracy = {:.6}\n",
        cm.total(),
        cm.accuracy()
    );
    for (label, recall) in cm.per_class_recall().iter().enumerate() {
        summary.push_str(&format!("recall_{} = {recall:.6}\n", names[label]));
    }
    write_text(&out.join("summary.txt"), &summary)?;
    print!("{summary}");

    let mut snap = common.snapshot("eval");
    snap.push("checkpoint", checkpoint.display());
    snap.push("dataset", dataset.display());
    snap.push("bin_width", bin_width);
    snap.push("subset", &subset);
    snap.push("normalize", normalize);
    snapshot_split(&mut snap, &spec);
    snap.write(out)
}
