//! `mix`: merge frames from several datasets into one, then train and
//! score on the mixture.

use std::path::{Path, PathBuf};

use clap::Args;
use modcaps::dataio::{merge, read_manifest};
use modcaps::eval::{accuracy_vs_snr, confusion};

use super::{
    data_write_err, eval_err, fit_dataset, snapshot_split, snapshot_train, write_text, Common,
    CommonArgs, SplitFlags, TrainFlags,
};
use crate::config::{parse_path_list, parse_usize_list, resolve, resolve_required};
use crate::{usage, Result};

#[derive(Args, Debug)]
pub struct MixArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated source dataset directories.
    #[arg(long)]
    pub inputs: Option<String>,
    /// Frames to take from each source, comma-separated.
    #[arg(long)]
    pub take: Option<String>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub split: SplitFlags,
    /// Network initialization seed; defaults to the master seed.
    #[arg(long)]
    pub net_seed: Option<u64>,
    /// SNR bin width for the mixture curve, in dB.
    #[arg(long)]
    pub bin_width: Option<f64>,
}

pub fn cmd_mix(args: MixArgs) -> Result<()> {
    let common = Common::resolve(args.common, "mix")?;
    let inputs_raw = resolve_required(args.inputs, &common.cfg, "inputs")?;
    let take_raw = resolve_required(args.take, &common.cfg, "take")?;
    let inputs = parse_path_list(&inputs_raw);
    let take = parse_usize_list(&take_raw, "take")?;
    if inputs.is_empty() {
        return Err(usage("inputs is empty"));
    }
    if inputs.len() != take.len() {
        return Err(usage(format!(
            "{} inputs but {} take counts",
            inputs.len(),
            take.len()
        )));
    }
    let mut tc = args.train.resolve(&common)?;
    let spec = args.split.resolve(&common)?;
    let net_seed = resolve(args.net_seed, &common.cfg, "net_seed", common.seed)?;
    let bin_width = resolve(args.bin_width, &common.cfg, "bin_width", 2.0)?;

    for dir in &inputs {
        read_manifest(dir).map_err(|e| usage(format!("dataset {}: {e}", dir.display())))?;
    }

    let out = common.out_dir()?;
    let mut snap = common.snapshot("mix");
    let joined: Vec<String> = inputs.iter().map(|p| p.display().to_string()).collect();
    snap.push("inputs", joined.join(","));
    let takes: Vec<String> = take.iter().map(ToString::to_string).collect();
    snap.push("take", takes.join(","));
    snapshot_train(&mut snap, &tc);
    snapshot_split(&mut snap, &spec);
    snap.push("net_seed", net_seed);
    snap.push("bin_width", bin_width);
    snap.write(out)?;

    let dest = out.join("mixture");
    let sources: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let manifest = merge(&sources, &take, common.seed, &dest).map_err(data_write_err)?;
    println!("mixture: {} frames from {} sources", manifest.len(), inputs.len());

    let outcome = fit_dataset(&dest, &spec, &mut tc, net_seed, out)?;
    let cm = confusion(
        &outcome.model,
        &outcome.frames,
        &outcome.splits.test,
        tc.normalize_input,
    )
    .map_err(eval_err)?;
    let curve = accuracy_vs_snr(
        &outcome.model,
        &outcome.frames,
        &outcome.splits.test,
        bin_width,
        tc.normalize_input,
    )
    .map_err(eval_err)?;

    let name_refs: Vec<&str> = outcome.class_names.iter().map(String::as_str).collect();
    write_text(&out.join("confusion.csv"), &cm.to_csv_named(&name_refs))?;
    write_text(&out.join("snr_curve.csv"), &curve.to_csv())?;

    let best = outcome
        .report
        .best_accuracy()
        .map_or("none".to_string(), |a| format!("{a:.6}"));
    let summary = format!(
        "mixture_frames = {}\nbest_val_accuracy = {best}\ntest_frames = {}\ntest_accuracy = {:.6}\n",
        manifest.len(),
        cm.total(),
        cm.accuracy(),
    );
    write_text(&out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}
