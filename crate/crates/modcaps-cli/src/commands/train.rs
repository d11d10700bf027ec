//! `train`: fit the classifier to a dataset and keep the checkpoint that
//! scored best on the validation split.

use std::path::PathBuf;

use clap::Args;

use super::{
    fit_dataset, snapshot_split, snapshot_train, Common, CommonArgs, SplitFlags, TrainFlags,
};
use crate::config::{resolve, resolve_required};
use crate::Result;

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset directory to train on.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub split: SplitFlags,
    /// Network initialization seed; defaults to the master seed.
    #[arg(long)]
    pub net_seed: Option<u64>,
}

pub fn cmd_train(args: TrainArgs) -> Result<()> {
    let common = Common::resolve(args.common, "train")?;
    let dataset: PathBuf = resolve_required(args.dataset, &common.cfg, "dataset")?;
    let mut tc = args.train.resolve(&common)?;
    let spec = args.split.resolve(&common)?;
    let net_seed = resolve(args.net_seed, &common.cfg, "net_seed", common.seed)?;
    let out = common.out_dir()?;

    let mut snap = common.snapshot("train");
    snap.push("dataset", dataset.display());
    snapshot_train(&mut snap, &tc);
    snapshot_split(&mut snap, &spec);
    snap.push("net_seed", net_seed);
    snap.write(out)?;

    let outcome = fit_dataset(&dataset, &spec, &mut tc, net_seed, out)?;
    match (outcome.report.best_epoch, outcome.report.best_accuracy()) {
        (Some(epoch), Some(acc)) => {
            println!("best epoch {epoch}, validation accuracy {acc:.6}");
        }
        _ => println!("no epoch finished"),
    }
    println!("checkpoint: {}", out.join("checkpoint.mcap").display());
    Ok(())
}
