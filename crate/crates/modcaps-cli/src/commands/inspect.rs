//! `inspect`: describe a dataset directory or a checkpoint file.

use std::path::{Path, PathBuf};

use clap::Args;
use modcaps::capsnet::ModelState;
use modcaps::dataio::{read_manifest, BLOB_FILE};

use super::label_names;
use crate::{usage, Result};

#[derive(Args, Debug)]
pub struct InspectArgs {
    /// Dataset directory or checkpoint file.
    pub path: PathBuf,
}

pub fn cmd_inspect(args: InspectArgs) -> Result<()> {
    let path = &args.path;
    if path.is_dir() {
        inspect_dataset(path)
    } else if path.is_file() {
        inspect_checkpoint(path)
    } else {
        Err(usage(format!("{} does not exist", path.display())))
    }
}

fn inspect_dataset(path: &Path) -> Result<()> {
    let manifest =
        read_manifest(path).map_err(|e| usage(format!("dataset {}: {e}", path.display())))?;
    println!("dataset {}", path.display());
    println!("profile = {}", manifest.profile);
    println!("master_seed = {}", manifest.master_seed);
    println!("frames = {}", manifest.len());
    if manifest.is_empty() {
        return Ok(());
    }

    let classes = manifest.labels().iter().max().map_or(0, |m| m + 1);
    let names = label_names(&manifest, classes);
    let mut per_class = vec![0usize; classes];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut lens: Vec<usize> = Vec::new();
    for rec in &manifest.records {
        per_class[rec.meta.label] += 1;
        lo = lo.min(rec.meta.snr_db);
        hi = hi.max(rec.meta.snr_db);
        if !lens.contains(&rec.samples) {
            lens.push(rec.samples);
        }
    }
    lens.sort_unstable();
    let lens: Vec<String> = lens.iter().map(ToString::to_string).collect();
    println!("frame_len = {}", lens.join(","));
    println!("snr_db = {lo:.3}:{hi:.3}");
    for (label, name) in names.iter().enumerate() {
        println!("label {label} ({name}) = {}", per_class[label]);
    }
    match std::fs::metadata(path.join(BLOB_FILE)) {
        Ok(meta) => println!("blob_bytes = {}", meta.len()),
        Err(e) => println!("blob unreadable: {e}"),
    }
    Ok(())
}

fn inspect_checkpoint(path: &Path) -> Result<()> {
    let model = ModelState::load(path)
        .map_err(|e| usage(format!("checkpoint {}: {e}", path.display())))?;
    let trace = model.shape_trace();
    println!("checkpoint {}", path.display());
    println!("branches = {}", model.config.branch_count);
    println!(
        "input = {}x{}",
        trace.input.0, trace.input.1
    );
    println!("feature_out = {}x{}", trace.feature_out.0, trace.feature_out.1);
    println!(
        "branch_out = {}x{} -> {}x{} -> pool {}x{}",
        trace.branch_conv1_out.0,
        trace.branch_conv1_out.1,
        trace.branch_conv2_out.0,
        trace.branch_conv2_out.1,
        trace.pool_out.0,
        trace.pool_out.1,
    );
    println!("capsule = {} -> {}", trace.fc_input, trace.capsule_width);
    println!("trained_on = {}", model.provenance.dataset_tag);
    println!("epoch = {}", model.provenance.epoch);
    println!("val_accuracy = {:.6}", model.provenance.val_accuracy);
    Ok(())
}
