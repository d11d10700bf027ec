//! `augment`: redraw each frame's noise floor down to a target SNR range,
//! skipping frames already at or below it.

use std::path::PathBuf;

use clap::Args;
use modcaps::dataio::write_dataset;
use modcaps::modsig::{add_noise_to_snr, frame_seed, SigError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{data_write_err, open_dataset, sig_err, write_text, Common, CommonArgs};
use crate::config::{parse_f64_pair, resolve_required};
use crate::{usage, Result};

#[derive(Args, Debug)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Source dataset directory.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Target SNR range LO:HI in dB; each frame draws uniformly.
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<String>,
}

pub fn cmd_augment(args: AugmentArgs) -> Result<()> {
    let common = Common::resolve(args.common, "augment")?;
    let input: PathBuf = resolve_required(args.input, &common.cfg, "input")?;
    let raw = resolve_required(args.target, &common.cfg, "target")?;
    let (lo, hi) = parse_f64_pair(&raw, "target")?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(usage(format!("target range {lo}:{hi} is not an interval")));
    }

    let mut reader = open_dataset(&input)?;
    let mut frames = reader
        .read_all()
        .map_err(|e| usage(format!("dataset {}: {e}", input.display())))?;
    let source_profile = reader.manifest.profile.clone();
    let out = common.out_dir()?;

    let mut skipped = 0usize;
    for (i, frame) in frames.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(common.seed, i as u64));
        let target = lo + (hi - lo) * rng.random::<f64>();
        match add_noise_to_snr(frame, target, &mut rng) {
            Ok(()) => frame.normalize_power(),
            Err(SigError::SnrIncrease { .. }) => skipped += 1,
            Err(e) => return Err(sig_err(e)),
        }
    }
    let tag = format!("augment({source_profile})");
    write_dataset(&frames, out, &tag, common.seed).map_err(data_write_err)?;

    let summary = format!(
        "frames = {}\naugmented = {}\nskipped_infeasible = {}\ntarget_db = {lo}:{hi}\n",
        frames.len(),
        frames.len() - skipped,
        skipped,
    );
    write_text(&out.join("summary.txt"), &summary)?;
    print!("{summary}");

    let mut snap = common.snapshot("augment");
    snap.push("input", input.display());
    snap.push("target", format!("{lo}:{hi}"));
    snap.write(out)
}
