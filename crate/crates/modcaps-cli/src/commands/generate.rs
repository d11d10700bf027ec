//! `generate`: synthesize an I/Q dataset from a resolved envelope.

use clap::Args;
use modcaps::dataio::write_dataset;
use modcaps::modsig::generate;

use super::{data_write_err, sig_err, write_text, Common, CommonArgs};
use crate::profile::{resolve_profile, snapshot_profile, ProfileFlags};
use crate::{usage, Result};

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub profile: ProfileFlags,
}

pub fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let common = Common::resolve(args.common, "generate")?;
    let profile = resolve_profile(&args.profile, &common.cfg, "profile", "", "ds1")?;
    if profile.count == 0 {
        return Err(usage("count 0 generates nothing"));
    }
    let out = common.out_dir()?;

    let frames = generate(&profile, profile.count, common.seed).map_err(sig_err)?;
    write_dataset(&frames, out, &profile.name, common.seed).map_err(data_write_err)?;

    let mut per_class = vec![0usize; profile.schemes.len()];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for f in &frames {
        per_class[f.meta.label] += 1;
        lo = lo.min(f.meta.snr_db);
        hi = hi.max(f.meta.snr_db);
    }
    let mut summary = format!("frames = {}\n", frames.len());
    for (label, scheme) in profile.schemes.iter().enumerate() {
        summary.push_str(&format!("{} = {}\n", scheme.name(), per_class[label]));
    }
    summary.push_str(&format!("snr_realized_db = {lo:.3}:{hi:.3}\n"));
    write_text(&out.join("summary.txt"), &summary)?;
    print!("{summary}");

    let mut snap = common.snapshot("generate");
    snapshot_profile(&mut snap, &profile, "profile", "");
    snap.write(out)
}
