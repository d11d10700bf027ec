//! `shift`: train under one envelope, test under a shifted one, report
//! the accuracy gap, optionally repeated across seeds.

use clap::Args;
use modcaps::eval::shift_experiment;
use modcaps::modsig::validate_disjoint_cfo;

use super::{eval_err, sig_err, snapshot_train, write_text, Common, CommonArgs, TrainFlags};
use crate::config::resolve;
use crate::profile::{resolve_profile, snapshot_profile, ProfileFlags};
use crate::{usage, Result};

#[derive(Args, Debug)]
pub struct ShiftArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Training-side envelope: ds1 or ds2.
    #[arg(long)]
    pub profile_a: Option<String>,
    /// Shifted-side envelope: ds1 or ds2.
    #[arg(long)]
    pub profile_b: Option<String>,
    /// Multiplier on both envelopes' frame counts.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Independent repetitions, seeded seed, seed+1, ...
    #[arg(long)]
    pub runs: Option<usize>,
    /// Permit overlapping carrier-offset envelopes.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub allow_overlap: Option<bool>,
    /// Scheme list applied to both envelopes.
    #[arg(long)]
    pub schemes: Option<String>,
    /// Samples-per-symbol range applied to both envelopes.
    #[arg(long)]
    pub sps: Option<String>,
    /// Rolloff range applied to both envelopes.
    #[arg(long)]
    pub rolloff: Option<String>,
    /// SNR range applied to both envelopes.
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<String>,
    /// Frame length applied to both envelopes.
    #[arg(long)]
    pub frame_len: Option<usize>,
    /// Frame count applied to both envelopes, before scaling.
    #[arg(long)]
    pub count: Option<usize>,
    #[command(flatten)]
    pub train: TrainFlags,
}

pub fn cmd_shift(args: ShiftArgs) -> Result<()> {
    let common = Common::resolve(args.common, "shift")?;
    let scale = resolve(args.scale, &common.cfg, "scale", 1.0)?;
    let runs = resolve(args.runs, &common.cfg, "runs", 1usize)?;
    if runs == 0 {
        return Err(usage("runs must be at least 1"));
    }
    let allow_overlap = resolve(args.allow_overlap, &common.cfg, "allow_overlap", false)?;
    let tc = args.train.resolve(&common)?;

    // Carrier offset stays per-side (config keys profile_a.cfo and
    // profile_b.cfo); every other override applies to both envelopes.
    let shared = |name: &Option<String>| ProfileFlags {
        profile: name.clone(),
        schemes: args.schemes.clone(),
        sps: args.sps.clone(),
        rolloff: args.rolloff.clone(),
        cfo: None,
        snr: args.snr.clone(),
        frame_len: args.frame_len,
        count: args.count,
    };
    let profile_a =
        resolve_profile(&shared(&args.profile_a), &common.cfg, "profile_a", "profile_a.", "ds1")?;
    let profile_b =
        resolve_profile(&shared(&args.profile_b), &common.cfg, "profile_b", "profile_b.", "ds2")?;
    if !allow_overlap {
        validate_disjoint_cfo(&profile_a, &profile_b).map_err(sig_err)?;
    }

    let out = common.out_dir()?;
    let mut snap = common.snapshot("shift");
    snapshot_profile(&mut snap, &profile_a, "profile_a", "profile_a.");
    snapshot_profile(&mut snap, &profile_b, "profile_b", "profile_b.");
    snap.push("scale", scale);
    snap.push("runs", runs);
    snap.push("allow_overlap", allow_overlap);
    snapshot_train(&mut snap, &tc);
    snap.write(out)?;

    let mut summary = String::new();
    let (mut sum_matched, mut sum_shifted) = (0.0, 0.0);
    for run in 0..runs {
        let run_seed = common.seed.wrapping_add(run as u64);
        let report =
            shift_experiment(&profile_a, &profile_b, scale, run_seed, allow_overlap, &tc, None)
                .map_err(eval_err)?;
        report.write_files(out, "shift").map_err(eval_err)?;
        println!(
            "seed {run_seed}: matched {:.4}, shifted {:.4}, gap {:.4}",
            report.matched_accuracy, report.shifted_accuracy, report.gap
        );
        summary.push_str(&report.summary_lines());
        summary.push('\n');
        sum_matched += report.matched_accuracy;
        sum_shifted += report.shifted_accuracy;
    }
    let n = runs as f64;
    let mean = format!(
        "mean_matched_accuracy {:.6}\nmean_shifted_accuracy {:.6}\nmean_gap {:.6}\n",
        sum_matched / n,
        sum_shifted / n,
        (sum_matched - sum_shifted) / n,
    );
    summary.push_str(&mean);
    write_text(&out.join("summary.txt"), &summary)?;
    print!("{mean}");
    Ok(())
}
