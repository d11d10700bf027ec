//! Envelope resolution: a named base profile (`ds1` or `ds2`) with any
//! field overridden by flag or config key. The fully resolved envelope is
//! recorded in the snapshot so a replay does not depend on the built-in
//! defaults staying put.

use clap::Args;
use modcaps::modsig::{DatasetProfile, ModulationScheme};

use crate::config::{
    fmt_f64_pair, fmt_u32_pair, parse_f64_pair, parse_u32_pair, ConfigFile, Snapshot,
};
use crate::{usage, Result};

/// Envelope overrides shared by the dataset-producing commands.
#[derive(Args, Debug, Default, Clone)]
pub struct ProfileFlags {
    /// Base envelope: ds1 or ds2.
    #[arg(long)]
    pub profile: Option<String>,
    /// Comma-separated scheme names, in label order.
    #[arg(long)]
    pub schemes: Option<String>,
    /// Samples-per-symbol range LO:HI.
    #[arg(long)]
    pub sps: Option<String>,
    /// Pulse rolloff range LO:HI.
    #[arg(long)]
    pub rolloff: Option<String>,
    /// Carrier offset range LO:HI, in cycles per sample.
    #[arg(long, allow_hyphen_values = true)]
    pub cfo: Option<String>,
    /// Labeled in-band SNR range LO:HI, in dB.
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<String>,
    /// Samples per frame.
    #[arg(long)]
    pub frame_len: Option<usize>,
    /// Frames to generate.
    #[arg(long)]
    pub count: Option<usize>,
}

pub fn base_profile(name: &str) -> Result<DatasetProfile> {
    match name {
        "ds1" => Ok(DatasetProfile::ds1(false)),
        "ds2" => Ok(DatasetProfile::ds2(false)),
        other => Err(usage(format!(
            "unknown profile {other:?}; built-ins are ds1 and ds2"
        ))),
    }
}

pub fn parse_schemes(raw: &str) -> Result<Vec<ModulationScheme>> {
    raw.split(',')
        .map(|name| {
            let name = name.trim();
            ModulationScheme::from_name(name)
                .ok_or_else(|| usage(format!("unknown scheme {name:?}")))
        })
        .collect()
}

/// Resolves one envelope. `name_key` is the config key holding the base
/// profile name; field overrides live under `{field_prefix}schemes`,
/// `{field_prefix}sps`, and so on.
pub fn resolve_profile(
    flags: &ProfileFlags,
    cfg: &ConfigFile,
    name_key: &str,
    field_prefix: &str,
    default_name: &str,
) -> Result<DatasetProfile> {
    let key = |field: &str| format!("{field_prefix}{field}");
    let pick = |flag: &Option<String>, field: &str| -> Option<String> {
        flag.clone()
            .or_else(|| cfg.get(&key(field)).map(str::to_string))
    };

    let name = match &flags.profile {
        Some(n) => n.clone(),
        None => cfg.get(name_key).unwrap_or(default_name).to_string(),
    };
    let mut p = base_profile(&name)?;
    let mut customized = false;

    if let Some(raw) = pick(&flags.schemes, "schemes") {
        p.schemes = parse_schemes(&raw)?;
        customized = true;
    }
    if let Some(raw) = pick(&flags.sps, "sps") {
        p.sps_range = parse_u32_pair(&raw, &key("sps"))?;
        customized = true;
    }
    if let Some(raw) = pick(&flags.rolloff, "rolloff") {
        p.rolloff_range = parse_f64_pair(&raw, &key("rolloff"))?;
        customized = true;
    }
    if let Some(raw) = pick(&flags.cfo, "cfo") {
        p.cfo_range = parse_f64_pair(&raw, &key("cfo"))?;
        customized = true;
    }
    if let Some(raw) = pick(&flags.snr, "snr") {
        p.snr_range_db = parse_f64_pair(&raw, &key("snr"))?;
        customized = true;
    }
    if let Some(len) = crate::config::resolve_opt(flags.frame_len, cfg, &key("frame_len"))? {
        p.frame_len = len;
        customized = true;
    }
    if let Some(count) = crate::config::resolve_opt(flags.count, cfg, &key("count"))? {
        p.count = count;
    }

    if customized {
        p.name = format!("{name}*");
    }
    p.validate().map_err(|e| usage(e.to_string()))?;
    Ok(p)
}

/// Records the full resolved envelope under the same keys resolution reads.
pub fn snapshot_profile(
    snap: &mut Snapshot,
    p: &DatasetProfile,
    name_key: &str,
    field_prefix: &str,
) {
    let base = p.name.trim_end_matches('*');
    snap.push(name_key, base);
    let key = |field: &str| format!("{field_prefix}{field}");
    let schemes: Vec<&str> = p.schemes.iter().map(|s| s.name()).collect();
    snap.push(&key("schemes"), schemes.join(","));
    snap.push(&key("sps"), fmt_u32_pair(p.sps_range));
    snap.push(&key("rolloff"), fmt_f64_pair(p.rolloff_range));
    snap.push(&key("cfo"), fmt_f64_pair(p.cfo_range));
    snap.push(&key("snr"), fmt_f64_pair(p.snr_range_db));
    snap.push(&key("frame_len"), p.frame_len);
    snap.push(&key("count"), p.count);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::CliError;

    #[test]
    fn base_profiles_resolve_and_unknown_is_usage() {
        let flags = ProfileFlags::default();
        let cfg = ConfigFile::default();
        let p = resolve_profile(&flags, &cfg, "profile", "", "ds1").unwrap();
        assert_eq!(p.name, "ds1");
        assert_eq!(p.schemes.len(), 8);

        let flags = ProfileFlags {
            profile: Some("ds9".into()),
            ..ProfileFlags::default()
        };
        assert!(matches!(
            resolve_profile(&flags, &cfg, "profile", "", "ds1"),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn overrides_apply_and_validate() {
        let cfg = ConfigFile::default();
        let flags = ProfileFlags {
            schemes: Some("MSK,16QAM".into()),
            sps: Some("2:2".into()),
            snr: Some("14:22".into()),
            frame_len: Some(512),
            count: Some(64),
            ..ProfileFlags::default()
        };
        let p = resolve_profile(&flags, &cfg, "profile", "", "ds1").unwrap();
        assert_eq!(p.name, "ds1*");
        assert_eq!(p.schemes, vec![ModulationScheme::Msk, ModulationScheme::Qam16]);
        assert_eq!(p.sps_range, (2, 2));
        assert_eq!(p.frame_len, 512);
        assert_eq!(p.count, 64);

        let bad = ProfileFlags {
            rolloff: Some("0:2".into()),
            ..ProfileFlags::default()
        };
        assert!(matches!(
            resolve_profile(&bad, &cfg, "profile", "", "ds1"),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn snapshot_keys_feed_back_into_resolution() {
        let cfg = ConfigFile::default();
        let flags = ProfileFlags {
            profile: Some("ds2".into()),
            schemes: Some("BPSK,QPSK".into()),
            count: Some(40),
            ..ProfileFlags::default()
        };
        let p = resolve_profile(&flags, &cfg, "profile_a", "profile_a.", "ds1").unwrap();

        let mut snap = Snapshot::new("shift");
        snapshot_profile(&mut snap, &p, "profile_a", "profile_a.");
        let dir = tempfile::tempdir().unwrap();
        snap.write(dir.path()).unwrap();

        let cfg = ConfigFile::load(Some(&dir.path().join(crate::config::SNAPSHOT_FILE))).unwrap();
        let replay =
            resolve_profile(&ProfileFlags::default(), &cfg, "profile_a", "profile_a.", "ds1")
                .unwrap();
        assert_eq!(replay.schemes, p.schemes);
        assert_eq!(replay.sps_range, p.sps_range);
        assert_eq!(replay.snr_range_db, p.snr_range_db);
        assert_eq!(replay.count, p.count);
    }
}
