//! Run configuration as diff-able text: `key = value` lines, `#`
//! comments. Every command resolves each setting as explicit flag, then
//! config-file value, then default, and writes the resolved set back out
//! as `config.txt`, which is itself a valid `--config` input.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::{usage, Result};

pub const SNAPSHOT_FILE: &str = "config.txt";

/// Parsed `--config` file. Empty when no file was given.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<ConfigFile> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(usage(format!(
                    "config {} line {}: expected `key = value`, got {line:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Rejects a config written for a different subcommand.
    pub fn check_subcommand(&self, name: &str) -> Result<()> {
        match self.get("subcommand") {
            Some(other) if other != name => Err(usage(format!(
                "config is for subcommand `{other}`, not `{name}`"
            ))),
            _ => Ok(()),
        }
    }
}

fn from_config<T>(cfg: &ConfigFile, key: &str) -> Result<Option<T>>
where
    T: FromStr,
    T::Err: Display,
{
    match cfg.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|e| usage(format!("config key {key} = {raw:?}: {e}"))),
    }
}

/// Explicit flag beats config value beats default.
pub fn resolve<T>(flag: Option<T>, cfg: &ConfigFile, key: &str, default: T) -> Result<T>
where
    T: FromStr,
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(v),
        None => Ok(from_config(cfg, key)?.unwrap_or(default)),
    }
}

/// Flag or config value; no default to fall back on.
pub fn resolve_required<T>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> Result<T>
where
    T: FromStr,
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(v),
        None => from_config(cfg, key)?
            .ok_or_else(|| usage(format!("missing --{}", key.replace('_', "-")))),
    }
}

/// Flag or config value; stays absent without either.
pub fn resolve_opt<T>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> Result<Option<T>>
where
    T: FromStr,
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => from_config(cfg, key),
    }
}

/// Ordered resolved settings, written as the run's `config.txt`.
#[derive(Debug, Default)]
pub struct Snapshot {
    pairs: Vec<(String, String)>,
}

impl Snapshot {
    pub fn new(subcommand: &str) -> Snapshot {
        let mut snap = Snapshot::default();
        snap.push("subcommand", subcommand);
        snap
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.pairs.push((key.to_string(), value.to_string()));
    }

    pub fn push_opt(&mut self, key: &str, value: Option<impl Display>) {
        if let Some(v) = value {
            self.push(key, v);
        }
    }

    pub fn text(&self) -> String {
        let mut out = String::from("# resolved run configuration\n");
        for (key, value) in &self.pairs {
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(SNAPSHOT_FILE);
        fs::write(&path, self.text())
            .map_err(|e| crate::runtime(format!("write {}: {e}", path.display())))
    }
}

/// `LO:HI` pair of floats, lo ≤ hi not enforced here (profiles validate).
pub fn parse_f64_pair(raw: &str, key: &str) -> Result<(f64, f64)> {
    let (lo, hi) = split_pair(raw, key)?;
    Ok((parse_field(lo, key)?, parse_field(hi, key)?))
}

/// `LO:HI` pair of integers.
pub fn parse_u32_pair(raw: &str, key: &str) -> Result<(u32, u32)> {
    let (lo, hi) = split_pair(raw, key)?;
    Ok((parse_field(lo, key)?, parse_field(hi, key)?))
}

fn split_pair<'a>(raw: &'a str, key: &str) -> Result<(&'a str, &'a str)> {
    raw.split_once(':')
        .ok_or_else(|| usage(format!("{key} wants LO:HI, got {raw:?}")))
}

fn parse_field<T>(raw: &str, key: &str) -> Result<T>
where
    T: FromStr,
    T::Err: Display,
{
    raw.trim()
        .parse()
        .map_err(|e| usage(format!("{key}: bad value {raw:?}: {e}")))
}

/// `TRAIN:VAL:TEST` fractions.
pub fn parse_split(raw: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 3 {
        return Err(usage(format!("split wants TRAIN:VAL:TEST, got {raw:?}")));
    }
    Ok((
        parse_field(parts[0], "split")?,
        parse_field(parts[1], "split")?,
        parse_field(parts[2], "split")?,
    ))
}

/// Comma-separated list of integers, e.g. take counts.
pub fn parse_usize_list(raw: &str, key: &str) -> Result<Vec<usize>> {
    raw.split(',').map(|f| parse_field(f, key)).collect()
}

/// Comma-separated list of paths.
pub fn parse_path_list(raw: &str) -> Vec<PathBuf> {
    raw.split(',')
        .map(|p| PathBuf::from(p.trim()))
        .filter(|p| !p.as_os_str().is_empty())
        .collect()
}

pub fn fmt_f64_pair(pair: (f64, f64)) -> String {
    format!("{}:{}", pair.0, pair.1)
}

pub fn fmt_u32_pair(pair: (u32, u32)) -> String {
    format!("{}:{}", pair.0, pair.1)
}
