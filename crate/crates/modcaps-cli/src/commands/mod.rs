//! One module per subcommand plus the plumbing they share: common flags,
//! config resolution, dataset loading, and error-to-exit-status mapping.

mod augment;
mod eval;
mod generate;
mod inspect;
mod mix;
mod shift;
mod train;

pub use augment::{cmd_augment, AugmentArgs};
pub use eval::{cmd_eval, EvalArgs};
pub use generate::{cmd_generate, GenerateArgs};
pub use inspect::{cmd_inspect, InspectArgs};
pub use mix::{cmd_mix, MixArgs};
pub use shift::{cmd_shift, ShiftArgs};
pub use train::{cmd_train, TrainArgs};

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Once;

use clap::Args;
use modcaps::capsnet::ModelError;
use modcaps::dataio::{DataError, DatasetManifest, DatasetReader, SplitSpec};
use modcaps::eval::EvalError;
use modcaps::modsig::{ComplexSignal, SigError};
use modcaps::trainer::{TrainConfig, TrainError};

use crate::config::{self, parse_split, ConfigFile, Snapshot};
use crate::{runtime, usage, CliError, Result};

/// Flags every subcommand accepts.
#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// Master seed; every random choice in the run derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory all outputs land in.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Key-value file supplying any setting not given as a flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Cap on worker threads for data generation.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Record and enforce bit-reproducible runs.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub deterministic: Option<bool>,
}

/// Common flags after resolution against the config file.
pub struct Common {
    pub cfg: ConfigFile,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub deterministic: bool,
}

impl Common {
    /// Loads the config file, checks it belongs to `subcommand`, resolves
    /// the shared flags, and applies the thread cap.
    pub fn resolve(args: CommonArgs, subcommand: &str) -> Result<Common> {
        let cfg = ConfigFile::load(args.config.as_deref())?;
        cfg.check_subcommand(subcommand)?;
        let seed = config::resolve(args.seed, &cfg, "seed", 0)?;
        let out = config::resolve_opt(args.out, &cfg, "out")?;
        let threads = config::resolve_opt(args.threads, &cfg, "threads")?;
        let deterministic = config::resolve(args.deterministic, &cfg, "deterministic", true)?;
        if let Some(n) = threads {
            cap_threads(n)?;
        }
        Ok(Common {
            cfg,
            seed,
            out,
            threads,
            deterministic,
        })
    }

    /// The output directory, created; usage error if none was given.
    pub fn out_dir(&self) -> Result<&Path> {
        let out = self.out.as_deref().ok_or_else(|| usage("missing --out"))?;
        fs::create_dir_all(out).map_err(|e| runtime(format!("create {}: {e}", out.display())))?;
        Ok(out)
    }

    /// Snapshot pre-filled with the shared settings.
    pub fn snapshot(&self, subcommand: &str) -> Snapshot {
        let mut snap = Snapshot::new(subcommand);
        snap.push("seed", self.seed);
        snap.push("deterministic", self.deterministic);
        snap.push_opt("threads", self.threads);
        snap
    }
}

fn cap_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(usage("threads must be at least 1"));
    }
    static POOL: Once = Once::new();
    let mut result = Ok(());
    POOL.call_once(|| {
        result = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| runtime(format!("thread pool: {e}")));
    });
    result
}

/// Training-loop overrides shared by train, shift, and mix.
#[derive(Args, Debug, Default)]
pub struct TrainFlags {
    /// Frames per optimizer step.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// SGD momentum.
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Epoch cap.
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Multiplier applied to the learning rate every decay period.
    #[arg(long)]
    pub lr_decay_factor: Option<f64>,
    /// Epochs between learning-rate decays.
    #[arg(long)]
    pub lr_decay_period: Option<usize>,
    /// Epochs without validation improvement before stopping early.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Normalize each frame to unit power before the net sees it.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalize: Option<bool>,
}

impl TrainFlags {
    /// Resolved TrainConfig; `dataset_tag` is left for the caller.
    pub fn resolve(&self, common: &Common) -> Result<TrainConfig> {
        let cfg = &common.cfg;
        let d = TrainConfig::default();
        let tc = TrainConfig {
            batch_size: config::resolve(self.batch_size, cfg, "batch_size", d.batch_size)?,
            learning_rate: config::resolve(self.learning_rate, cfg, "learning_rate", d.learning_rate)?,
            momentum: config::resolve(self.momentum, cfg, "momentum", d.momentum)?,
            max_epochs: config::resolve(self.max_epochs, cfg, "max_epochs", d.max_epochs)?,
            lr_decay_factor: config::resolve(self.lr_decay_factor, cfg, "lr_decay_factor", d.lr_decay_factor)?,
            lr_decay_period: config::resolve(self.lr_decay_period, cfg, "lr_decay_period", d.lr_decay_period)?,
            early_stop_patience: config::resolve(self.patience, cfg, "patience", d.early_stop_patience)?,
            seed: common.seed,
            deterministic: common.deterministic,
            normalize_input: config::resolve(self.normalize, cfg, "normalize", d.normalize_input)?,
            dataset_tag: String::new(),
        };
        tc.validate().map_err(|e| usage(e.to_string()))?;
        Ok(tc)
    }
}

pub fn snapshot_train(snap: &mut Snapshot, tc: &TrainConfig) {
    snap.push("batch_size", tc.batch_size);
    snap.push("learning_rate", tc.learning_rate);
    snap.push("momentum", tc.momentum);
    snap.push("max_epochs", tc.max_epochs);
    snap.push("lr_decay_factor", tc.lr_decay_factor);
    snap.push("lr_decay_period", tc.lr_decay_period);
    snap.push("patience", tc.early_stop_patience);
    snap.push("normalize", tc.normalize_input);
}

/// Split fractions and seed, for commands that partition a dataset.
#[derive(Args, Debug, Default)]
pub struct SplitFlags {
    /// Train:validation:test fractions.
    #[arg(long)]
    pub split: Option<String>,
    /// Seed for the stratified split; defaults to the master seed.
    #[arg(long)]
    pub split_seed: Option<u64>,
}

impl SplitFlags {
    pub fn resolve(&self, common: &Common) -> Result<SplitSpec> {
        let d = SplitSpec::default();
        let raw = config::resolve(
            self.split.clone(),
            &common.cfg,
            "split",
            format!("{}:{}:{}", d.train, d.validation, d.test),
        )?;
        let (train, validation, test) = parse_split(&raw)?;
        let seed = config::resolve(self.split_seed, &common.cfg, "split_seed", common.seed)?;
        Ok(SplitSpec {
            train,
            validation,
            test,
            seed,
        })
    }
}

pub fn snapshot_split(snap: &mut Snapshot, spec: &SplitSpec) {
    snap.push("split", format!("{}:{}:{}", spec.train, spec.validation, spec.test));
    snap.push("split_seed", spec.seed);
}

/// Opens a dataset for reading; all failures are usage errors (the path
/// or its contents are the user's input).
pub fn open_dataset(dir: &Path) -> Result<DatasetReader> {
    DatasetReader::open(dir).map_err(|e| usage(format!("dataset {}: {e}", dir.display())))
}

/// Reads every frame and checks they share one length.
pub fn read_uniform_frames(reader: &mut DatasetReader) -> Result<(Vec<ComplexSignal>, usize)> {
    let frames = reader
        .read_all()
        .map_err(|e| usage(format!("dataset: {e}")))?;
    if frames.is_empty() {
        return Err(usage("dataset is empty"));
    }
    let len = frames[0].samples.len();
    if frames.iter().any(|f| f.samples.len() != len) {
        return Err(usage("dataset mixes frame lengths; train on one length"));
    }
    Ok((frames, len))
}

/// Class count implied by the labels: max label + 1.
pub fn class_count(manifest: &DatasetManifest) -> Result<usize> {
    manifest
        .labels()
        .iter()
        .max()
        .map(|&m| m + 1)
        .ok_or_else(|| usage("dataset is empty"))
}

/// Class names in label order; labels nothing maps to get a placeholder.
pub fn label_names(manifest: &DatasetManifest, classes: usize) -> Vec<String> {
    let mut names: Vec<String> = (0..classes).map(|c| format!("class{c}")).collect();
    for rec in &manifest.records {
        let slot = &mut names[rec.meta.label];
        if slot.starts_with("class") {
            *slot = rec.meta.scheme.name().to_string();
        }
    }
    names
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| runtime(format!("write {}: {e}", path.display())))
}

pub struct FitOutcome {
    pub model: modcaps::capsnet::ModelState,
    pub report: modcaps::trainer::TrainReport,
    pub splits: modcaps::dataio::SplitIndices,
    pub frames: Vec<ComplexSignal>,
    pub class_names: Vec<String>,
}

/// Train-on-a-dataset flow shared by `train` and `mix`: load and split
/// the frames, size a net to them, fit it, and write `checkpoint.mcap`
/// plus `report.txt` under `out`.
pub fn fit_dataset(
    dir: &Path,
    spec: &SplitSpec,
    tc: &mut TrainConfig,
    net_seed: u64,
    out: &Path,
) -> Result<FitOutcome> {
    let mut reader = open_dataset(dir)?;
    let (frames, frame_len) = read_uniform_frames(&mut reader)?;
    let classes = class_count(&reader.manifest)?;
    tc.dataset_tag = reader.manifest.profile.clone();

    let splits = modcaps::dataio::split_by_labels(&reader.manifest.labels(), spec)
        .map_err(|e| usage(e.to_string()))?;
    let net = modcaps::capsnet::NetworkConfig::for_frame_len(frame_len, classes, net_seed)
        .map_err(model_err)?;
    let (model, report) =
        modcaps::trainer::train(&net, tc, &frames, &splits.train, &splits.validation)
            .map_err(train_err)?;

    model
        .save(&out.join("checkpoint.mcap"))
        .map_err(|e| runtime(format!("checkpoint: {e}")))?;
    write_text(&out.join("report.txt"), &report.log_lines())?;

    let class_names = label_names(&reader.manifest, classes);
    Ok(FitOutcome {
        model,
        report,
        splits,
        frames,
        class_names,
    })
}

/// Generation and write-side failures: bad parameters are usage errors,
/// i/o is a runtime failure.
pub fn sig_err(e: SigError) -> CliError {
    usage(e.to_string())
}

pub fn data_write_err(e: DataError) -> CliError {
    match e {
        DataError::Io { .. } => runtime(e.to_string()),
        other => usage(other.to_string()),
    }
}

pub fn train_err(e: TrainError) -> CliError {
    match e {
        TrainError::Diverged { .. } => runtime(e.to_string()),
        other => usage(other.to_string()),
    }
}

pub fn model_err(e: ModelError) -> CliError {
    usage(e.to_string())
}

pub fn eval_err(e: EvalError) -> CliError {
    match e {
        EvalError::Io { .. } => runtime(e.to_string()),
        EvalError::Train(t) => train_err(t),
        EvalError::Data(d) => data_write_err(d),
        other => usage(other.to_string()),
    }
}
