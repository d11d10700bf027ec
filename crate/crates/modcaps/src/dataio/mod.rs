//! Dataset persistence, deterministic splits, merges, and import hooks.
//!
//! A dataset on disk is a directory with two files: `frames.iq`, the raw
//! sample blob (little-endian `f32`, interleaved I/Q per frame, frames
//! concatenated back to back), and `manifest.txt`, a line-oriented text
//! index carrying every frame's metadata and blob offset. The manifest is
//! self-sufficient for browsing: reading it never touches the blob.

mod import;
mod merge;
mod split;
mod store;
#[cfg(test)]
pub(crate) mod testutil;

pub use import::{import_external, ImportReport, ADAPTER_NAMES};
pub use merge::merge;
pub use split::{split, split_by_labels, SplitIndices, SplitSpec};
pub use store::{read_manifest, write_dataset, DatasetReader, BLOB_FILE, MANIFEST_FILE};

use crate::modsig::SignalMeta;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("frame {frame}: {detail}")]
    Corrupt { frame: usize, detail: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("invalid split spec: {0}")]
    BadSplit(String),
    #[error("unknown import adapter {name:?}; available: {available}")]
    UnknownAdapter { name: String, available: String },
    #[error("cannot take {requested} frames from {path} ({available} available)")]
    OverSubscribed {
        path: String,
        requested: usize,
        available: usize,
    },
    #[error(transparent)]
    Signal(#[from] crate::modsig::SigError),
}

pub type Result<T> = std::result::Result<T, DataError>;

fn io_err(path: &std::path::Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One manifest record: where a frame lives in the blob and what it is.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    /// Byte offset of the frame's first sample in the blob.
    pub offset: u64,
    /// Complex samples in the frame.
    pub samples: usize,
    pub meta: SignalMeta,
}

/// In-memory view of a dataset's manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub format_version: u32,
    /// Free-text description of the generating envelope.
    pub profile: String,
    /// Seed the dataset was generated (or merged) under.
    pub master_seed: u64,
    pub records: Vec<FrameRecord>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Labels of all frames, in manifest order.
    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.meta.label).collect()
    }

    /// Distinct labels present, ascending.
    pub fn label_set(&self) -> Vec<usize> {
        let mut set: Vec<usize> = Vec::new();
        for r in &self.records {
            if !set.contains(&r.meta.label) {
                set.push(r.meta.label);
            }
        }
        set.sort_unstable();
        set
    }
}
