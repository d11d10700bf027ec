//! Blob + manifest writer and streaming reader.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use super::{io_err, DataError, DatasetManifest, FrameRecord, Result, FORMAT_VERSION};
use crate::modsig::{ComplexSignal, ModulationScheme, SignalMeta};

pub const BLOB_FILE: &str = "frames.iq";
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Bytes one frame occupies in the blob: interleaved I/Q, 4 bytes each.
pub(super) fn frame_bytes(samples: usize) -> u64 {
    samples as u64 * 8
}

pub(super) fn write_frame_samples<W: Write>(
    w: &mut W,
    samples: &[Complex64],
) -> std::io::Result<()> {
    for z in samples {
        w.write_all(&(z.re as f32).to_le_bytes())?;
        w.write_all(&(z.im as f32).to_le_bytes())?;
    }
    Ok(())
}

fn check_tag(tag: &str) -> Result<()> {
    if tag.is_empty() || tag.chars().any(char::is_whitespace) {
        return Err(DataError::Invalid(format!(
            "profile tag {tag:?} must be non-empty and whitespace-free"
        )));
    }
    Ok(())
}

/// Writes `frames` under `dir` as `frames.iq` + `manifest.txt`.
///
/// Samples are stored as little-endian `f32`, so values already representable
/// in single precision round-trip exactly. A failed write removes whatever
/// partial files it created before returning the error.
pub fn write_dataset(
    frames: &[ComplexSignal],
    dir: &Path,
    profile: &str,
    master_seed: u64,
) -> Result<DatasetManifest> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let blob_path = dir.join(BLOB_FILE);
    let manifest_path = dir.join(MANIFEST_FILE);

    let result = write_files(frames, &blob_path, &manifest_path, profile, master_seed);
    if result.is_err() {
        let _ = std::fs::remove_file(&blob_path);
        let _ = std::fs::remove_file(&manifest_path);
    }
    result
}

fn write_files(
    frames: &[ComplexSignal],
    blob_path: &Path,
    manifest_path: &Path,
    profile: &str,
    master_seed: u64,
) -> Result<DatasetManifest> {
    let mut records = Vec::with_capacity(frames.len());
    let mut offset = 0u64;

    let blob = File::create(blob_path).map_err(|e| io_err(blob_path, e))?;
    let mut blob = BufWriter::new(blob);
    for frame in frames {
        check_tag(&frame.meta.profile_tag)?;
        if frame.meta.label >= 8 {
            return Err(DataError::Invalid(format!(
                "label {} out of range [0,8)",
                frame.meta.label
            )));
        }
        write_frame_samples(&mut blob, &frame.samples).map_err(|e| io_err(blob_path, e))?;
        records.push(FrameRecord {
            offset,
            samples: frame.samples.len(),
            meta: frame.meta.clone(),
        });
        offset += frame_bytes(frame.samples.len());
    }
    blob.flush().map_err(|e| io_err(blob_path, e))?;

    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        profile: profile.to_string(),
        master_seed,
        records,
    };
    write_manifest(&manifest, manifest_path)?;
    Ok(manifest)
}

pub(super) fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let mut emit = |line: String| out.write_all(line.as_bytes()).map_err(|e| io_err(path, e));
    emit(format!("format_version = {}\n", manifest.format_version))?;
    emit(format!("profile = {}\n", manifest.profile))?;
    emit(format!("master_seed = {}\n", manifest.master_seed))?;
    emit(format!("count = {}\n", manifest.records.len()))?;
    emit("frames:\n".to_string())?;
    for (i, r) in manifest.records.iter().enumerate() {
        let m = &r.meta;
        emit(format!(
            "{i} {} {} {} {} {} {} {} {} {} {}\n",
            m.scheme.name(),
            m.label,
            m.sps,
            m.rolloff,
            m.cfo,
            m.snr_db,
            m.rng_seed,
            m.profile_tag,
            r.offset,
            r.samples,
        ))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Parses `manifest.txt` under `dir` without touching the sample blob.
pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let file = File::open(&path).map_err(|e| io_err(&path, e))?;
    let mut lines = BufReader::new(file).lines();

    let mut format_version = None;
    let mut profile = None;
    let mut master_seed = None;
    let mut count = None;
    loop {
        let line = match lines.next() {
            Some(l) => l.map_err(|e| io_err(&path, e))?,
            None => return Err(DataError::Invalid("manifest ends before frames:".into())),
        };
        let line = line.trim_end();
        if line == "frames:" {
            break;
        }
        let (key, value) = line
            .split_once(" = ")
            .ok_or_else(|| DataError::Invalid(format!("bad header line {line:?}")))?;
        match key {
            "format_version" => format_version = Some(parse(value, "format_version")?),
            "profile" => profile = Some(value.to_string()),
            "master_seed" => master_seed = Some(parse(value, "master_seed")?),
            "count" => count = Some(parse(value, "count")?),
            other => return Err(DataError::Invalid(format!("unknown header key {other:?}"))),
        }
    }
    let format_version: u32 =
        format_version.ok_or_else(|| DataError::Invalid("missing format_version".into()))?;
    if format_version != FORMAT_VERSION {
        return Err(DataError::Invalid(format!(
            "format_version {format_version} unsupported (expected {FORMAT_VERSION})"
        )));
    }
    let profile = profile.ok_or_else(|| DataError::Invalid("missing profile".into()))?;
    let master_seed =
        master_seed.ok_or_else(|| DataError::Invalid("missing master_seed".into()))?;
    let count: usize = count.ok_or_else(|| DataError::Invalid("missing count".into()))?;

    let mut records = Vec::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| io_err(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record(i, line.trim_end())?);
    }
    if records.len() != count {
        return Err(DataError::Invalid(format!(
            "count says {count} frames but manifest lists {}",
            records.len()
        )));
    }
    validate_records(&records)?;
    Ok(DatasetManifest {
        format_version,
        profile,
        master_seed,
        records,
    })
}

fn parse<T: std::str::FromStr>(value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| DataError::Invalid(format!("cannot parse {what} from {value:?}")))
}

fn parse_record(index: usize, line: &str) -> Result<FrameRecord> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 11 {
        return Err(DataError::Corrupt {
            frame: index,
            detail: format!("expected 11 fields, got {}", fields.len()),
        });
    }
    let bad = |what: &str| DataError::Corrupt {
        frame: index,
        detail: format!("cannot parse {what} from {line:?}"),
    };
    let stated: usize = fields[0].parse().map_err(|_| bad("index"))?;
    if stated != index {
        return Err(DataError::Corrupt {
            frame: index,
            detail: format!("record numbered {stated} found at line {index}"),
        });
    }
    let scheme = ModulationScheme::from_name(fields[1]).ok_or_else(|| bad("scheme"))?;
    let meta = SignalMeta {
        scheme,
        label: fields[2].parse().map_err(|_| bad("label"))?,
        sps: fields[3].parse().map_err(|_| bad("sps"))?,
        rolloff: fields[4].parse().map_err(|_| bad("rolloff"))?,
        cfo: fields[5].parse().map_err(|_| bad("cfo"))?,
        snr_db: fields[6].parse().map_err(|_| bad("snr_db"))?,
        rng_seed: fields[7].parse().map_err(|_| bad("rng_seed"))?,
        profile_tag: fields[8].to_string(),
    };
    Ok(FrameRecord {
        offset: fields[9].parse().map_err(|_| bad("offset"))?,
        samples: fields[10].parse().map_err(|_| bad("samples"))?,
        meta,
    })
}

fn validate_records(records: &[FrameRecord]) -> Result<()> {
    let mut next_free = 0u64;
    for (i, r) in records.iter().enumerate() {
        if r.meta.label >= 8 {
            return Err(DataError::Corrupt {
                frame: i,
                detail: format!("label {} out of range [0,8)", r.meta.label),
            });
        }
        if r.samples == 0 {
            return Err(DataError::Corrupt {
                frame: i,
                detail: "zero-sample frame".into(),
            });
        }
        if r.offset < next_free {
            return Err(DataError::Corrupt {
                frame: i,
                detail: format!("offset {} overlaps previous frame", r.offset),
            });
        }
        next_free = r.offset + frame_bytes(r.samples);
    }
    Ok(())
}

/// Streaming frame reader: manifest in memory, samples fetched on demand.
pub struct DatasetReader {
    pub manifest: DatasetManifest,
    blob_path: PathBuf,
    blob: BufReader<File>,
    blob_len: u64,
}

impl DatasetReader {
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest = read_manifest(dir)?;
        let blob_path = dir.join(BLOB_FILE);
        let file = File::open(&blob_path).map_err(|e| io_err(&blob_path, e))?;
        let blob_len = file.metadata().map_err(|e| io_err(&blob_path, e))?.len();
        Ok(Self {
            manifest,
            blob_path,
            blob: BufReader::new(file),
            blob_len,
        })
    }

    pub fn len(&self) -> usize {
        self.manifest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.is_empty()
    }

    /// Reads one frame by manifest index.
    pub fn read_frame(&mut self, index: usize) -> Result<ComplexSignal> {
        let record = self
            .manifest
            .records
            .get(index)
            .ok_or_else(|| DataError::Invalid(format!(
                "frame {index} out of range (dataset has {})",
                self.manifest.len()
            )))?
            .clone();
        let bytes = frame_bytes(record.samples);
        if record.offset + bytes > self.blob_len {
            return Err(DataError::Corrupt {
                frame: index,
                detail: format!(
                    "blob is {} bytes, frame needs {} at offset {}",
                    self.blob_len, bytes, record.offset
                ),
            });
        }
        self.blob
            .seek(SeekFrom::Start(record.offset))
            .map_err(|e| io_err(&self.blob_path, e))?;
        let mut raw = vec![0u8; bytes as usize];
        self.blob.read_exact(&mut raw).map_err(|_| DataError::Corrupt {
            frame: index,
            detail: format!("blob read failed at offset {}", record.offset),
        })?;
        let mut samples = Vec::with_capacity(record.samples);
        for pair in raw.chunks_exact(8) {
            let re = f32::from_le_bytes(pair[0..4].try_into().unwrap()) as f64;
            let im = f32::from_le_bytes(pair[4..8].try_into().unwrap()) as f64;
            samples.push(Complex64::new(re, im));
        }
        Ok(ComplexSignal {
            samples,
            meta: record.meta,
        })
    }

    /// Reads frames in the order the indices are given.
    pub fn read_selection(&mut self, indices: &[usize]) -> Result<Vec<ComplexSignal>> {
        indices.iter().map(|&i| self.read_frame(i)).collect()
    }

    pub fn read_all(&mut self) -> Result<Vec<ComplexSignal>> {
        (0..self.len()).map(|i| self.read_frame(i)).collect()
    }
}
