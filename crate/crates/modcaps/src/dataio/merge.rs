//! Combining datasets by uniform sub-sampling.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::store::{frame_bytes, write_frame_samples, write_manifest, DatasetReader};
use super::{io_err, DataError, DatasetManifest, FrameRecord, Result, FORMAT_VERSION};
use super::{BLOB_FILE, MANIFEST_FILE};
use crate::modsig::frame_seed;

/// Merges `take[i]` frames sampled without replacement from `sources[i]`
/// into a new dataset at `dest`, in source order.
///
/// Sampling is a seeded shuffle per source; the chosen frames keep their
/// original manifest order, so taking everything reproduces the source
/// byte for byte. Frame metadata is carried over unchanged, which keeps
/// provenance tags intact for later attribution.
pub fn merge(sources: &[&Path], take: &[usize], seed: u64, dest: &Path) -> Result<DatasetManifest> {
    if sources.len() != take.len() {
        return Err(DataError::Invalid(format!(
            "{} sources but {} take counts",
            sources.len(),
            take.len()
        )));
    }
    if sources.is_empty() {
        return Err(DataError::Invalid("merge needs at least one source".into()));
    }

    let mut readers = Vec::with_capacity(sources.len());
    for (&dir, &want) in sources.iter().zip(take) {
        let reader = DatasetReader::open(dir)?;
        if want > reader.len() {
            return Err(DataError::OverSubscribed {
                path: dir.display().to_string(),
                requested: want,
                available: reader.len(),
            });
        }
        readers.push(reader);
    }

    std::fs::create_dir_all(dest).map_err(|e| io_err(dest, e))?;
    let blob_path = dest.join(BLOB_FILE);
    let manifest_path = dest.join(MANIFEST_FILE);
    let result = copy_frames(&mut readers, sources, take, seed, &blob_path, &manifest_path);
    if result.is_err() {
        let _ = std::fs::remove_file(&blob_path);
        let _ = std::fs::remove_file(&manifest_path);
    }
    result
}

fn copy_frames(
    readers: &mut [DatasetReader],
    sources: &[&Path],
    take: &[usize],
    seed: u64,
    blob_path: &Path,
    manifest_path: &Path,
) -> Result<DatasetManifest> {
    let blob = File::create(blob_path).map_err(|e| io_err(blob_path, e))?;
    let mut blob = BufWriter::new(blob);
    let mut records: Vec<FrameRecord> = Vec::new();
    let mut offset = 0u64;
    let mut parts = Vec::new();

    for (s, reader) in readers.iter_mut().enumerate() {
        let mut chosen: Vec<usize> = (0..reader.len()).collect();
        chosen.shuffle(&mut ChaCha8Rng::seed_from_u64(frame_seed(seed, s as u64)));
        chosen.truncate(take[s]);
        chosen.sort_unstable();

        for idx in chosen {
            let frame = reader.read_frame(idx)?;
            write_frame_samples(&mut blob, &frame.samples).map_err(|e| io_err(blob_path, e))?;
            records.push(FrameRecord {
                offset,
                samples: frame.samples.len(),
                meta: frame.meta,
            });
            offset += frame_bytes(records.last().unwrap().samples);
        }
        let name = sources[s]
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| sources[s].display().to_string());
        parts.push(format!("{name}:{}", take[s]));
    }
    blob.flush().map_err(|e| io_err(blob_path, e))?;

    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        profile: format!("merge({})", parts.join(" + ")),
        master_seed: seed,
        records,
    };
    write_manifest(&manifest, manifest_path)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::testutil::toy_frames;
    use crate::dataio::{read_manifest, write_dataset};

    #[test]
    fn take_all_is_concatenation() {
        let tmp = tempfile::tempdir().unwrap();
        let a = tmp.path().join("a");
        let b = tmp.path().join("b");
        let frames_a = toy_frames(4, 32, "src_a", 100);
        let frames_b = toy_frames(3, 32, "src_b", 200);
        write_dataset(&frames_a, &a, "a", 1).unwrap();
        write_dataset(&frames_b, &b, "b", 2).unwrap();

        let dest = tmp.path().join("m");
        let manifest = merge(&[&a, &b], &[4, 3], 9, &dest).unwrap();
        assert_eq!(manifest.len(), 7);
        let seeds: Vec<u64> = manifest.records.iter().map(|r| r.meta.rng_seed).collect();
        let expect: Vec<u64> = frames_a
            .iter()
            .chain(&frames_b)
            .map(|f| f.meta.rng_seed)
            .collect();
        assert_eq!(seeds, expect);

        let blob = std::fs::read(dest.join(super::BLOB_FILE)).unwrap();
        let blob_a = std::fs::read(a.join(super::BLOB_FILE)).unwrap();
        let blob_b = std::fs::read(b.join(super::BLOB_FILE)).unwrap();
        assert_eq!(blob, [blob_a, blob_b].concat());
    }

    #[test]
    fn subsampling_is_deterministic_without_replacement() {
        let tmp = tempfile::tempdir().unwrap();
        let a = tmp.path().join("a");
        let b = tmp.path().join("b");
        write_dataset(&toy_frames(20, 16, "src_a", 0), &a, "a", 1).unwrap();
        write_dataset(&toy_frames(20, 16, "src_b", 1000), &b, "b", 2).unwrap();

        let m1 = merge(&[&a, &b], &[12, 5], 7, &tmp.path().join("m1")).unwrap();
        let m2 = merge(&[&a, &b], &[12, 5], 7, &tmp.path().join("m2")).unwrap();
        assert_eq!(m1.records, m2.records);
        let m3 = merge(&[&a, &b], &[12, 5], 8, &tmp.path().join("m3")).unwrap();
        assert_ne!(m1.records, m3.records);

        let from_a = m1.records.iter().filter(|r| r.meta.profile_tag == "src_a");
        let from_b = m1.records.iter().filter(|r| r.meta.profile_tag == "src_b");
        assert_eq!(from_a.count(), 12);
        assert_eq!(from_b.count(), 5);

        let mut seeds: Vec<u64> = m1.records.iter().map(|r| r.meta.rng_seed).collect();
        let before = seeds.len();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), before, "sampling must not repeat a frame");

        let reopened = read_manifest(&tmp.path().join("m1")).unwrap();
        assert_eq!(reopened.records, m1.records);
        assert!(reopened.profile.contains("a:12") && reopened.profile.contains("b:5"));
    }

    #[test]
    fn oversubscription_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let a = tmp.path().join("a");
        write_dataset(&toy_frames(10, 16, "src_a", 0), &a, "a", 1).unwrap();
        let err = merge(&[&a], &[11], 0, &tmp.path().join("m")).unwrap_err();
        match err {
            DataError::OverSubscribed {
                requested,
                available,
                ..
            } => {
                assert_eq!(requested, 11);
                assert_eq!(available, 10);
            }
            other => panic!("expected OverSubscribed, got {other}"),
        }
    }

    #[test]
    fn mismatched_take_counts_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let a = tmp.path().join("a");
        write_dataset(&toy_frames(2, 16, "src_a", 0), &a, "a", 1).unwrap();
        assert!(matches!(
            merge(&[&a], &[1, 1], 0, &tmp.path().join("m")),
            Err(DataError::Invalid(_))
        ));
    }
}
