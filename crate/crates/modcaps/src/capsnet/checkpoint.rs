//! Bit-exact model persistence.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "MCAP" | format version u32 | config block (u32 length + bytes)
//! | sha-256 of the config block | provenance (tag, epoch, val accuracy)
//! | tensor count u32 | tensors...
//! ```
//!
//! Each tensor record is `name (u32 length + utf-8) | dtype u8 | rank u8 |
//! dims (u32 each) | raw element bytes`. Tensors appear in parameter order
//! followed by the running statistics (mean then variance per batchnorm).
//! Loading rebuilds the expected structure from the stored config and
//! verifies every record against it, so a checkpoint whose tensors do not
//! match its own config header is rejected as corrupt.

use super::{ModelError, ModelState, NetworkConfig, Provenance, Result};
use crate::nn::{Dtype, Tensor};
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"MCAP";
const FORMAT_VERSION: u32 = 1;
const MAX_NAME_LEN: u32 = 4096;

fn config_bytes(cfg: &NetworkConfig) -> Vec<u8> {
    let mut out = Vec::with_capacity(96);
    out.extend((cfg.input_channels as u32).to_le_bytes());
    out.extend((cfg.input_len as u64).to_le_bytes());
    out.extend((cfg.branch_count as u32).to_le_bytes());
    for spec in [&cfg.feature, &cfg.branch_conv1, &cfg.branch_conv2] {
        out.extend((spec.kernel as u32).to_le_bytes());
        out.extend((spec.stride as u32).to_le_bytes());
        out.extend((spec.channels as u32).to_le_bytes());
    }
    out.extend((cfg.pool.window as u32).to_le_bytes());
    out.extend((cfg.pool.stride as u32).to_le_bytes());
    out.extend((cfg.capsule_width as u32).to_le_bytes());
    out.extend(cfg.seed.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(ModelError::Corrupt("config block truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32_as_usize(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn config_from_bytes(bytes: &[u8]) -> Result<NetworkConfig> {
    let mut c = Cursor { bytes, pos: 0 };
    let input_channels = c.u32_as_usize()?;
    let input_len = c.u64()? as usize;
    let branch_count = c.u32_as_usize()?;
    let mut specs = [super::ConvSpec {
        kernel: 0,
        stride: 0,
        channels: 0,
    }; 3];
    for spec in specs.iter_mut() {
        spec.kernel = c.u32_as_usize()?;
        spec.stride = c.u32_as_usize()?;
        spec.channels = c.u32_as_usize()?;
    }
    let pool_window = c.u32_as_usize()?;
    let pool_stride = c.u32_as_usize()?;
    let capsule_width = c.u32_as_usize()?;
    let seed = c.u64()?;
    if c.pos != bytes.len() {
        return Err(ModelError::Corrupt("config block has trailing bytes".into()));
    }
    Ok(NetworkConfig {
        input_channels,
        input_len,
        branch_count,
        feature: specs[0],
        branch_conv1: specs[1],
        branch_conv2: specs[2],
        pool: super::PoolSpec {
            window: pool_window,
            stride: pool_stride,
        },
        capsule_width,
        seed,
    })
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn write_tensor(w: &mut impl Write, name: &str, t: &Tensor<f32>) -> std::io::Result<()> {
    write_str(w, name)?;
    w.write_all(&[Dtype::F32 as u8, t.rank() as u8])?;
    for &d in t.shape() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact_vec(r: &mut impl Read, n: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r)?;
    if len > MAX_NAME_LEN {
        return Err(ModelError::Corrupt(format!("string length {len} out of range")));
    }
    String::from_utf8(read_exact_vec(r, len as usize)?)
        .map_err(|_| ModelError::Corrupt("invalid utf-8 in checkpoint string".into()))
}

/// Reads one tensor record and verifies it against the expected name and
/// shape before any data is materialized.
fn read_tensor_expecting(
    r: &mut impl Read,
    expect_name: &str,
    expect_shape: &[usize],
) -> Result<Tensor<f32>> {
    let name = read_str(r)?;
    if name != expect_name {
        return Err(ModelError::Corrupt(format!(
            "tensor order mismatch: expected {expect_name}, found {name}"
        )));
    }
    let mut hdr = [0u8; 2];
    r.read_exact(&mut hdr)?;
    if Dtype::from_code(hdr[0]) != Some(Dtype::F32) {
        return Err(ModelError::Corrupt(format!(
            "tensor {name}: unsupported dtype code {}",
            hdr[0]
        )));
    }
    let rank = hdr[1] as usize;
    if rank != expect_shape.len() {
        return Err(ModelError::Corrupt(format!(
            "tensor {name}: rank {rank}, expected {}",
            expect_shape.len()
        )));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u32(r)? as usize);
    }
    if shape != expect_shape {
        return Err(ModelError::Corrupt(format!(
            "tensor {name}: shape {shape:?} does not match the config's {expect_shape:?}"
        )));
    }
    let count: usize = shape.iter().product();
    let bytes = read_exact_vec(r, count * 4)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Tensor::from_vec(&shape, data).expect("shape and data length agree"))
}

/// Names of the running-statistic tensors, in storage order, paired with
/// the index of the owning [`crate::nn::RunningStats`] entry.
fn stat_names(branch_count: usize) -> Vec<(String, String)> {
    let mut names = vec![(
        "feature.bn.running_mean".to_string(),
        "feature.bn.running_var".to_string(),
    )];
    for i in 0..branch_count {
        for bn in 1..=3 {
            names.push((
                format!("branch{i}.bn{bn}.running_mean"),
                format!("branch{i}.bn{bn}.running_var"),
            ));
        }
    }
    names
}

impl ModelState {
    /// Serializes the model to `path`. Identical models produce identical
    /// files byte for byte.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;

        let cfg = config_bytes(&self.config);
        w.write_all(&(cfg.len() as u32).to_le_bytes())?;
        w.write_all(&cfg)?;
        w.write_all(&Sha256::digest(&cfg))?;

        write_str(&mut w, &self.provenance.dataset_tag)?;
        w.write_all(&self.provenance.epoch.to_le_bytes())?;
        w.write_all(&self.provenance.val_accuracy.to_le_bytes())?;

        let names = stat_names(self.config.branch_count);
        let n_tensors = self.params.len() + 2 * names.len();
        w.write_all(&(n_tensors as u32).to_le_bytes())?;
        for p in self.params.iter() {
            write_tensor(&mut w, &p.name, &p.value)?;
        }
        for (stats, (mean_name, var_name)) in self.stats.iter().zip(&names) {
            write_tensor(&mut w, mean_name, &stats.mean)?;
            write_tensor(&mut w, var_name, &stats.var)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a checkpoint, validating magic, version, config digest and
    /// every tensor's name and shape against the stored config. No partial
    /// model is ever returned.
    pub fn load(path: &Path) -> Result<ModelState> {
        let file = File::open(path)?;
        let mut r = BufReader::new(file);

        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(ModelError::Corrupt("bad magic bytes".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(ModelError::Corrupt(format!(
                "unsupported checkpoint format version {version}"
            )));
        }
        let cfg_len = read_u32(&mut r)?;
        if cfg_len > 4096 {
            return Err(ModelError::Corrupt("config block too large".into()));
        }
        let cfg_bytes = read_exact_vec(&mut r, cfg_len as usize)?;
        let mut digest = [0u8; 32];
        r.read_exact(&mut digest)?;
        if Sha256::digest(&cfg_bytes).as_slice() != digest {
            return Err(ModelError::Corrupt("config digest mismatch".into()));
        }
        let config = config_from_bytes(&cfg_bytes)?;

        let dataset_tag = read_str(&mut r)?;
        let mut epoch_b = [0u8; 4];
        r.read_exact(&mut epoch_b)?;
        let mut acc_b = [0u8; 8];
        r.read_exact(&mut acc_b)?;
        let provenance = Provenance {
            dataset_tag,
            epoch: u32::from_le_bytes(epoch_b),
            val_accuracy: f64::from_le_bytes(acc_b),
        };

        // Rebuild the expected structure from the stored config; every
        // record must match it in order, name and shape.
        let mut model = ModelState::build(&config)?;
        let names = stat_names(config.branch_count);
        let expect_tensors = model.params.len() + 2 * names.len();
        let n_tensors = read_u32(&mut r)? as usize;
        if n_tensors != expect_tensors {
            return Err(ModelError::Corrupt(format!(
                "checkpoint holds {n_tensors} tensors, config implies {expect_tensors}"
            )));
        }
        for i in 0..model.params.len() {
            let expect_name = model.params.get(i).name.clone();
            let expect_shape = model.params.value(i).shape().to_vec();
            model.params.get_mut(i).value =
                read_tensor_expecting(&mut r, &expect_name, &expect_shape)?;
        }
        for (stats, (mean_name, var_name)) in model.stats.iter_mut().zip(&names) {
            let shape = stats.mean.shape().to_vec();
            stats.mean = read_tensor_expecting(&mut r, mean_name, &shape)?;
            stats.var = read_tensor_expecting(&mut r, var_name, &shape)?;
        }
        model.provenance = provenance;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::super::model::tiny_config;
    use super::*;
    use crate::nn::Tensor;

    fn trained_ish_model() -> ModelState {
        let mut model = ModelState::build(&tiny_config(3, 99)).unwrap();
        model.provenance = Provenance {
            dataset_tag: "unit-test".into(),
            epoch: 7,
            val_accuracy: 0.875,
        };
        // Touch the running stats so persistence covers non-defaults.
        let x = Tensor::filled(&[2, 2, 64], 0.25f32);
        let _ = model.forward_train(&x).unwrap();
        model
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = trained_ish_model();
        model.save(&path).unwrap();
        let loaded = ModelState::load(&path).unwrap();

        assert_eq!(loaded.config, model.config);
        assert_eq!(loaded.provenance, model.provenance);
        for (a, b) in model.params.iter().zip(loaded.params.iter()) {
            assert_eq!(a.name, b.name);
            let bits_a: Vec<u32> = a.value.data().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u32> = b.value.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b, "{}", a.name);
        }
        for (a, b) in model.stats.iter().zip(loaded.stats.iter()) {
            assert_eq!(a.mean.data(), b.mean.data());
            assert_eq!(a.var.data(), b.var.data());
        }

        // Same forward results after reload.
        let x = Tensor::filled(&[2, 2, 64], -0.5f32);
        let p1 = model.forward_infer(&x).unwrap();
        let p2 = loaded.forward_infer(&x).unwrap();
        assert_eq!(p1.data(), p2.data());
    }

    #[test]
    fn saving_twice_produces_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
        let model = trained_ish_model();
        model.save(&p1).unwrap();
        model.save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        trained_ish_model().save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        for cut in [3usize, 20, bytes.len() / 2, bytes.len() - 5] {
            let truncated = dir.path().join(format!("cut{cut}.ckpt"));
            std::fs::write(&truncated, &bytes[..cut]).unwrap();
            assert!(
                ModelState::load(&truncated).is_err(),
                "cut at {cut} must fail"
            );
        }
    }

    #[test]
    fn tampered_config_is_rejected_by_digest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        trained_ish_model().save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Flip the branch count inside the config block (offset: magic 4 +
        // version 4 + length 4 + input_channels 4 + input_len 8 = 24).
        bytes[24] ^= 0x01;
        let tampered = dir.path().join("tampered.ckpt");
        std::fs::write(&tampered, &bytes).unwrap();
        match ModelState::load(&tampered) {
            Err(ModelError::Corrupt(msg)) => assert!(msg.contains("digest"), "{msg}"),
            other => panic!("expected digest failure, got {other:?}"),
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("not-a-model.ckpt");
        std::fs::write(&path, b"PNG\x00junkjunkjunk").unwrap();
        assert!(matches!(
            ModelState::load(&path),
            Err(ModelError::Corrupt(_))
        ));
    }
}
