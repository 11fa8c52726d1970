//! Model persistence.
//!
//! Layout (all little-endian): magic `LKMD`, u32 version, u8 task tag
//! (ASCII `I`/`E`/`C`/`D`), five u32 architecture dimensions (input
//! channels, conv1 out, conv2 out, kernel, hidden), u32 normalization
//! channel count followed by mean and std as f32, every tensor in
//! flattening order as f32, and a trailing CRC32 of all preceding bytes.

use super::{Arch, ModelParams};
use crate::dataset::Task;
use crate::dsp::NormStats;
use crate::error::{Error, Result};
use std::path::Path;

const MODEL_MAGIC: &[u8; 4] = b"LKMD";
const MODEL_VERSION: u32 = 1;

fn task_tag(task: Task) -> u8 {
    task.as_str().as_bytes()[0]
}

fn task_from_tag(tag: u8) -> Option<Task> {
    Task::parse(std::str::from_utf8(&[tag]).ok()?)
}

/// Serialize a model. Tensors are stored as IEEE-754 32-bit values, so
/// reloading quantizes double-precision training parameters once; a
/// second save/load round trip is bit-exact.
pub fn save_model(params: &ModelParams, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.push(task_tag(params.task));
    let a = &params.arch;
    for dim in [a.in_channels, a.conv1_out, a.conv2_out, a.kernel, a.hidden] {
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(params.norm.mean.len() as u32).to_le_bytes());
    for &v in params.norm.mean.iter().chain(&params.norm.std) {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    for &v in &params.flatten() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    std::fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

/// Load a model saved by [`save_model`], verifying magic, version, and
/// checksum.
pub fn load_model(path: &Path) -> Result<ModelParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 || &bytes[0..4] != MODEL_MAGIC {
        return Err(Error::VersionMismatch(format!(
            "{}: not a model file",
            path.display()
        )));
    }
    let u32_at = |o: usize| -> Result<u32> {
        bytes
            .get(o..o + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| Error::Corrupt(format!("{}: truncated header", path.display())))
    };
    let version = u32_at(4)?;
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch(format!(
            "{}: model file version {version}, expected {MODEL_VERSION}",
            path.display()
        )));
    }
    if bytes.len() < 4 {
        return Err(Error::Corrupt(format!("{}: too short", path.display())));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored_crc = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    if crc32fast::hash(body) != stored_crc {
        return Err(Error::Corrupt(format!(
            "{}: checksum mismatch",
            path.display()
        )));
    }

    let task = bytes
        .get(8)
        .copied()
        .and_then(task_from_tag)
        .ok_or_else(|| Error::Corrupt(format!("{}: bad task tag", path.display())))?;
    let dims: Vec<usize> = (0..5)
        .map(|i| u32_at(9 + 4 * i).map(|v| v as usize))
        .collect::<Result<_>>()?;
    let arch = Arch {
        in_channels: dims[0],
        conv1_out: dims[1],
        conv2_out: dims[2],
        kernel: dims[3],
        hidden: dims[4],
    };
    arch.validate()
        .map_err(|_| Error::Corrupt(format!("{}: invalid architecture header", path.display())))?;
    let norm_channels = u32_at(29)? as usize;

    let floats_start = 33;
    let n_norm = 2 * norm_channels;
    let n_tensor: usize = ModelParams::tensor_specs(&arch)
        .iter()
        .map(|(_, l)| l)
        .sum();
    let expected_len = floats_start + 4 * (n_norm + n_tensor) + 4;
    if bytes.len() != expected_len {
        return Err(Error::Corrupt(format!(
            "{}: expected {expected_len} bytes, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let f32_at = |idx: usize| -> f64 {
        let o = floats_start + 4 * idx;
        f64::from(f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()))
    };
    let mean: Vec<f64> = (0..norm_channels).map(&f32_at).collect();
    let std: Vec<f64> = (norm_channels..2 * norm_channels).map(&f32_at).collect();
    let flat: Vec<f64> = (n_norm..n_norm + n_tensor).map(&f32_at).collect();

    let mut params = ModelParams::zeros(task, arch, NormStats { mean, std })?;
    params.assign_from_flat(&flat)?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::super::tests::small_arch;
    use super::*;

    fn sample_model() -> ModelParams {
        let norm = NormStats {
            mean: (0..6).map(|i| i as f64 * 0.25).collect(),
            std: (0..6).map(|i| 1.0 + i as f64 * 0.5).collect(),
        };
        ModelParams::init(Task::Cas, small_arch(), norm, 7).unwrap()
    }

    #[test]
    fn round_trip_is_stable_after_first_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.lkmd");
        let p2 = dir.path().join("b.lkmd");
        let original = sample_model();
        save_model(&original, &p1).unwrap();
        let once = load_model(&p1).unwrap();
        assert_eq!(once.task, original.task);
        assert_eq!(once.arch, original.arch);
        // One f64 -> f32 quantization, then bitwise stability.
        save_model(&once, &p2).unwrap();
        let twice = load_model(&p2).unwrap();
        assert_eq!(once, twice);
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.lkmd");
        save_model(&sample_model(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Corrupt(_))));
    }

    #[test]
    fn flipped_payload_bit_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.lkmd");
        save_model(&sample_model(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Corrupt(_))));
    }

    #[test]
    fn wrong_magic_is_version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.lkmd");
        std::fs::write(&path, b"XXXX0123456789").unwrap();
        assert!(matches!(load_model(&path), Err(Error::VersionMismatch(_))));
    }

    #[test]
    fn wrong_version_is_version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.lkmd");
        save_model(&sample_model(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9;
        // Keep the checksum valid so the version check is what fires.
        let crc = crc32fast::hash(&bytes[..bytes.len() - 4]);
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_model(&path), Err(Error::VersionMismatch(_))));
    }
}
