//! Per-frame feature extraction: 80 Hz high-pass, magnitude spectrogram,
//! MFCCs with delta and acceleration channels, and four-band energy
//! summation, concatenated into a fixed 193-channel layout.

pub mod filter;
pub mod mfcc;
pub mod stft;

use crate::audio::Recording;
use crate::error::{Error, Result};
use crate::STANDARD_SAMPLES;
use filter::{butterworth_highpass, run_cascade};
use mfcc::{mfcc_features, MfccFrames};
use std::io::{Read, Write};
use std::path::Path;
use stft::{bin_frequency, stft_spectrogram, SPECTRUM_BINS};

/// High-pass cutoff applied before any analysis, in Hz.
pub const HIGHPASS_CUTOFF_HZ: f64 = 80.0;
/// High-pass filter order.
pub const HIGHPASS_ORDER: usize = 4;

/// Energy-summation bands in Hz, half-open `[lo, hi)`.
pub const ENERGY_BANDS: [(f64, f64); 4] =
    [(0.0, 250.0), (250.0, 500.0), (500.0, 1000.0), (0.0, 2000.0)];

/// Channel layout of the feature matrix. Order is fixed: spectrogram
/// magnitudes, MFCC static, MFCC delta, MFCC acceleration, band energies.
pub mod channels {
    use super::{mfcc, stft};
    use std::ops::Range;

    pub const SPECTROGRAM: Range<usize> = 0..stft::SPECTRUM_BINS;
    pub const MFCC_STATIC: Range<usize> = 129..129 + mfcc::NUM_COEFFS;
    pub const MFCC_DELTA: Range<usize> = 149..149 + mfcc::NUM_COEFFS;
    pub const MFCC_ACCEL: Range<usize> = 169..169 + mfcc::NUM_COEFFS;
    pub const BAND_ENERGY: Range<usize> = 189..193;
    pub const TOTAL: usize = 193;

    /// Human-readable name of one channel.
    pub fn name(c: usize) -> String {
        if SPECTROGRAM.contains(&c) {
            format!("spec{}", c)
        } else if MFCC_STATIC.contains(&c) {
            format!("mfcc{}", c - MFCC_STATIC.start)
        } else if MFCC_DELTA.contains(&c) {
            format!("delta{}", c - MFCC_DELTA.start)
        } else if MFCC_ACCEL.contains(&c) {
            format!("accel{}", c - MFCC_ACCEL.start)
        } else if BAND_ENERGY.contains(&c) {
            format!("band{}", c - BAND_ENERGY.start)
        } else {
            format!("invalid{}", c)
        }
    }
}

/// Row-major per-frame feature matrix (`frames x 193`).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub frames: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(frames: usize, channels: usize) -> Self {
        FeatureMatrix {
            frames,
            channels,
            data: vec![0.0; frames * channels],
        }
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.channels..(frame + 1) * self.channels]
    }

    pub fn row_mut(&mut self, frame: usize) -> &mut [f64] {
        &mut self.data[frame * self.channels..(frame + 1) * self.channels]
    }
}

/// Apply the 80 Hz 4th-order Butterworth high-pass, causally.
pub fn highpass(samples: &[f64], cutoff_hz: f64) -> Vec<f64> {
    let sections = butterworth_highpass(HIGHPASS_ORDER, cutoff_hz, crate::SAMPLE_RATE as f64);
    run_cascade(&sections, samples)
}

/// Per-frame summed power in the four fixed bands. The input is the
/// one-sided magnitude spectrogram; a bin belongs to a band when its
/// center frequency lies in `[lo, hi)`.
pub fn energy_summation(spec: &stft::SpectrogramFrames) -> Result<Vec<[f64; 4]>> {
    if spec.data.len() != spec.frames * SPECTRUM_BINS {
        return Err(Error::ShapeMismatch(format!(
            "spectrogram has {} values for {} frames of {} bins",
            spec.data.len(),
            spec.frames,
            SPECTRUM_BINS
        )));
    }
    let band_bins: Vec<Vec<usize>> = ENERGY_BANDS
        .iter()
        .map(|&(lo, hi)| {
            (0..SPECTRUM_BINS)
                .filter(|&b| {
                    let f = bin_frequency(b);
                    lo <= f && f < hi
                })
                .collect()
        })
        .collect();
    Ok((0..spec.frames)
        .map(|k| {
            let row = spec.row(k);
            let mut out = [0.0; 4];
            for (slot, bins) in out.iter_mut().zip(&band_bins) {
                *slot = bins.iter().map(|&b| row[b] * row[b]).sum();
            }
            out
        })
        .collect())
}

/// Per-channel standardization statistics, fitted on training data only.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Identity statistics (mean 0, std 1).
    pub fn identity(channels: usize) -> Self {
        NormStats {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    /// Fit per-channel mean and (population) standard deviation over all
    /// frames of all matrices.
    pub fn fit<'a, I: IntoIterator<Item = &'a FeatureMatrix>>(matrices: I) -> Result<NormStats> {
        let mut count = 0u64;
        let mut mean: Vec<f64> = Vec::new();
        let mut m2: Vec<f64> = Vec::new();
        for m in matrices {
            if mean.is_empty() {
                mean = vec![0.0; m.channels];
                m2 = vec![0.0; m.channels];
            } else if mean.len() != m.channels {
                return Err(Error::ShapeMismatch(format!(
                    "norm fit over matrices with {} and {} channels",
                    mean.len(),
                    m.channels
                )));
            }
            for k in 0..m.frames {
                count += 1;
                let n = count as f64;
                for (c, &x) in m.row(k).iter().enumerate() {
                    let delta = x - mean[c];
                    mean[c] += delta / n;
                    m2[c] += delta * (x - mean[c]);
                }
            }
        }
        if count == 0 {
            return Err(Error::EmptyDataset("no frames to fit normalization".into()));
        }
        let std = m2.iter().map(|&v| (v / count as f64).sqrt()).collect();
        Ok(NormStats { mean, std })
    }

    /// Standardize in place: `(x - mean) / max(std, 1e-8)`.
    pub fn apply(&self, m: &mut FeatureMatrix) -> Result<()> {
        if m.channels != self.mean.len() {
            return Err(Error::ShapeMismatch(format!(
                "normalizing {} channels with {}-channel stats",
                m.channels,
                self.mean.len()
            )));
        }
        for k in 0..m.frames {
            let row = m.row_mut(k);
            for (c, x) in row.iter_mut().enumerate() {
                *x = (*x - self.mean[c]) / self.std[c].max(1e-8);
            }
        }
        Ok(())
    }
}

/// Full feature pipeline for one standardized recording: high-pass,
/// spectrogram, MFCCs, band energies, fixed-order concatenation, and
/// optional per-channel standardization.
pub fn extract_features(rec: &Recording, norm: Option<&NormStats>) -> Result<FeatureMatrix> {
    if rec.samples.len() != STANDARD_SAMPLES {
        return Err(Error::ShapeMismatch(format!(
            "expected a standardized {STANDARD_SAMPLES}-sample recording, got {} samples",
            rec.samples.len()
        )));
    }
    let filtered = highpass(&rec.samples, HIGHPASS_CUTOFF_HZ);
    extract_features_from_samples(&filtered, norm)
}

/// Feature extraction minus the high-pass stage; used on pre-filtered
/// samples. Exposed for tests that study individual stages.
pub fn extract_features_from_samples(
    samples: &[f64],
    norm: Option<&NormStats>,
) -> Result<FeatureMatrix> {
    let spec = stft_spectrogram(samples)?;
    let mfcc: MfccFrames = mfcc_features(samples)?;
    let energies = energy_summation(&spec)?;

    let frames = spec.frames;
    let mut out = FeatureMatrix::zeros(frames, channels::TOTAL);
    for (k, bands) in energies.iter().enumerate() {
        let row = out.row_mut(k);
        row[channels::SPECTROGRAM].copy_from_slice(spec.row(k));
        row[channels::MFCC_STATIC.start..channels::MFCC_ACCEL.end].copy_from_slice(mfcc.row(k));
        row[channels::BAND_ENERGY].copy_from_slice(bands);
    }
    if let Some(norm) = norm {
        norm.apply(&mut out)?;
    }
    Ok(out)
}

const FEATURE_MAGIC: &[u8; 4] = b"LKFT";
const FEATURE_VERSION: u32 = 1;

/// Write the binary feature cache: magic `LKFT`, u32 version, u32 frames,
/// u32 channels, then row-major IEEE-754 32-bit little-endian values.
pub fn write_feature_file(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + m.data.len() * 4);
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.frames as u32).to_le_bytes());
    buf.extend_from_slice(&(m.channels as u32).to_le_bytes());
    for &v in &m.data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Read a feature cache written by [`write_feature_file`].
pub fn read_feature_file(path: &Path) -> Result<FeatureMatrix> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[0..4] != FEATURE_MAGIC {
        return Err(Error::VersionMismatch(format!(
            "{}: not a feature file",
            path.display()
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    if u32_at(4) != FEATURE_VERSION {
        return Err(Error::VersionMismatch(format!(
            "{}: feature file version {}",
            path.display(),
            u32_at(4)
        )));
    }
    let frames = u32_at(8) as usize;
    let channels = u32_at(12) as usize;
    let expected = 16 + frames * channels * 4;
    if bytes.len() != expected {
        return Err(Error::Corrupt(format!(
            "{}: expected {expected} bytes, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Ok(FeatureMatrix {
        frames,
        channels,
        data,
    })
}
