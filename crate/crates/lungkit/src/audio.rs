//! Reading, validating, and length-standardizing lung-sound recordings.
//!
//! Source recordings are PCM mono WAV at 4000 Hz / 16 bits. Littmann 3200
//! files arrive as 15.8 s (63200 samples) and lose their terminal 0.8 s;
//! HF-Type-1 files arrive as 2-minute multichannel excerpts whose first
//! 15 s are kept. Everything downstream sees exactly 60000 samples.

use crate::error::{Error, Result};
use crate::{SAMPLE_RATE, STANDARD_SAMPLES};
use regex::Regex;
use std::path::Path;

/// Recording device. Determines the raw file length convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Device {
    Littmann3200,
    HfType1,
}

impl Device {
    pub fn as_str(&self) -> &'static str {
        match self {
            Device::Littmann3200 => "Littmann3200",
            Device::HfType1 => "HF-Type-1",
        }
    }
}

/// Metadata recovered from the file name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecordingMeta {
    pub subject_id: Option<String>,
    pub device: Option<Device>,
    /// Auscultation-site code, e.g. `L1`.
    pub location: Option<String>,
    /// Recording timestamp as written in the file name.
    pub recorded_at: Option<String>,
}

/// A mono recording at 4000 Hz with amplitudes in `[-1, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub bit_depth: u16,
    pub meta: RecordingMeta,
}

impl Recording {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        Recording {
            samples,
            sample_rate: SAMPLE_RATE,
            bit_depth: 16,
            meta: RecordingMeta::default(),
        }
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// True once the recording holds exactly the standard 60000 samples.
    pub fn is_standard_length(&self) -> bool {
        self.samples.len() == STANDARD_SAMPLES
    }

    /// True for raw-length recordings (15.8 s Littmann, 2 min HF-Type-1,
    /// or anything else over 15 s) that still need [`standardize_length`].
    pub fn needs_truncation(&self) -> bool {
        self.samples.len() > STANDARD_SAMPLES
    }
}

/// File-name convention: `<source>_<subjectID>_<location>_<datetime>.wav`.
/// The pattern is configurable because archive layouts vary; it must
/// expose the named groups `source`, `subject`, `location`, `datetime`.
pub const DEFAULT_NAME_PATTERN: &str =
    r"^(?P<source>[^_]+)_(?P<subject>[^_]+)_(?P<location>[^_]+)_(?P<datetime>.+)$";

/// Compiled file-name metadata parser.
#[derive(Clone, Debug)]
pub struct NamePattern {
    regex: Regex,
}

impl NamePattern {
    pub fn new(pattern: &str) -> Result<Self> {
        let regex = Regex::new(pattern)
            .map_err(|e| Error::ConfigInvalid(format!("bad name pattern: {e}")))?;
        Ok(NamePattern { regex })
    }

    pub fn default_pattern() -> Self {
        NamePattern::new(DEFAULT_NAME_PATTERN).expect("default pattern compiles")
    }

    /// Parse metadata from a file stem. Returns `MetadataParse` when the
    /// stem does not match; callers treat that as a warning, not a failure.
    pub fn parse(&self, stem: &str) -> Result<RecordingMeta> {
        let caps = self
            .regex
            .captures(stem)
            .ok_or_else(|| Error::MetadataParse(stem.to_string()))?;
        let get = |name: &str| caps.name(name).map(|m| m.as_str().to_string());
        Ok(RecordingMeta {
            subject_id: get("subject"),
            device: get("source").as_deref().and_then(parse_device_token),
            location: get("location"),
            recorded_at: get("datetime"),
        })
    }
}

/// Map the `<source>` token to a device. `steth`/`littmann*`/`l3200` are
/// the Littmann 3200; `hf*` tokens are the HF-Type-1.
pub fn parse_device_token(token: &str) -> Option<Device> {
    let t = token.to_ascii_lowercase();
    if t == "steth" || t == "l3200" || t.starts_with("littmann") {
        Some(Device::Littmann3200)
    } else if t.starts_with("hf") {
        Some(Device::HfType1)
    } else {
        None
    }
}

/// Read a PCM mono 16-bit 4000 Hz WAV file. Metadata is parsed from the
/// file name with `pattern`; a non-matching name leaves the metadata
/// unknown and records a warning instead of failing.
pub fn read_wav(path: &Path, pattern: &NamePattern) -> Result<(Recording, Vec<String>)> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedFormat(format!("{}: {other}", path.display())),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: expected mono, got {} channels",
            path.display(),
            spec.channels
        )));
    }
    if spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::UnsupportedFormat(format!(
            "{}: expected 16-bit integer PCM, got {}-bit {:?}",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::UnsupportedFormat(format!(
            "{}: expected {SAMPLE_RATE} Hz, got {} Hz",
            path.display(),
            spec.sample_rate
        )));
    }
    let samples: Vec<f64> = reader
        .into_samples::<i16>()
        .map(|s| {
            s.map(|v| f64::from(v) / 32768.0)
                .map_err(|e| Error::UnsupportedFormat(format!("{}: {e}", path.display())))
        })
        .collect::<Result<_>>()?;

    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    let mut warnings = Vec::new();
    let meta = match pattern.parse(stem) {
        Ok(meta) => meta,
        Err(Error::MetadataParse(s)) => {
            warnings.push(format!(
                "file name `{s}` does not match the metadata pattern"
            ));
            RecordingMeta::default()
        }
        Err(e) => return Err(e),
    };

    Ok((
        Recording {
            samples,
            sample_rate: SAMPLE_RATE,
            bit_depth: 16,
            meta,
        },
        warnings,
    ))
}

/// Write a recording as PCM mono 16-bit WAV. Amplitudes are scaled by
/// 32768 and clamped to the i16 range, the exact inverse of [`read_wav`]
/// for in-range values.
pub fn write_wav(path: &Path, rec: &Recording) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: rec.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let as_io = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedFormat(format!("{}: {other}", path.display())),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(as_io)?;
    for &s in &rec.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(as_io)?;
    }
    writer.finalize().map_err(as_io)
}

/// Truncate a recording to the first 60000 samples (15 s). Covers both
/// raw conventions: 15.8-s Littmann files lose the terminal 0.8 s, and
/// 2-minute HF-Type-1 excerpts keep their first 15 s. An exactly-standard
/// input is returned unchanged.
pub fn standardize_length(mut rec: Recording) -> Result<Recording> {
    if rec.samples.len() < STANDARD_SAMPLES {
        return Err(Error::TooShort {
            got: rec.samples.len(),
            need: STANDARD_SAMPLES,
        });
    }
    rec.samples.truncate(STANDARD_SAMPLES);
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| ((i % 2000) as f64 - 1000.0) / 2048.0)
            .collect()
    }

    #[test]
    fn littmann_length_is_truncated() {
        let rec = Recording::from_samples(ramp(63_200));
        assert!(rec.needs_truncation());
        let out = standardize_length(rec.clone()).unwrap();
        assert_eq!(out.samples.len(), STANDARD_SAMPLES);
        assert_eq!(out.samples[..], rec.samples[..STANDARD_SAMPLES]);
        assert!(!out.needs_truncation());
    }

    #[test]
    fn two_minute_recording_keeps_first_15s() {
        let out = standardize_length(Recording::from_samples(ramp(480_000))).unwrap();
        assert_eq!(out.samples.len(), STANDARD_SAMPLES);
    }

    #[test]
    fn standard_input_unchanged() {
        let rec = Recording::from_samples(ramp(STANDARD_SAMPLES));
        let out = standardize_length(rec.clone()).unwrap();
        assert_eq!(out, rec);
    }

    #[test]
    fn standardize_is_idempotent() {
        let once = standardize_length(Recording::from_samples(ramp(63_200))).unwrap();
        let twice = standardize_length(once.clone()).unwrap();
        assert_eq!(once, twice);
        assert!((once.duration_secs() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn short_input_rejected() {
        let err = standardize_length(Recording::from_samples(ramp(59_999))).unwrap_err();
        assert!(matches!(err, Error::TooShort { got: 59_999, .. }));
    }

    #[test]
    fn wav_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("steth_SUB1_L1_20200101T000000.wav");
        // Every value an exact multiple of 1/32768 so quantization is lossless.
        let samples: Vec<f64> = (-32768i32..32768)
            .step_by(7)
            .map(|v| f64::from(v) / 32768.0)
            .collect();
        let rec = Recording::from_samples(samples);
        write_wav(&path, &rec).unwrap();
        let (back, warnings) = read_wav(&path, &NamePattern::default_pattern()).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(back.samples, rec.samples);
        assert_eq!(back.meta.subject_id.as_deref(), Some("SUB1"));
        assert_eq!(back.meta.device, Some(Device::Littmann3200));
        assert_eq!(back.meta.location.as_deref(), Some("L1"));
    }

    #[test]
    fn raw_littmann_file_reads_and_flags_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("steth_S9_L2_t.wav");
        write_wav(&path, &Recording::from_samples(ramp(63_200))).unwrap();
        let (rec, _) = read_wav(&path, &NamePattern::default_pattern()).unwrap();
        assert_eq!(rec.samples.len(), 63_200);
        assert!(rec.needs_truncation());
        assert!(rec.samples.iter().all(|s| (-1.0..1.0).contains(s)));
    }

    #[test]
    fn int16_extremes_map_symmetrically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hf1_S2_L3_x.wav");
        let rec = Recording::from_samples(vec![-1.0, 32767.0 / 32768.0, 0.0]);
        write_wav(&path, &rec).unwrap();
        let (back, _) = read_wav(&path, &NamePattern::default_pattern()).unwrap();
        assert_eq!(back.samples, rec.samples);
        assert_eq!(back.meta.device, Some(Device::HfType1));
    }

    #[test]
    fn wrong_rate_or_channels_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 44_100,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for _ in 0..100 {
            w.write_sample(0i16).unwrap();
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        let err = read_wav(&path, &NamePattern::default_pattern()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat(_)));
    }

    #[test]
    fn unparseable_name_warns_but_reads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("noseparators.wav");
        write_wav(&path, &Recording::from_samples(vec![0.0; 10])).unwrap();
        let (rec, warnings) = read_wav(&path, &NamePattern::default_pattern()).unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(rec.meta, RecordingMeta::default());
    }

    #[test]
    fn device_tokens() {
        assert_eq!(parse_device_token("steth"), Some(Device::Littmann3200));
        assert_eq!(
            parse_device_token("Littmann3200"),
            Some(Device::Littmann3200)
        );
        assert_eq!(parse_device_token("HF1"), Some(Device::HfType1));
        assert_eq!(parse_device_token("hftype1"), Some(Device::HfType1));
        assert_eq!(parse_device_token("mystery"), None);
    }
}
