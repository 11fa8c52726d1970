//! Synthetic 15-second lung-sound recordings with exact ground-truth
//! labels, for end-to-end testing without clinical data.
//!
//! The sound classes are deliberately easy to separate: breath phases are
//! band-passed noise bursts (inhalation 100-1000 Hz and louder,
//! exhalation 60-700 Hz and softer), wheezes are harmonic tones overlaid
//! on a breath phase, and crackles are short damped impulses labeled as
//! one `D` event spanning the series. Event boundaries snap to the 16 ms
//! frame grid so labels and rendered energy agree exactly.

use crate::audio::{write_wav, Recording};
use crate::dsp::filter::{butterworth_highpass, butterworth_lowpass, run_cascade, Biquad};
use crate::error::{Error, Result};
use crate::labels::{write_label_file, LabelEvent, LabelType};
use crate::{FRAME_HOP_SECS, SAMPLE_RATE, STANDARD_SAMPLES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Which breath phase a wheeze rides on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BreathPhase {
    Inhale,
    Exhale,
}

/// Harmonic-tone wheeze parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WheezeConfig {
    /// Fundamental in `[200, 800]` Hz.
    pub fundamental_hz: f64,
    /// Number of harmonics above the fundamental.
    pub harmonics: usize,
    pub amplitude: f64,
    pub attach: BreathPhase,
}

impl Default for WheezeConfig {
    fn default() -> Self {
        WheezeConfig {
            fundamental_hz: 400.0,
            harmonics: 2,
            amplitude: 0.2,
            attach: BreathPhase::Exhale,
        }
    }
}

/// Damped-impulse crackle parameters. A series is labeled as one `D`
/// event from the first impulse to the end of the last.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrackleConfig {
    pub per_breath: usize,
    /// Exponential decay time constant in milliseconds.
    pub decay_ms: f64,
    pub amplitude: f64,
}

impl Default for CrackleConfig {
    fn default() -> Self {
        CrackleConfig {
            per_breath: 4,
            decay_ms: 3.0,
            amplitude: 0.5,
        }
    }
}

/// Full generator configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthConfig {
    pub breaths_per_minute: f64,
    pub inhale_secs: f64,
    pub exhale_secs: f64,
    /// Relative timing jitter in `[0, 0.5)`, applied per event.
    pub jitter: f64,
    pub wheeze: Option<WheezeConfig>,
    pub crackles: Option<CrackleConfig>,
    pub inhale_amplitude: f64,
    pub exhale_amplitude: f64,
    /// White-noise floor amplitude over the whole recording.
    pub noise_floor: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            breaths_per_minute: 15.0,
            inhale_secs: 1.0,
            exhale_secs: 1.2,
            jitter: 0.1,
            wheeze: None,
            crackles: None,
            inhale_amplitude: 0.3,
            exhale_amplitude: 0.15,
            noise_floor: 0.01,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.breaths_per_minute <= 0.0
            || self.inhale_secs <= 0.0
            || self.exhale_secs <= 0.0
            || !(0.0..0.5).contains(&self.jitter)
            || self.noise_floor < 0.0
            || self.inhale_amplitude <= 0.0
            || self.exhale_amplitude <= 0.0
        {
            return Err(Error::ConfigInvalid(format!("bad synth config {self:?}")));
        }
        if let Some(w) = &self.wheeze {
            if !(200.0..=800.0).contains(&w.fundamental_hz) || w.amplitude <= 0.0 {
                return Err(Error::ConfigInvalid(format!(
                    "wheeze fundamental {} Hz outside [200, 800]",
                    w.fundamental_hz
                )));
            }
        }
        if let Some(c) = &self.crackles {
            if c.per_breath == 0 || c.decay_ms <= 0.0 || c.amplitude <= 0.0 {
                return Err(Error::ConfigInvalid(format!("bad crackle config {c:?}")));
            }
        }
        Ok(())
    }
}

/// A rendered recording with its per-class source components, for tests
/// that compare labels against rendered energy.
pub struct SynthRender {
    pub recording: Recording,
    pub labels: Vec<LabelEvent>,
    /// Component signals in label order: I, E, W, D.
    pub components: [Vec<f64>; 4],
}

const TOTAL_SECS: f64 = 15.0;

fn snap_to_grid(t: f64) -> f64 {
    (t / FRAME_HOP_SECS).round() * FRAME_HOP_SECS
}

fn raised_cosine_envelope(len: usize) -> Vec<f64> {
    let ramp = (len / 4).min((0.05 * SAMPLE_RATE as f64) as usize).max(1);
    (0..len)
        .map(|i| {
            let up = if i < ramp {
                0.5 * (1.0 - (std::f64::consts::PI * i as f64 / ramp as f64).cos())
            } else {
                1.0
            };
            let down = if i >= len - ramp {
                let j = len - 1 - i;
                0.5 * (1.0 - (std::f64::consts::PI * j as f64 / ramp as f64).cos())
            } else {
                1.0
            };
            up * down
        })
        .collect()
}

/// Render band-passed enveloped noise into `out[start_idx..]`.
fn render_noise_burst(
    out: &mut [f64],
    start_idx: usize,
    len: usize,
    band: (f64, f64),
    amplitude: f64,
    rng: &mut ChaCha8Rng,
) {
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut sections: Vec<Biquad> = butterworth_highpass(2, band.0, SAMPLE_RATE as f64);
    sections.extend(butterworth_lowpass(2, band.1, SAMPLE_RATE as f64));
    let filtered = run_cascade(&sections, &raw);
    let env = raised_cosine_envelope(len);
    for i in 0..len {
        out[start_idx + i] += amplitude * filtered[i] * env[i];
    }
}

fn render_tone(out: &mut [f64], start_idx: usize, len: usize, w: &WheezeConfig, phase_offset: f64) {
    let env = raised_cosine_envelope(len);
    for i in 0..len {
        let t = i as f64 / SAMPLE_RATE as f64;
        let mut v = 0.0;
        for h in 0..=w.harmonics {
            let freq = w.fundamental_hz * (h + 1) as f64;
            if freq >= SAMPLE_RATE as f64 / 2.0 {
                break;
            }
            let amp = 1.0 / (1 << h) as f64;
            v += amp * (2.0 * std::f64::consts::PI * freq * t + phase_offset).sin();
        }
        out[start_idx + i] += w.amplitude * v * env[i];
    }
}

fn render_crackle(out: &mut [f64], start_idx: usize, decay_ms: f64, amplitude: f64) {
    let tau = decay_ms / 1000.0;
    let len = ((8.0 * tau) * SAMPLE_RATE as f64) as usize;
    for i in 0..len.min(out.len() - start_idx) {
        let t = i as f64 / SAMPLE_RATE as f64;
        out[start_idx + i] +=
            amplitude * (-t / tau).exp() * (2.0 * std::f64::consts::PI * 700.0 * t).sin();
    }
}

/// Generate one recording plus its exact labels and the per-class
/// component signals.
pub fn synth_recording_parts(config: &SynthConfig) -> Result<SynthRender> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut components = [
        vec![0.0f64; STANDARD_SAMPLES],
        vec![0.0f64; STANDARD_SAMPLES],
        vec![0.0f64; STANDARD_SAMPLES],
        vec![0.0f64; STANDARD_SAMPLES],
    ];
    let mut labels: Vec<LabelEvent> = Vec::new();

    let cycle_base = 60.0 / config.breaths_per_minute;
    let jit = |rng: &mut ChaCha8Rng, base: f64, j: f64| base * (1.0 + rng.random_range(-j..=j));
    let idx = |t: f64| (t * SAMPLE_RATE as f64).round() as usize;

    let mut cycle_start = snap_to_grid(0.192);
    loop {
        let inhale_d = snap_to_grid(jit(&mut rng, config.inhale_secs, config.jitter));
        let gap = snap_to_grid(0.2);
        let exhale_d = snap_to_grid(jit(&mut rng, config.exhale_secs, config.jitter));
        let cycle_d = snap_to_grid(jit(&mut rng, cycle_base, config.jitter));

        let inhale = (cycle_start, cycle_start + inhale_d);
        if inhale.1 > TOTAL_SECS {
            break;
        }
        labels.push(LabelEvent::new(LabelType::I, inhale.0, inhale.1));
        render_noise_burst(
            &mut components[0],
            idx(inhale.0),
            idx(inhale.1) - idx(inhale.0),
            (100.0, 1000.0),
            config.inhale_amplitude,
            &mut rng,
        );

        let exhale = (inhale.1 + gap, inhale.1 + gap + exhale_d);
        if exhale.1 <= TOTAL_SECS {
            labels.push(LabelEvent::new(LabelType::E, exhale.0, exhale.1));
            render_noise_burst(
                &mut components[1],
                idx(exhale.0),
                idx(exhale.1) - idx(exhale.0),
                (60.0, 700.0),
                config.exhale_amplitude,
                &mut rng,
            );
        }

        if let Some(w) = &config.wheeze {
            let host = match w.attach {
                BreathPhase::Inhale => Some(inhale),
                BreathPhase::Exhale => (exhale.1 <= TOTAL_SECS).then_some(exhale),
            };
            if let Some((s, e)) = host {
                labels.push(LabelEvent::new(LabelType::W, s, e));
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                render_tone(&mut components[2], idx(s), idx(e) - idx(s), w, phase);
            }
        }

        if let Some(c) = &config.crackles {
            // A crackle series inside the inhalation, one spanning D label.
            let impulse_len = 8.0 * c.decay_ms / 1000.0;
            let lo = inhale.0 + 0.05;
            let hi = inhale.1 - 0.05 - impulse_len;
            if hi > lo {
                let mut times: Vec<f64> = (0..c.per_breath)
                    .map(|_| rng.random_range(lo..hi))
                    .collect();
                times.sort_by(f64::total_cmp);
                for &t in &times {
                    render_crackle(&mut components[3], idx(t), c.decay_ms, c.amplitude);
                }
                // Snap outward so every impulse stays inside the label.
                let d_start = (times[0] / FRAME_HOP_SECS).floor() * FRAME_HOP_SECS;
                let d_end = (((times[c.per_breath - 1] + impulse_len) / FRAME_HOP_SECS).ceil())
                    * FRAME_HOP_SECS;
                labels.push(LabelEvent::new(
                    LabelType::D,
                    d_start,
                    d_end.min(TOTAL_SECS),
                ));
            }
        }

        cycle_start += cycle_d;
        if cycle_start >= TOTAL_SECS {
            break;
        }
    }

    let mut samples = vec![0.0f64; STANDARD_SAMPLES];
    for comp in &components {
        for (s, &c) in samples.iter_mut().zip(comp) {
            *s += c;
        }
    }
    if config.noise_floor > 0.0 {
        for s in &mut samples {
            *s += rng.random_range(-config.noise_floor..config.noise_floor);
        }
    }
    for s in &mut samples {
        *s = s.clamp(-1.0, 32767.0 / 32768.0);
    }

    labels.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
    Ok(SynthRender {
        recording: Recording::from_samples(samples),
        labels,
        components,
    })
}

/// Generate one recording and its labels.
pub fn synth_recording(config: &SynthConfig) -> Result<(Recording, Vec<LabelEvent>)> {
    let render = synth_recording_parts(config)?;
    Ok((render.recording, render.labels))
}

/// One manifest row of a generated corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub file: String,
    pub subject_id: String,
    pub seed: u64,
    pub config_hash: u32,
}

/// Corpus manifest written as `manifest.csv`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SynthManifest {
    pub entries: Vec<ManifestEntry>,
}

impl SynthManifest {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("file,subject_id,seed,config_hash\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{},{:08x}\n",
                e.file, e.subject_id, e.seed, e.config_hash
            ));
        }
        s
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the per-file seed for corpus entry `i` from the base seed.
pub fn derive_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(index.wrapping_add(1)))
}

/// Generate `n` recordings across `subjects` synthetic subjects, writing
/// WAV plus sibling label files and a `manifest.csv` into `out_dir`.
/// Roughly half the files carry wheezes and half carry crackles, decided
/// by the per-file seed.
pub fn synth_corpus(
    n: usize,
    subjects: usize,
    base_seed: u64,
    out_dir: &Path,
) -> Result<SynthManifest> {
    if n > 0 && subjects == 0 {
        return Err(Error::ConfigInvalid("subjects must be positive".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut manifest = SynthManifest::default();
    for i in 0..n {
        let seed = derive_seed(base_seed, i as u64);
        let mut feature_rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
        let subject = i % subjects;
        let mut config = SynthConfig {
            seed,
            breaths_per_minute: 12.0 + (subject % 5) as f64 * 1.5,
            ..Default::default()
        };
        if feature_rng.random_bool(0.5) {
            config.wheeze = Some(WheezeConfig {
                fundamental_hz: 250.0 + feature_rng.random_range(0.0..500.0),
                ..Default::default()
            });
        }
        if feature_rng.random_bool(0.5) {
            config.crackles = Some(CrackleConfig::default());
        }
        let (recording, labels) = synth_recording(&config)?;

        let source = if subject.is_multiple_of(2) {
            "steth"
        } else {
            "HF1"
        };
        let subject_id = format!("S{subject:03}");
        let location = format!("L{}", 1 + (i / subjects) % 8);
        let datetime = format!(
            "20200101T{:02}{:02}{:02}",
            (i / 3600) % 24,
            (i / 60) % 60,
            i % 60
        );
        let stem = format!("{source}_{subject_id}_{location}_{datetime}");
        write_wav(&out_dir.join(format!("{stem}.wav")), &recording)?;
        write_label_file(&out_dir.join(format!("{stem}_label.txt")), &labels)?;

        let config_hash = crc32fast::hash(format!("{config:?}").as_bytes());
        manifest.entries.push(ManifestEntry {
            file: format!("{stem}.wav"),
            subject_id,
            seed,
            config_hash,
        });
    }
    std::fs::write(out_dir.join("manifest.csv"), manifest.to_csv())
        .map_err(|e| Error::io(out_dir.join("manifest.csv"), e))?;
    Ok(manifest)
}
