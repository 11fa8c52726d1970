//! Turn one standardized recording into the 934 x 193 per-frame feature
//! matrix (spectrogram, MFCC + deltas + accelerations, band energies)
//! and round-trip it through the binary feature cache.
//!
//! Run with: `cargo run --example extract_features`

use lungkit::dsp::{channels, extract_features, read_feature_file, write_feature_file};
use lungkit::synth::{synth_recording, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (recording, _) = synth_recording(&SynthConfig {
        seed: 3,
        ..Default::default()
    })?;

    let features = extract_features(&recording, None)?;
    println!(
        "feature matrix: {} frames x {} channels",
        features.frames, features.channels
    );
    println!(
        "channel layout: spectrogram {:?}, mfcc {:?}, delta {:?}, accel {:?}, bands {:?}",
        channels::SPECTROGRAM,
        channels::MFCC_STATIC,
        channels::MFCC_DELTA,
        channels::MFCC_ACCEL,
        channels::BAND_ENERGY,
    );

    // Peak spectrogram bin of a mid-file frame.
    let frame = 400;
    let row = features.row(frame);
    let (bin, mag) = row[channels::SPECTROGRAM]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    println!(
        "frame {frame}: loudest spectrogram bin {bin} ({:.1} Hz), magnitude {mag:.3}",
        bin as f64 * 15.625
    );
    println!(
        "frame {frame}: band energies (0-250, 250-500, 500-1000, 0-2000 Hz) = {:?}",
        &row[channels::BAND_ENERGY]
    );

    let path = std::env::temp_dir().join("lungkit_example.ftr");
    write_feature_file(&path, &features)?;
    let back = read_feature_file(&path)?;
    println!(
        "cache round trip via {}: {} frames x {} channels (32-bit storage)",
        path.display(),
        back.frames,
        back.channels
    );
    Ok(())
}
