//! Generate a small synthetic lung-sound corpus with exact ground-truth
//! labels: WAV files, sibling label files, and a manifest.
//!
//! Run with: `cargo run --example synthesize_corpus`

use lungkit::synth::{synth_corpus, synth_recording, SynthConfig, WheezeConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // One recording, inspected in memory.
    let config = SynthConfig {
        seed: 42,
        wheeze: Some(WheezeConfig::default()),
        ..Default::default()
    };
    let (recording, labels) = synth_recording(&config)?;
    println!(
        "single recording: {} samples ({:.1} s) at {} Hz",
        recording.samples.len(),
        recording.duration_secs(),
        recording.sample_rate
    );
    println!("labels:");
    for ev in &labels {
        println!("  {} {:6.3} .. {:6.3}", ev.kind, ev.start, ev.end);
    }

    // A corpus on disk: 16 recordings across 4 subjects.
    let out = std::env::temp_dir().join("lungkit_example_corpus");
    let manifest = synth_corpus(16, 4, 7, &out)?;
    println!("\ncorpus written to {}", out.display());
    for entry in manifest.entries.iter().take(4) {
        println!(
            "  {} (subject {}, seed {:#018x})",
            entry.file, entry.subject_id, entry.seed
        );
    }
    println!(
        "  ... {} files total, see manifest.csv",
        manifest.entries.len()
    );
    Ok(())
}
