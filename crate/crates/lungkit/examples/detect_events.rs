//! End-to-end detection on one recording: train a small model, run the
//! forward pass, postprocess frame probabilities into timed events, and
//! compare them with the ground truth.
//!
//! Run with: `cargo run --release --example detect_events`

use lungkit::dataset::{rasterize_events, Task};
use lungkit::dsp::extract_features;
use lungkit::labels::{derive_cas, LabelType};
use lungkit::nnet::{forward, train, Arch, TrainConfig, TrainSample};
use lungkit::postprocess::{segments_to_events, threshold_segments, PostprocessConfig};
use lungkit::synth::{synth_recording, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let task = Task::Inhalation;

    let samples: Vec<TrainSample> = (0..10)
        .map(|seed| {
            let (rec, labels) = synth_recording(&SynthConfig {
                seed,
                ..Default::default()
            })
            .unwrap();
            let features = extract_features(&rec, None).unwrap();
            let grid =
                rasterize_events(&derive_cas(&labels), task.label(), features.frames).unwrap();
            TrainSample { features, grid }
        })
        .collect();

    let config = TrainConfig {
        epochs: 6,
        batch_size: 4,
        learning_rate: 3e-3,
        seed: 5,
        arch: Arch {
            conv1_out: 16,
            conv2_out: 16,
            hidden: 12,
            ..Arch::default()
        },
        ..Default::default()
    };
    let model = train(task, &samples, &[], &config)?.final_params;

    // A fresh recording the model never saw.
    let (rec, truth) = synth_recording(&SynthConfig {
        seed: 999,
        ..Default::default()
    })?;
    let mut features = extract_features(&rec, None)?;
    model.norm.apply(&mut features)?;
    let probs = forward(&model, &features)?;

    let postprocess = PostprocessConfig::default();
    let grid = threshold_segments(&probs, &postprocess);
    let events = segments_to_events(&grid, &postprocess);

    println!("ground truth inhalations:");
    for ev in truth.iter().filter(|e| e.kind == LabelType::I) {
        println!("  {:6.3} .. {:6.3}", ev.start, ev.end);
    }
    println!("predicted events (threshold {:.2}):", postprocess.threshold);
    for (s, e) in &events {
        println!("  {s:6.3} .. {e:6.3}");
    }
    Ok(())
}
