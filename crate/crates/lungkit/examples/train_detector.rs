//! Train an inhalation detector on synthetic recordings and watch the
//! per-epoch losses. Small architecture, seconds of runtime.
//!
//! Run with: `cargo run --release --example train_detector`

use lungkit::dataset::{rasterize_events, Task};
use lungkit::dsp::extract_features;
use lungkit::labels::derive_cas;
use lungkit::nnet::{train, Arch, TrainConfig, TrainSample};
use lungkit::synth::{synth_recording, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let task = Task::Inhalation;
    let make_samples =
        |seeds: std::ops::Range<u64>| -> Result<Vec<TrainSample>, Box<dyn std::error::Error>> {
            seeds
                .map(|seed| {
                    let (rec, labels) = synth_recording(&SynthConfig {
                        seed,
                        ..Default::default()
                    })?;
                    let features = extract_features(&rec, None)?;
                    let grid =
                        rasterize_events(&derive_cas(&labels), task.label(), features.frames)?;
                    Ok(TrainSample { features, grid })
                })
                .collect()
        };
    let train_samples = make_samples(0..12)?;
    let val_samples = make_samples(100..103)?;
    println!(
        "{} training and {} validation recordings",
        train_samples.len(),
        val_samples.len()
    );

    let config = TrainConfig {
        epochs: 6,
        batch_size: 4,
        learning_rate: 3e-3,
        seed: 11,
        arch: Arch {
            conv1_out: 16,
            conv2_out: 16,
            hidden: 12,
            ..Arch::default()
        },
        ..Default::default()
    };
    let outcome = train(task, &train_samples, &val_samples, &config)?;
    println!("epoch  train_loss  val_loss");
    for e in &outcome.log {
        println!(
            "{:5}  {:10.4}  {:8.4}",
            e.epoch,
            e.train_loss,
            e.val_loss.unwrap_or(f64::NAN)
        );
    }
    println!(
        "best validation epoch: {:?}; model has {} parameters",
        outcome.best_epoch,
        outcome.best_params.param_count()
    );
    Ok(())
}
