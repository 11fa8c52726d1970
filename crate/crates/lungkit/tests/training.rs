//! Training-dynamics fixture: a small model must be able to overfit a
//! handful of synthetic recordings, and the loss trace must be stable.

use lungkit::dataset::{rasterize_events, Task};
use lungkit::dsp::extract_features;
use lungkit::labels::derive_cas;
use lungkit::nnet::{train, Arch, TrainConfig, TrainSample};
use lungkit::synth::{synth_recording, SynthConfig};

fn synthetic_samples(task: Task, n: u64) -> Vec<TrainSample> {
    (0..n)
        .map(|seed| {
            let (rec, labels) = synth_recording(&SynthConfig {
                seed: 7000 + seed,
                ..Default::default()
            })
            .unwrap();
            let features = extract_features(&rec, None).unwrap();
            let grid =
                rasterize_events(&derive_cas(&labels), task.label(), features.frames).unwrap();
            TrainSample { features, grid }
        })
        .collect()
}

#[test]
fn overfits_ten_recordings_within_200_epochs() {
    let samples = synthetic_samples(Task::Inhalation, 10);
    let config = TrainConfig {
        epochs: 200,
        batch_size: 5,
        learning_rate: 3e-3,
        seed: 70,
        arch: Arch {
            conv1_out: 8,
            conv2_out: 8,
            hidden: 6,
            ..Arch::default()
        },
        ..Default::default()
    };
    let outcome = train(Task::Inhalation, &samples, &[], &config).unwrap();
    let last = outcome.log.last().unwrap().train_loss;
    assert!(
        last < 0.05,
        "overfit run should drive training loss below 0.05, got {last}"
    );

    // After the warmup epochs the trace is monotone non-increasing
    // within a small per-step tolerance.
    for window in outcome.log[5..].windows(2) {
        assert!(
            window[1].train_loss <= window[0].train_loss + 1e-3,
            "loss rose from {} to {} at epoch {}",
            window[0].train_loss,
            window[1].train_loss,
            window[1].epoch
        );
    }
}
