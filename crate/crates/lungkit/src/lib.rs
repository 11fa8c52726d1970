//! Lung-sound analysis toolkit.
//!
//! `lungkit` turns 15-second auscultation recordings into timed breath-phase
//! and adventitious-sound events and scores them against ground-truth labels:
//!
//! 1. [`audio`] reads and length-standardizes 4 kHz / 16-bit mono recordings.
//! 2. [`dsp`] extracts the per-frame feature matrix (spectrogram, MFCCs with
//!    delta and acceleration channels, band energies) — 934 x 193 for 15 s.
//! 3. [`nnet`] runs a CNN-BiGRU per-frame detector, trained from scratch with
//!    exact analytic gradients.
//! 4. [`postprocess`] converts frame probabilities into timed events.
//! 5. [`evaluation`] scores segment and event detection with F1, matching
//!    events by Jaccard index.
//! 6. [`labels`], [`dataset`], and [`synth`] cover annotation parsing and
//!    interval algebra, leakage-free subject splits with repeated k-fold
//!    planning, and synthetic test-corpus generation.
//!
//! The `lungkit` binary exposes one subcommand per pipeline stage; the
//! crate's `examples/` directory has a runnable walkthrough per capability.

pub mod audio;
pub mod cli;
pub mod corpus;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod evaluation;
pub mod labels;
pub mod nnet;
pub mod postprocess;
pub mod synth;

pub use error::{Error, Result};

/// Sample rate every recording must use, in Hz.
pub const SAMPLE_RATE: u32 = 4000;

/// Samples in a standardized 15-second recording.
pub const STANDARD_SAMPLES: usize = 60_000;

/// STFT analysis window length in samples.
pub const WINDOW_SIZE: usize = 256;

/// STFT hop length in samples.
pub const HOP_SIZE: usize = 64;

/// Seconds per feature frame (`HOP_SIZE / SAMPLE_RATE`).
pub const FRAME_HOP_SECS: f64 = HOP_SIZE as f64 / SAMPLE_RATE as f64;

/// Frames produced by a signal of `n` samples (window 256, hop 64, no padding).
pub fn frame_count(n: usize) -> usize {
    if n < WINDOW_SIZE {
        0
    } else {
        (n - WINDOW_SIZE) / HOP_SIZE + 1
    }
}
