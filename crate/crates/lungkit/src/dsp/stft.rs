//! Short-time Fourier transform with a 256-sample Hann window, hop 64,
//! and no zero padding.

use crate::error::{Error, Result};
use crate::{frame_count, HOP_SIZE, WINDOW_SIZE};
use rustfft::{num_complex::Complex, FftPlanner};
use std::f64::consts::PI;

/// One-sided bin count: `WINDOW_SIZE / 2 + 1`.
pub const SPECTRUM_BINS: usize = WINDOW_SIZE / 2 + 1;

/// Center frequency of a spectrogram bin in Hz (bin width 15.625 Hz).
pub fn bin_frequency(bin: usize) -> f64 {
    bin as f64 * crate::SAMPLE_RATE as f64 / WINDOW_SIZE as f64
}

/// Periodic Hann window of length `WINDOW_SIZE`.
pub fn hann_window() -> Vec<f64> {
    (0..WINDOW_SIZE)
        .map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / WINDOW_SIZE as f64).cos()))
        .collect()
}

/// One-sided magnitude spectrogram, row-major `frames x 129`. Frame `k`
/// windows samples `[64k, 64k + 256)`.
pub fn stft_spectrogram(samples: &[f64]) -> Result<SpectrogramFrames> {
    if samples.len() < WINDOW_SIZE {
        return Err(Error::TooShort {
            got: samples.len(),
            need: WINDOW_SIZE,
        });
    }
    let frames = frame_count(samples.len());
    let window = hann_window();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(WINDOW_SIZE);

    let mut data = vec![0.0f64; frames * SPECTRUM_BINS];
    let mut buf = vec![Complex::new(0.0, 0.0); WINDOW_SIZE];
    for k in 0..frames {
        let start = k * HOP_SIZE;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(samples[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        let row = &mut data[k * SPECTRUM_BINS..(k + 1) * SPECTRUM_BINS];
        for (b, slot) in row.iter_mut().enumerate() {
            *slot = buf[b].norm();
        }
    }
    Ok(SpectrogramFrames { frames, data })
}

/// Row-major magnitude frames produced by [`stft_spectrogram`].
#[derive(Clone, Debug)]
pub struct SpectrogramFrames {
    pub frames: usize,
    /// `frames * SPECTRUM_BINS` magnitudes.
    pub data: Vec<f64>,
}

impl SpectrogramFrames {
    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * SPECTRUM_BINS..(frame + 1) * SPECTRUM_BINS]
    }

    pub fn argmax_bin(&self, frame: usize) -> usize {
        let row = self.row(frame);
        row.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}
