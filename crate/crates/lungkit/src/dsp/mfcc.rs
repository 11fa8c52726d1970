//! Mel-frequency cepstral coefficients: 20 static + 20 delta + 20
//! acceleration channels per frame.
//!
//! Fixed constants: 40 triangular mel filters spanning 0-2000 Hz, each
//! normalized to unit weight sum; log floor 1e-10; orthonormal DCT-II;
//! delta/acceleration by +/-2-frame linear regression with replicated
//! edges.

use super::stft::{bin_frequency, stft_spectrogram, SPECTRUM_BINS};
use crate::error::Result;

/// Number of mel filters.
pub const NUM_FILTERS: usize = 40;
/// Static coefficients kept (and hence delta/acceleration channels).
pub const NUM_COEFFS: usize = 20;
/// Upper edge of the filterbank in Hz.
pub const MEL_HIGH_HZ: f64 = 2000.0;
/// Floor applied to mel energies before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;
/// Regression half-window for delta and acceleration features.
pub const DELTA_HALF_WINDOW: usize = 2;

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filterbank as `NUM_FILTERS` rows of `SPECTRUM_BINS` weights,
/// each row scaled to sum to 1.
pub fn mel_filterbank() -> Vec<Vec<f64>> {
    let mel_points: Vec<f64> = (0..NUM_FILTERS + 2)
        .map(|i| hz_to_mel(MEL_HIGH_HZ) * i as f64 / (NUM_FILTERS + 1) as f64)
        .collect();
    let hz_points: Vec<f64> = mel_points.into_iter().map(mel_to_hz).collect();

    (0..NUM_FILTERS)
        .map(|i| {
            let (lo, mid, hi) = (hz_points[i], hz_points[i + 1], hz_points[i + 2]);
            let mut row: Vec<f64> = (0..SPECTRUM_BINS)
                .map(|b| {
                    let f = bin_frequency(b);
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect();
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                for w in &mut row {
                    *w /= sum;
                }
            }
            row
        })
        .collect()
}

/// Orthonormal DCT-II of `x`, first `NUM_COEFFS` coefficients.
fn dct_ii(x: &[f64]) -> Vec<f64> {
    let m = x.len() as f64;
    (0..NUM_COEFFS)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / m).sqrt()
            } else {
                (2.0 / m).sqrt()
            };
            let sum: f64 = x
                .iter()
                .enumerate()
                .map(|(n, &v)| v * (std::f64::consts::PI * k as f64 * (n as f64 + 0.5) / m).cos())
                .sum();
            scale * sum
        })
        .collect()
}

/// Linear-regression deltas over +/-`DELTA_HALF_WINDOW` frames with
/// replicated edges: `d_t = sum_n n (c_{t+n} - c_{t-n}) / (2 sum_n n^2)`.
fn regression_deltas(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let t_max = rows.len();
    let w = DELTA_HALF_WINDOW as isize;
    let denom: f64 = 2.0 * (1..=DELTA_HALF_WINDOW).map(|n| (n * n) as f64).sum::<f64>();
    let clamp = |t: isize| -> usize { t.clamp(0, t_max as isize - 1) as usize };
    (0..t_max)
        .map(|t| {
            let mut out = vec![0.0; rows[0].len()];
            for n in 1..=w {
                let ahead = &rows[clamp(t as isize + n)];
                let behind = &rows[clamp(t as isize - n)];
                for (o, (a, b)) in out.iter_mut().zip(ahead.iter().zip(behind)) {
                    *o += n as f64 * (a - b);
                }
            }
            for o in &mut out {
                *o /= denom;
            }
            out
        })
        .collect()
}

/// Per-frame MFCC features: 60 channels (20 static, 20 delta, 20
/// acceleration), row-major.
pub fn mfcc_features(samples: &[f64]) -> Result<MfccFrames> {
    let spec = stft_spectrogram(samples)?;
    let filterbank = mel_filterbank();

    let static_rows: Vec<Vec<f64>> = (0..spec.frames)
        .map(|k| {
            let mags = spec.row(k);
            let log_mel: Vec<f64> = filterbank
                .iter()
                .map(|filter| {
                    let energy: f64 = filter.iter().zip(mags).map(|(&w, &m)| w * m * m).sum();
                    energy.max(LOG_FLOOR).ln()
                })
                .collect();
            dct_ii(&log_mel)
        })
        .collect();

    let delta_rows = regression_deltas(&static_rows);
    let accel_rows = regression_deltas(&delta_rows);

    let mut data = Vec::with_capacity(spec.frames * 3 * NUM_COEFFS);
    for k in 0..spec.frames {
        data.extend_from_slice(&static_rows[k]);
        data.extend_from_slice(&delta_rows[k]);
        data.extend_from_slice(&accel_rows[k]);
    }
    Ok(MfccFrames {
        frames: spec.frames,
        data,
    })
}

/// Row-major `frames x 60` MFCC channels.
#[derive(Clone, Debug)]
pub struct MfccFrames {
    pub frames: usize,
    pub data: Vec<f64>,
}

impl MfccFrames {
    pub const CHANNELS: usize = 3 * NUM_COEFFS;

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * Self::CHANNELS..(frame + 1) * Self::CHANNELS]
    }
}
