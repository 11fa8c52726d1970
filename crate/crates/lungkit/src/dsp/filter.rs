//! Butterworth IIR filters as cascaded biquad sections, applied causally.

use std::f64::consts::PI;

/// One second-order section with `a0` normalized to 1.
#[derive(Clone, Copy, Debug)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Run the section over `x` with zero initial state (direct form I).
    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        let mut y = Vec::with_capacity(x.len());
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for &xn in x {
            let yn = self.b0 * xn + self.b1 * x1 + self.b2 * x2 - self.a1 * y1 - self.a2 * y2;
            x2 = x1;
            x1 = xn;
            y2 = y1;
            y1 = yn;
            y.push(yn);
        }
        y
    }

    /// Magnitude response at angular frequency `omega` (radians/sample).
    pub fn magnitude(&self, omega: f64) -> f64 {
        let num = polyval_mag(self.b0, self.b1, self.b2, omega);
        let den = polyval_mag(1.0, self.a1, self.a2, omega);
        num / den
    }
}

fn polyval_mag(c0: f64, c1: f64, c2: f64, omega: f64) -> f64 {
    // |c0 + c1 e^{-jw} + c2 e^{-2jw}|
    let re = c0 + c1 * omega.cos() + c2 * (2.0 * omega).cos();
    let im = -c1 * omega.sin() - c2 * (2.0 * omega).sin();
    re.hypot(im)
}

/// Butterworth quality factors for an even-order cascade:
/// `Q_k = 1 / (2 sin(pi (2k+1) / (2n)))`.
fn butterworth_qs(order: usize) -> Vec<f64> {
    assert!(order >= 2 && order.is_multiple_of(2), "even order required");
    (0..order / 2)
        .map(|k| 1.0 / (2.0 * (PI * (2 * k + 1) as f64 / (2.0 * order as f64)).sin()))
        .collect()
}

/// Design an even-order Butterworth high-pass via the bilinear transform.
pub fn butterworth_highpass(order: usize, cutoff_hz: f64, sample_rate: f64) -> Vec<Biquad> {
    butterworth_qs(order)
        .into_iter()
        .map(|q| {
            let w0 = 2.0 * PI * cutoff_hz / sample_rate;
            let alpha = w0.sin() / (2.0 * q);
            let a0 = 1.0 + alpha;
            Biquad {
                b0: (1.0 + w0.cos()) / 2.0 / a0,
                b1: -(1.0 + w0.cos()) / a0,
                b2: (1.0 + w0.cos()) / 2.0 / a0,
                a1: -2.0 * w0.cos() / a0,
                a2: (1.0 - alpha) / a0,
            }
        })
        .collect()
}

/// Design an even-order Butterworth low-pass via the bilinear transform.
pub fn butterworth_lowpass(order: usize, cutoff_hz: f64, sample_rate: f64) -> Vec<Biquad> {
    butterworth_qs(order)
        .into_iter()
        .map(|q| {
            let w0 = 2.0 * PI * cutoff_hz / sample_rate;
            let alpha = w0.sin() / (2.0 * q);
            let a0 = 1.0 + alpha;
            Biquad {
                b0: (1.0 - w0.cos()) / 2.0 / a0,
                b1: (1.0 - w0.cos()) / a0,
                b2: (1.0 - w0.cos()) / 2.0 / a0,
                a1: -2.0 * w0.cos() / a0,
                a2: (1.0 - alpha) / a0,
            }
        })
        .collect()
}

/// Run a cascade over a signal.
pub fn run_cascade(sections: &[Biquad], x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    for s in sections {
        y = s.process(&y);
    }
    y
}

/// Cascade magnitude response at `freq_hz`.
pub fn cascade_magnitude(sections: &[Biquad], freq_hz: f64, sample_rate: f64) -> f64 {
    let omega = 2.0 * PI * freq_hz / sample_rate;
    sections.iter().map(|s| s.magnitude(omega)).product()
}
