//! Verify the analytic CNN-BiGRU gradients against central finite
//! differences on a reduced model, parameter by parameter.
//!
//! Run with: `cargo run --example gradient_check`

use lungkit::dataset::{SegmentGrid, Task};
use lungkit::dsp::{FeatureMatrix, NormStats};
use lungkit::nnet::{bce_loss, forward, gradients, Arch, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let arch = Arch {
        in_channels: 24,
        conv1_out: 16,
        conv2_out: 16,
        kernel: 5,
        hidden: 8,
    };
    let params = ModelParams::init(Task::Inhalation, arch, NormStats::identity(24), 1)?;
    println!(
        "reduced model: {:?} ({} parameters)",
        arch,
        params.param_count()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let frames = 40;
    let mut features = FeatureMatrix::zeros(frames, arch.in_channels);
    for v in &mut features.data {
        *v = rng.random_range(-1.0..1.0);
    }
    let grid = SegmentGrid::new((0..frames).map(|_| rng.random_bool(0.35)).collect());

    let (loss, analytic) = gradients(&params, &[(&features, &grid)])?;
    println!("loss at the test point: {loss:.6}");

    let flat = params.flatten();
    let eps = 1e-5;
    let mut worst = 0.0f64;
    let samples = 250;
    for _ in 0..samples {
        let idx = rng.random_range(0..flat.len());
        let mut perturbed = flat.clone();
        perturbed[idx] += eps;
        let mut plus = params.clone();
        plus.assign_from_flat(&perturbed)?;
        perturbed[idx] -= 2.0 * eps;
        let mut minus = params.clone();
        minus.assign_from_flat(&perturbed)?;

        let lp = bce_loss(&forward(&plus, &features)?, &grid)?;
        let lm = bce_loss(&forward(&minus, &features)?, &grid)?;
        let numeric = (lp - lm) / (2.0 * eps);
        // Denominator floor 1e-6: above the finite-difference noise
        // (~1e-11 for eps 1e-5), far below any real gradient defect.
        let rel = (analytic[idx] - numeric).abs() / (analytic[idx].abs() + numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    println!("max relative error over {samples} sampled parameters: {worst:.3e}");
    assert!(worst < 1e-4);
    println!("analytic backpropagation matches finite differences");
    Ok(())
}
