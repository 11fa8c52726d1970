//! Leakage-free subject-level splitting and repeated k-fold planning.
//! All recordings of one subject land on the same side of every split.
//!
//! Run with: `cargo run --example split_dataset`

use lungkit::dataset::{assign_split, make_folds};
use std::collections::BTreeMap;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 25 subjects with 6-10 recordings each.
    let subjects: BTreeMap<String, usize> = (0..25)
        .map(|i| (format!("S{i:03}"), 6 + (i * 7) % 5))
        .collect();
    let total: usize = subjects.values().sum();

    let split = assign_split(&subjects, 0.2, 42)?;
    println!(
        "{total} recordings over {} subjects -> {} train / {} test subjects",
        subjects.len(),
        split.train_subjects.len(),
        split.test_subjects.len()
    );
    println!(
        "test holds {:.1}% of recordings (target 20%), subjects: {:?}",
        100.0 * split.test_recording_fraction(),
        split.test_subjects
    );

    let plan = make_folds(&split.train_subjects, 5, 3, 42)?;
    println!(
        "\nfold plan: {} repeats x {} folds = {} training configurations",
        plan.repeats,
        plan.folds,
        plan.pairs().len()
    );
    for pair in plan.pairs().iter().take(5) {
        println!(
            "  repeat {} fold {}: {} train / {} validation subjects",
            pair.repeat,
            pair.fold,
            pair.train_subjects.len(),
            pair.val_subjects.len()
        );
    }
    println!("  ...");
    println!(
        "\nsplit manifest CSV:\n{}",
        &split.to_csv()[..200.min(split.to_csv().len())]
    );
    Ok(())
}
