//! Segment- and event-level scoring: frame confusion, Jaccard-index
//! event matching at the 0.5 threshold, and F1 reporting.
//!
//! Run with: `cargo run --example evaluate_detection`

use lungkit::dataset::{rasterize, SegmentGrid, Task};
use lungkit::evaluation::{
    aggregate_report, event_f1, jaccard, match_events, segment_confusion, MatchMode, ModelMetrics,
};
use lungkit::postprocess::PostprocessConfig;
use lungkit::FRAME_HOP_SECS;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Jaccard index of two intervals.
    let a = (1.0, 2.0);
    let b = (1.5, 3.0);
    println!("jaccard({a:?}, {b:?}) = {:.3}", jaccard(a, b)?);

    // Event matching: one good match, one miss, one false alarm.
    let truth = [(0.0, 1.0), (2.0, 3.0)];
    let pred = [(0.1, 1.0), (5.0, 6.0)];
    let m = match_events(&truth, &pred);
    println!(
        "matching truth {truth:?} vs pred {pred:?}: {} TP, {} FN, {} FP",
        m.tp_pairs.len(),
        m.fn_events.len(),
        m.fp_events.len()
    );
    let scores = event_f1(&m);
    println!(
        "event precision {:.3}, recall {:.3}, F1 {:.3}",
        scores.precision(),
        scores.recall(),
        scores.f1()
    );

    // Segment confusion between rasterized grids.
    let frames = 620;
    let truth_grid = rasterize(&truth, frames, FRAME_HOP_SECS)?;
    let pred_grid: SegmentGrid = rasterize(&pred, frames, FRAME_HOP_SECS)?;
    let c = segment_confusion(&pred_grid, &truth_grid)?;
    println!(
        "segment confusion over {frames} frames: tp={} fp={} tn={} fn={} -> F1 {:.3}",
        c.tp,
        c.fp,
        c.tn,
        c.fn_,
        c.f1()
    );

    // Aggregate per-model metrics into the report schema.
    let metrics = ModelMetrics {
        repeat: 0,
        fold: 0,
        segment: c,
        event: scores,
    };
    let report = aggregate_report(
        Task::Inhalation,
        vec![metrics],
        1,
        &PostprocessConfig::default(),
        MatchMode::Existence,
    )?;
    println!("\nreport CSV:\n{}", report.to_csv());
    Ok(())
}
