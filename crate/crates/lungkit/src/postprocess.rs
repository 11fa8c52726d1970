//! Turn per-frame probabilities into timed predicted events: threshold,
//! merge nearby runs, drop runts.

use crate::dataset::SegmentGrid;
use crate::error::{Error, Result};
use crate::FRAME_HOP_SECS;

/// Postprocessing parameters. All recorded in evaluation reports so runs
/// are reproducible.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PostprocessConfig {
    /// Frame is positive iff probability >= threshold.
    pub threshold: f64,
    /// Merge positive runs separated by at most this many negative frames.
    pub merge_gap: usize,
    /// Drop merged events shorter than this many frames.
    pub min_duration: usize,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        PostprocessConfig {
            threshold: 0.5,
            merge_gap: 2,
            min_duration: 3,
        }
    }
}

impl PostprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "threshold {} outside (0, 1)",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Threshold probabilities into a segment grid (`>=` rule, so a frame at
/// exactly the threshold is positive).
pub fn threshold_segments(probs: &[f64], config: &PostprocessConfig) -> SegmentGrid {
    SegmentGrid::new(probs.iter().map(|&p| p >= config.threshold).collect())
}

/// Convert a segment grid into `[start, end)` second-intervals: maximal
/// positive runs, runs separated by at most `merge_gap` negative frames
/// merged first, then merged events shorter than `min_duration` frames
/// discarded. Times are frame index times the 16 ms hop.
pub fn segments_to_events(grid: &SegmentGrid, config: &PostprocessConfig) -> Vec<(f64, f64)> {
    // Runs as frame index ranges [start, end).
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, &v) in grid.values().iter().enumerate() {
        match (v, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        runs.push((s, grid.frames()));
    }

    // Merge runs across small gaps before pruning short events.
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for run in runs {
        match merged.last_mut() {
            Some(last) if run.0 - last.1 <= config.merge_gap => last.1 = run.1,
            _ => merged.push(run),
        }
    }

    merged
        .into_iter()
        .filter(|&(s, e)| e - s >= config.min_duration.max(1))
        .map(|(s, e)| (s as f64 * FRAME_HOP_SECS, e as f64 * FRAME_HOP_SECS))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(bits: &[u8]) -> SegmentGrid {
        SegmentGrid::new(bits.iter().map(|&b| b != 0).collect())
    }

    #[test]
    fn threshold_is_inclusive() {
        let cfg = PostprocessConfig::default();
        let g = threshold_segments(&[0.4, 0.5, 0.6], &cfg);
        assert_eq!(g.values(), &[false, true, true]);
    }

    #[test]
    fn threshold_zero_keeps_everything() {
        let cfg = PostprocessConfig {
            threshold: 1e-300,
            ..Default::default()
        };
        let g = threshold_segments(&[0.0, 0.1, 0.9], &cfg);
        assert_eq!(g.positive_count(), 2); // 0.0 < 1e-300 stays negative
        let g = threshold_segments(&[0.1, 0.2], &cfg);
        assert_eq!(g.positive_count(), 2);
    }

    #[test]
    fn gap_of_two_frames_merges() {
        // positives {1,2,3} and {6,7}: gap frames 4,5 <= merge_gap 2.
        let cfg = PostprocessConfig {
            threshold: 0.5,
            merge_gap: 2,
            min_duration: 3,
        };
        let events = segments_to_events(&grid(&[0, 1, 1, 1, 0, 0, 1, 1, 0, 0]), &cfg);
        assert_eq!(events.len(), 1);
        let (s, e) = events[0];
        assert!((s - 0.016).abs() < 1e-12);
        assert!((e - 0.128).abs() < 1e-12);
    }

    #[test]
    fn wider_gap_does_not_merge() {
        let cfg = PostprocessConfig {
            threshold: 0.5,
            merge_gap: 2,
            min_duration: 0,
        };
        let events = segments_to_events(&grid(&[1, 1, 1, 0, 0, 0, 1, 1, 1]), &cfg);
        assert_eq!(events.len(), 2);
    }

    #[test]
    fn single_frame_run_is_dropped() {
        let cfg = PostprocessConfig {
            threshold: 0.5,
            merge_gap: 2,
            min_duration: 3,
        };
        assert!(segments_to_events(&grid(&[0, 0, 1, 0, 0]), &cfg).is_empty());
    }

    #[test]
    fn empty_grid_no_events() {
        let cfg = PostprocessConfig::default();
        assert!(segments_to_events(&grid(&[]), &cfg).is_empty());
        assert!(segments_to_events(&grid(&[0, 0, 0]), &cfg).is_empty());
    }

    #[test]
    fn merge_happens_before_pruning() {
        // Two 2-frame runs with a 1-frame gap: merged to 5 frames, which
        // survives min_duration 4; unmerged they would both be dropped.
        let cfg = PostprocessConfig {
            threshold: 0.5,
            merge_gap: 1,
            min_duration: 4,
        };
        let events = segments_to_events(&grid(&[1, 1, 0, 1, 1]), &cfg);
        assert_eq!(events.len(), 1);
    }

    proptest! {
        #[test]
        fn events_are_sorted_disjoint_and_long_enough(
            bits in proptest::collection::vec(any::<bool>(), 0..300),
            merge_gap in 0usize..4,
            min_duration in 0usize..6,
        ) {
            let cfg = PostprocessConfig { threshold: 0.5, merge_gap, min_duration };
            let g = SegmentGrid::new(bits);
            let events = segments_to_events(&g, &cfg);
            for w in events.windows(2) {
                prop_assert!(w[0].1 < w[1].0);
            }
            for (s, e) in &events {
                prop_assert!(e - s >= min_duration.max(1) as f64 * FRAME_HOP_SECS - 1e-12);
            }
        }

        #[test]
        fn zero_gap_zero_duration_round_trips_with_rasterize(
            bits in proptest::collection::vec(any::<bool>(), 1..200),
        ) {
            let cfg = PostprocessConfig { threshold: 0.5, merge_gap: 0, min_duration: 0 };
            let g = SegmentGrid::new(bits);
            let events = segments_to_events(&g, &cfg);
            let back = crate::dataset::rasterize(&events, g.frames(), FRAME_HOP_SECS).unwrap();
            prop_assert_eq!(back, g);
        }

        #[test]
        fn lower_threshold_never_decreases_positives(
            probs in proptest::collection::vec(0.0f64..1.0, 0..200),
            t1 in 0.05f64..0.95,
            t2 in 0.05f64..0.95,
        ) {
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            let g_lo = threshold_segments(&probs, &PostprocessConfig { threshold: lo, ..Default::default() });
            let g_hi = threshold_segments(&probs, &PostprocessConfig { threshold: hi, ..Default::default() });
            prop_assert!(g_lo.positive_count() >= g_hi.positive_count());
        }
    }
}
