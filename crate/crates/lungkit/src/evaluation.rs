//! Segment- and event-level detection scoring.
//!
//! Segment detection is a per-frame 2x2 tally. Event detection matches
//! predicted against ground-truth intervals by Jaccard index: a truth
//! event with no prediction at JI >= 0.5 is an FN, a prediction with no
//! truth event at JI >= 0.5 is an FP, and mutually matched pairs count as
//! single TPs. TN events are undefined at the event level.

use crate::dataset::{SegmentGrid, Task};
use crate::error::{Error, Result};
use crate::postprocess::PostprocessConfig;
use serde::{Deserialize, Serialize};

/// Jaccard-index threshold for a correct event match.
pub const JI_THRESHOLD: f64 = 0.5;

/// Frame-level confusion tallies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Frame-wise confusion between a predicted and a truth grid.
pub fn segment_confusion(pred: &SegmentGrid, truth: &SegmentGrid) -> Result<ConfusionCounts> {
    if pred.frames() != truth.frames() {
        return Err(Error::ShapeMismatch(format!(
            "prediction has {} frames, truth {}",
            pred.frames(),
            truth.frames()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.values().iter().zip(truth.values()) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Temporal Jaccard index of two intervals: intersection length over
/// total covered length.
pub fn jaccard(a: (f64, f64), b: (f64, f64)) -> Result<f64> {
    if a.1 <= a.0 || b.1 <= b.0 {
        return Err(Error::Degenerate(format!(
            "jaccard of degenerate interval [{}, {}) vs [{}, {})",
            a.0, a.1, b.0, b.1
        )));
    }
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let union = (a.1 - a.0) + (b.1 - b.0) - inter;
    Ok(inter / union)
}

/// How predictions are paired with truth events.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Two independent existence passes: a truth event is matched iff any
    /// prediction reaches the JI threshold, and vice versa. Many-to-one
    /// matches are possible; TP counts distinct matched truth events.
    #[default]
    Existence,
    /// Strict one-to-one assignment, greedy by descending JI. For
    /// sensitivity analysis only.
    OneToOne,
}

/// Outcome of matching one recording's event lists.
#[derive(Clone, Debug, PartialEq)]
pub struct EventMatchResult {
    /// One pair per TP: each matched truth event with its best prediction
    /// (existence mode) or its assigned prediction (one-to-one mode).
    pub tp_pairs: Vec<((f64, f64), (f64, f64))>,
    /// Truth events with no matching prediction.
    pub fn_events: Vec<(f64, f64)>,
    /// Predictions with no matching truth event.
    pub fp_events: Vec<(f64, f64)>,
    /// Truth events matched in the truth-referenced pass.
    pub matched_truth: usize,
    /// Predictions matched in the prediction-referenced pass. Under
    /// many-to-one matching this may differ from `matched_truth`.
    pub matched_pred: usize,
    pub ji_threshold: f64,
}

/// Match with the default existence-pass semantics. Both lists must be
/// sorted by start and disjoint within themselves.
pub fn match_events(truth: &[(f64, f64)], pred: &[(f64, f64)]) -> EventMatchResult {
    match_events_with(truth, pred, MatchMode::Existence)
}

pub fn match_events_with(
    truth: &[(f64, f64)],
    pred: &[(f64, f64)],
    mode: MatchMode,
) -> EventMatchResult {
    match mode {
        MatchMode::Existence => match_existence(truth, pred),
        MatchMode::OneToOne => match_one_to_one(truth, pred),
    }
}

/// Best-JI candidate for `ev` among sorted disjoint `others`. Only
/// overlapping candidates can clear a positive threshold, so the scan is
/// restricted to the overlap window.
fn best_match(ev: (f64, f64), others: &[(f64, f64)], cursor: &mut usize) -> Option<(usize, f64)> {
    while *cursor < others.len() && others[*cursor].1 <= ev.0 {
        *cursor += 1;
    }
    let mut best: Option<(usize, f64)> = None;
    let mut k = *cursor;
    while k < others.len() && others[k].0 < ev.1 {
        let ji = jaccard(ev, others[k]).unwrap_or(0.0);
        if best.is_none_or(|(_, b)| ji > b) {
            best = Some((k, ji));
        }
        k += 1;
    }
    best.filter(|&(_, ji)| ji >= JI_THRESHOLD)
}

fn match_existence(truth: &[(f64, f64)], pred: &[(f64, f64)]) -> EventMatchResult {
    let mut tp_pairs = Vec::new();
    let mut fn_events = Vec::new();
    let mut cursor = 0usize;
    for &t in truth {
        match best_match(t, pred, &mut cursor) {
            Some((k, _)) => tp_pairs.push((t, pred[k])),
            None => fn_events.push(t),
        }
    }
    let mut fp_events = Vec::new();
    let mut matched_pred = 0usize;
    let mut cursor = 0usize;
    for &p in pred {
        match best_match(p, truth, &mut cursor) {
            Some(_) => matched_pred += 1,
            None => fp_events.push(p),
        }
    }
    EventMatchResult {
        matched_truth: tp_pairs.len(),
        matched_pred,
        tp_pairs,
        fn_events,
        fp_events,
        ji_threshold: JI_THRESHOLD,
    }
}

fn match_one_to_one(truth: &[(f64, f64)], pred: &[(f64, f64)]) -> EventMatchResult {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &t) in truth.iter().enumerate() {
        for (j, &p) in pred.iter().enumerate() {
            let ji = jaccard(t, p).unwrap_or(0.0);
            if ji >= JI_THRESHOLD {
                candidates.push((ji, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut truth_used = vec![false; truth.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut tp_pairs = Vec::new();
    for (_, i, j) in candidates {
        if !truth_used[i] && !pred_used[j] {
            truth_used[i] = true;
            pred_used[j] = true;
            tp_pairs.push((truth[i], pred[j]));
        }
    }
    tp_pairs.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0));
    let fn_events = truth
        .iter()
        .zip(&truth_used)
        .filter(|(_, &used)| !used)
        .map(|(&e, _)| e)
        .collect();
    let fp_events: Vec<(f64, f64)> = pred
        .iter()
        .zip(&pred_used)
        .filter(|(_, &used)| !used)
        .map(|(&e, _)| e)
        .collect();
    EventMatchResult {
        matched_truth: tp_pairs.len(),
        matched_pred: tp_pairs.len(),
        tp_pairs,
        fn_events,
        fp_events,
        ji_threshold: JI_THRESHOLD,
    }
}

/// Event-level counts, accumulable across recordings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub matched_truth: u64,
    pub matched_pred: u64,
}

impl EventCounts {
    pub fn from_match(m: &EventMatchResult) -> Self {
        EventCounts {
            tp: m.tp_pairs.len() as u64,
            fp: m.fp_events.len() as u64,
            fn_: m.fn_events.len() as u64,
            matched_truth: m.matched_truth as u64,
            matched_pred: m.matched_pred as u64,
        }
    }

    pub fn add(&mut self, other: &EventCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.matched_truth += other.matched_truth;
        self.matched_pred += other.matched_pred;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2 TP / (2 TP + FP + FN)`; the degenerate all-empty case is 0.
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

/// Event scores for one match result.
pub fn event_f1(m: &EventMatchResult) -> EventCounts {
    EventCounts::from_match(m)
}

/// Metrics of one trained model evaluated on one file set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub repeat: usize,
    pub fold: usize,
    pub segment: ConfusionCounts,
    pub event: EventCounts,
}

/// One row of the flattened report schema.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricRecord {
    pub task: String,
    /// `segment` or `event`.
    pub scope: String,
    pub metric: String,
    /// `None` marks an aggregate (mean) row.
    pub repeat: Option<usize>,
    pub fold: Option<usize>,
    pub value: f64,
}

/// Full evaluation report: per-model metrics plus their means, with the
/// postprocessing parameters that produced them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: String,
    pub ji_threshold: f64,
    pub match_mode: MatchMode,
    pub postprocess_threshold: f64,
    pub postprocess_merge_gap: usize,
    pub postprocess_min_duration: usize,
    pub models: Vec<ModelMetrics>,
    pub mean_segment_f1: f64,
    pub mean_segment_precision: f64,
    pub mean_segment_recall: f64,
    pub mean_event_f1: f64,
    pub mean_event_precision: f64,
    pub mean_event_recall: f64,
}

/// Average per-model metrics. `expected` is the size of the fold plan
/// (15 under the default 5-fold x 3-repeat protocol); fewer or more runs
/// than planned is an error.
pub fn aggregate_report(
    task: Task,
    models: Vec<ModelMetrics>,
    expected: usize,
    postprocess: &PostprocessConfig,
    match_mode: MatchMode,
) -> Result<MetricsReport> {
    if models.len() != expected {
        return Err(Error::IncompleteRuns {
            expected,
            got: models.len(),
        });
    }
    let n = models.len() as f64;
    let mean = |f: &dyn Fn(&ModelMetrics) -> f64| models.iter().map(f).sum::<f64>() / n;
    Ok(MetricsReport {
        task: task.as_str().to_string(),
        ji_threshold: JI_THRESHOLD,
        match_mode,
        postprocess_threshold: postprocess.threshold,
        postprocess_merge_gap: postprocess.merge_gap,
        postprocess_min_duration: postprocess.min_duration,
        mean_segment_f1: mean(&|m| m.segment.f1()),
        mean_segment_precision: mean(&|m| m.segment.precision()),
        mean_segment_recall: mean(&|m| m.segment.recall()),
        mean_event_f1: mean(&|m| m.event.f1()),
        mean_event_precision: mean(&|m| m.event.precision()),
        mean_event_recall: mean(&|m| m.event.recall()),
        models,
    })
}

impl MetricsReport {
    /// Flatten into the fixed record schema; per-model rows first, then
    /// mean rows with empty repeat/fold.
    pub fn records(&self) -> Vec<MetricRecord> {
        let mut out = Vec::new();
        let mut push = |scope: &str, metric: &str, repeat, fold, value| {
            out.push(MetricRecord {
                task: self.task.clone(),
                scope: scope.into(),
                metric: metric.into(),
                repeat,
                fold,
                value,
            });
        };
        for m in &self.models {
            let (r, f) = (Some(m.repeat), Some(m.fold));
            push("segment", "f1", r, f, m.segment.f1());
            push("segment", "precision", r, f, m.segment.precision());
            push("segment", "recall", r, f, m.segment.recall());
            push("segment", "tp", r, f, m.segment.tp as f64);
            push("segment", "fp", r, f, m.segment.fp as f64);
            push("segment", "tn", r, f, m.segment.tn as f64);
            push("segment", "fn", r, f, m.segment.fn_ as f64);
            push("event", "f1", r, f, m.event.f1());
            push("event", "precision", r, f, m.event.precision());
            push("event", "recall", r, f, m.event.recall());
            push("event", "tp", r, f, m.event.tp as f64);
            push("event", "fp", r, f, m.event.fp as f64);
            push("event", "fn", r, f, m.event.fn_ as f64);
            push("event", "matched_truth", r, f, m.event.matched_truth as f64);
            push("event", "matched_pred", r, f, m.event.matched_pred as f64);
        }
        push("segment", "f1", None, None, self.mean_segment_f1);
        push(
            "segment",
            "precision",
            None,
            None,
            self.mean_segment_precision,
        );
        push("segment", "recall", None, None, self.mean_segment_recall);
        push("event", "f1", None, None, self.mean_event_f1);
        push("event", "precision", None, None, self.mean_event_precision);
        push("event", "recall", None, None, self.mean_event_recall);
        out
    }

    /// Record schema as CSV (`task,scope,metric,repeat,fold,value`).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("task,scope,metric,repeat,fold,value\n");
        for r in self.records() {
            let fmt_opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{:.6}\n",
                r.task,
                r.scope,
                r.metric,
                fmt_opt(r.repeat),
                fmt_opt(r.fold),
                r.value
            ));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(bits: &[u8]) -> SegmentGrid {
        SegmentGrid::new(bits.iter().map(|&b| b != 0).collect())
    }

    #[test]
    fn confusion_hand_enumeration() {
        let truth = grid(&[1, 1, 1, 1, 0, 0, 0, 0, 0, 0]);
        let pred = grid(&[1, 1, 0, 0, 1, 1, 0, 0, 0, 0]);
        let c = segment_confusion(&pred, &truth).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 2,
                fn_: 2,
                fp: 2,
                tn: 4
            }
        );
        assert_eq!(c.total(), 10);
    }

    #[test]
    fn perfect_and_inverted_predictions() {
        let t = grid(&[1, 0, 1, 0]);
        let same = segment_confusion(&t, &t).unwrap();
        assert_eq!((same.fp, same.fn_), (0, 0));
        let inv = grid(&[0, 1, 0, 1]);
        let c = segment_confusion(&inv, &t).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(matches!(
            segment_confusion(&grid(&[1]), &grid(&[1, 0])),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn segment_f1_of_8_2_2_is_0_8() {
        let c = ConfusionCounts {
            tp: 8,
            fp: 2,
            fn_: 2,
            tn: 0,
        };
        assert!((c.f1() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn jaccard_cases() {
        assert_eq!(jaccard((0.0, 1.0), (0.0, 1.0)).unwrap(), 1.0);
        assert_eq!(jaccard((0.0, 1.0), (2.0, 3.0)).unwrap(), 0.0);
        assert!((jaccard((1.0, 2.0), (1.5, 3.0)).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(
            jaccard((1.0, 1.0), (0.0, 1.0)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn jaccard_is_symmetric() {
        let a = (0.3, 1.7);
        let b = (1.2, 2.0);
        assert_eq!(jaccard(a, b).unwrap(), jaccard(b, a).unwrap());
    }

    #[test]
    fn worked_matching_example() {
        // JI([0,1],[0.1,1]) = 0.9: match. [2,3] unmatched FN. [5,6] FP.
        let truth = [(0.0, 1.0), (2.0, 3.0)];
        let pred = [(0.1, 1.0), (5.0, 6.0)];
        let m = match_events(&truth, &pred);
        assert_eq!(m.tp_pairs.len(), 1);
        assert_eq!(m.tp_pairs[0], ((0.0, 1.0), (0.1, 1.0)));
        assert_eq!(m.fn_events, vec![(2.0, 3.0)]);
        assert_eq!(m.fp_events, vec![(5.0, 6.0)]);
        let scores = event_f1(&m);
        assert!((scores.f1() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_prediction_all_fn() {
        let truth = [(0.0, 1.0), (2.0, 3.0)];
        let m = match_events(&truth, &[]);
        assert_eq!(m.tp_pairs.len(), 0);
        assert_eq!(m.fn_events.len(), 2);
        assert_eq!(m.fp_events.len(), 0);
    }

    #[test]
    fn identical_lists_all_tp() {
        let truth = [(0.0, 1.0), (2.0, 3.0), (4.0, 5.5)];
        let m = match_events(&truth, &truth);
        assert_eq!(m.tp_pairs.len(), 3);
        assert!(m.fn_events.is_empty());
        assert!(m.fp_events.is_empty());
        assert!((event_f1(&m).f1() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_all_empty_f1_is_zero() {
        let m = match_events(&[], &[]);
        assert_eq!(event_f1(&m).f1(), 0.0);
    }

    #[test]
    fn many_to_one_counts_are_observable() {
        // One wide prediction covering two truth events: with JI >= 0.5
        // against neither individually, nothing matches; shrink so the
        // first truth event matches well.
        let truth = [(0.0, 1.0), (1.2, 2.2)];
        let pred = [(0.0, 2.2)];
        let m = match_events(&truth, &pred);
        // JI((0,1),(0,2.2)) = 1/2.2 < 0.5, JI((1.2,2.2),(0,2.2)) = 1/2.2 < 0.5
        assert_eq!(m.tp_pairs.len(), 0);
        assert_eq!(m.fp_events.len(), 1);

        // Two truth events each matching the same prediction at >= 0.5 is
        // impossible for disjoint truth; but one prediction per truth with
        // a shared prediction-side match difference shows up in the counts.
        let truth = [(0.0, 1.0)];
        let pred = [(0.0, 0.9), (0.05, 1.0)];
        // pred events overlap each other; still fine for the matcher.
        let m = match_events(&truth, &pred);
        assert_eq!(m.matched_truth, 1);
        assert_eq!(m.matched_pred, 2);
        assert_eq!(m.tp_pairs.len(), 1);
        assert!(m.fp_events.is_empty());
    }

    #[test]
    fn one_to_one_mode_assigns_uniquely() {
        let truth = [(0.0, 1.0)];
        let pred = [(0.0, 0.9), (0.05, 1.0)];
        let m = match_events_with(&truth, &pred, MatchMode::OneToOne);
        assert_eq!(m.tp_pairs.len(), 1);
        // The better JI wins: (0.05, 1.0) has JI 0.95/1.0 = 0.95 vs 0.9.
        assert_eq!(m.tp_pairs[0].1, (0.05, 1.0));
        assert_eq!(m.fp_events, vec![(0.0, 0.9)]);
    }

    #[test]
    fn translation_invariance() {
        let truth = [(0.5, 1.5), (3.0, 4.0)];
        let pred = [(0.6, 1.5), (3.5, 4.6)];
        let base = match_events(&truth, &pred);
        let shift = 2.75;
        let t2: Vec<(f64, f64)> = truth.iter().map(|&(s, e)| (s + shift, e + shift)).collect();
        let p2: Vec<(f64, f64)> = pred.iter().map(|&(s, e)| (s + shift, e + shift)).collect();
        let moved = match_events(&t2, &p2);
        assert_eq!(base.tp_pairs.len(), moved.tp_pairs.len());
        assert_eq!(base.fn_events.len(), moved.fn_events.len());
        assert_eq!(base.fp_events.len(), moved.fp_events.len());
    }

    #[test]
    fn aggregate_means() {
        let mk = |f1_num: u64| ModelMetrics {
            repeat: 0,
            fold: 0,
            segment: ConfusionCounts {
                tp: f1_num,
                fp: 10 - f1_num,
                tn: 0,
                fn_: 10 - f1_num,
            },
            event: EventCounts::default(),
        };
        let models: Vec<ModelMetrics> = (0..15).map(|_| mk(8)).collect();
        let report = aggregate_report(
            Task::Inhalation,
            models,
            15,
            &PostprocessConfig::default(),
            MatchMode::Existence,
        )
        .unwrap();
        assert!((report.mean_segment_f1 - 0.8).abs() < 1e-12);

        let short: Vec<ModelMetrics> = (0..14).map(|_| mk(8)).collect();
        assert!(matches!(
            aggregate_report(
                Task::Inhalation,
                short,
                15,
                &PostprocessConfig::default(),
                MatchMode::Existence
            ),
            Err(Error::IncompleteRuns {
                expected: 15,
                got: 14
            })
        ));
    }

    #[test]
    fn mean_of_mixed_values() {
        let mut models: Vec<ModelMetrics> = (0..14)
            .map(|i| ModelMetrics {
                repeat: i / 5,
                fold: i % 5,
                segment: ConfusionCounts {
                    tp: 8,
                    fp: 2,
                    tn: 0,
                    fn_: 2,
                },
                event: EventCounts::default(),
            })
            .collect();
        models.push(ModelMetrics {
            repeat: 2,
            fold: 4,
            segment: ConfusionCounts {
                tp: 5,
                fp: 5,
                tn: 0,
                fn_: 5,
            },
            event: EventCounts::default(),
        });
        let report = aggregate_report(
            Task::Das,
            models,
            15,
            &PostprocessConfig::default(),
            MatchMode::Existence,
        )
        .unwrap();
        // 14 models at f1 = 0.8, one at 0.5.
        assert!((report.mean_segment_f1 - (0.8 * 14.0 + 0.5) / 15.0).abs() < 1e-12);
    }

    #[test]
    fn report_serializes_with_fixed_schema() {
        let report = aggregate_report(
            Task::Cas,
            vec![ModelMetrics::default()],
            1,
            &PostprocessConfig::default(),
            MatchMode::Existence,
        )
        .unwrap();
        let csv = report.to_csv();
        assert!(csv.starts_with("task,scope,metric,repeat,fold,value\n"));
        assert!(csv.contains("C,segment,f1,0,0,"));
        assert!(csv.contains("C,event,f1,,,"));
        let json = report.to_json();
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.task, "C");
        assert_eq!(back.models.len(), 1);
    }

    /// Brute-force oracle: enumerate all pairs with a rasterized JI.
    /// Event times sit on a 1/1024 s grid and cells are half that, so the
    /// cell counts reproduce the exact interval lengths and the quotient
    /// is the same f64 division the analytic route performs.
    fn oracle_match(truth: &[(f64, f64)], pred: &[(f64, f64)]) -> (usize, usize, usize) {
        let raster_ji = |a: (f64, f64), b: (f64, f64)| {
            let grid = 1.0 / 2048.0;
            let lo = a.0.min(b.0);
            let hi = a.1.max(b.1);
            let cells = ((hi - lo) / grid).ceil() as usize;
            let (mut inter, mut union) = (0usize, 0usize);
            for i in 0..cells {
                let mid = lo + (i as f64 + 0.5) * grid;
                let in_a = a.0 <= mid && mid < a.1;
                let in_b = b.0 <= mid && mid < b.1;
                if in_a && in_b {
                    inter += 1;
                }
                if in_a || in_b {
                    union += 1;
                }
            }
            inter as f64 / union.max(1) as f64
        };
        let matched_t = truth
            .iter()
            .filter(|&&t| pred.iter().any(|&p| raster_ji(t, p) >= 0.5))
            .count();
        let matched_p = pred
            .iter()
            .filter(|&&p| truth.iter().any(|&t| raster_ji(t, p) >= 0.5))
            .count();
        (matched_t, truth.len() - matched_t, pred.len() - matched_p)
    }

    fn sorted_disjoint(raw: Vec<(u32, u32)>) -> Vec<(f64, f64)> {
        // Binary-fraction event times (units of 1/1024 s) are exact in
        // f64, so both JI routes see identical arithmetic; separated so
        // lists stay disjoint.
        let mut t = 0.0f64;
        raw.into_iter()
            .map(|(gap, len)| {
                let start = t + gap as f64 / 1024.0;
                let end = start + (len.max(20)) as f64 / 1024.0;
                t = end;
                (start, end)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn matcher_agrees_with_pairwise_oracle(
            traw in proptest::collection::vec((0u32..400, 20u32..900), 0..8),
            praw in proptest::collection::vec((0u32..400, 20u32..900), 0..8),
        ) {
            let truth = sorted_disjoint(traw);
            let pred = sorted_disjoint(praw);
            let m = match_events(&truth, &pred);
            let (tp, fn_, fp) = oracle_match(&truth, &pred);
            prop_assert_eq!(m.tp_pairs.len(), tp);
            prop_assert_eq!(m.fn_events.len(), fn_);
            prop_assert_eq!(m.fp_events.len(), fp);
        }

        #[test]
        fn tp_bounded_and_f1_in_range(
            traw in proptest::collection::vec((0u32..300, 20u32..600), 0..10),
            praw in proptest::collection::vec((0u32..300, 20u32..600), 0..10),
        ) {
            let truth = sorted_disjoint(traw);
            let pred = sorted_disjoint(praw);
            let m = match_events(&truth, &pred);
            prop_assert!(m.tp_pairs.len() <= truth.len().min(pred.len().max(m.tp_pairs.len())));
            prop_assert!(m.tp_pairs.len() + m.fn_events.len() == truth.len());
            let f1 = event_f1(&m).f1();
            prop_assert!((0.0..=1.0).contains(&f1));
        }
    }
}
