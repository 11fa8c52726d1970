//! Sorted disjoint unions of `[start, end)` second-intervals.

use super::{LabelEvent, LabelType};

/// A union of half-open intervals, kept sorted and pairwise disjoint.
/// Touching intervals are merged, so every stored interval is maximal.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn new() -> Self {
        IntervalSet::default()
    }

    /// Build from arbitrary intervals; overlapping or adjacent inputs are
    /// unioned, degenerate ones (end <= start) dropped.
    pub fn from_intervals<I: IntoIterator<Item = (f64, f64)>>(iter: I) -> Self {
        let mut raw: Vec<(f64, f64)> = iter
            .into_iter()
            .filter(|(s, e)| e > s && s.is_finite() && e.is_finite())
            .collect();
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (s, e) in raw {
            match intervals.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => intervals.push((s, e)),
            }
        }
        IntervalSet { intervals }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total covered length in seconds.
    pub fn duration(&self) -> f64 {
        self.intervals.iter().map(|(s, e)| e - s).sum()
    }

    /// Set intersection; the result is again sorted and disjoint.
    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let lo = a[i].0.max(b[j].0);
            let hi = a[i].1.min(b[j].1);
            if lo < hi {
                out.push((lo, hi));
            }
            if a[i].1 <= b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet { intervals: out }
    }
}

/// Union the events of one kind into an [`IntervalSet`].
pub fn to_interval_set(events: &[LabelEvent], kind: LabelType) -> IntervalSet {
    IntervalSet::from_intervals(
        events
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| (e.start, e.end)),
    )
}
