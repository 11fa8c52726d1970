//! Corpus-level label statistics and between-type overlap ratios.

use super::{derive_cas, to_interval_set, IntervalSet, LabelEvent, LabelType};
use crate::audio::Device;
use crate::error::{Error, Result};

/// The four label classes compared in the overlap analysis.
pub const OVERLAP_KINDS: [LabelType; 4] = [LabelType::I, LabelType::E, LabelType::C, LabelType::D];

/// Percentage of `x`'s duration covered by `y`. Asymmetric: the reference
/// duration is always `x`'s.
pub fn overlap_ratio(x: &IntervalSet, y: &IntervalSet) -> Result<f64> {
    let dx = x.duration();
    if dx <= 0.0 {
        return Err(Error::EmptyReference);
    }
    // Divide first: x/x is exactly 1.0, so self-overlap is exactly 100.
    Ok(100.0 * (x.intersect(y).duration() / dx))
}

/// One parsed label file with its recording metadata, as consumed by the
/// corpus-level reports. `events` are the raw parsed events; the `C` class
/// is derived internally, so do not pre-apply [`derive_cas`].
#[derive(Clone, Debug)]
pub struct LabeledFile {
    pub device: Option<Device>,
    pub events: Vec<LabelEvent>,
}

/// The 4x3 overlap-ratio table: for each ordered pair `(x, y)` of distinct
/// classes among I/E/C/D, the percentage of `x`'s total duration (summed
/// over the corpus) covered by `y` labels. `None` marks rows whose
/// reference class never occurs.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapTable {
    /// `ratio[i][j]` pairs row `OVERLAP_KINDS[i]` with the j-th *other*
    /// kind, in `OVERLAP_KINDS` order with the row kind skipped.
    pub rows: Vec<OverlapRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverlapRow {
    pub kind: LabelType,
    pub entries: Vec<(LabelType, Option<f64>)>,
}

impl OverlapTable {
    /// Look up the ratio for an ordered pair.
    pub fn get(&self, x: LabelType, y: LabelType) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.kind == x)?
            .entries
            .iter()
            .find(|(k, _)| *k == y)?
            .1
    }

    /// Render as CSV with a fixed header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("label,overlapped_with,overlap_percent\n");
        for row in &self.rows {
            for (other, ratio) in &row.entries {
                match ratio {
                    Some(r) => s.push_str(&format!("{},{},{:.4}\n", row.kind, other, r)),
                    None => s.push_str(&format!("{},{},\n", row.kind, other)),
                }
            }
        }
        s
    }
}

/// Compute the corpus overlap table. Durations are summed over all files
/// before dividing, so every ratio is duration-weighted. Same-type events
/// are unioned per file first, so overlapping instances never double-count.
pub fn corpus_overlap_table(corpus: &[Vec<LabelEvent>]) -> OverlapTable {
    // Per file and kind, the unioned interval set (with C derived).
    let mut ref_duration = [0.0f64; 4];
    let mut pair_duration = [[0.0f64; 4]; 4];
    for events in corpus {
        let events = derive_cas(events);
        let sets: Vec<IntervalSet> = OVERLAP_KINDS
            .iter()
            .map(|&k| to_interval_set(&events, k))
            .collect();
        for (i, set) in sets.iter().enumerate() {
            ref_duration[i] += set.duration();
            for (j, other) in sets.iter().enumerate() {
                if i != j {
                    pair_duration[i][j] += set.intersect(other).duration();
                }
            }
        }
    }
    let rows = OVERLAP_KINDS
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let entries = OVERLAP_KINDS
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, &other)| {
                    let ratio = (ref_duration[i] > 0.0)
                        .then(|| 100.0 * (pair_duration[i][j] / ref_duration[i]));
                    (other, ratio)
                })
                .collect();
            OverlapRow { kind, entries }
        })
        .collect();
    OverlapTable { rows }
}

/// Count, total duration, and mean duration for one label class.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StatsRow {
    pub count: u64,
    pub total_min: f64,
    pub mean_sec: f64,
}

/// Statistics for one device group (or the whole corpus).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroupStats {
    pub recordings: u64,
    /// Total recording duration in minutes (15 s per standardized file).
    pub recording_min: f64,
    /// Indexed by [`LabelType::index`]; order I, E, C, W, S, R, D.
    pub rows: [StatsRow; 7],
}

/// Corpus statistics per device and overall.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StatsReport {
    pub littmann: GroupStats,
    pub hf_type1: GroupStats,
    /// Files whose device could not be parsed from metadata.
    pub unknown_device: GroupStats,
    pub overall: GroupStats,
}

impl StatsReport {
    /// Render as CSV with a fixed header. Group names are
    /// `littmann3200`, `hf_type1`, `unknown`, and `all`; each group gets a
    /// `recordings` pseudo-row plus one row per label class.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("device,label,count,total_min,mean_sec\n");
        for (name, group) in [
            ("littmann3200", &self.littmann),
            ("hf_type1", &self.hf_type1),
            ("unknown", &self.unknown_device),
            ("all", &self.overall),
        ] {
            s.push_str(&format!(
                "{},recordings,{},{:.4},{:.4}\n",
                name,
                group.recordings,
                group.recording_min,
                if group.recordings > 0 { 15.0 } else { 0.0 }
            ));
            for kind in LabelType::REPORT_ORDER {
                let row = &group.rows[kind.index()];
                s.push_str(&format!(
                    "{},{},{},{:.4},{:.4}\n",
                    name, kind, row.count, row.total_min, row.mean_sec
                ));
            }
        }
        s
    }
}

fn accumulate(group: &mut GroupStats, events: &[LabelEvent]) {
    group.recordings += 1;
    group.recording_min += 15.0 / 60.0;
    for ev in events {
        let row = &mut group.rows[ev.kind.index()];
        row.count += 1;
        row.total_min += ev.duration() / 60.0;
    }
}

fn finish(group: &mut GroupStats) {
    for row in &mut group.rows {
        row.mean_sec = if row.count > 0 {
            row.total_min * 60.0 / row.count as f64
        } else {
            0.0
        };
    }
}

/// Tally label counts, total minutes, and mean seconds per class, by
/// device and overall. `C` is derived from `W`/`S`/`R` (plus any explicit
/// `C` events), so counts satisfy `C = W + S + R` for corpora labeled with
/// the concrete classes. Empty corpus yields an all-zero report.
pub fn corpus_statistics(files: &[LabeledFile]) -> StatsReport {
    let mut report = StatsReport::default();
    for file in files {
        let events = derive_cas(&file.events);
        accumulate(&mut report.overall, &events);
        match file.device {
            Some(Device::Littmann3200) => accumulate(&mut report.littmann, &events),
            Some(Device::HfType1) => accumulate(&mut report.hf_type1, &events),
            None => accumulate(&mut report.unknown_device, &events),
        }
    }
    finish(&mut report.overall);
    finish(&mut report.littmann);
    finish(&mut report.hf_type1);
    finish(&mut report.unknown_device);
    report
}
