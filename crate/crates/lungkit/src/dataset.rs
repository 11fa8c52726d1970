//! Leakage-free subject-level splitting, repeated k-fold planning,
//! task-specific file filtering, and ground-truth rasterization.

use crate::error::{Error, Result};
use crate::labels::{LabelEvent, LabelType};
use crate::FRAME_HOP_SECS;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// The four detection tasks, one binary model each.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    Inhalation,
    Exhalation,
    Cas,
    Das,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Inhalation, Task::Exhalation, Task::Cas, Task::Das];

    /// The label class this task detects.
    pub fn label(&self) -> LabelType {
        match self {
            Task::Inhalation => LabelType::I,
            Task::Exhalation => LabelType::E,
            Task::Cas => LabelType::C,
            Task::Das => LabelType::D,
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        match s {
            "I" => Some(Task::Inhalation),
            "E" => Some(Task::Exhalation),
            "C" => Some(Task::Cas),
            "D" => Some(Task::Das),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        self.label().as_str()
    }
}

/// A subject-level train/test split. No subject appears on both sides.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
    /// Recording count per subject, as supplied to [`assign_split`].
    pub counts: BTreeMap<String, usize>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn test_recording_fraction(&self) -> f64 {
        let total: usize = self.counts.values().sum();
        let test: usize = self
            .test_subjects
            .iter()
            .map(|s| self.counts.get(s).copied().unwrap_or(0))
            .sum();
        if total == 0 {
            0.0
        } else {
            test as f64 / total as f64
        }
    }

    /// Serialize as the split manifest CSV (`subject_id,role,repeat,fold`).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("subject_id,role,repeat,fold\n");
        for subject in &self.train_subjects {
            s.push_str(&format!("{subject},train,,\n"));
        }
        for subject in &self.test_subjects {
            s.push_str(&format!("{subject},test,,\n"));
        }
        s
    }

    /// Parse a manifest produced by [`DatasetSplit::to_csv`]. Recording
    /// counts are not stored in the manifest and are left empty.
    pub fn from_csv(text: &str, origin: &str) -> Result<DatasetSplit> {
        let mut split = DatasetSplit {
            train_subjects: Vec::new(),
            test_subjects: Vec::new(),
            counts: BTreeMap::new(),
            seed: 0,
        };
        for (idx, line) in text.lines().enumerate() {
            if idx == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 2 {
                return Err(Error::Syntax {
                    origin: origin.to_string(),
                    line: idx + 1,
                    msg: format!("expected `subject_id,role,...`, got `{line}`"),
                });
            }
            match fields[1] {
                "train" => split.train_subjects.push(fields[0].to_string()),
                "test" => split.test_subjects.push(fields[0].to_string()),
                other => {
                    return Err(Error::Syntax {
                        origin: origin.to_string(),
                        line: idx + 1,
                        msg: format!("unknown role `{other}`"),
                    })
                }
            }
        }
        Ok(split)
    }
}

/// Assign whole subjects to the test set until it holds at least
/// `test_fraction` of all recordings. Deterministic in `seed`; subjects
/// are shuffled, then taken in order.
pub fn assign_split(
    subject_recordings: &BTreeMap<String, usize>,
    test_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    if subject_recordings.len() < 2 {
        return Err(Error::Degenerate(format!(
            "{} subject(s) cannot be split without leakage",
            subject_recordings.len()
        )));
    }
    if !(0.0..1.0).contains(&test_fraction) || test_fraction <= 0.0 {
        return Err(Error::ConfigInvalid(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let total: usize = subject_recordings.values().sum();
    let target = test_fraction * total as f64;

    let mut order: Vec<&String> = subject_recordings.keys().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut test_subjects = Vec::new();
    let mut test_count = 0usize;
    let mut iter = order.into_iter();
    for subject in iter.by_ref() {
        test_subjects.push(subject.clone());
        test_count += subject_recordings[subject];
        if test_count as f64 >= target {
            break;
        }
    }
    let mut train_subjects: Vec<String> = iter.cloned().collect();
    // Keep manifests readable and runs reproducible independent of shuffle.
    train_subjects.sort();
    test_subjects.sort();
    if train_subjects.is_empty() {
        return Err(Error::Degenerate(
            "test fraction consumed every subject".into(),
        ));
    }
    Ok(DatasetSplit {
        train_subjects,
        test_subjects,
        counts: subject_recordings.clone(),
        seed,
    })
}

/// Cross-validation plan: per repeat, a partition of the training
/// subjects into `folds` validation groups.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldPlan {
    pub repeats: usize,
    pub folds: usize,
    /// `assignments[repeat][fold]` is that fold's validation subject set.
    pub assignments: Vec<Vec<Vec<String>>>,
}

/// One (training, validation) subject pair from a fold plan.
#[derive(Clone, Debug)]
pub struct FoldPair {
    pub repeat: usize,
    pub fold: usize,
    pub train_subjects: Vec<String>,
    pub val_subjects: Vec<String>,
}

impl FoldPlan {
    /// Enumerate all `repeats x folds` training configurations.
    pub fn pairs(&self) -> Vec<FoldPair> {
        let mut out = Vec::with_capacity(self.repeats * self.folds);
        for (r, groups) in self.assignments.iter().enumerate() {
            for (f, val) in groups.iter().enumerate() {
                let train: Vec<String> = groups
                    .iter()
                    .enumerate()
                    .filter(|&(g, _)| g != f)
                    .flat_map(|(_, subjects)| subjects.iter().cloned())
                    .collect();
                out.push(FoldPair {
                    repeat: r,
                    fold: f,
                    train_subjects: train,
                    val_subjects: val.clone(),
                });
            }
        }
        out
    }

    /// Serialize as the fold manifest CSV (`subject_id,role,repeat,fold`).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("subject_id,role,repeat,fold\n");
        for (r, groups) in self.assignments.iter().enumerate() {
            for (f, subjects) in groups.iter().enumerate() {
                for subject in subjects {
                    s.push_str(&format!("{subject},validation,{r},{f}\n"));
                }
            }
        }
        s
    }
}

/// Partition the training subjects into `k` near-equal validation groups,
/// independently reshuffled per repeat. Deterministic in `seed`.
pub fn make_folds(
    train_subjects: &[String],
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<FoldPlan> {
    if k < 2 || repeats == 0 {
        return Err(Error::ConfigInvalid(format!(
            "need k >= 2 and repeats >= 1, got k={k}, repeats={repeats}"
        )));
    }
    if train_subjects.len() < k {
        return Err(Error::TooFewSubjects {
            have: train_subjects.len(),
            need: k,
        });
    }
    let mut sorted: Vec<String> = train_subjects.to_vec();
    sorted.sort();
    sorted.dedup();

    let mut assignments = Vec::with_capacity(repeats);
    for repeat in 0..repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(repeat as u64 + 1)),
        );
        let mut order = sorted.clone();
        order.shuffle(&mut rng);
        let n = order.len();
        let base = n / k;
        let extra = n % k;
        let mut groups = Vec::with_capacity(k);
        let mut cursor = 0;
        for f in 0..k {
            let size = base + usize::from(f < extra);
            let mut group: Vec<String> = order[cursor..cursor + size].to_vec();
            group.sort();
            groups.push(group);
            cursor += size;
        }
        assignments.push(groups);
    }
    Ok(FoldPlan {
        repeats,
        folds: k,
        assignments,
    })
}

/// Keep only the files a task trains and tests on: CAS and DAS models see
/// only files containing at least one matching label, while breath-phase
/// models keep every file.
pub fn filter_task_files<T>(
    files: Vec<T>,
    task: Task,
    events_of: impl Fn(&T) -> &[LabelEvent],
) -> Vec<T> {
    match task {
        Task::Inhalation | Task::Exhalation => files,
        Task::Cas | Task::Das => {
            let wanted = task.label();
            files
                .into_iter()
                .filter(|f| {
                    events_of(f).iter().any(|e| {
                        e.kind == wanted
                            || (wanted == LabelType::C
                                && matches!(e.kind, LabelType::W | LabelType::S | LabelType::R))
                    })
                })
                .collect()
        }
    }
}

/// Per-frame binary grid aligned with the feature matrix of the same
/// recording.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentGrid {
    values: Vec<bool>,
}

impl SegmentGrid {
    pub fn new(values: Vec<bool>) -> Self {
        SegmentGrid { values }
    }

    pub fn frames(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn positive_count(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    /// Maximal positive runs as `[start, end)` second-intervals on the
    /// frame grid.
    pub fn to_intervals(&self, hop: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut run_start: Option<usize> = None;
        for (i, &v) in self.values.iter().enumerate() {
            match (v, run_start) {
                (true, None) => run_start = Some(i),
                (false, Some(s)) => {
                    out.push((s as f64 * hop, i as f64 * hop));
                    run_start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = run_start {
            out.push((s as f64 * hop, self.values.len() as f64 * hop));
        }
        out
    }
}

/// Rasterize intervals onto a frame grid: frame `k` covers
/// `[k*hop, (k+1)*hop)` and is positive iff its midpoint lies inside any
/// interval. Intervals must fit inside the grid.
pub fn rasterize(intervals: &[(f64, f64)], n_frames: usize, hop: f64) -> Result<SegmentGrid> {
    let max = n_frames as f64 * hop;
    for &(start, end) in intervals {
        if start < 0.0 || end > max + 1e-9 {
            return Err(Error::OutOfRange { start, end, max });
        }
    }
    let values = (0..n_frames)
        .map(|k| {
            let mid = (k as f64 + 0.5) * hop;
            intervals.iter().any(|&(s, e)| s <= mid && mid < e)
        })
        .collect();
    Ok(SegmentGrid::new(values))
}

/// Rasterize the events of one kind onto the grid of a recording with
/// `n_frames` feature frames. Labels may legitimately extend past the
/// last frame (a 15 s file has 934 frames covering 14.944 s), so events
/// are clipped to the grid; events entirely outside it are dropped.
pub fn rasterize_events(
    events: &[LabelEvent],
    kind: LabelType,
    n_frames: usize,
) -> Result<SegmentGrid> {
    let max = n_frames as f64 * FRAME_HOP_SECS;
    let clipped: Vec<(f64, f64)> = events
        .iter()
        .filter(|e| e.kind == kind)
        .map(|e| (e.start.max(0.0), e.end.min(max)))
        .filter(|(s, e)| e > s)
        .collect();
    rasterize(&clipped, n_frames, FRAME_HOP_SECS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn subjects(n: usize, recs: usize) -> BTreeMap<String, usize> {
        (0..n).map(|i| (format!("S{i:03}"), recs)).collect()
    }

    #[test]
    fn equal_subjects_split_4_to_1() {
        for seed in 0..5 {
            let split = assign_split(&subjects(10, 10), 0.2, seed).unwrap();
            assert_eq!(split.test_subjects.len(), 2);
            assert_eq!(split.train_subjects.len(), 8);
            assert!((split.test_recording_fraction() - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn no_subject_in_both_sets() {
        let split = assign_split(&subjects(23, 7), 0.2, 99).unwrap();
        for s in &split.test_subjects {
            assert!(!split.train_subjects.contains(s));
        }
        assert_eq!(split.test_subjects.len() + split.train_subjects.len(), 23);
    }

    #[test]
    fn same_seed_same_split() {
        let a = assign_split(&subjects(17, 4), 0.25, 42).unwrap();
        let b = assign_split(&subjects(17, 4), 0.25, 42).unwrap();
        assert_eq!(a, b);
        let c = assign_split(&subjects(17, 4), 0.25, 43).unwrap();
        assert!(a.test_subjects != c.test_subjects || a.seed != c.seed);
    }

    #[test]
    fn single_subject_is_degenerate() {
        assert!(matches!(
            assign_split(&subjects(1, 10), 0.2, 0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn split_manifest_round_trip() {
        let split = assign_split(&subjects(9, 3), 0.2, 5).unwrap();
        let back = DatasetSplit::from_csv(&split.to_csv(), "mem").unwrap();
        assert_eq!(back.train_subjects, split.train_subjects);
        assert_eq!(back.test_subjects, split.test_subjects);
    }

    #[test]
    fn folds_partition_subjects() {
        let names: Vec<String> = (0..25).map(|i| format!("S{i:03}")).collect();
        let plan = make_folds(&names, 5, 3, 7).unwrap();
        assert_eq!(plan.assignments.len(), 3);
        for groups in &plan.assignments {
            assert_eq!(groups.len(), 5);
            let mut seen: Vec<&String> = groups.iter().flatten().collect();
            assert_eq!(seen.len(), 25);
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), 25, "every subject in exactly one fold");
            for g in groups {
                assert_eq!(g.len(), 5);
            }
        }
        assert_eq!(plan.pairs().len(), 15);
    }

    #[test]
    fn fold_pairs_are_disjoint() {
        let names: Vec<String> = (0..12).map(|i| format!("P{i}")).collect();
        let plan = make_folds(&names, 5, 2, 1).unwrap();
        for pair in plan.pairs() {
            for v in &pair.val_subjects {
                assert!(!pair.train_subjects.contains(v));
            }
            assert_eq!(pair.train_subjects.len() + pair.val_subjects.len(), 12);
        }
    }

    #[test]
    fn too_few_subjects_for_folds() {
        let names: Vec<String> = (0..3).map(|i| format!("S{i}")).collect();
        assert!(matches!(
            make_folds(&names, 5, 3, 0),
            Err(Error::TooFewSubjects { have: 3, need: 5 })
        ));
    }

    #[test]
    fn repeats_shuffle_independently() {
        let names: Vec<String> = (0..25).map(|i| format!("S{i:03}")).collect();
        let plan = make_folds(&names, 5, 3, 11).unwrap();
        assert!(
            plan.assignments[0] != plan.assignments[1]
                || plan.assignments[1] != plan.assignments[2],
            "independent repeats should differ"
        );
        let again = make_folds(&names, 5, 3, 11).unwrap();
        assert_eq!(plan, again);
    }

    #[test]
    fn task_filter_keeps_all_for_breath_phases() {
        let files = vec![
            vec![LabelEvent::new(LabelType::I, 0.0, 1.0)],
            vec![LabelEvent::new(LabelType::D, 0.0, 1.0)],
            vec![],
        ];
        let kept = filter_task_files(files.clone(), Task::Inhalation, |f| f.as_slice());
        assert_eq!(kept.len(), 3);
    }

    #[test]
    fn task_filter_selects_cas_files() {
        let files = vec![
            vec![LabelEvent::new(LabelType::I, 0.0, 1.0)],
            vec![LabelEvent::new(LabelType::W, 0.0, 1.0)],
            vec![LabelEvent::new(LabelType::C, 0.0, 1.0)],
            vec![LabelEvent::new(LabelType::D, 0.0, 1.0)],
        ];
        let kept = filter_task_files(files, Task::Cas, |f| f.as_slice());
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn task_filter_selects_das_files() {
        let files = vec![
            vec![LabelEvent::new(LabelType::I, 0.0, 1.0)],
            vec![LabelEvent::new(LabelType::D, 0.0, 1.0)],
        ];
        let kept = filter_task_files(files, Task::Das, |f| f.as_slice());
        assert_eq!(kept.len(), 1);
        assert!(
            filter_task_files(Vec::<Vec<LabelEvent>>::new(), Task::Das, |f| f.as_slice())
                .is_empty()
        );
    }

    #[test]
    fn midpoint_rule_at_boundaries() {
        let grid = rasterize(&[(0.0, 0.016)], 4, 0.016).unwrap();
        assert_eq!(grid.values(), &[true, false, false, false]);
    }

    #[test]
    fn whole_file_event_fills_grid() {
        let grid = rasterize(&[(0.0, 934.0 * 0.016)], 934, 0.016).unwrap();
        assert_eq!(grid.positive_count(), 934);
    }

    #[test]
    fn no_events_all_negative() {
        let grid = rasterize(&[], 10, 0.016).unwrap();
        assert_eq!(grid.positive_count(), 0);
    }

    #[test]
    fn event_outside_grid_is_out_of_range() {
        assert!(matches!(
            rasterize(&[(0.0, 1.0)], 10, 0.016),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn rasterize_events_clips_to_grid() {
        // A label ending at 15 s still rasterizes onto the 934-frame grid.
        let events = vec![LabelEvent::new(LabelType::I, 14.5, 15.0)];
        let grid = rasterize_events(&events, LabelType::I, 934).unwrap();
        assert!(grid.positive_count() > 0);
        assert!(grid.values()[933]);
    }

    proptest! {
        #[test]
        fn grid_to_intervals_round_trips(
            values in proptest::collection::vec(any::<bool>(), 1..200)
        ) {
            let grid = SegmentGrid::new(values);
            let intervals = grid.to_intervals(FRAME_HOP_SECS);
            let back = rasterize(&intervals, grid.frames(), FRAME_HOP_SECS).unwrap();
            prop_assert_eq!(back, grid);
        }

        #[test]
        fn split_is_leakage_free(
            n in 2usize..40,
            recs in proptest::collection::vec(1usize..20, 40),
            seed in any::<u64>(),
        ) {
            let map: BTreeMap<String, usize> = (0..n)
                .map(|i| (format!("S{i}"), recs[i]))
                .collect();
            if let Ok(split) = assign_split(&map, 0.2, seed) {
                for s in &split.test_subjects {
                    prop_assert!(!split.train_subjects.contains(s));
                }
                prop_assert_eq!(split.test_subjects.len() + split.train_subjects.len(), n);
            }
        }
    }
}
