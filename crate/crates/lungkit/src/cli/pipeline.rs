//! Implementations behind the CLI subcommands, callable as a library.

use crate::audio::{read_wav, standardize_length, NamePattern};
use crate::corpus::{scan_corpus, subject_recording_counts, CorpusFile};
use crate::dataset::{make_folds, rasterize_events, DatasetSplit, SegmentGrid, Task};
use crate::dsp::{extract_features, write_feature_file, FeatureMatrix};
use crate::error::{Error, Result};
use crate::evaluation::{
    aggregate_report, event_f1, match_events, segment_confusion, ConfusionCounts, EventCounts,
    MatchMode, MetricsReport, ModelMetrics,
};
use crate::labels::{
    corpus_overlap_table, corpus_statistics, derive_cas, to_interval_set, write_label_file,
    LabelEvent, LabeledFile,
};
use crate::nnet::{forward, load_model, save_model, train, ModelParams, TrainConfig, TrainSample};
use crate::postprocess::{segments_to_events, threshold_segments, PostprocessConfig};
use crate::synth::{derive_seed, synth_corpus};
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

/// Build a thread pool honoring `--jobs` (0 means all cores).
fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::ConfigInvalid(format!("cannot build worker pool: {e}")))
}

/// Load the labeled corpus under `dir`: every discovered file with its
/// parsed (raw) events.
fn load_labeled_corpus(
    dir: &Path,
    pattern: &NamePattern,
) -> Result<(Vec<CorpusFile>, Vec<Vec<LabelEvent>>)> {
    let (files, warnings) = scan_corpus(dir, pattern)?;
    print_warnings(&warnings);
    if files.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no recordings or label files under {}",
            dir.display()
        )));
    }
    let mut all_events = Vec::with_capacity(files.len());
    for f in &files {
        let (events, warnings) = f.load_labels()?;
        print_warnings(&warnings);
        all_events.push(events);
    }
    Ok((files, all_events))
}

pub struct StatsOptions {
    pub data: PathBuf,
    pub out: PathBuf,
    pub pattern: NamePattern,
}

/// `stats`: corpus label statistics as CSV.
pub fn run_stats(opts: &StatsOptions) -> Result<String> {
    let (files, all_events) = load_labeled_corpus(&opts.data, &opts.pattern)?;
    let labeled: Vec<LabeledFile> = files
        .iter()
        .zip(all_events)
        .map(|(f, events)| LabeledFile {
            device: f.meta.device,
            events,
        })
        .collect();
    let report = corpus_statistics(&labeled);
    write_text(&opts.out, &report.to_csv())?;
    let mut s = format!(
        "{} recordings ({:.2} min total)\n",
        report.overall.recordings, report.overall.recording_min
    );
    for kind in crate::labels::LabelType::REPORT_ORDER {
        let row = &report.overall.rows[kind.index()];
        let _ = writeln!(
            s,
            "  {kind}: {} events, {:.2} min, mean {:.2} s",
            row.count, row.total_min, row.mean_sec
        );
    }
    let _ = write!(s, "written to {}", opts.out.display());
    Ok(s)
}

pub struct OverlapOptions {
    pub labels: PathBuf,
    pub out: PathBuf,
    pub pattern: NamePattern,
}

/// `overlap`: between-class overlap-ratio table as CSV.
pub fn run_overlap(opts: &OverlapOptions) -> Result<String> {
    let (_, all_events) = load_labeled_corpus(&opts.labels, &opts.pattern)?;
    let table = corpus_overlap_table(&all_events);
    write_text(&opts.out, &table.to_csv())?;
    let mut s = String::from("overlap ratios (% of row class covered by column class)\n");
    for row in &table.rows {
        let _ = write!(s, "  {}:", row.kind);
        for (other, ratio) in &row.entries {
            match ratio {
                Some(r) => {
                    let _ = write!(s, "  {other} {r:.1}");
                }
                None => {
                    let _ = write!(s, "  {other} n/a");
                }
            }
        }
        s.push('\n');
    }
    let _ = write!(s, "written to {}", opts.out.display());
    Ok(s)
}

pub struct SplitOptions {
    pub data: PathBuf,
    pub test_fraction: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub pattern: NamePattern,
}

/// `split`: subject-level train/test manifest.
pub fn run_split(opts: &SplitOptions) -> Result<String> {
    let (files, warnings) = scan_corpus(&opts.data, &opts.pattern)?;
    print_warnings(&warnings);
    let counts = subject_recording_counts(&files);
    let split = crate::dataset::assign_split(&counts, opts.test_fraction, opts.seed)?;
    let fraction = split.test_recording_fraction();
    if (fraction - opts.test_fraction).abs() > 0.05 {
        eprintln!(
            "warning: test fraction {fraction:.3} deviates more than 5 points from target {}",
            opts.test_fraction
        );
    }
    write_text(&opts.out, &split.to_csv())?;
    Ok(format!(
        "{} train / {} test subjects ({:.1}% of recordings held out)\nwritten to {}",
        split.train_subjects.len(),
        split.test_subjects.len(),
        100.0 * fraction,
        opts.out.display()
    ))
}

pub struct FeaturesOptions {
    pub input: PathBuf,
    pub out: PathBuf,
    pub pattern: NamePattern,
}

/// `features`: extract one recording's feature matrix into a cache file.
pub fn run_features(opts: &FeaturesOptions) -> Result<String> {
    let (rec, warnings) = read_wav(&opts.input, &opts.pattern)?;
    print_warnings(&warnings);
    let rec = standardize_length(rec)?;
    let features = extract_features(&rec, None)?;
    write_feature_file(&opts.out, &features)?;
    Ok(format!(
        "{} -> {} ({} frames x {} channels)",
        opts.input.display(),
        opts.out.display(),
        features.frames,
        features.channels
    ))
}

pub struct SynthOptions {
    pub n: usize,
    pub subjects: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub resolved_config: String,
}

/// `synth`: generate a synthetic corpus.
pub fn run_synth(opts: &SynthOptions) -> Result<String> {
    let manifest = synth_corpus(opts.n, opts.subjects, opts.seed, &opts.out)?;
    write_text(&opts.out.join("resolved_config.txt"), &opts.resolved_config)?;
    Ok(format!(
        "{} recordings across {} subjects written to {}",
        manifest.entries.len(),
        opts.subjects.min(opts.n),
        opts.out.display()
    ))
}

pub struct PredictOptions {
    pub model: PathBuf,
    pub input: PathBuf,
    pub out: PathBuf,
    pub postprocess: PostprocessConfig,
    pub pattern: NamePattern,
}

/// `predict`: per-frame probabilities for one WAV, postprocessed into
/// timed events written in the label grammar.
pub fn run_predict(opts: &PredictOptions) -> Result<String> {
    opts.postprocess.validate()?;
    let params = load_model(&opts.model)?;
    let (rec, warnings) = read_wav(&opts.input, &opts.pattern)?;
    print_warnings(&warnings);
    let rec = standardize_length(rec)?;
    let features = extract_features(&rec, Some(&params.norm))?;
    let probs = forward(&params, &features)?;
    let grid = threshold_segments(&probs, &opts.postprocess);
    let events = segments_to_events(&grid, &opts.postprocess);
    let label_events: Vec<LabelEvent> = events
        .iter()
        .map(|&(s, e)| LabelEvent::new(params.task.label(), s, e))
        .collect();
    write_label_file(&opts.out, &label_events)?;
    Ok(format!(
        "{} {} events -> {}",
        label_events.len(),
        params.task.as_str(),
        opts.out.display()
    ))
}

pub struct EvaluateOptions {
    pub pred: PathBuf,
    pub truth: PathBuf,
    pub task: Task,
    pub out: PathBuf,
    pub postprocess: PostprocessConfig,
    pub pattern: NamePattern,
}

/// Suffix for prediction files paired with truth stems.
pub const PRED_SUFFIX: &str = "_pred.txt";

/// `evaluate`: score a directory of predictions against truth labels.
pub fn run_evaluate(opts: &EvaluateOptions) -> Result<String> {
    let (files, all_events) = load_labeled_corpus(&opts.truth, &opts.pattern)?;
    let kind = opts.task.label();

    let mut segment = ConfusionCounts::default();
    let mut event = EventCounts::default();
    let mut evaluated = 0usize;
    for (file, events) in files.iter().zip(&all_events) {
        if file.label_file.is_none() {
            continue;
        }
        let truth_events = derive_cas(events);
        let pred_path = opts.pred.join(format!("{}{}", file.stem, PRED_SUFFIX));
        let pred_events = if pred_path.exists() {
            let parsed = crate::labels::parse_label_file(&pred_path)?;
            print_warnings(&parsed.warnings);
            parsed.events
        } else {
            eprintln!(
                "warning: no prediction file for `{}`; treating as empty",
                file.stem
            );
            Vec::new()
        };

        let n_frames = crate::frame_count(crate::STANDARD_SAMPLES);
        let truth_grid = rasterize_events(&truth_events, kind, n_frames)?;
        let pred_grid = rasterize_events(&pred_events, kind, n_frames)?;
        segment.add(&segment_confusion(&pred_grid, &truth_grid)?);

        let truth_iv = to_interval_set(&truth_events, kind);
        let pred_iv = to_interval_set(&pred_events, kind);
        let m = match_events(truth_iv.intervals(), pred_iv.intervals());
        event.add(&event_f1(&m));
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(Error::EmptyDataset(format!(
            "no labeled files under {}",
            opts.truth.display()
        )));
    }

    let metrics = ModelMetrics {
        repeat: 0,
        fold: 0,
        segment,
        event,
    };
    let report = aggregate_report(
        opts.task,
        vec![metrics],
        1,
        &opts.postprocess,
        MatchMode::Existence,
    )?;
    write_report(&report, &opts.out)?;
    Ok(format!(
        "{} files: segment F1 {:.3}, event F1 {:.3}\nwritten to {}",
        evaluated,
        report.mean_segment_f1,
        report.mean_event_f1,
        opts.out.display()
    ))
}

/// Write a report as JSON, with a sibling CSV when the path ends in
/// `.json`.
pub fn write_report(report: &MetricsReport, path: &Path) -> Result<()> {
    write_text(path, &report.to_json())?;
    if path.extension().is_some_and(|e| e == "json") {
        write_text(&path.with_extension("csv"), &report.to_csv())?;
    }
    Ok(())
}

pub struct TrainOptions {
    pub task: Task,
    pub data: PathBuf,
    pub split_manifest: PathBuf,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub train: TrainConfig,
    pub postprocess: PostprocessConfig,
    pub jobs: usize,
    pub pattern: NamePattern,
    pub resolved_config: String,
}

struct PreparedFile {
    subject: String,
    features: FeatureMatrix,
    grid: SegmentGrid,
    truth_intervals: Vec<(f64, f64)>,
}

/// `train`: repeated k-fold cross-validation on the split's training
/// subjects, one model per (repeat, fold), each evaluated on the split's
/// held-out test subjects; metrics averaged into one report.
pub fn run_train(opts: &TrainOptions) -> Result<String> {
    opts.postprocess.validate()?;
    opts.train.validate()?;
    std::fs::create_dir_all(&opts.out).map_err(|e| Error::io(&opts.out, e))?;

    let (files, all_events) = load_labeled_corpus(&opts.data, &opts.pattern)?;
    let manifest_text = std::fs::read_to_string(&opts.split_manifest)
        .map_err(|e| Error::io(&opts.split_manifest, e))?;
    let split = DatasetSplit::from_csv(&manifest_text, &opts.split_manifest.display().to_string())?;
    let train_set: BTreeSet<&String> = split.train_subjects.iter().collect();
    let test_set: BTreeSet<&String> = split.test_subjects.iter().collect();

    // Task filtering on files with audio, split by manifest role.
    let kind = opts.task.label();
    let candidates: Vec<(usize, &CorpusFile)> = files
        .iter()
        .enumerate()
        .filter(|(_, f)| f.wav.is_some() && f.label_file.is_some())
        .collect();
    let keep = crate::dataset::filter_task_files(candidates, opts.task, |&(i, _)| {
        all_events[i].as_slice()
    });

    let mut train_files: Vec<(usize, &CorpusFile)> = Vec::new();
    let mut test_files: Vec<(usize, &CorpusFile)> = Vec::new();
    for (i, f) in keep {
        let subject = f.subject_or_stem();
        if train_set.contains(&subject) {
            train_files.push((i, f));
        } else if test_set.contains(&subject) {
            test_files.push((i, f));
        }
    }
    if train_files.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no training files for task {} under {}",
            opts.task.as_str(),
            opts.data.display()
        )));
    }

    // Extract features for every needed file, fanned out over workers.
    let pool = thread_pool(opts.jobs)?;
    let prepare = |set: &[(usize, &CorpusFile)]| -> Result<Vec<PreparedFile>> {
        pool.install(|| {
            set.par_iter()
                .map(|&(i, f)| {
                    let (rec, _) = read_wav(f.wav.as_ref().unwrap(), &opts.pattern)?;
                    let rec = standardize_length(rec)?;
                    let features = extract_features(&rec, None)?;
                    let truth_events = derive_cas(&all_events[i]);
                    let grid = rasterize_events(&truth_events, kind, features.frames)?;
                    let truth_intervals = to_interval_set(&truth_events, kind).intervals().to_vec();
                    Ok(PreparedFile {
                        subject: f.subject_or_stem(),
                        features,
                        grid,
                        truth_intervals,
                    })
                })
                .collect()
        })
    };
    let train_prepared = prepare(&train_files)?;
    let test_prepared = prepare(&test_files)?;

    let mut train_subjects: Vec<String> =
        train_prepared.iter().map(|p| p.subject.clone()).collect();
    train_subjects.sort();
    train_subjects.dedup();
    let plan = make_folds(&train_subjects, opts.folds, opts.repeats, opts.seed)?;
    write_text(&opts.out.join("folds.csv"), &plan.to_csv())?;
    write_text(&opts.out.join("resolved_config.txt"), &opts.resolved_config)?;

    let mut metrics = Vec::new();
    let mut summary = String::new();
    for pair in plan.pairs() {
        let in_subjects = |subjects: &[String], p: &PreparedFile| subjects.contains(&p.subject);
        let to_samples = |subset: &[String]| -> Vec<TrainSample> {
            train_prepared
                .iter()
                .filter(|p| in_subjects(subset, p))
                .map(|p| TrainSample {
                    features: p.features.clone(),
                    grid: p.grid.clone(),
                })
                .collect()
        };
        let train_samples = to_samples(&pair.train_subjects);
        let val_samples = to_samples(&pair.val_subjects);

        let mut config = opts.train;
        config.seed = derive_seed(opts.seed, (pair.repeat * opts.folds + pair.fold) as u64);
        let outcome = train(opts.task, &train_samples, &val_samples, &config)?;

        let tag = format!("r{}_f{}", pair.repeat, pair.fold);
        save_model(
            &outcome.best_params,
            &opts.out.join(format!("model_{tag}.lkmd")),
        )?;
        let mut log_csv = String::from("epoch,train_loss,val_loss\n");
        for e in &outcome.log {
            let val = e.val_loss.map(|v| format!("{v:.6}")).unwrap_or_default();
            let _ = writeln!(log_csv, "{},{:.6},{val}", e.epoch, e.train_loss);
        }
        write_text(&opts.out.join(format!("train_log_{tag}.csv")), &log_csv)?;

        let (segment, event) = pool
            .install(|| evaluate_model(&outcome.best_params, &test_prepared, &opts.postprocess))?;
        let model_metrics = ModelMetrics {
            repeat: pair.repeat,
            fold: pair.fold,
            segment,
            event,
        };
        let _ = writeln!(
            summary,
            "model {tag}: {} train / {} val files, val loss {}, test segment F1 {:.3}, event F1 {:.3}",
            train_samples.len(),
            val_samples.len(),
            outcome
                .log
                .last()
                .and_then(|e| e.val_loss)
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "n/a".into()),
            model_metrics.segment.f1(),
            model_metrics.event.f1(),
        );
        metrics.push(model_metrics);
    }

    let report = aggregate_report(
        opts.task,
        metrics,
        opts.folds * opts.repeats,
        &opts.postprocess,
        MatchMode::Existence,
    )?;
    write_report(&report, &opts.out.join("report.json"))?;
    let _ = write!(
        summary,
        "mean over {} models on {} test files: segment F1 {:.3}, event F1 {:.3}\nartifacts in {}",
        report.models.len(),
        test_prepared.len(),
        report.mean_segment_f1,
        report.mean_event_f1,
        opts.out.display()
    );
    Ok(summary)
}

/// Evaluate one model over prepared files: frame confusion on the
/// thresholded grids, event matching on the postprocessed events.
fn evaluate_model(
    params: &ModelParams,
    files: &[PreparedFile],
    postprocess: &PostprocessConfig,
) -> Result<(ConfusionCounts, EventCounts)> {
    let per_file: Result<Vec<(ConfusionCounts, EventCounts)>> = files
        .par_iter()
        .map(|p| {
            let mut features = p.features.clone();
            params.norm.apply(&mut features)?;
            let probs = forward(params, &features)?;
            let grid = threshold_segments(&probs, postprocess);
            let segment = segment_confusion(&grid, &p.grid)?;
            let events = segments_to_events(&grid, postprocess);
            let m = match_events(&p.truth_intervals, &events);
            Ok((segment, event_f1(&m)))
        })
        .collect();
    let mut segment = ConfusionCounts::default();
    let mut event = EventCounts::default();
    for (s, e) in per_file? {
        segment.add(&s);
        event.add(&e);
    }
    Ok((segment, event))
}

/// Load subject recording counts from a data directory (used by `split`
/// tests and examples).
pub fn subject_counts_of_dir(dir: &Path, pattern: &NamePattern) -> Result<BTreeMap<String, usize>> {
    let (files, _) = scan_corpus(dir, pattern)?;
    Ok(subject_recording_counts(&files))
}
