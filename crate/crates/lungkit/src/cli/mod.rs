//! Command-line interface: one subcommand per pipeline stage.
//!
//! Exit codes: 0 success, 1 runtime or data error, 2 usage or
//! configuration error. Flags may also be supplied through a plain-text
//! `key = value` config file (`--config`); explicit flags win, and
//! unknown keys are rejected.

pub mod pipeline;

use crate::audio::{NamePattern, DEFAULT_NAME_PATTERN};
use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::nnet::{Arch, TrainConfig};
use crate::postprocess::PostprocessConfig;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "lungkit", version, about = "Lung-sound analysis pipeline")]
struct Cli {
    /// Plain-text `key = value` config file; explicit flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-file stages (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Label statistics per class and device, as CSV
    Stats {
        /// Directory of recordings and label files
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Regex with named groups source/subject/location/datetime
        #[arg(long)]
        name_pattern: Option<String>,
    },
    /// Overlap ratios between I, E, C, and D labels, as CSV
    Overlap {
        /// Directory of label files
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        name_pattern: Option<String>,
    },
    /// Subject-level train/test split manifest
    Split {
        #[arg(long)]
        data: PathBuf,
        /// Target fraction of recordings held out for testing
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        name_pattern: Option<String>,
    },
    /// Extract one recording's feature matrix into a cache file
    Features {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated k-fold training plus held-out evaluation
    Train {
        /// Detection task: I, E, C, or D
        #[arg(long, value_parser = parse_task)]
        task: Task,
        #[arg(long)]
        data: PathBuf,
        /// Split manifest from `lungkit split`
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for models, logs, and the report
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Channels of both convolution layers
        #[arg(long)]
        conv_channels: Option<usize>,
        /// GRU hidden units per direction
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        merge_gap: Option<usize>,
        #[arg(long)]
        min_duration: Option<usize>,
        #[arg(long)]
        name_pattern: Option<String>,
    },
    /// Predict timed events for one recording
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        merge_gap: Option<usize>,
        #[arg(long)]
        min_duration: Option<usize>,
    },
    /// Score predicted events against truth labels
    Evaluate {
        /// Directory of `<stem>_pred.txt` event files
        #[arg(long)]
        pred: PathBuf,
        /// Directory of `<stem>_label.txt` truth files
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_parser = parse_task)]
        task: Task,
        /// Report path (`.json`; a sibling `.csv` is written too)
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        merge_gap: Option<usize>,
        #[arg(long)]
        min_duration: Option<usize>,
        #[arg(long)]
        name_pattern: Option<String>,
    },
    /// Generate a synthetic corpus with exact labels
    Synth {
        /// Number of recordings
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Number of synthetic subjects (default n/8, at least 2)
        #[arg(long)]
        subjects: Option<usize>,
    },
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    Task::parse(s).ok_or_else(|| format!("unknown task `{s}`; expected I, E, C, or D"))
}

/// Keys accepted in the `--config` file.
const CONFIG_KEYS: [&str; 13] = [
    "batch_size",
    "conv_channels",
    "epochs",
    "folds",
    "hidden",
    "jobs",
    "learning_rate",
    "merge_gap",
    "min_duration",
    "name_pattern",
    "repeats",
    "test_fraction",
    "threshold",
];

/// Parsed `key = value` config file.
#[derive(Debug, Default)]
struct FileConfig(BTreeMap<String, String>);

impl FileConfig {
    fn load(path: Option<&PathBuf>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::ConfigInvalid(format!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    idx + 1
                ))
            })?;
            let key = key.trim().to_string();
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::ConfigInvalid(format!(
                    "{}:{}: unknown key `{key}`",
                    path.display(),
                    idx + 1
                )));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(FileConfig(map))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::ConfigInvalid(format!("config key `{key}`: cannot parse `{raw}`"))
            }),
        }
    }
}

/// Flag, then config file, then default.
fn resolve<T: std::str::FromStr + Copy>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
    default: T,
) -> Result<T> {
    Ok(flag.or(file.get(key)?).unwrap_or(default))
}

fn name_pattern(flag: Option<String>, file: &FileConfig) -> Result<(NamePattern, String)> {
    let pattern = flag
        .or(file.get::<String>("name_pattern")?)
        .unwrap_or_else(|| DEFAULT_NAME_PATTERN.to_string());
    Ok((NamePattern::new(&pattern)?, pattern))
}

fn postprocess_config(
    threshold: Option<f64>,
    merge_gap: Option<usize>,
    min_duration: Option<usize>,
    file: &FileConfig,
) -> Result<PostprocessConfig> {
    let defaults = PostprocessConfig::default();
    let config = PostprocessConfig {
        threshold: resolve(threshold, file, "threshold", defaults.threshold)?,
        merge_gap: resolve(merge_gap, file, "merge_gap", defaults.merge_gap)?,
        min_duration: resolve(min_duration, file, "min_duration", defaults.min_duration)?,
    };
    config.validate()?;
    Ok(config)
}

/// Run the CLI on an argument vector, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e @ Error::ConfigInvalid(_)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cli: Cli) -> Result<String> {
    let file = FileConfig::load(cli.config.as_ref())?;
    let jobs = resolve(cli.jobs, &file, "jobs", 0usize)?;
    match cli.command {
        Command::Stats {
            data,
            out,
            name_pattern: np,
        } => {
            let (pattern, _) = name_pattern(np, &file)?;
            pipeline::run_stats(&pipeline::StatsOptions { data, out, pattern })
        }
        Command::Overlap {
            labels,
            out,
            name_pattern: np,
        } => {
            let (pattern, _) = name_pattern(np, &file)?;
            pipeline::run_overlap(&pipeline::OverlapOptions {
                labels,
                out,
                pattern,
            })
        }
        Command::Split {
            data,
            test_fraction,
            seed,
            out,
            name_pattern: np,
        } => {
            let (pattern, _) = name_pattern(np, &file)?;
            pipeline::run_split(&pipeline::SplitOptions {
                data,
                test_fraction: resolve(test_fraction, &file, "test_fraction", 0.2)?,
                seed: seed.unwrap_or(0),
                out,
                pattern,
            })
        }
        Command::Features { input, out } => pipeline::run_features(&pipeline::FeaturesOptions {
            input,
            out,
            pattern: NamePattern::default_pattern(),
        }),
        Command::Train {
            task,
            data,
            split,
            folds,
            repeats,
            seed,
            out,
            epochs,
            learning_rate,
            batch_size,
            conv_channels,
            hidden,
            threshold,
            merge_gap,
            min_duration,
            name_pattern: np,
        } => {
            let (pattern, pattern_str) = name_pattern(np, &file)?;
            let defaults = TrainConfig::default();
            let conv = resolve(conv_channels, &file, "conv_channels", 64usize)?;
            let arch = Arch {
                conv1_out: conv,
                conv2_out: conv,
                hidden: resolve(hidden, &file, "hidden", 64usize)?,
                ..Arch::default()
            };
            let train = TrainConfig {
                learning_rate: resolve(
                    learning_rate,
                    &file,
                    "learning_rate",
                    defaults.learning_rate,
                )?,
                epochs: resolve(epochs, &file, "epochs", defaults.epochs)?,
                batch_size: resolve(batch_size, &file, "batch_size", defaults.batch_size)?,
                arch,
                ..defaults
            };
            let postprocess = postprocess_config(threshold, merge_gap, min_duration, &file)?;
            let folds = resolve(folds, &file, "folds", 5usize)?;
            let repeats = resolve(repeats, &file, "repeats", 3usize)?;
            let seed = seed.unwrap_or(0);
            let opts = pipeline::TrainOptions {
                task,
                data: data.clone(),
                split_manifest: split.clone(),
                folds,
                repeats,
                seed,
                out,
                train,
                postprocess,
                jobs,
                pattern,
                resolved_config: String::new(),
            };
            let resolved = resolved_config(&[
                ("command", "train".into()),
                ("task", task.as_str().into()),
                ("data", data.display().to_string()),
                ("split", split.display().to_string()),
                ("folds", folds.to_string()),
                ("repeats", repeats.to_string()),
                ("seed", seed.to_string()),
                ("epochs", train.epochs.to_string()),
                ("learning_rate", train.learning_rate.to_string()),
                ("batch_size", train.batch_size.to_string()),
                ("conv_channels", conv.to_string()),
                ("hidden", arch.hidden.to_string()),
                ("threshold", postprocess.threshold.to_string()),
                ("merge_gap", postprocess.merge_gap.to_string()),
                ("min_duration", postprocess.min_duration.to_string()),
                ("name_pattern", pattern_str),
            ]);
            pipeline::run_train(&pipeline::TrainOptions {
                resolved_config: resolved,
                ..opts
            })
        }
        Command::Predict {
            model,
            input,
            out,
            threshold,
            merge_gap,
            min_duration,
        } => {
            let postprocess = postprocess_config(threshold, merge_gap, min_duration, &file)?;
            pipeline::run_predict(&pipeline::PredictOptions {
                model,
                input,
                out,
                postprocess,
                pattern: NamePattern::default_pattern(),
            })
        }
        Command::Evaluate {
            pred,
            truth,
            task,
            out,
            threshold,
            merge_gap,
            min_duration,
            name_pattern: np,
        } => {
            let (pattern, _) = name_pattern(np, &file)?;
            let postprocess = postprocess_config(threshold, merge_gap, min_duration, &file)?;
            pipeline::run_evaluate(&pipeline::EvaluateOptions {
                pred,
                truth,
                task,
                out,
                postprocess,
                pattern,
            })
        }
        Command::Synth {
            n,
            seed,
            out,
            subjects,
        } => {
            let seed = seed.unwrap_or(0);
            let subjects = subjects.unwrap_or_else(|| (n / 8).max(2));
            let resolved = resolved_config(&[
                ("command", "synth".into()),
                ("n", n.to_string()),
                ("subjects", subjects.to_string()),
                ("seed", seed.to_string()),
            ]);
            pipeline::run_synth(&pipeline::SynthOptions {
                n,
                subjects,
                seed,
                out,
                resolved_config: resolved,
            })
        }
    }
}

/// Render the fully resolved settings of a run; written into every run
/// directory so results are replayable. Keys the config file accepts are
/// emitted as `key = value` (the file loads straight back via
/// `--config`); everything else (command, paths, seeds) goes into the
/// replay comment header.
fn resolved_config(entries: &[(&str, String)]) -> String {
    let mut context: Vec<&(&str, String)> = entries
        .iter()
        .filter(|(k, _)| !CONFIG_KEYS.contains(k))
        .collect();
    context.sort_by_key(|(k, _)| *k);
    let mut s = String::new();
    for (k, v) in context {
        let _ = writeln!(s, "# {k}: {v}");
    }
    let mut keys: Vec<&(&str, String)> = entries
        .iter()
        .filter(|(k, _)| CONFIG_KEYS.contains(k))
        .collect();
    keys.sort_by_key(|(k, _)| *k);
    for (k, v) in keys {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}
