//! Corpus discovery: pair WAV files with their sibling label files and
//! parse file-name metadata.

use crate::audio::{NamePattern, RecordingMeta};
use crate::error::{Error, Result};
use crate::labels::{parse_label_file, LabelEvent};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Suffix of a label file relative to its recording stem.
pub const LABEL_SUFFIX: &str = "_label.txt";

/// One recording discovered on disk, with whichever of the WAV and label
/// files exist.
#[derive(Clone, Debug)]
pub struct CorpusFile {
    pub stem: String,
    pub wav: Option<PathBuf>,
    pub label_file: Option<PathBuf>,
    pub meta: RecordingMeta,
}

impl CorpusFile {
    /// Parse this file's labels (empty when no label file exists).
    pub fn load_labels(&self) -> Result<(Vec<LabelEvent>, Vec<String>)> {
        match &self.label_file {
            Some(path) => {
                let parsed = parse_label_file(path)?;
                Ok((parsed.events, parsed.warnings))
            }
            None => Ok((Vec::new(), Vec::new())),
        }
    }

    /// Subject ID, falling back to the stem when metadata is unknown so
    /// splits stay leakage-free per file at worst.
    pub fn subject_or_stem(&self) -> String {
        self.meta
            .subject_id
            .clone()
            .unwrap_or_else(|| self.stem.clone())
    }
}

/// Recursively scan a directory for recordings and label files, pairing
/// them by stem. Returns files sorted by stem plus metadata warnings.
pub fn scan_corpus(dir: &Path, pattern: &NamePattern) -> Result<(Vec<CorpusFile>, Vec<String>)> {
    let mut stems: BTreeMap<String, (Option<PathBuf>, Option<PathBuf>)> = BTreeMap::new();
    collect(dir, &mut stems)?;
    let mut warnings = Vec::new();
    let files = stems
        .into_iter()
        .map(|(stem, (wav, label_file))| {
            let meta = match pattern.parse(&stem) {
                Ok(meta) => meta,
                Err(Error::MetadataParse(_)) => {
                    warnings.push(format!(
                        "file name `{stem}` does not match the metadata pattern; metadata unknown"
                    ));
                    RecordingMeta::default()
                }
                Err(e) => return Err(e),
            };
            Ok(CorpusFile {
                stem,
                wav,
                label_file,
                meta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((files, warnings))
}

fn collect(
    dir: &Path,
    stems: &mut BTreeMap<String, (Option<PathBuf>, Option<PathBuf>)>,
) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect(&path, stems)?;
            continue;
        }
        let Some(name) = path
            .file_name()
            .and_then(|n| n.to_str())
            .map(str::to_string)
        else {
            continue;
        };
        if let Some(stem) = name.strip_suffix(".wav") {
            stems.entry(stem.to_string()).or_default().0 = Some(path);
        } else if let Some(stem) = name.strip_suffix(LABEL_SUFFIX) {
            stems.entry(stem.to_string()).or_default().1 = Some(path);
        }
    }
    Ok(())
}

/// Recording counts per subject, for split planning.
pub fn subject_recording_counts(files: &[CorpusFile]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for f in files {
        *counts.entry(f.subject_or_stem()).or_insert(0) += 1;
    }
    counts
}
