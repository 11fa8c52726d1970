//! Ground-truth label handling: parsing, the CAS merge rule, interval
//! algebra, and corpus-level statistics and overlap analysis.
//!
//! A label file is UTF-8 text with one event per line:
//!
//! ```text
//! TYPE START END
//! ```
//!
//! `TYPE` is one of `I E W S R C D`; `START`/`END` are either decimal
//! seconds or `HH:MM:SS.ffffff` timestamps. Events must satisfy
//! `0 <= start < end <= 15`. Lines violating the range rule are rejected
//! with a warning and parsing continues; malformed lines are a hard error.

mod intervals;
mod stats;

pub use intervals::{to_interval_set, IntervalSet};
pub use stats::{
    corpus_overlap_table, corpus_statistics, overlap_ratio, LabeledFile, OverlapTable, StatsReport,
    StatsRow, OVERLAP_KINDS,
};

use crate::error::{Error, Result};
use std::fmt;
use std::path::Path;

/// Length of a standardized recording in seconds; labels must fit inside.
pub const RECORDING_SECS: f64 = 15.0;

/// The seven label classes. `C` is the union class for the continuous
/// adventitious sounds `W`, `S`, `R`; `D` spans a series of crackles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelType {
    /// Inhalation.
    I,
    /// Exhalation.
    E,
    /// Wheeze.
    W,
    /// Stridor.
    S,
    /// Rhonchus.
    R,
    /// Continuous adventitious sound (wheeze, stridor, or rhonchus).
    C,
    /// Discontinuous adventitious sound (crackle series).
    D,
}

impl LabelType {
    /// All types, in report order.
    pub const REPORT_ORDER: [LabelType; 7] = [
        LabelType::I,
        LabelType::E,
        LabelType::C,
        LabelType::W,
        LabelType::S,
        LabelType::R,
        LabelType::D,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LabelType::I => "I",
            LabelType::E => "E",
            LabelType::W => "W",
            LabelType::S => "S",
            LabelType::R => "R",
            LabelType::C => "C",
            LabelType::D => "D",
        }
    }

    pub fn parse(s: &str) -> Option<LabelType> {
        match s {
            "I" => Some(LabelType::I),
            "E" => Some(LabelType::E),
            "W" => Some(LabelType::W),
            "S" => Some(LabelType::S),
            "R" => Some(LabelType::R),
            "C" => Some(LabelType::C),
            "D" => Some(LabelType::D),
            _ => None,
        }
    }

    /// Dense index for table storage, in `REPORT_ORDER` position.
    pub fn index(&self) -> usize {
        match self {
            LabelType::I => 0,
            LabelType::E => 1,
            LabelType::C => 2,
            LabelType::W => 3,
            LabelType::S => 4,
            LabelType::R => 5,
            LabelType::D => 6,
        }
    }
}

impl fmt::Display for LabelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One timed annotation within a recording.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelEvent {
    pub kind: LabelType,
    /// Start time in seconds.
    pub start: f64,
    /// End time in seconds (exclusive).
    pub end: f64,
}

impl LabelEvent {
    pub fn new(kind: LabelType, start: f64, end: f64) -> Self {
        LabelEvent { kind, start, end }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Result of parsing one label file: accepted events plus warnings for
/// lines that were rejected without aborting the parse.
#[derive(Clone, Debug, Default)]
pub struct ParsedLabels {
    /// Accepted events, sorted by start time.
    pub events: Vec<LabelEvent>,
    /// One message per rejected line.
    pub warnings: Vec<String>,
}

/// Parse a label file from disk.
pub fn parse_label_file(path: &Path) -> Result<ParsedLabels> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_label_str(&text, &path.display().to_string())
}

/// Parse label text. `origin` names the source in diagnostics.
pub fn parse_label_str(text: &str, origin: &str) -> Result<ParsedLabels> {
    let mut out = ParsedLabels::default();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (kind_s, start_s, end_s) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(Error::Syntax {
                    origin: origin.to_string(),
                    line: lineno,
                    msg: format!("expected `TYPE START END`, got `{line}`"),
                })
            }
        };
        if fields.next().is_some() {
            return Err(Error::Syntax {
                origin: origin.to_string(),
                line: lineno,
                msg: format!("trailing fields after `TYPE START END` in `{line}`"),
            });
        }
        let kind = LabelType::parse(kind_s).ok_or_else(|| Error::Syntax {
            origin: origin.to_string(),
            line: lineno,
            msg: format!("unknown label type `{kind_s}`"),
        })?;
        let start = parse_time(start_s).ok_or_else(|| Error::Syntax {
            origin: origin.to_string(),
            line: lineno,
            msg: format!("bad start time `{start_s}`"),
        })?;
        let end = parse_time(end_s).ok_or_else(|| Error::Syntax {
            origin: origin.to_string(),
            line: lineno,
            msg: format!("bad end time `{end_s}`"),
        })?;
        if end <= start || start < 0.0 || end > RECORDING_SECS {
            out.warnings.push(format!(
                "{origin}:{lineno}: event {kind} [{start}, {end}) outside [0, {RECORDING_SECS}] or empty; line skipped"
            ));
            continue;
        }
        out.events.push(LabelEvent::new(kind, start, end));
    }
    out.events
        .sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
    Ok(out)
}

/// Parse `SECONDS` or `HH:MM:SS.ffffff` into seconds.
fn parse_time(s: &str) -> Option<f64> {
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return None;
        }
        let h: u32 = parts[0].parse().ok()?;
        let m: u32 = parts[1].parse().ok()?;
        let sec: f64 = parse_plain_seconds(parts[2])?;
        if m >= 60 || !(0.0..60.0).contains(&sec) {
            return None;
        }
        Some(f64::from(h) * 3600.0 + f64::from(m) * 60.0 + sec)
    } else {
        parse_plain_seconds(s)
    }
}

fn parse_plain_seconds(s: &str) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    v.is_finite().then_some(v)
}

/// Serialize events in the label-file grammar (`TYPE START END`, decimal
/// seconds). Predicted events reuse this format so evaluation can read
/// them back with [`parse_label_file`].
pub fn format_label_lines(events: &[LabelEvent]) -> String {
    let mut s = String::new();
    for ev in events {
        s.push_str(&format!("{} {:.6} {:.6}\n", ev.kind, ev.start, ev.end));
    }
    s
}

/// Write events to a label file.
pub fn write_label_file(path: &Path, events: &[LabelEvent]) -> Result<()> {
    std::fs::write(path, format_label_lines(events)).map_err(|e| Error::io(path, e))
}

/// Duplicate every `W`/`S`/`R` event as a `C` event, keeping the original.
/// `D` and breath-phase events pass through untouched. The result is
/// sorted by start time.
pub fn derive_cas(events: &[LabelEvent]) -> Vec<LabelEvent> {
    let mut out = events.to_vec();
    for ev in events {
        if matches!(ev.kind, LabelType::W | LabelType::S | LabelType::R) {
            out.push(LabelEvent::new(LabelType::C, ev.start, ev.end));
        }
    }
    out.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimal_seconds() {
        let parsed = parse_label_str("I 0.50 1.43\n", "test").unwrap();
        assert_eq!(
            parsed.events,
            vec![LabelEvent::new(LabelType::I, 0.50, 1.43)]
        );
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn parses_timestamp_syntax() {
        let parsed = parse_label_str("R 00:00:02.100000 00:00:03.000000\n", "test").unwrap();
        assert_eq!(parsed.events, vec![LabelEvent::new(LabelType::R, 2.1, 3.0)]);
    }

    #[test]
    fn mixed_syntaxes_normalize_to_seconds() {
        let parsed = parse_label_str("D 00:00:01.500000 2.5\n", "test").unwrap();
        assert_eq!(parsed.events[0].start, 1.5);
        assert_eq!(parsed.events[0].end, 2.5);
    }

    #[test]
    fn reversed_range_is_warned_and_skipped() {
        let parsed = parse_label_str("I 0 1\nE 3.0 2.0\nD 4 5\n", "test").unwrap();
        assert_eq!(parsed.events.len(), 2);
        assert_eq!(parsed.warnings.len(), 1);
        assert!(parsed.warnings[0].contains("test:2"));
    }

    #[test]
    fn out_of_bounds_is_warned_and_skipped() {
        let parsed = parse_label_str("I 14.0 15.5\n", "test").unwrap();
        assert!(parsed.events.is_empty());
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn bad_type_is_syntax_error() {
        let err = parse_label_str("Q 0 1\n", "test").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 1, .. }));
    }

    #[test]
    fn missing_field_is_syntax_error_with_line() {
        let err = parse_label_str("I 0 1\nE 2\n", "test").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 2, .. }));
    }

    #[test]
    fn events_sorted_by_start() {
        let parsed = parse_label_str("E 5 6\nI 0 1\nI 2 3\n", "test").unwrap();
        let starts: Vec<f64> = parsed.events.iter().map(|e| e.start).collect();
        assert_eq!(starts, vec![0.0, 2.0, 5.0]);
    }

    #[test]
    fn derive_cas_duplicates_w_s_r() {
        let events = vec![
            LabelEvent::new(LabelType::W, 1.0, 2.0),
            LabelEvent::new(LabelType::S, 3.0, 4.0),
        ];
        let derived = derive_cas(&events);
        assert_eq!(derived.len(), 4);
        let cas: Vec<&LabelEvent> = derived.iter().filter(|e| e.kind == LabelType::C).collect();
        assert_eq!(cas.len(), 2);
        assert_eq!((cas[0].start, cas[0].end), (1.0, 2.0));
        assert_eq!((cas[1].start, cas[1].end), (3.0, 4.0));
    }

    #[test]
    fn derive_cas_leaves_das_untouched() {
        let events = vec![LabelEvent::new(LabelType::D, 1.0, 2.0)];
        assert_eq!(derive_cas(&events), events);
    }

    #[test]
    fn derive_cas_empty() {
        assert!(derive_cas(&[]).is_empty());
    }

    #[test]
    fn label_round_trip_through_grammar() {
        let events = vec![
            LabelEvent::new(LabelType::I, 0.016, 1.234),
            LabelEvent::new(LabelType::D, 2.5, 3.75),
        ];
        let text = format_label_lines(&events);
        let parsed = parse_label_str(&text, "roundtrip").unwrap();
        assert_eq!(parsed.events.len(), 2);
        for (a, b) in parsed.events.iter().zip(&events) {
            assert_eq!(a.kind, b.kind);
            assert!((a.start - b.start).abs() < 1e-6);
            assert!((a.end - b.end).abs() < 1e-6);
        }
    }
}
