//! Parse label files, compute per-class corpus statistics, and the
//! overlap-ratio table between inhalation, exhalation, CAS, and DAS
//! labels.
//!
//! Run with: `cargo run --example label_statistics`

use lungkit::labels::{
    corpus_overlap_table, corpus_statistics, parse_label_str, LabelType, LabeledFile,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Two hand-written label files in the `TYPE START END` grammar.
    // Both time syntaxes are accepted.
    let file_a = "I 0.50 1.43\nE 1.80 2.90\nW 1.90 2.60\nD 0.60 1.20\nI 4.00 5.00\n";
    let file_b = "I 00:00:00.400000 00:00:01.500000\nR 2.0 3.1\nE 2.0 3.2\nD 0.5 1.1\n";

    let corpora: Vec<Vec<_>> = [file_a, file_b]
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let parsed = parse_label_str(text, &format!("file_{i}")).expect("valid grammar");
            parsed.events
        })
        .collect();

    let labeled: Vec<LabeledFile> = corpora
        .iter()
        .map(|events| LabeledFile {
            device: None,
            events: events.clone(),
        })
        .collect();
    let stats = corpus_statistics(&labeled);
    println!(
        "per-class statistics ({} recordings):",
        stats.overall.recordings
    );
    for kind in LabelType::REPORT_ORDER {
        let row = &stats.overall.rows[kind.index()];
        if row.count > 0 {
            println!(
                "  {kind}: {} events, {:.3} min total, mean {:.2} s",
                row.count, row.total_min, row.mean_sec
            );
        }
    }

    let table = corpus_overlap_table(&corpora);
    println!("\noverlap ratios (% of row class duration covered by column class):");
    for row in &table.rows {
        print!("  {}:", row.kind);
        for (other, ratio) in &row.entries {
            match ratio {
                Some(r) => print!("  vs {other} {r:5.1}%"),
                None => print!("  vs {other}   n/a"),
            }
        }
        println!();
    }
    println!("\nCSV form:\n{}", table.to_csv());
    Ok(())
}
