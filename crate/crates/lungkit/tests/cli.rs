//! CLI surface tests: exit codes, flag handling, config-file merging,
//! and the predict/evaluate file conventions.

use lungkit::cli::run;
use std::path::Path;

fn cli(args: &[&str]) -> i32 {
    let mut argv = vec!["lungkit"];
    argv.extend_from_slice(args);
    run(argv)
}

fn make_corpus(dir: &Path, n: usize) {
    assert_eq!(
        cli(&[
            "synth",
            "--n",
            &n.to_string(),
            "--subjects",
            "4",
            "--seed",
            "21",
            "--out",
            dir.to_str().unwrap(),
        ]),
        0
    );
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(cli(&["--bogus"]), 2);
    assert_eq!(cli(&["stats"]), 2); // missing required flags
    assert_eq!(cli(&["train", "--task", "Q"]), 2); // bad task value
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(cli(&["--help"]), 0);
    assert_eq!(cli(&["--version"]), 0);
    assert_eq!(cli(&["stats", "--help"]), 0);
}

#[test]
fn missing_data_dir_is_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x.csv");
    assert_eq!(
        cli(&[
            "stats",
            "--data",
            "/nonexistent/nowhere",
            "--out",
            out.to_str().unwrap()
        ]),
        1
    );
}

#[test]
fn config_file_unknown_key_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.txt");
    std::fs::write(&cfg, "threshold = 0.4\nwhatever = 1\n").unwrap();
    make_corpus(&tmp.path().join("corpus"), 2);
    assert_eq!(
        cli(&[
            "stats",
            "--config",
            cfg.to_str().unwrap(),
            "--data",
            tmp.path().join("corpus").to_str().unwrap(),
            "--out",
            tmp.path().join("s.csv").to_str().unwrap(),
        ]),
        2
    );
}

#[test]
fn config_file_supplies_defaults_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    make_corpus(&corpus, 8);
    let cfg = tmp.path().join("cfg.txt");
    std::fs::write(&cfg, "test_fraction = 0.5  # hold out half\n").unwrap();

    // Config file value applies...
    let out1 = tmp.path().join("a.csv");
    assert_eq!(
        cli(&[
            "split",
            "--config",
            cfg.to_str().unwrap(),
            "--data",
            corpus.to_str().unwrap(),
            "--seed",
            "1",
            "--out",
            out1.to_str().unwrap(),
        ]),
        0
    );
    let text1 = std::fs::read_to_string(&out1).unwrap();
    let tests1 = text1.lines().filter(|l| l.contains(",test,")).count();

    // ...and an explicit flag overrides it.
    let out2 = tmp.path().join("b.csv");
    assert_eq!(
        cli(&[
            "split",
            "--config",
            cfg.to_str().unwrap(),
            "--data",
            corpus.to_str().unwrap(),
            "--test-fraction",
            "0.25",
            "--seed",
            "1",
            "--out",
            out2.to_str().unwrap(),
        ]),
        0
    );
    let text2 = std::fs::read_to_string(&out2).unwrap();
    let tests2 = text2.lines().filter(|l| l.contains(",test,")).count();
    assert!(tests1 > tests2, "0.5 split should hold out more subjects");
}

#[test]
fn predict_then_evaluate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let split = tmp.path().join("split.csv");
    let run_dir = tmp.path().join("run");
    let preds = tmp.path().join("preds");
    make_corpus(&corpus, 12);
    let c = corpus.to_str().unwrap();

    assert_eq!(
        cli(&[
            "split",
            "--data",
            c,
            "--test-fraction",
            "0.3",
            "--seed",
            "2",
            "--out",
            split.to_str().unwrap()
        ]),
        0
    );
    assert_eq!(
        cli(&[
            "train",
            "--task",
            "I",
            "--data",
            c,
            "--split",
            split.to_str().unwrap(),
            "--folds",
            "2",
            "--repeats",
            "1",
            "--seed",
            "3",
            "--epochs",
            "3",
            "--learning-rate",
            "0.003",
            "--conv-channels",
            "10",
            "--hidden",
            "8",
            "--out",
            run_dir.to_str().unwrap(),
        ]),
        0
    );
    for artifact in [
        "model_r0_f0.lkmd",
        "model_r0_f1.lkmd",
        "train_log_r0_f0.csv",
        "folds.csv",
        "report.json",
        "report.csv",
        "resolved_config.txt",
    ] {
        assert!(run_dir.join(artifact).exists(), "missing {artifact}");
    }

    std::fs::create_dir_all(&preds).unwrap();
    for entry in std::fs::read_dir(&corpus).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|x| x == "wav") {
            let stem = path.file_stem().unwrap().to_str().unwrap().to_string();
            assert_eq!(
                cli(&[
                    "predict",
                    "--model",
                    run_dir.join("model_r0_f0.lkmd").to_str().unwrap(),
                    "--in",
                    path.to_str().unwrap(),
                    "--out",
                    preds.join(format!("{stem}_pred.txt")).to_str().unwrap(),
                ]),
                0
            );
        }
    }
    let report = tmp.path().join("eval.json");
    assert_eq!(
        cli(&[
            "evaluate",
            "--pred",
            preds.to_str().unwrap(),
            "--truth",
            c,
            "--task",
            "I",
            "--out",
            report.to_str().unwrap(),
        ]),
        0
    );
    let json = std::fs::read_to_string(&report).unwrap();
    let parsed: lungkit::evaluation::MetricsReport = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed.task, "I");
    assert!(parsed.mean_segment_f1 > 0.0);
    assert!(report.with_extension("csv").exists());
}

#[test]
fn resolved_config_replays_a_training_run() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let split = tmp.path().join("split.csv");
    make_corpus(&corpus, 8);
    let c = corpus.to_str().unwrap();
    assert_eq!(
        cli(&[
            "split",
            "--data",
            c,
            "--test-fraction",
            "0.3",
            "--seed",
            "5",
            "--out",
            split.to_str().unwrap()
        ]),
        0
    );
    let run1 = tmp.path().join("run1");
    assert_eq!(
        cli(&[
            "train",
            "--task",
            "I",
            "--data",
            c,
            "--split",
            split.to_str().unwrap(),
            "--folds",
            "2",
            "--repeats",
            "1",
            "--seed",
            "5",
            "--epochs",
            "2",
            "--learning-rate",
            "0.002",
            "--conv-channels",
            "8",
            "--hidden",
            "6",
            "--out",
            run1.to_str().unwrap(),
        ]),
        0
    );
    // The echoed config loads straight back; only context (paths, seed,
    // task) comes from flags.
    let run2 = tmp.path().join("run2");
    assert_eq!(
        cli(&[
            "train",
            "--task",
            "I",
            "--data",
            c,
            "--split",
            split.to_str().unwrap(),
            "--seed",
            "5",
            "--config",
            run1.join("resolved_config.txt").to_str().unwrap(),
            "--out",
            run2.to_str().unwrap(),
        ]),
        0
    );
    let report1 = std::fs::read(run1.join("report.json")).unwrap();
    let report2 = std::fs::read(run2.join("report.json")).unwrap();
    assert_eq!(report1, report2);
    let model1 = std::fs::read(run1.join("model_r0_f0.lkmd")).unwrap();
    let model2 = std::fs::read(run2.join("model_r0_f0.lkmd")).unwrap();
    assert_eq!(model1, model2);
}

#[test]
fn predicted_events_parse_in_label_grammar() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    make_corpus(&corpus, 4);
    let split = tmp.path().join("split.csv");
    let run_dir = tmp.path().join("run");
    let c = corpus.to_str().unwrap();
    assert_eq!(
        cli(&[
            "split",
            "--data",
            c,
            "--test-fraction",
            "0.3",
            "--seed",
            "4",
            "--out",
            split.to_str().unwrap()
        ]),
        0
    );
    assert_eq!(
        cli(&[
            "train",
            "--task",
            "E",
            "--data",
            c,
            "--split",
            split.to_str().unwrap(),
            "--folds",
            "2",
            "--repeats",
            "1",
            "--seed",
            "4",
            "--epochs",
            "2",
            "--conv-channels",
            "8",
            "--hidden",
            "6",
            "--out",
            run_dir.to_str().unwrap(),
        ]),
        0
    );
    let wav = std::fs::read_dir(&corpus)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .find(|p| p.extension().is_some_and(|x| x == "wav"))
        .unwrap();
    let out = tmp.path().join("events.txt");
    assert_eq!(
        cli(&[
            "predict",
            "--model",
            run_dir.join("model_r0_f0.lkmd").to_str().unwrap(),
            "--in",
            wav.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]),
        0
    );
    let text = std::fs::read_to_string(&out).unwrap();
    let parsed = lungkit::labels::parse_label_str(&text, "pred").unwrap();
    assert!(parsed.warnings.is_empty());
    for ev in &parsed.events {
        assert_eq!(ev.kind, lungkit::labels::LabelType::E);
    }
}
