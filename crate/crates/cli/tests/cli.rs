use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::CommandFactory;
use polyipa_cli::Cli;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn polyipa(args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_polyipa"));
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("POLYIPA_")) {
        cmd.env_remove(k);
    }
    cmd.args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = polyipa(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Trains a small model on the first lines of the fixture lexicon.
fn small_model(dir: &Path) -> PathBuf {
    let text = std::fs::read_to_string(fixture("lexicon_1000.tsv")).unwrap();
    let train: String = text.lines().take(300).map(|l| format!("{l}\n")).collect();
    let train_path = dir.join("train.tsv");
    std::fs::write(&train_path, train).unwrap();
    let model = dir.join("model.txt");
    ok(&[
        "train",
        "--input",
        s(&train_path),
        "--order",
        "3",
        "--model",
        s(&model),
    ]);
    model
}

#[test]
fn unknown_subcommand_exits_one_with_usage() {
    let out = polyipa(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage:"));
}

#[test]
fn missing_input_file_exits_one() {
    let out = polyipa(&["pairs", "--input", "/nonexistent/lexicon.tsv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_lists_every_flag() {
    let cli = Cli::command();
    for sub in cli.get_subcommands() {
        let name = sub.get_name();
        let out = ok(&[name, "--help"]);
        let help = String::from_utf8_lossy(&out.stdout);
        for arg in sub.get_arguments() {
            if let Some(long) = arg.get_long() {
                assert!(
                    help.contains(&format!("--{long}")),
                    "{name} --help lacks --{long}"
                );
            }
        }
    }
}

#[test]
fn clean_report_is_conserved() {
    let dir = tempfile::tempdir().unwrap();
    let raw = "en\tcat\tkæt\nen\tcat\tkæt\nxx\tfoo\tfu\nen\t\tbæt\nen\tdog\t%%\nru\tcat\tkæt\n";
    let input = dir.path().join("raw.tsv");
    std::fs::write(&input, raw).unwrap();
    let report = dir.path().join("report.json");
    let cleaned = dir.path().join("clean.tsv");
    ok(&[
        "clean",
        "--input",
        s(&input),
        "--output",
        s(&cleaned),
        "--report",
        s(&report),
    ]);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let removed: u64 = json["removed_by_rule"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(json["input_count"], 6);
    assert_eq!(json["retained_count"].as_u64().unwrap() + removed, 6);
    assert_eq!(json["retained_count"], 1);
    assert_eq!(std::fs::read_to_string(&cleaned).unwrap(), "en\tcat\tkæt\n");
}

#[test]
fn predict_default_width_is_three_times_n_best() {
    let dir = tempfile::tempdir().unwrap();
    let model = small_model(dir.path());
    let out = ok(&[
        "predict",
        "--model",
        s(&model),
        "--ipa",
        "kivof",
        "--tag",
        "<el>",
        "--n-best",
        "30",
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("beam width 90"));
    let out = ok(&[
        "predict",
        "--model",
        s(&model),
        "--ipa",
        "kivof",
        "--tag",
        "<el>",
        "--n-best",
        "5",
        "--beam-width",
        "7",
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("beam width 7"));
    let rows = String::from_utf8(out.stdout).unwrap();
    let ranks: Vec<usize> = rows
        .lines()
        .map(|l| l.split('\t').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(!ranks.is_empty() && ranks.len() <= 5);
    assert_eq!(ranks, (1..=ranks.len()).collect::<Vec<_>>());
}

#[test]
fn split_is_deterministic_and_partitions() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("lexicon_1000.tsv");
    let run = |out: &str| {
        let d = dir.path().join(out);
        ok(&[
            "split",
            "--input",
            s(&input),
            "--test",
            "50",
            "--eval",
            "40",
            "--seed",
            "9",
            "--out-dir",
            s(&d),
        ]);
        ["train", "eval", "test"]
            .map(|n| std::fs::read_to_string(d.join(format!("{n}.tsv"))).unwrap())
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    assert_eq!(a[2].lines().count(), 50);
    assert_eq!(a[1].lines().count(), 40);
    let mut all: Vec<&str> = a.iter().flat_map(|t| t.lines()).collect();
    assert_eq!(all.len(), 1000);
    all.sort();
    all.dedup();
    assert_eq!(all.len(), 1000);
}

#[test]
fn pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let input = fixture("lexicon_1000.tsv");
    ok(&[
        "split",
        "--input",
        s(&input),
        "--test",
        "30",
        "--eval",
        "30",
        "--seed",
        "1",
        "--out-dir",
        s(&d("sp")),
    ]);
    let train = d("sp").join("train.tsv");
    let test = d("sp").join("test.tsv");
    ok(&[
        "mine",
        "--input",
        s(&train),
        "--k",
        "10",
        "--threshold",
        "1",
        "--output",
        s(&d("pairs.tsv")),
    ]);
    ok(&[
        "augment",
        "--train",
        s(&train),
        "--pairs",
        s(&d("pairs.tsv")),
        "--ratio",
        "1",
        "--out",
        s(&d("aug.tsv")),
    ]);
    ok(&[
        "train",
        "--input",
        s(&d("aug.tsv")),
        "--order",
        "3",
        "--model",
        s(&d("model.txt")),
    ]);
    ok(&[
        "predict",
        "--model",
        s(&d("model.txt")),
        "--input",
        s(&test),
        "--n-best",
        "3",
        "--output",
        s(&d("c.tsv")),
    ]);
    ok(&[
        "eval",
        "--test",
        s(&test),
        "--candidates",
        s(&d("c.tsv")),
        "--n",
        "1,3",
        "--report",
        s(&d("r.json")),
        "--csv",
        s(&d("r.csv")),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d("r.json")).unwrap()).unwrap();
    assert_eq!(report["overall"]["n_samples"], 30);
    let top1 = report["overall"]["top_n_wer"][0]["wer"]["mean"]
        .as_f64()
        .unwrap();
    let top3 = report["overall"]["top_n_wer"][1]["wer"]["mean"]
        .as_f64()
        .unwrap();
    assert!(top3 <= top1);
    let csv = std::fs::read_to_string(d("r.csv")).unwrap();
    assert!(csv.starts_with("lang,n_samples,"));
    let out = ok(&["report", "--report", s(&d("r.json")), "--format", "csv"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), csv);
}

#[test]
fn eval_rejects_missing_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let test = dir.path().join("test.tsv");
    std::fs::write(&test, "en\tcat\tkæt\n").unwrap();
    let cands = dir.path().join("c.tsv");
    std::fs::write(&cands, "<en>\tdɔɡ\t1\tdog\t-1\n").unwrap();
    let out = polyipa(&["eval", "--test", s(&test), "--candidates", s(&cands)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn convert_and_strip() {
    let out = ok(&["convert", "--from", "xsampa", "--text", "tSa"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "t\u{361}\u{283}a\n");
    let out = ok(&["convert", "--from", "arpabet", "--text", "K AE1 T"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "kæt\n");
    let out = ok(&["strip", "--text", "kʰæ̃t˥"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "kæt\n");
    let out = polyipa(&["convert", "--from", "xsampa", "--text", "¤"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("polyipa.conf");
    std::fs::write(&conf, "beam.n_best = 4\n").unwrap();
    let model = small_model(dir.path());
    let out = ok(&[
        "predict",
        "--config",
        s(&conf),
        "--model",
        s(&model),
        "--ipa",
        "kivof",
        "--tag",
        "<el>",
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("beam width 12"));

    std::fs::write(&conf, "beam.nbest = 4\n").unwrap();
    let out = polyipa(&[
        "predict",
        "--config",
        s(&conf),
        "--model",
        s(&model),
        "--ipa",
        "kivof",
        "--tag",
        "<el>",
    ]);
    assert_eq!(out.status.code(), Some(1));

    let out = Command::new(env!("CARGO_BIN_EXE_polyipa"))
        .args([
            "predict",
            "--model",
            s(&model),
            "--ipa",
            "kivof",
            "--tag",
            "<el>",
        ])
        .env("POLYIPA_BEAM_N_BEST", "2")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("beam width 6"));
}
