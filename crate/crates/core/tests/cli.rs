use std::path::Path;
use std::process::{Command, Output};

use vcstat::event_stream::{disagreement_set, parse_records, Format};
use vcstat::report::EvalReport;

fn vcstat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vcstat")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_regular_writes_expected_times() {
    let out = vcstat(&["synth", "--pattern", "regular", "--events", "4", "--errors", "4", "--period", "0,8", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "t,y,p\n1,1,0.1\n3,1,0.1\n5,1,0.1\n7,1,0.1\n");
}

#[test]
fn synth_rejects_invalid_spec() {
    let out = vcstat(&["synth", "--pattern", "random", "--events", "3", "--errors", "5"]);
    assert_eq!(code(&out), 2);
    let out = vcstat(&["synth", "--pattern", "clustered", "--events", "30", "--errors", "5", "--period", "5,1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn evaluate_clustered_pattern_with_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("c.jsonl");
    let report = dir.path().join("r.json");
    let svg = dir.path().join("d.svg");
    let csv = dir.path().join("d.csv");
    let out = vcstat(&["synth", "--pattern", "clustered", "--events", "1000", "--errors", "100", "--out", path_str(&log)]);
    assert_eq!(code(&out), 0);
    let out = vcstat(&[
        "evaluate", "--input", path_str(&log), "--report", path_str(&report), "--svg", path_str(&svg),
        "--density-csv", path_str(&csv), "--density-bins", "10",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let r = EvalReport::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!((r.n_events, r.n_errors), (1000, 100));
    assert!(r.vcs.value().unwrap() > 0.4);
    // every error sits in the bin around the 90% mark
    let hot: Vec<usize> = r.density.error_counts.iter().enumerate().filter(|(_, c)| **c > 0).map(|(i, _)| i).collect();
    assert!(hot.iter().all(|&i| i == 8 || i == 9), "{hot:?}");

    let svg = std::fs::read_to_string(&svg).unwrap();
    assert!(svg.starts_with("<?xml") && svg.contains("version=\"1.1\""));
    assert!(svg.contains("fill-opacity=\"1.000000\""));
    let csv = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.starts_with("bin_start,bin_end,error_count\n"));
}

#[test]
fn evaluate_perfect_log_reports_marker() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("p.jsonl");
    std::fs::write(&log, "{\"t\":0,\"y\":1,\"p\":0.9}\n{\"t\":1,\"y\":0,\"p\":0.2}\n{\"t\":2,\"y\":1,\"p\":0.7}\n").unwrap();
    let out = vcstat(&["evaluate", "--input", path_str(&log)]);
    assert_eq!(code(&out), 3);
    let r = EvalReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(r.ap, Some(1.0));
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["vcs"]["undefined"], "too_few_disagreements");
}

#[test]
fn evaluate_input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"t\":0,\"y\":1,\"p\":0.9}\n{\"t\":1,\"y\":3,\"p\":0.2}\n").unwrap();
    let out = vcstat(&["evaluate", "--input", path_str(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let missing = dir.path().join("missing.jsonl");
    assert_eq!(code(&vcstat(&["evaluate", "--input", path_str(&missing)])), 2);

    let unsorted = dir.path().join("u.csv");
    std::fs::write(&unsorted, "t,y,p\n5,1,0.1\n1,0,0.9\n3,1,0.2\n").unwrap();
    assert_eq!(code(&vcstat(&["evaluate", "--input", path_str(&unsorted), "--format", "csv"])), 2);
    let out = vcstat(&["evaluate", "--input", path_str(&unsorted), "--format", "csv", "--sort"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let empty = dir.path().join("e.jsonl");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(code(&vcstat(&["evaluate", "--input", path_str(&empty)])), 2);
}

#[test]
fn synth_evaluate_pipeline_across_formats() {
    let dir = tempfile::tempdir().unwrap();
    let mut values = Vec::new();
    for format in ["jsonl", "csv"] {
        let log = dir.path().join(format!("r.{format}"));
        let out = vcstat(&[
            "synth", "--pattern", "random", "--events", "800", "--errors", "120", "--seed", "4", "--format", format,
            "--out", path_str(&log),
        ]);
        assert_eq!(code(&out), 0);
        let stream = parse_records(std::fs::File::open(&log).unwrap(), format.parse::<Format>().unwrap(), false).unwrap();
        assert_eq!(stream.len(), 800);
        assert_eq!(disagreement_set(&stream, 0.5).unwrap().len(), 120);
        let out = vcstat(&["evaluate", "--input", path_str(&log), "--format", format]);
        assert_eq!(code(&out), 0);
        values.push(EvalReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap().vcs.value().unwrap());
    }
    assert_eq!(values[0], values[1]);
    assert!(values[0] < 0.1);
}

#[test]
fn gradcheck_default_passes() {
    let out = vcstat(&["gradcheck"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches("PASS").count(), 4);
}

#[test]
fn gradcheck_coarse_step_fails() {
    let out = vcstat(&["gradcheck", "--step", "1.0", "--trials", "10"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8(out.stdout).unwrap().contains("worst: trial"));
}

#[test]
fn gradcheck_ties_are_skipped() {
    let out = vcstat(&["gradcheck", "--beta", "1e6", "--ties", "--trials", "20"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("soft_nn_distance")).unwrap();
    let skipped: usize = line.split("skipped=").nth(1).unwrap().trim().parse().unwrap();
    assert!(skipped > 0, "{line}");
}

#[test]
fn train_demo_smoke_and_zero_gamma_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = vcstat(&["train-demo", "--epochs", "1", "--seeds", "0,1", "--out-dir", path_str(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("baseline")));
    assert!(text.lines().any(|l| l.starts_with("vca")));
    let history = std::fs::read_to_string(dir.path().join("history_vca_seed1.csv")).unwrap();
    assert_eq!(history.lines().next(), Some("epoch,cross_entropy,penalty,total"));
    assert_eq!(history.lines().count(), 2);

    let out = vcstat(&["train-demo", "--gamma", "0", "--epochs", "5", "--seeds", "0..1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let cells = |label: &str| -> String {
        let line = text.lines().find(|l| l.starts_with(label)).unwrap();
        line.split_whitespace().skip(1).collect::<Vec<_>>().join(" ")
    };
    assert_eq!(cells("baseline"), cells("vca"));
}

#[test]
fn train_demo_rejects_bad_seeds() {
    let out = vcstat(&["train-demo", "--seeds", "4..1"]);
    assert_eq!(code(&out), 2);
}
