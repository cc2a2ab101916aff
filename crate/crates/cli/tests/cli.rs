use std::path::Path;
use std::process::{Command, Output};

fn bpvei(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bpvei"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn survival_writes_one_row_per_generation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig1b.csv");
    let o = bpvei(&[
        "survival",
        "--model",
        "preset:example_b",
        "--reps",
        "2000",
        "--horizon",
        "1000",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = read(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,estimate,stderr,R"));
    assert_eq!(lines.count(), 1000);
    assert!(dir.path().join("fig1b.csv.manifest.json").exists());
}

#[test]
fn oracle_pmf_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pmf.csv");
    let o = bpvei(&[
        "oracle",
        "--model",
        "preset:example_b",
        "--n",
        "3",
        "--cutoff",
        "64",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = read(&out);
    let first = text.lines().next().unwrap();
    let tail: f64 = first
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("tail="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(tail < 1e-10);
    assert!(first.contains("cutoff=64"));
    assert_eq!(text.lines().nth(1), Some("k,prob"));
    let total: f64 = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(bpvei(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        bpvei(&["survival", "--no-such-flag"]).status.code(),
        Some(1)
    );
    assert_eq!(
        bpvei(&["validate", "--model", "preset:nope"]).status.code(),
        Some(1)
    );
    assert_eq!(
        bpvei(&["validate", "--model", "preset:example_a"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        bpvei(&["validate", "--model", "/no/such/file.json"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(bpvei(&["--help"]).status.code(), Some(0));
}

#[test]
fn model_files_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("m.json");
    std::fs::write(
        &good,
        r#"{"name":"pp","offspring":[{"from":0,"to":null,"law":{"family":"poisson","rate":{"kind":"constant","value":1.0}}}],
            "immigration":[{"from":0,"to":null,"law":{"family":"poisson","rate":{"kind":"constant","value":2.0}}}]}"#,
    )
    .unwrap();
    let o = bpvei(&["validate", "--model", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8(o.stdout).unwrap().contains("\"pp\""));

    let gap = dir.path().join("gap.json");
    std::fs::write(
        &gap,
        r#"{"name":"g","offspring":[{"from":1,"to":null,"law":{"family":"poisson","rate":{"kind":"constant","value":1.0}}}],
            "immigration":[{"from":0,"to":null,"law":{"family":"poisson","rate":{"kind":"constant","value":2.0}}}]}"#,
    )
    .unwrap();
    let o = bpvei(&["validate", "--model", gap.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numeric_guards_exit_two_with_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pmf.csv");
    let o = bpvei(&[
        "oracle",
        "--model",
        "preset:critical_geo_pois",
        "--n",
        "10",
        "--cutoff",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(read(&out).contains("tail_exceeded=true"));

    let out = dir.path().join("surv.csv");
    let o = bpvei(&[
        "survival",
        "--model",
        "preset:critical_geo_pois",
        "--reps",
        "50",
        "--horizon",
        "40",
        "--overflow-guard",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(read(&out).lines().count(), 41);
}

#[test]
fn figure1_files() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("fig");
    let o = bpvei(&[
        "figure1",
        "--reps",
        "200",
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    for name in ["example_b", "example_c"] {
        let text = read(&dir.path().join(format!("fig_{name}.csv")));
        assert_eq!(text.lines().next(), Some("n,p_hat,stderr,exact"));
        assert_eq!(text.lines().count(), 1001);
    }
    let b = read(&dir.path().join("fig_example_b.csv"));
    let exact1: f64 = b
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(3)
        .unwrap()
        .parse()
        .unwrap();
    assert!((exact1 - 0.25).abs() < 1e-15);
}

#[test]
fn replay_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a/g.json");
    let b = dir.path().join("b/g.json");
    let o = bpvei(&[
        "gamma-limit",
        "--n",
        "20,40",
        "--reps",
        "500",
        "--seed",
        "3",
        "--format",
        "json",
        "--threads",
        "1",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let manifest = dir.path().join("a/g.json.manifest.json");
    let o = bpvei(&[
        "replay",
        "--manifest",
        manifest.to_str().unwrap(),
        "--threads",
        "3",
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read(&a), read(&b));
    assert_eq!(
        read(&a.with_extension("csv")),
        read(&b.with_extension("csv"))
    );
    let report: serde_json::Value = serde_json::from_str(&read(&a)).unwrap();
    assert_eq!(report["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn analysis_subcommands_emit_rows_and_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ext.csv");
    let o = bpvei(&[
        "extinction",
        "--model",
        "preset:example_b",
        "--horizon",
        "200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read(&out).lines().count(), 202);
    let v: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("ext.verdict.json"))).unwrap();
    assert_eq!(v["verdict"], "certain-extinction-evidence");

    let out = dir.path().join("mom.csv");
    let o = bpvei(&[
        "moments",
        "--model",
        "preset:example_b",
        "--horizon",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let row1: Vec<f64> = read(&out)
        .lines()
        .nth(2)
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    assert_eq!(row1[8], 0.1875);
    assert_eq!(row1[9], 0.25);

    let o = bpvei(&[
        "criticality",
        "--model",
        "preset:critical_geo_pois",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "critical-evidence");
}

#[test]
fn simulate_raw_sample() {
    let o = bpvei(&[
        "simulate",
        "--model",
        "preset:deterministic_chain",
        "--horizon",
        "6",
        "--reps",
        "5",
        "--raw",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "6\n6\n6\n6\n6\n");
}
