use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_elliptic-rmt"));
    c.env_remove("ELLIPTIC_RMT_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn summary(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "summary must be one line: {text}");
    serde_json::from_str(&text).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn spectrum_csv_has_one_row_per_eigenvalue() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eig.csv");
    let s = summary(&run(&[
        "spectrum", "--n", "120", "--rho", "0.5", "--family", "gaussian", "--seed", "7", "--out", path_str(&out),
    ]));
    assert_eq!(s["rows"], 120);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("re,im"));
    assert_eq!(lines.count(), 120);
}

#[test]
fn identical_arguments_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let base = ["spectrum", "--n", "60", "--rho", "-0.3", "--family", "rademacher", "--seed", "11", "--out"];
    let sa = run(&[&base[..], &[path_str(&a)]].concat());
    let sb = run(&[&base[..], &[path_str(&b)], &["--threads", "1"]].concat());
    assert!(sa.status.success() && sb.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn singular_spectrum_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sv.csv");
    let s = summary(&run(&[
        "spectrum", "--n", "30", "--kind", "singular", "--z-re", "0.5", "--seed", "1", "--out", path_str(&out),
    ]));
    assert_eq!(s["kind"], "singular");
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,s");
    assert!(lines[1].starts_with("1,"));
    assert_eq!(lines.len(), 31);
}

#[test]
fn elliptic_check_report_fields() {
    let s = summary(&run(&["elliptic-check", "--n", "100", "--rho", "0"]));
    for key in ["rho", "ks_real", "fraction_inside", "fraction_inside_1.00", "fraction_inside_1.05", "schema_version"] {
        assert!(s.get(key).is_some(), "missing {key} in {s}");
    }
    assert_eq!(s["schema_version"], 1);
    assert_eq!(s["n"], 100);
}

#[test]
fn elliptic_check_reads_csv_and_matches_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("eig.csv");
    summary(&run(&["spectrum", "--n", "80", "--rho", "0.5", "--seed", "3", "--out", path_str(&csv)]));
    let from_file = summary(&run(&["elliptic-check", "--input", path_str(&csv), "--rho", "0.5"]));
    let sampled = summary(&run(&["elliptic-check", "--n", "80", "--rho", "0.5", "--seed", "3"]));
    assert_eq!(from_file["fraction_inside_1.05"], sampled["fraction_inside_1.05"]);
    assert_eq!(from_file["ks_real"], sampled["ks_real"]);
}

#[test]
fn elliptic_check_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    std::fs::write(&csv, "re,im\n").unwrap();
    let s = summary(&run(&["elliptic-check", "--input", path_str(&csv)]));
    assert_eq!(s["n"], 0);
    assert!(s["fraction_inside"].is_null());
}

#[test]
fn malformed_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "re,im\n0.1,0.2\nx,0\n").unwrap();
    let out = run(&["elliptic-check", "--input", path_str(&csv)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn unknown_flag_exits_one_with_help() {
    let out = run(&["spectrum", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
    assert!(err.contains("elliptic-check"), "{err}");
}

#[test]
fn help_lists_every_subcommand() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["sample", "spectrum", "elliptic-check", "sn-tail", "logpot", "concentration", "geometry"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn sn_tail_report_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = ["sn-tail", "--n", "20", "--trials", "30", "--B", "3", "--rho", "0.5", "--family", "rademacher"];
    let sa = summary(&run(&[&args[..], &["--seed", "5", "--out", path_str(&a)]].concat()));
    summary(&run(&[&args[..], &["--seed", "5", "--out", path_str(&b)]].concat()));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(sa["hits"], 0);
    assert_eq!(sa["trials"], 30);
    assert!(sa["shift"].as_str().unwrap().contains("0.5"));
}

#[test]
fn logpot_routes_agree() {
    let s = summary(&run(&["logpot", "--n", "50", "--z-re", "0.3", "--z-im", "0.2", "--seed", "9"]));
    assert!(s["discrepancy"].as_f64().unwrap() < 1e-8);
}

#[test]
fn concentration_report_schema() {
    let s = summary(&run(&["concentration", "--samples", "20000", "--lambda", "0.1", "--seed", "2"]));
    for key in ["lambda", "q_hat", "n_samples", "bound", "bound_applicable", "schema_version"] {
        assert!(s.get(key).is_some(), "missing {key}");
    }
    assert_eq!(s["n_samples"], 20000);
    // Summands of size 0.1 all reach past lambda/2 = 0.05: the bracket is negative.
    assert_eq!(s["bound_applicable"], false);
    assert!(s["bound"].is_null());
    let q = s["q_hat"].as_f64().unwrap();
    assert!((q - 0.0797).abs() < 0.02, "{q}");

    let s = summary(&run(&["concentration", "--samples", "20000", "--lambda", "0.5", "--family", "rademacher"]));
    assert_eq!(s["bound_applicable"], true);
    assert!((s["bound"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!(s["q_hat"].as_f64().unwrap() <= 0.5);
}

#[test]
fn too_few_concentration_samples_is_a_usage_error() {
    let out = run(&["concentration", "--samples", "10"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn geometry_classifies_sparse_and_spread_vectors() {
    let s = summary(&run(&["geometry", "--n", "100", "--support", "5", "--delta", "0.1", "--seed", "4"]));
    assert_eq!(s["class"], "sparse");
    assert!(s["spread_set"].is_null());
    let s = summary(&run(&["geometry", "--n", "200", "--delta", "0.1", "--r", "0.2", "--seed", "4"]));
    assert_eq!(s["class"], "incompressible");
    assert!(s["spread_set"]["size"].as_u64().unwrap() >= 10);
}

#[test]
fn geometry_reads_vector_file() {
    let dir = tempfile::tempdir().unwrap();
    let v = dir.path().join("v.txt");
    std::fs::write(&v, "3\n4\n0\n0\n").unwrap();
    let s = summary(&run(&["geometry", "--input", path_str(&v), "--delta", "0.5"]));
    assert_eq!(s["class"], "sparse");
    assert_eq!(s["distance_to_sparse"], 0.0);
}

#[test]
fn seed_precedence() {
    let env_run = |seed: &str| {
        let out = bin()
            .env("ELLIPTIC_RMT_SEED", seed)
            .args(["sample", "--n", "10"])
            .output()
            .unwrap();
        summary(&out)
    };
    assert_eq!(env_run("0x10")["seed"], 16);
    let flag = bin()
        .env("ELLIPTIC_RMT_SEED", "16")
        .args(["sample", "--n", "10", "--seed", "3"])
        .output()
        .unwrap();
    assert_eq!(summary(&flag)["seed"], 3);
    let default = summary(&run(&["sample", "--n", "10"]));
    assert_eq!(default["seed"], elliptic_rmt_default_seed());
}

fn elliptic_rmt_default_seed() -> u64 {
    0xE111_971C
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seed = \"0x2A\"\n\n[ensemble]\nn = 40\nfamily = \"rademacher\"\nrho = 0.25\n\n[ensemble.shift]\nkind = \"scaled-identity\"\nscale = 0.5\nK = 1.0\nQ = 1.0\n\n[command]\ntrials = 12\nB = 2\n",
    )
    .unwrap();
    let s = summary(&run(&["sn-tail", "--config", path_str(&cfg), "--trials", "5"]));
    assert_eq!(s["root_seed"], 42);
    assert_eq!(s["trials"], 5);
    assert_eq!(s["threshold_exponent"], 2.0);
    assert_eq!(s["n"], 40);
}

#[test]
fn config_unknown_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[ensemble]\nn = 10\nfamily = \"gaussian\"\ncolour = 3\n").unwrap();
    let out = run(&["sample", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_rho_is_a_usage_error() {
    let out = run(&["sample", "--n", "10", "--rho", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sample_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    summary(&run(&["sample", "--n", "4", "--format", "json", "--out", path_str(&out), "--seed", "8"]));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["entries"].as_array().unwrap().len(), 4);
    assert_eq!(doc["schema_version"], 1);
}

#[test]
fn pole_exits_with_numerical_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    summary(&run(&["sample", "--n", "1", "--format", "json", "--out", path_str(&out), "--seed", "12"]));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let entry = doc["entries"][0][0].as_f64().unwrap().to_string();
    let res = run(&["logpot", "--n", "1", "--seed", "12", "--z-re", &entry, "--z-im", "0"]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
}
