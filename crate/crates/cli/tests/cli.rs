use std::path::Path;
use std::process::{Command, Output};

use ringbreak::dominance::examples;
use serde_json::Value;

fn ringbreak(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ringbreak"))
        .args(args)
        .current_dir(dir)
        .env_remove("RINGBREAK_SEED")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad report ({e}): {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write_table(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn malformed_table_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("truncated.json", "[1, 2"),
        (
            "short.json",
            r#"{"n": 2, "domains": [2, 2], "outputs": [0, 1]}"#,
        ),
        (
            "randomized.json",
            r#"{"n": 1, "domains": [2], "outputs": [[0, 1], 1]}"#,
        ),
    ] {
        let table = write_table(dir.path(), name, text);
        let out = ringbreak(&["dominance", "--table", &table], dir.path());
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
}

#[test]
fn unsupported_subcase_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let table = write_table(dir.path(), "or5.json", &examples::or(5).to_json());
    let out = ringbreak(&["compile", "--table", &table, "--t", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("UNSUPPORTED_SUBCASE"));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ringbreak"))
        .args(["validate", "--trials", "5"])
        .env("RINGBREAK_SEED", "4242")
        .output()
        .unwrap();
    assert_eq!(report(&out)["config"]["seed"], 4242);
    let flagged = Command::new(env!("CARGO_BIN_EXE_ringbreak"))
        .args(["--seed", "7", "validate", "--trials", "5"])
        .env("RINGBREAK_SEED", "4242")
        .output()
        .unwrap();
    assert_eq!(report(&flagged)["config"]["seed"], 7);
    let unset = ringbreak(&["validate", "--trials", "5"], dir.path());
    assert_eq!(report(&unset)["config"]["seed"], 0);
}

#[test]
fn report_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let out = ringbreak(
        &[
            "--seed",
            "3",
            "attack",
            "--protocol",
            "const:7",
            "--trials",
            "50",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["command"], "attack");
    assert_eq!(r["config"]["command"], "attack");
    assert_eq!(r["config"]["seed"], 3);
    assert!(r["config"].get("jobs").is_none());
    assert!(r["verdict"].is_string());
}

#[test]
fn same_seed_same_bytes_across_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let args = |jobs| {
        vec![
            "--seed".to_owned(),
            "99".into(),
            "--jobs".into(),
            jobs,
            "coinflip".into(),
            "--mode".into(),
            "attack".into(),
            "--trials".into(),
            "1000".into(),
        ]
    };
    let a: Vec<String> = args("1".into());
    let b: Vec<String> = args("3".into());
    let a = ringbreak(
        &a.iter().map(String::as_str).collect::<Vec<_>>(),
        dir.path(),
    );
    let b = ringbreak(
        &b.iter().map(String::as_str).collect::<Vec<_>>(),
        dir.path(),
    );
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"command": "validate", "seed": 5, "trials": 4, "protocol": "xor_exchange"}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let out = ringbreak(&["--config", cfg, "validate", "--trials", "6"], dir.path());
    let r = report(&out);
    assert_eq!(r["config"]["seed"], 5);
    assert_eq!(r["config"]["trials"], 6);
    assert_eq!(r["config"]["protocol"], "xor_exchange");

    let wrong = ringbreak(&["--config", cfg, "attack"], dir.path());
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"command": "validate", "trails": 4}"#).unwrap();
    let out = ringbreak(&["--config", cfg.to_str().unwrap(), "validate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_and_transcript_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = ringbreak(
        &[
            "--csv",
            "edges.csv",
            "--transcript",
            "t.jsonl",
            "--out",
            "r.json",
            "attack",
            "--trials",
            "20",
            "--delta-trials",
            "100",
        ],
        dir.path(),
    );
    assert!(
        out.status.code().is_some_and(|c| c <= 1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(dir.path().join("edges.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    let columns = header.split(',').count();
    assert!(lines.all(|l| l.split(',').count() == columns));
    let transcript = std::fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    assert!(transcript.lines().count() > 0);
    for line in transcript.lines() {
        serde_json::from_str::<Value>(line).unwrap();
    }

    let refused = ringbreak(&["--transcript", "x.jsonl", "validate"], dir.path());
    assert_eq!(refused.status.code(), Some(2));
}

#[test]
fn dominance_classifies_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let table = write_table(dir.path(), "xor3.json", &examples::xor(3).to_json());
    let out = ringbreak(&["dominance", "--table", &table, "--t", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["verdict"], "NOT_COMPUTABLE");
    assert_eq!(r["result"]["profile"]["minimal_strong_k"], 3);
}

#[test]
fn compile_passes_on_dominated_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = write_table(dir.path(), "k39.json", &examples::k_of_n(3, 9).to_json());
    let out = ringbreak(
        &[
            "compile",
            "--table",
            &table,
            "--t",
            "3",
            "--inputs",
            "fixed:6=1;7=0",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(&out);
    assert_eq!(r["verdict"], "PASS");
    assert_eq!(r["result"]["comparison"]["distance"], 0.0);
    assert_eq!(r["result"]["honest_bot_seen"], false);
}

#[test]
fn help_exits_zero_and_bad_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ringbreak(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(
        ringbreak(&["attack", "--bogus"], dir.path()).status.code(),
        Some(2)
    );
}
