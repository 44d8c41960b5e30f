use std::path::Path;
use std::process::{Command, Output};

fn paczero(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paczero"))
        .args(args)
        .env("PACZERO_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &["--records", "32", "--steps", "40", "--subsets", "8"];

fn with<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(tail).copied().collect()
}

#[test]
fn run_writes_under_the_env_root() {
    let root = tempfile::tempdir().unwrap();
    let out = paczero(root.path(), &with(&["run", "--mi-total", "0.2", "--seeds", "0,1"], SMALL));
    assert!(out.status.success(), "{}", stderr(&out));
    let dir = root.path().join("run-paczero_mi");
    assert!(dir.join("summary.csv").exists());
    assert!(dir.join("transcript-paczero_mi-seed1.jsonl").exists());
    let summary = std::fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("variant,budget,T,seed,dev,test,f,cum_mi,wallclock"));
    assert!(summary.contains(",mean,") && summary.contains(",std,"));
}

#[test]
fn validate_accepts_honest_and_names_the_broken_invariant() {
    let root = tempfile::tempdir().unwrap();
    let out = paczero(root.path(), &with(&["run", "--variant", "paczero-zpl"], SMALL));
    assert!(out.status.success(), "{}", stderr(&out));
    let path = root.path().join("run-paczero_zpl/transcript-paczero_zpl-seed0.jsonl");
    let ok = paczero(root.path(), &["validate", path.to_str().unwrap()]);
    assert!(ok.status.success());
    assert!(stdout(&ok).contains("result: PASS"));

    let text = std::fs::read_to_string(&path).unwrap();
    let corrupted: Vec<String> = text
        .lines()
        .map(|l| l.replace(r#""unanimity_count_so_far":"#, r#""unanimity_count_so_far":1000"#))
        .collect();
    let bad = root.path().join("bad.jsonl");
    std::fs::write(&bad, corrupted.join("\n")).unwrap();
    let fail = paczero(root.path(), &["validate", "--json", bad.to_str().unwrap()]);
    assert_eq!(fail.status.code(), Some(2));
    assert!(stderr(&fail).contains("invariant failed: unanimity-count"), "{}", stderr(&fail));
}

#[test]
fn unreadable_transcript_is_an_error() {
    let root = tempfile::tempdir().unwrap();
    let missing = root.path().join("missing.jsonl");
    let out = paczero(root.path(), &["validate", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn bad_config_is_an_error() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("c.toml");
    std::fs::write(&config, "seeds = [0]\nbogus = 1\n").unwrap();
    let out = paczero(root.path(), &["run", "-c", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(paczero(root.path(), &["run", "--mi-total", "-1"]).status.code() == Some(1));
}

#[test]
fn bounds_prints_the_table() {
    let root = tempfile::tempdir().unwrap();
    let out = paczero(root.path(), &["bounds", "--mi", "0.25", "--eps", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("0.8379"), "{text}");
    assert!(text.contains("0.7311"), "{text}");
    let json = paczero(root.path(), &["bounds", "--json", "--mi", "0.25"]);
    let parsed: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert!(parsed.is_object() || parsed.is_array());
}

#[test]
fn sweeps_write_summaries() {
    let root = tempfile::tempdir().unwrap();
    let out = paczero(root.path(), &with(&["sweep-mi", "--budgets", "0.01,0.3"], SMALL));
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(root.path().join("sweep-mi/summary.csv").exists());
    let out = paczero(root.path(), &with(&["sweep-t", "--variant", "paczero-zpl", "--rungs", "10,20"], SMALL));
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("best rung"));
    let out = paczero(root.path(), &with(&["sweep-decomp"], SMALL));
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("random_sign"));
    let out = paczero(root.path(), &with(&["sweep-k", "--ks", "1,2"], SMALL));
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn attack_reports_against_the_bound() {
    let root = tempfile::tempdir().unwrap();
    let out = paczero(
        root.path(),
        &["attack", "--variant", "paczero-zpl", "--trials", "200", "--records", "16", "--steps", "10"],
    );
    assert!(out.status.success(), "{}{}", stdout(&out), stderr(&out));
    assert!(root.path().join("attack/attack.json").exists());
}
