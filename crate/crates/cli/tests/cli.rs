use std::path::{Path, PathBuf};
use std::process::Command;

use clap::Parser;
use hia_cli::app::{execute, Cli, Output, EXIT_DIVERGENCE, EXIT_MISMATCH, EXIT_OK, EXIT_PARSE};

fn corpus(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(rel)
}

fn hia(args: &[&str]) -> Output {
    let mut argv = vec!["hia"];
    argv.extend_from_slice(args);
    execute(Cli::try_parse_from(argv).expect("arguments parse"))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const WRONG: &str = "class Obj {}
proc main(this) { a = new Obj@1; b = new Obj@2; }
root main;
assert alias main.a, main.b expect pass;
";

#[test]
fn corpus_assertions_hold_in_every_mode() {
    let out = hia(&["analyze", path(&corpus("")), "--mode", "all", "--assert"]);
    assert_eq!(out.code, EXIT_OK, "{}{}", out.stdout, out.stderr);
    assert!(!out.stdout.contains("MISMATCH"));
    for m in ["topci", "inline:2", "inline:3", "inline:inf", "comci", "hi:2", "hi:3", "hia"] {
        assert!(out.stdout.contains(&format!("[{m}]")), "no report for {m}");
    }
}

#[test]
fn failed_expectation_exits_with_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("wrong.hir");
    std::fs::write(&f, WRONG).unwrap();
    let out = hia(&["analyze", path(&f), "--assert"]);
    assert_eq!(out.code, EXIT_MISMATCH);
    assert!(out.stdout.contains("fail (expected pass)  MISMATCH"));
}

#[test]
fn parse_errors_outrank_mismatches() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.hir"), WRONG).unwrap();
    std::fs::write(dir.path().join("b.hir"), "proc main( {").unwrap();
    let out = hia(&["analyze", path(dir.path()), "--assert"]);
    assert_eq!(out.code, EXIT_PARSE);
    assert!(out.stderr.contains("b.hir"));
    assert!(out.stdout.contains("a.hir [hia]"));
}

#[test]
fn oracle_check_reports_divergence() {
    let f = corpus("general/contextSensitivity.hir");
    let out = hia(&["analyze", path(&f), "--mode", "hia", "--check-oracle", "inf"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stdout);
    assert!(out.stdout.contains("oracle inline:inf: 0 divergence(s)"));
    // Coarser analyses only have to cover the reference.
    let out = hia(&["analyze", path(&f), "--mode", "comci", "--check-oracle", "inf"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stdout);
    let out = hia(&["analyze", path(&f), "--mode", "topci", "--check-oracle", "inf"]);
    assert_eq!(out.code, EXIT_OK);
    // ComCI keeps `o2` and `o3` apart where two-site inlining merges them.
    let out = hia(&["analyze", path(&f), "--mode", "comci", "--check-oracle", "2"]);
    assert_eq!(out.code, EXIT_DIVERGENCE, "{}", out.stdout);
    assert!(out.stdout.contains("missing main.a2"));
    let out = hia(&["analyze", path(&f), "--mode", "inline:inf", "--check-oracle", "0"]);
    assert_eq!(out.code, EXIT_DIVERGENCE, "{}", out.stdout);
}

#[test]
fn hia_matches_unbounded_inlining_on_the_corpus() {
    let out = hia(&["analyze", path(&corpus("")), "--mode", "hia", "--check-oracle", "inf"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stdout);
    assert!(!out.stdout.contains("missing") && !out.stdout.contains("extra"));
}

#[test]
fn output_files() {
    let dir = tempfile::tempdir().unwrap();
    let (m, g, j) = (dir.path().join("m.json"), dir.path().join("cg.tsv"), dir.path().join("facts.jsonl"));
    let f = corpus("overview/overviewExample.hir");
    let out = hia(&[
        "analyze", path(&f), "--mode", "all", "--metrics", path(&m), "--callgraph", path(&g), "--json", path(&j),
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&m).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 8);
    let row = |mode: &str| rows.iter().find(|r| r["mode"] == mode).unwrap();
    assert_eq!(row("comci")["polyCallsites"], 1);
    assert_eq!(row("hia")["polyCallsites"], 0);
    assert_eq!(row("hia")["hybrid"]["kMax"], 2);
    assert!(row("topci").get("hybrid").is_none());
    let edges = std::fs::read_to_string(&g).unwrap();
    assert!(edges.lines().any(|l| l.ends_with("\tfoo\ts6\tpoly@Y")));
    for line in std::fs::read_to_string(&j).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["kind"] == "pt" || v["kind"] == "edge");
    }
}

#[test]
fn summaries_are_printed() {
    let out = hia(&["analyze", path(&corpus("examples/fieldSummary.hir")), "--summaries"]);
    assert!(out.stdout.contains("summary foo"));
    assert!(out.stdout.contains("par2.f ⊇ par3"));
}

#[test]
fn generator_is_seeded() {
    let a = hia(&["gen", "--seed", "7"]);
    let b = hia(&["gen", "--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, hia(&["gen", "--seed", "8"]).stdout);
    assert!(hybrid_inline::ir::parse(&a.stdout).is_ok());
    let tiny = hia(&["gen", "--minimal"]);
    assert!(tiny.stdout.contains("root"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_hia");
    let ok = Command::new(bin).args(["analyze", path(&corpus("basic")), "--assert", "--jobs", "4"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    let bad = Command::new(bin).args(["analyze", "/nonexistent/x.hir"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_PARSE));
    let seeded = Command::new(bin).arg("gen").env("HI_SEED", "7").output().unwrap();
    assert_eq!(String::from_utf8(seeded.stdout).unwrap(), hia(&["gen", "--seed", "7"]).stdout);
}

#[test]
fn parallel_runs_match_sequential() {
    let dir = corpus("");
    let one = hia(&["analyze", path(&dir), "--mode", "hia", "--jobs", "1"]);
    let four = hia(&["analyze", path(&dir), "--mode", "hia", "--jobs", "4"]);
    assert_eq!(one.stdout, four.stdout);
}
