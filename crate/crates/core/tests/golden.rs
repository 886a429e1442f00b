//! Published summaries compared with checked-in dumps. Set `UPDATE_GOLDEN=1`
//! to rewrite the dumps after an intended change.

mod common;

use std::path::PathBuf;

use common::*;
use hybrid_inline::inline::{Config, Mode};

fn check(name: &str, mode: Mode) {
    let a = hybrid(&entry(name).program, Config::exact(mode));
    let got: String = a.summaries.iter().map(|s| s.dump()).collect();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/{name}.{mode}.txt"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &got).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(got, want, "{name} [{mode}]");
}

#[test]
fn field_summary_hia() {
    check("fieldSummary", Mode::Hia);
}

#[test]
fn field_summary_comci() {
    check("fieldSummary", Mode::ComCi);
}

#[test]
fn container_keys_hia() {
    check("containerKeys", Mode::Hia);
}

#[test]
fn container_keys_comci() {
    check("containerKeys", Mode::ComCi);
}

#[test]
fn overview_hi2() {
    check("overviewExample", Mode::HiK(2));
}
