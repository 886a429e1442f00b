#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use hybrid_inline::corpus::{load_dir, Entry};
use hybrid_inline::driver::{analyze, Analysis};
use hybrid_inline::inline::{Config, Mode};
use hybrid_inline::ir::{ProcId, Program};
use hybrid_inline::oracle::facts::{tables, FactTable};
use hybrid_inline::oracle::{inline_analysis, OracleConfig, OracleRoot};
use hybrid_inline::summarize::Diagnostic;

pub const FACT_DEPTH: usize = 3;
pub const SWEEP_SEEDS: u64 = 1000;

pub type Tables = BTreeMap<ProcId, FactTable>;

pub fn corpus_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus() -> Vec<Entry> {
    load_dir(&corpus_root()).expect("corpus loads")
}

pub fn entry(name: &str) -> Entry {
    corpus().into_iter().find(|e| e.name == name).unwrap_or_else(|| panic!("no corpus entry {name}"))
}

pub fn hybrid(p: &Program, config: Config) -> Analysis {
    analyze(p, config).expect("analysis succeeds")
}

pub fn oracle(p: &Program, k: Option<usize>) -> BTreeMap<ProcId, OracleRoot> {
    inline_analysis(p, &OracleConfig::inline(k)).expect("oracle succeeds")
}

pub fn hybrid_tables(p: &Program, a: &Analysis) -> Tables {
    tables(p, a.roots.iter().map(|(r, s)| (r, &s.solution)), FACT_DEPTH)
}

pub fn oracle_tables(p: &Program, o: &BTreeMap<ProcId, OracleRoot>) -> Tables {
    tables(p, o.iter().map(|(r, s)| (r, &s.solution)), FACT_DEPTH)
}

/// Paths where `big` misses a value of `small`, over all roots.
pub fn uncovered(big: &Tables, small: &Tables) -> Vec<String> {
    let empty = FactTable::new();
    small
        .iter()
        .flat_map(|(r, t)| {
            hybrid_inline::oracle::facts::not_covered(big.get(r).unwrap_or(&empty), t)
                .into_iter()
                .map(move |p| format!("{r}.{p}"))
        })
        .collect()
}

/// Whether the analysis had to cut a recursive or over-long dispatch chain.
pub fn has_cuts(a: &Analysis) -> bool {
    a.diagnostics()
        .iter()
        .any(|d| matches!(d, Diagnostic::RecursionCut { .. } | Diagnostic::PermutationCut { .. }))
}

/// Corpus programs analyzed without any recursion or dispatch-chain cut.
pub fn acyclic_corpus() -> Vec<Entry> {
    corpus()
        .into_iter()
        .filter(|e| !has_cuts(&hybrid(&e.program, Config::exact(Mode::Hia))))
        .collect()
}
