mod common;

use common::*;
use hybrid_inline::assertions::{evaluate, Facts};
use hybrid_inline::corpus::{generate, GenParams};
use hybrid_inline::inline::{Config, Mode};
use hybrid_inline::oracle::OracleConfig;

fn hybrid_modes() -> Vec<Mode> {
    vec![Mode::ComCi, Mode::HiK(0), Mode::HiK(1), Mode::HiK(2), Mode::HiK(3), Mode::Hia]
}

#[test]
fn hybrid_assertions_match_expectations() {
    let mut bad = Vec::new();
    for e in corpus() {
        for mode in hybrid_modes() {
            for config in [Config::new(mode), Config::exact(mode)] {
                let a = hybrid(&e.program, config);
                for o in evaluate(&e.program, &a, &mode.label()) {
                    if !o.matches() {
                        bad.push(format!("{} [{mode}] {:?}", e.name, o.assertion));
                    }
                }
            }
        }
    }
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn reference_assertions_match_expectations() {
    let mut bad = Vec::new();
    for e in corpus() {
        for k in [Some(0), Some(1), Some(2), Some(3), None] {
            let roots = oracle(&e.program, k);
            let label = OracleConfig::inline(k).label();
            for o in evaluate(&e.program, &roots as &dyn Facts, &label) {
                if !o.matches() {
                    bad.push(format!("{} [{label}] {:?}", e.name, o.assertion));
                }
            }
        }
    }
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn unbounded_inlining_covers_every_program() {
    for e in corpus() {
        let inf = oracle_tables(&e.program, &oracle(&e.program, None));
        for mode in hybrid_modes() {
            let t = hybrid_tables(&e.program, &hybrid(&e.program, Config::exact(mode)));
            let missing = uncovered(&t, &inf);
            assert!(missing.is_empty(), "{} [{mode}] misses {missing:?}", e.name);
        }
    }
}

#[test]
fn unknown_index_copy_reaches_the_caller() {
    // p0 does `p2[p1] = p2[p2]` with both indices unknown, which moves every
    // indexed value of p2 into its `π` cell.
    let p = generate(129, GenParams::default());
    let inf = oracle_tables(&p, &oracle(&p, None));
    for mode in [Mode::ComCi, Mode::HiK(0)] {
        let t = hybrid_tables(&p, &hybrid(&p, Config::exact(mode)));
        assert!(uncovered(&t, &inf).is_empty(), "{mode}");
    }
}

#[test]
fn results_are_deterministic() {
    for e in corpus() {
        for mode in [Mode::ComCi, Mode::HiK(2), Mode::Hia] {
            let run = || {
                let a = hybrid(&e.program, Config::new(mode));
                let dumps: Vec<String> = a.summaries.iter().map(|s| s.dump()).collect();
                (hybrid_tables(&e.program, &a), a.call_graph(), dumps, a.diagnostics())
            };
            assert_eq!(run(), run(), "{} [{mode}]", e.name);
        }
    }
}
