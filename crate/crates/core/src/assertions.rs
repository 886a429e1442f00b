//! Alias assertions checked against analysis results.

use std::collections::{BTreeMap, BTreeSet};

use crate::driver::Analysis;
use crate::heapstate::{AllocSite, Value};
use crate::ir::{AliasAssertion, AliasKind, ProcId, Program};
use crate::oracle::{self, OracleRoot};

/// Points-to answers for root procedures.
pub trait Facts {
    fn points_to(&self, proc: &ProcId, var: &str) -> BTreeSet<Value>;

    /// How many concrete allocations a single abstract site may stand for.
    fn multiplicity(&self, proc: &ProcId, site: &AllocSite) -> usize;
}

impl Facts for Analysis {
    fn points_to(&self, proc: &ProcId, var: &str) -> BTreeSet<Value> {
        Analysis::points_to(self, proc, var)
    }

    // Allocation contexts are whole call strings, so each names one copy.
    fn multiplicity(&self, _: &ProcId, _: &AllocSite) -> usize {
        1
    }
}

impl Facts for BTreeMap<ProcId, OracleRoot> {
    fn points_to(&self, proc: &ProcId, var: &str) -> BTreeSet<Value> {
        self.get(proc).map_or_else(BTreeSet::new, |r| oracle::points_to(r, proc, var))
    }

    fn multiplicity(&self, proc: &ProcId, site: &AllocSite) -> usize {
        self.get(proc).map_or(0, |r| r.multiplicity(site))
    }
}

/// Whether two points-to sets may share a target. The unknown value
/// overlaps anything.
pub fn overlap(a: &BTreeSet<Value>, b: &BTreeSet<Value>) -> bool {
    let top = |s: &BTreeSet<Value>, other: &BTreeSet<Value>| s.contains(&Value::Top) && !other.is_empty();
    top(a, b) || top(b, a) || a.iter().any(|v| b.contains(v))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub assertion: AliasAssertion,
    pub holds: bool,
    pub expected: bool,
    pub overlap: bool,
}

impl Outcome {
    pub fn matches(&self) -> bool {
        self.holds == self.expected
    }

    pub fn mark(&self) -> Mark {
        match (self.assertion.kind, self.overlap) {
            (AliasKind::MustAlias, true) => Mark::Tp,
            (AliasKind::NotAlias, true) => Mark::Fp,
            _ => Mark::Blank,
        }
    }
}

/// Benchmark-table mark of one query: a reported alias counts as a true
/// positive on alias queries and as a false positive on no-alias queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mark {
    Tp,
    Fp,
    Blank,
}

/// Checks every assertion of `program`. `mode` selects the per-mode
/// expectation overrides.
pub fn evaluate(program: &Program, facts: &dyn Facts, mode: &str) -> Vec<Outcome> {
    program
        .assertions
        .iter()
        .map(|a| {
            let pa = facts.points_to(&a.proc, &a.vars.0);
            let pb = facts.points_to(&a.proc, &a.vars.1);
            let overlap = overlap(&pa, &pb);
            let holds = match a.kind {
                AliasKind::NotAlias => !overlap,
                AliasKind::MustAlias => {
                    pa == pb
                        && pa.len() == 1
                        && matches!(pa.first(), Some(Value::Alloc(s)) if facts.multiplicity(&a.proc, s) == 1)
                }
            };
            Outcome { assertion: a.clone(), holds, expected: a.expected.for_mode(mode), overlap }
        })
        .collect()
}

/// True and false positive counts. When `count_proved` is set, a no-alias
/// query proved disjoint also counts as a true positive.
pub fn tally(outcomes: &[Outcome], count_proved: bool) -> (usize, usize) {
    let mut tp = 0;
    let mut fp = 0;
    for o in outcomes {
        match o.mark() {
            Mark::Tp => tp += 1,
            Mark::Fp => fp += 1,
            Mark::Blank if count_proved && o.assertion.kind == AliasKind::NotAlias => tp += 1,
            Mark::Blank => {}
        }
    }
    (tp, fp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heapstate::Root;

    fn alloc(l: &str) -> Value {
        Value::Alloc(AllocSite { label: l.into(), class: "O".into(), ctx: vec![] })
    }

    #[test]
    fn overlap_rules() {
        let a = BTreeSet::from([alloc("1")]);
        let b = BTreeSet::from([alloc("2")]);
        let t = BTreeSet::from([Value::Top]);
        assert!(!overlap(&a, &b));
        assert!(overlap(&a, &a));
        assert!(overlap(&t, &b));
        assert!(!overlap(&t, &BTreeSet::new()));
        let p = BTreeSet::from([Value::Sym(Root::Param(0).path())]);
        assert!(overlap(&p, &p) && !overlap(&p, &a));
    }
}
