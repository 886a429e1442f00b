//! Observable points-to facts of a root, for comparing analyses.

use std::collections::{BTreeMap, BTreeSet};

use crate::heapstate::{Off, Root, Solution, Value};
use crate::ir::{Offset, Program, RValue, Statement};
use crate::summarize::LoweredProc;

/// Points-to sets keyed by a printable access path such as `x.f["k"]`.
pub type FactTable = BTreeMap<String, BTreeSet<Value>>;

/// Every field, constant index and the unknown index used in `program`.
pub fn offset_universe(program: &Program) -> Vec<Off> {
    let mut out = BTreeSet::from([Off::Pi]);
    let mut offsets = |lv: &crate::ir::LValue| {
        for o in &lv.offsets {
            match o {
                Offset::Field(f) => {
                    out.insert(Off::Field(f.clone()));
                }
                Offset::ConstIndex(c) => {
                    out.insert(Off::Index(c.clone()));
                }
                Offset::VarIndex(_) => {}
            }
        }
    };
    let mut consts = BTreeSet::new();
    for p in &program.procs {
        for s in &p.body {
            match s {
                Statement::Assign { lhs, rhs, .. } => {
                    offsets(lhs);
                    match rhs {
                        RValue::Lv(lv) => offsets(lv),
                        RValue::Const(c) => {
                            consts.insert(c.clone());
                        }
                        RValue::New { .. } => {}
                    }
                }
                Statement::Call { result, args, .. } => {
                    result.iter().chain(args).for_each(&mut offsets);
                }
                Statement::Return { value, .. } => offsets(value),
            }
        }
    }
    out.extend(consts.into_iter().map(Off::Index));
    out.into_iter().collect()
}

/// Facts for the root variables of `body` and `ret`, and for heap reads
/// through them up to `depth` offsets.
pub fn root_facts(sol: &Solution, body: &LoweredProc, universe: &[Off], depth: usize) -> FactTable {
    let mut roots: BTreeSet<Root> = body
        .roots()
        .into_iter()
        .filter(|r| matches!(r, Root::Local(l) if l.ctx.is_empty()) || *r == Root::Global)
        .collect();
    roots.insert(Root::Ret);
    let mut out = FactTable::new();
    for r in roots {
        let vals = sol.var(&r);
        walk(sol, r.to_string(), vals, universe, depth, &mut out);
    }
    out
}

fn walk(sol: &Solution, name: String, vals: BTreeSet<Value>, universe: &[Off], depth: usize, out: &mut FactTable) {
    if vals.is_empty() {
        return;
    }
    if depth > 0 {
        for o in universe {
            let next: BTreeSet<Value> = vals.iter().flat_map(|v| sol.read(v, o)).collect();
            walk(sol, format!("{name}{o}"), next, universe, depth - 1, out);
        }
    }
    out.insert(name, vals);
}

/// Paths where the two tables differ, with both sets.
pub fn diff(a: &FactTable, b: &FactTable) -> Vec<(String, BTreeSet<Value>, BTreeSet<Value>)> {
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .filter_map(|k| {
            let x = a.get(k).cloned().unwrap_or_default();
            let y = b.get(k).cloned().unwrap_or_default();
            (x != y).then(|| (k.clone(), x, y))
        })
        .collect()
}

/// Paths where `big` misses some value of `small`.
pub fn not_covered(big: &FactTable, small: &FactTable) -> Vec<String> {
    small
        .iter()
        .filter(|(k, v)| big.get(*k).is_none_or(|b| !v.is_subset(b)))
        .map(|(k, _)| k.clone())
        .collect()
}

/// Keeps the last `k` call sites of every allocation context, which maps
/// facts with whole call strings onto a `k`-callsite heap.
pub fn project(table: &FactTable, k: usize) -> FactTable {
    let cut = |v: &Value| match v {
        Value::Alloc(a) => {
            let mut a = a.clone();
            a.ctx.drain(..a.ctx.len().saturating_sub(k));
            Value::Alloc(a)
        }
        other => other.clone(),
    };
    table.iter().map(|(p, vals)| (p.clone(), vals.iter().map(cut).collect())).collect()
}

/// A root path whose points-to set differs between two analyses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    pub root: crate::ir::ProcId,
    pub path: String,
    pub left: BTreeSet<Value>,
    pub right: BTreeSet<Value>,
}

/// Fact tables of every root, from the solved root states.
pub fn tables<'a>(
    program: &Program,
    solutions: impl IntoIterator<Item = (&'a crate::ir::ProcId, &'a Solution)>,
    depth: usize,
) -> BTreeMap<crate::ir::ProcId, FactTable> {
    let universe = offset_universe(program);
    solutions
        .into_iter()
        .map(|(r, sol)| {
            let body = crate::summarize::lower_proc(program, program.proc(r).expect("root exists"));
            (r.clone(), root_facts(sol, &body, &universe, depth))
        })
        .collect()
}

pub fn divergences(
    left: &BTreeMap<crate::ir::ProcId, FactTable>,
    right: &BTreeMap<crate::ir::ProcId, FactTable>,
) -> Vec<Divergence> {
    let empty = FactTable::new();
    let roots: BTreeSet<_> = left.keys().chain(right.keys()).collect();
    roots
        .into_iter()
        .flat_map(|r| {
            let l = left.get(r).unwrap_or(&empty);
            let rt = right.get(r).unwrap_or(&empty);
            diff(l, rt).into_iter().map(|(path, left, right)| Divergence { root: r.clone(), path, left, right })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heapstate::AllocSite;
    use crate::ir::SiteId;

    fn l(ctx: &[u32]) -> Value {
        Value::Alloc(AllocSite {
            label: "5".into(),
            class: "Obj".into(),
            ctx: ctx.iter().map(|s| SiteId(*s)).collect(),
        })
    }

    #[test]
    fn projection_keeps_innermost_sites() {
        let t = FactTable::from([("x".to_string(), BTreeSet::from([l(&[1, 2, 3]), l(&[4])]))]);
        let p = project(&t, 2);
        assert_eq!(p["x"], BTreeSet::from([l(&[2, 3]), l(&[4])]));
        assert_eq!(project(&t, 0)["x"], BTreeSet::from([l(&[])]));
    }

    #[test]
    fn coverage_is_per_path() {
        let big = FactTable::from([("x".to_string(), BTreeSet::from([l(&[]), l(&[1])]))]);
        let small = FactTable::from([
            ("x".to_string(), BTreeSet::from([l(&[1])])),
            ("y".to_string(), BTreeSet::from([l(&[])])),
        ]);
        assert_eq!(not_covered(&big, &small), ["y"]);
        assert!(not_covered(&small, &small).is_empty());
    }
}
