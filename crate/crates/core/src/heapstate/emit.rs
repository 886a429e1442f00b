//! Projection of a solved summary state onto what callers can observe.

use std::collections::BTreeSet;

use super::{AccessPath, AllocSite, Constraint, LocalVar, Off, Rhs, Root, Solution, Value};

fn alloc_root(v: &Value) -> Option<&AllocSite> {
    match v {
        Value::Alloc(a) => Some(a),
        Value::Sym(p) => match &p.root {
            Root::Alloc(a) => Some(a),
            _ => None,
        },
        _ => None,
    }
}

/// Allocation sites reachable from the return slot, from variables of
/// pending statements, or through fields of symbolic objects.
pub fn escaping_allocs(sol: &Solution, pending_vars: &BTreeSet<LocalVar>) -> BTreeSet<AllocSite> {
    let mut work: Vec<Value> = sol.var(&Root::Ret).into_iter().collect();
    for pv in pending_vars {
        work.extend(sol.var(&Root::Local(pv.clone())));
    }
    for (base, cells) in sol.heap() {
        if let Value::Sym(_) = base {
            work.push(base.clone());
            for vals in cells.values() {
                work.extend(vals.iter().cloned());
            }
        }
    }
    let mut out = BTreeSet::new();
    while let Some(v) = work.pop() {
        let Some(a) = alloc_root(&v) else { continue };
        if !out.insert(a.clone()) {
            continue;
        }
        let key = Value::Alloc(a.clone());
        for (base, cells) in sol.heap() {
            if *base == key || alloc_root(base) == Some(a) {
                for vals in cells.values() {
                    work.extend(vals.iter().cloned());
                }
            }
        }
    }
    out
}

fn base_path(v: &Value) -> Option<AccessPath> {
    match v {
        Value::Sym(p) => Some(p.clone()),
        Value::Alloc(a) => Some(Root::Alloc(a.clone()).path()),
        _ => None,
    }
}

/// Constraints that reproduce, in any caller, the effect of the solved state
/// on observable locations. Locals and non-escaping objects disappear.
pub fn emit_summary(
    sol: &Solution,
    pending_vars: &BTreeSet<LocalVar>,
    escaping: &BTreeSet<AllocSite>,
) -> BTreeSet<Constraint> {
    let mut out = BTreeSet::new();
    if let Some(vals) = sol.stored_var(&Root::Ret) {
        for v in vals {
            out.extend(Constraint::new(Root::Ret.path(), Rhs::from(v.clone())));
        }
    }
    for pv in pending_vars {
        let root = Root::Local(pv.clone());
        let seed = sol.var_seed(&root);
        if let Some(vals) = sol.stored_var(&root) {
            for v in vals.iter().filter(|v| Some(*v) != seed.as_ref()) {
                out.extend(Constraint::new(root.clone().path(), Rhs::from(v.clone())));
            }
        }
    }
    for (base, cells) in sol.heap() {
        let observable = match base {
            Value::Sym(_) => true,
            Value::Alloc(a) => escaping.contains(a),
            _ => false,
        };
        if !observable {
            continue;
        }
        let bp = base_path(base).expect("heap bases are objects");
        for (o, vals) in cells {
            // Reading `π` or `.*` gathers several cells, so storing that
            // read back into the single cell is not a no-op.
            let seed = match o {
                Off::Field(_) | Off::Index(_) => sol.field_seed(base, o),
                Off::Pi | Off::Any => None,
            };
            for v in vals.iter().filter(|v| Some(*v) != seed.as_ref()) {
                out.extend(Constraint::new(bp.child(o.clone()), Rhs::from(v.clone())));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heapstate::SeedPolicy;
    use crate::ir::ProcId;

    fn l(label: &str) -> AllocSite {
        AllocSite { label: label.into(), class: "Obj".into(), ctx: vec![] }
    }

    fn local(v: &str) -> Root {
        Root::local(&ProcId::new("p"), v)
    }

    fn c(lhs: AccessPath, rhs: Rhs) -> Constraint {
        Constraint::new(lhs, rhs).unwrap()
    }

    #[test]
    fn identity_cleans_to_ret_par1() {
        // id(this, x) { tv = x; return tv; }
        let cs = vec![
            c(local("this").path(), Rhs::Path(Root::Param(0).path())),
            c(local("x").path(), Rhs::Path(Root::Param(1).path())),
            c(local("tv").path(), Rhs::Path(local("x").path())),
            c(Root::Ret.path(), Rhs::Path(local("tv").path())),
        ];
        let s = Solution::solve(&cs, SeedPolicy::summary(6));
        let none = BTreeSet::new();
        let out = emit_summary(&s, &none, &escaping_allocs(&s, &none));
        let want = c(Root::Ret.path(), Rhs::Path(Root::Param(1).path()));
        assert_eq!(out, BTreeSet::from([want]));
    }

    #[test]
    fn local_object_fields_are_cleaned() {
        // u = new; u.f = par1; return u.f;
        let f = Off::Field("f".into());
        let cs = vec![
            c(local("u").path(), Rhs::Alloc(l("6"))),
            c(local("u").path().child(f.clone()), Rhs::Path(Root::Param(1).path())),
            c(Root::Ret.path(), Rhs::Path(local("u").path().child(f))),
        ];
        let s = Solution::solve(&cs, SeedPolicy::summary(6));
        let none = BTreeSet::new();
        let esc = escaping_allocs(&s, &none);
        assert!(esc.is_empty());
        let out = emit_summary(&s, &none, &esc);
        assert_eq!(out.len(), 1);
        assert_eq!(out.iter().next().unwrap().to_string(), "ret ⊇ par1");
    }

    #[test]
    fn pi_copy_into_itself_is_kept() {
        // t = p[i]; p[j] = t; with unknown indices
        let pi = Root::Param(2).path().child(Off::Pi);
        let cs = vec![
            c(local("t").path(), Rhs::Path(pi.clone())),
            c(pi.clone(), Rhs::Path(local("t").path())),
        ];
        let s = Solution::solve(&cs, SeedPolicy::summary(6));
        let none = BTreeSet::new();
        let out = emit_summary(&s, &none, &escaping_allocs(&s, &none));
        assert_eq!(out, BTreeSet::from([c(pi.clone(), Rhs::Path(pi))]));
    }

    #[test]
    fn returned_object_escapes_with_its_fields() {
        let f = Off::Field("f".into());
        let cs = vec![
            c(local("u").path(), Rhs::Alloc(l("8"))),
            c(local("u").path().child(f), Rhs::Path(Root::Param(1).path())),
            c(Root::Ret.path(), Rhs::Path(local("u").path())),
        ];
        let s = Solution::solve(&cs, SeedPolicy::summary(6));
        let none = BTreeSet::new();
        let esc = escaping_allocs(&s, &none);
        assert_eq!(esc, BTreeSet::from([l("8")]));
        let out: Vec<String> = emit_summary(&s, &none, &esc).iter().map(|c| c.to_string()).collect();
        assert_eq!(out, vec!["ret ⊇ {l8}", "l8.f ⊇ par1"]);
    }
}
