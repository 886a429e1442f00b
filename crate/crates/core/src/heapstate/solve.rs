use std::cell::Cell as Flag;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{AccessPath, AllocSite, Constraint, LocalVar, Off, Rhs, Root, Value};

/// Decides which cells start out holding a symbolic value of their own.
///
/// Parameters always do. Fields of symbolic objects do too, except the fields
/// of the globals object when solving a root. In summary mode, fields of
/// escaping allocation sites and the locals written by pending statements
/// are seeded as well, since a caller may add to them later.
#[derive(Clone, Debug)]
pub struct SeedPolicy {
    pub summary: bool,
    pub escaping: BTreeSet<AllocSite>,
    pub pending_written: BTreeSet<LocalVar>,
    /// Longest symbolic path before widening to `.*`.
    pub depth: usize,
}

impl SeedPolicy {
    pub fn root(depth: usize) -> Self {
        SeedPolicy {
            summary: false,
            escaping: BTreeSet::new(),
            pending_written: BTreeSet::new(),
            depth,
        }
    }

    pub fn summary(depth: usize) -> Self {
        SeedPolicy { summary: true, ..SeedPolicy::root(depth) }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    policy: SeedPolicy,
    vars: HashMap<Root, BTreeSet<Value>>,
    heap: HashMap<Value, BTreeMap<Off, BTreeSet<Value>>>,
    widened: Flag<bool>,
}

type Vals = BTreeSet<Value>;

impl Solution {
    /// Least solution of `constraints` under `policy`, by repeated passes.
    pub fn solve<'a>(
        constraints: impl IntoIterator<Item = &'a Constraint> + Clone,
        policy: SeedPolicy,
    ) -> Solution {
        let mut sol = Solution {
            policy,
            vars: HashMap::new(),
            heap: HashMap::new(),
            widened: Flag::new(false),
        };
        loop {
            let mut changed = false;
            for c in constraints.clone() {
                let vals = sol.eval_rhs(&c.rhs);
                if !vals.is_empty() {
                    changed |= sol.store(&c.lhs, vals);
                }
            }
            if !changed {
                return sol;
            }
        }
    }

    pub fn policy(&self) -> &SeedPolicy {
        &self.policy
    }

    /// Whether some symbolic path was truncated by the depth bound.
    pub fn widened(&self) -> bool {
        self.widened.get()
    }

    fn sym_child(&self, p: &AccessPath, o: &Off) -> AccessPath {
        let d = self.policy.depth.max(1);
        if p.offsets.len() < d {
            return p.child(o.clone());
        }
        self.widened.set(true);
        if p.offsets.last() == Some(&Off::Any) {
            return p.clone();
        }
        let mut offsets = p.offsets[..d - 1].to_vec();
        offsets.push(Off::Any);
        AccessPath::new(p.root.clone(), offsets)
    }

    pub fn var_seed(&self, r: &Root) -> Option<Value> {
        match r {
            Root::Param(_) => Some(Value::Sym(r.clone().path())),
            Root::Local(l) if self.policy.summary && self.policy.pending_written.contains(l) => {
                Some(Value::Sym(r.clone().path()))
            }
            _ => None,
        }
    }

    pub fn field_seed(&self, base: &Value, o: &Off) -> Option<Value> {
        match base {
            Value::Sym(p) => {
                if !self.policy.summary && p.root == Root::Global && p.offsets.is_empty() {
                    None
                } else {
                    Some(Value::Sym(self.sym_child(p, o)))
                }
            }
            Value::Alloc(a) if self.policy.summary && self.policy.escaping.contains(a) => {
                Some(Value::Sym(self.sym_child(&Root::Alloc(a.clone()).path(), o)))
            }
            _ => None,
        }
    }

    /// Values stored into a variable, seeds excluded.
    pub fn stored_var(&self, r: &Root) -> Option<&Vals> {
        self.vars.get(r)
    }

    /// Every heap object with stored fields, and those fields.
    pub fn heap(&self) -> impl Iterator<Item = (&Value, &BTreeMap<Off, Vals>)> {
        self.heap.iter()
    }

    pub fn var(&self, r: &Root) -> Vals {
        match r {
            Root::Alloc(a) => BTreeSet::from([Value::Alloc(a.clone())]),
            Root::Global => BTreeSet::from([Value::Sym(Root::Global.path())]),
            _ => {
                let mut out = self.vars.get(r).cloned().unwrap_or_default();
                out.extend(self.var_seed(r));
                out
            }
        }
    }

    /// Contents of `base.o`, folding in the cells that overlap it: the `π`
    /// cell overlaps every constant index, and `.*` overlaps everything.
    ///
    /// In summary mode a symbolic object reads as its symbolic child only.
    /// Values stored into it reach callers through the emitted stores, and
    /// only where the object actually exists.
    pub fn read(&self, base: &Value, o: &Off) -> Vals {
        let mut out = Vals::new();
        match base {
            Value::Const(_) => return out,
            Value::Top => {
                out.insert(Value::Top);
                return out;
            }
            _ => {}
        }
        out.extend(self.field_seed(base, o));
        if self.policy.summary && matches!(base, Value::Sym(_)) {
            return out;
        }
        let Some(cells) = self.heap.get(base) else {
            return out;
        };
        match o {
            Off::Any => {
                for v in cells.values() {
                    out.extend(v.iter().cloned());
                }
            }
            Off::Pi => {
                for (k, v) in cells {
                    if matches!(k, Off::Index(_) | Off::Pi | Off::Any) {
                        out.extend(v.iter().cloned());
                    }
                }
            }
            Off::Index(_) => {
                for k in [o, &Off::Pi, &Off::Any] {
                    if let Some(v) = cells.get(k) {
                        out.extend(v.iter().cloned());
                    }
                }
            }
            Off::Field(_) => {
                for k in [o, &Off::Any] {
                    if let Some(v) = cells.get(k) {
                        out.extend(v.iter().cloned());
                    }
                }
            }
        }
        out
    }

    pub fn eval_offsets(&self, mut cur: Vals, offsets: &[Off]) -> Vals {
        for o in offsets {
            let mut next = Vals::new();
            for v in &cur {
                next.extend(self.read(v, o));
            }
            cur = next;
            if cur.is_empty() {
                break;
            }
        }
        cur
    }

    /// Points-to set of an access path.
    pub fn eval(&self, p: &AccessPath) -> Vals {
        self.eval_offsets(self.var(&p.root), &p.offsets)
    }

    pub fn eval_rhs(&self, r: &Rhs) -> Vals {
        match r {
            Rhs::Path(p) => self.eval(p),
            Rhs::Alloc(a) => BTreeSet::from([Value::Alloc(a.clone())]),
            Rhs::Const(c) => BTreeSet::from([Value::Const(c.clone())]),
            Rhs::Top => BTreeSet::from([Value::Top]),
        }
    }

    fn store(&mut self, lhs: &AccessPath, vals: Vals) -> bool {
        let Some((last, prefix)) = lhs.offsets.split_last() else {
            return match &lhs.root {
                Root::Alloc(_) | Root::Global => false,
                r => union_into(self.vars.entry(r.clone()).or_default(), vals),
            };
        };
        let bases = self.eval_offsets(self.var(&lhs.root), prefix);
        let mut changed = false;
        for b in bases {
            if matches!(b, Value::Alloc(_) | Value::Sym(_)) {
                let cell = self.heap.entry(b).or_default().entry(last.clone()).or_default();
                changed |= union_into(cell, vals.clone());
            }
        }
        changed
    }
}

fn union_into(dst: &mut Vals, src: Vals) -> bool {
    let before = dst.len();
    dst.extend(src);
    dst.len() != before
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Const, ProcId};

    fn local(v: &str) -> Root {
        Root::local(&ProcId::new("foo"), v)
    }

    fn path(r: Root, fields: &[&str]) -> AccessPath {
        AccessPath::new(r, fields.iter().map(|f| Off::Field((*f).into())).collect())
    }

    fn c(lhs: AccessPath, rhs: Rhs) -> Constraint {
        Constraint::new(lhs, rhs).unwrap()
    }

    fn sym(r: Root, fields: &[&str]) -> Value {
        Value::Sym(path(r, fields))
    }

    #[test]
    fn field_read_through_parameter() {
        // foo(u, v, x) { v.f = x; return u.f; }
        let cs = vec![
            c(local("u").path(), Rhs::Path(Root::Param(1).path())),
            c(local("v").path(), Rhs::Path(Root::Param(2).path())),
            c(local("x").path(), Rhs::Path(Root::Param(3).path())),
            c(path(local("v"), &["f"]), Rhs::Path(local("x").path())),
            c(Root::Ret.path(), Rhs::Path(path(local("u"), &["f"]))),
        ];
        let s = Solution::solve(&cs, SeedPolicy::summary(6));
        assert_eq!(s.var(&Root::Ret), BTreeSet::from([sym(Root::Param(1), &["f"])]));
        let stored = s.heap.get(&sym(Root::Param(2), &[])).unwrap();
        assert_eq!(
            stored[&Off::Field("f".into())],
            BTreeSet::from([sym(Root::Param(3), &[])])
        );
    }

    #[test]
    fn singleton_flow() {
        let l = AllocSite { label: "37".into(), class: "Obj".into(), ctx: vec![] };
        let cs = vec![c(local("first").path(), Rhs::Alloc(l.clone()))];
        let s = Solution::solve(&cs, SeedPolicy::root(6));
        assert_eq!(s.var(&local("first")), BTreeSet::from([Value::Alloc(l)]));
        assert!(s.var(&local("other")).is_empty());
    }

    #[test]
    fn pi_cell_overlaps_constant_indices() {
        let l = AllocSite { label: "1".into(), class: "M".into(), ctx: vec![] };
        let k = Off::Index(Const::Str("k".into()));
        let cs = vec![
            c(local("m").path(), Rhs::Alloc(l)),
            c(AccessPath::new(local("m"), vec![Off::Pi]), Rhs::Const(Const::Int(1))),
            c(AccessPath::new(local("m"), vec![k.clone()]), Rhs::Const(Const::Int(2))),
        ];
        let s = Solution::solve(&cs, SeedPolicy::root(6));
        let at_k = s.eval(&AccessPath::new(local("m"), vec![k]));
        assert_eq!(at_k.len(), 2);
        let other = s.eval(&AccessPath::new(local("m"), vec![Off::Index(Const::Int(0))]));
        assert_eq!(other, BTreeSet::from([Value::Const(Const::Int(1))]));
        let any = s.eval(&AccessPath::new(local("m"), vec![Off::Pi]));
        assert_eq!(any.len(), 2);
    }

    #[test]
    fn depth_bound_widens() {
        // x = par1; x = x.f  (a list walk)
        let cs = vec![
            c(local("x").path(), Rhs::Path(Root::Param(1).path())),
            c(local("x").path(), Rhs::Path(path(local("x"), &["f"]))),
        ];
        let s = Solution::solve(&cs, SeedPolicy::summary(3));
        assert!(s.widened());
        let xs = s.var(&local("x"));
        assert_eq!(xs.len(), 5);
        assert!(xs.contains(&Value::Sym(AccessPath::new(
            Root::Param(1),
            vec![Off::Field("f".into()), Off::Field("f".into()), Off::Any]
        ))));
    }

    #[test]
    fn globals_start_empty_at_roots() {
        let g = path(Root::Global, &["x"]);
        let cs = vec![c(local("a").path(), Rhs::Path(g))];
        assert!(Solution::solve(&cs, SeedPolicy::root(6)).var(&local("a")).is_empty());
        assert_eq!(
            Solution::solve(&cs, SeedPolicy::summary(6)).var(&local("a")).len(),
            1
        );
    }
}
