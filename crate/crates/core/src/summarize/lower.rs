//! Lowering of procedure bodies to constraints over access paths.
//!
//! Every variable-indexed access is isolated into an [`IndexOp`] whose operands
//! are plain variables, and every call passes and receives plain temporaries
//! (`$t0`, `$t1`, ...). Parameters are copied into locals, so `x ⊇ par1` for
//! the second parameter `x`, and `return lv` becomes `ret ⊇ lv`.

use std::collections::BTreeSet;

use crate::heapstate::{AccessPath, AllocSite, Constraint, LocalVar, Off, Rhs, Root};
use crate::ir::{
    CallKind, LValue, Name, Offset, ProcId, Procedure, Program, RValue, ReceiverClasses,
    SiteId, Statement, GLOBALS,
};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IndexOp {
    /// `dst = base[index]`
    Load { dst: Root, base: Root, index: Root },
    /// `base[index] = src`
    Store { base: Root, index: Root, src: Root },
}

impl IndexOp {
    pub fn index(&self) -> &Root {
        match self {
            IndexOp::Load { index, .. } | IndexOp::Store { index, .. } => index,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CallTarget {
    /// A static call, or a virtual call with a single implementation.
    Direct(ProcId),
    /// A virtual call with several implementations.
    Virtual(Name),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoweredCall {
    pub site: SiteId,
    pub target: CallTarget,
    pub args: Vec<Root>,
    pub result: Root,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoweredIndex {
    pub site: SiteId,
    pub op: IndexOp,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoweredProc {
    pub constraints: Vec<Constraint>,
    pub calls: Vec<LoweredCall>,
    pub index_ops: Vec<LoweredIndex>,
}

impl LoweredProc {
    /// Every variable root the lowered body mentions.
    pub fn roots(&self) -> BTreeSet<Root> {
        let mut out = BTreeSet::new();
        for c in &self.constraints {
            out.insert(c.lhs.root.clone());
            if let Rhs::Path(p) = &c.rhs {
                out.insert(p.root.clone());
            }
        }
        for c in &self.calls {
            out.extend(c.args.iter().cloned());
            out.insert(c.result.clone());
        }
        for ix in &self.index_ops {
            match &ix.op {
                IndexOp::Load { dst, base, index } => out.extend([dst, base, index].map(Clone::clone)),
                IndexOp::Store { base, index, src } => out.extend([base, index, src].map(Clone::clone)),
            }
        }
        out.retain(|r| !matches!(r, Root::Alloc(_)));
        out
    }

    /// Sites of the critical statements: variable-indexed accesses and
    /// polymorphic virtual calls.
    pub fn critical_sites(&self) -> BTreeSet<SiteId> {
        let calls = self
            .calls
            .iter()
            .filter(|c| matches!(c.target, CallTarget::Virtual(_)))
            .map(|c| c.site);
        calls.chain(self.index_ops.iter().map(|i| i.site)).collect()
    }
}

struct Lowerer<'a> {
    proc: &'a ProcId,
    temps: usize,
    out: LoweredProc,
}

impl Lowerer<'_> {
    fn var(&self, name: &Name) -> Root {
        if &**name == GLOBALS {
            Root::Global
        } else {
            Root::Local(LocalVar {
                proc: self.proc.clone(),
                var: name.clone(),
                ctx: Vec::new(),
            })
        }
    }

    fn temp(&mut self) -> Root {
        let r = Root::local(self.proc, &format!("$t{}", self.temps));
        self.temps += 1;
        r
    }

    fn push(&mut self, lhs: AccessPath, rhs: Rhs) {
        if let Some(c) = Constraint::new(lhs, rhs) {
            self.out.constraints.push(c);
        }
    }

    /// A plain local holding the value of `p`.
    fn materialize(&mut self, p: AccessPath) -> Root {
        if p.offsets.is_empty() && matches!(p.root, Root::Local(_)) {
            return p.root;
        }
        let t = self.temp();
        self.push(t.clone().path(), Rhs::Path(p));
        t
    }

    fn index_var(&mut self, v: &Name) -> Root {
        let r = self.var(v);
        self.materialize(r.path())
    }

    /// Access path reading `lv`, with variable indices split off as loads.
    fn read(&mut self, site: SiteId, base: &Name, offsets: &[Offset]) -> AccessPath {
        let mut cur = self.var(base).path();
        for o in offsets {
            match o {
                Offset::Field(f) => cur.offsets.push(Off::Field(f.clone())),
                Offset::ConstIndex(c) => cur.offsets.push(Off::Index(c.clone())),
                Offset::VarIndex(v) => {
                    let base = self.materialize(cur);
                    let index = self.index_var(v);
                    let dst = self.temp();
                    self.out.index_ops.push(LoweredIndex {
                        site,
                        op: IndexOp::Load { dst: dst.clone(), base, index },
                    });
                    cur = dst.path();
                }
            }
        }
        cur
    }

    fn assign(&mut self, site: SiteId, lhs: &LValue, rhs: Rhs) {
        let Some((last, prefix)) = lhs.offsets.split_last() else {
            let root = self.var(&lhs.base);
            self.push(root.path(), rhs);
            return;
        };
        let prefix_path = self.read(site, &lhs.base, prefix);
        match last {
            Offset::Field(f) => self.push(prefix_path.child(Off::Field(f.clone())), rhs),
            Offset::ConstIndex(c) => self.push(prefix_path.child(Off::Index(c.clone())), rhs),
            Offset::VarIndex(v) => {
                let base = self.materialize(prefix_path);
                let index = self.index_var(v);
                let src = match rhs {
                    Rhs::Path(p) => self.materialize(p),
                    other => {
                        let t = self.temp();
                        self.push(t.clone().path(), other);
                        t
                    }
                };
                self.out.index_ops.push(LoweredIndex {
                    site,
                    op: IndexOp::Store { base, index, src },
                });
            }
        }
    }

    fn statement(&mut self, program: &Program, s: &Statement) {
        match s {
            Statement::Assign { site, lhs, rhs } => {
                let rhs = match rhs {
                    RValue::Lv(lv) => Rhs::Path(self.read(*site, &lv.base, &lv.offsets)),
                    RValue::Const(c) => Rhs::Const(c.clone()),
                    RValue::New { class, label } => Rhs::Alloc(AllocSite {
                        label: label.clone(),
                        class: class.clone(),
                        ctx: Vec::new(),
                    }),
                };
                self.assign(*site, lhs, rhs);
            }
            Statement::Return { site, value } => {
                let p = self.read(*site, &value.base, &value.offsets);
                self.push(Root::Ret.path(), Rhs::Path(p));
            }
            Statement::Call { site, result, callee, args, kind } => {
                let mut roots = Vec::with_capacity(args.len());
                for a in args {
                    let p = self.read(*site, &a.base, &a.offsets);
                    let t = self.temp();
                    self.push(t.clone().path(), Rhs::Path(p));
                    roots.push(t);
                }
                let res = self.temp();
                let target = match kind {
                    CallKind::Static => CallTarget::Direct(ProcId(callee.clone())),
                    CallKind::Virtual => {
                        let impls = program.dispatch_targets(callee, &ReceiverClasses::Top);
                        if impls.len() == 1 {
                            CallTarget::Direct(impls.into_iter().next().unwrap())
                        } else {
                            CallTarget::Virtual(callee.clone())
                        }
                    }
                };
                self.out.calls.push(LoweredCall {
                    site: *site,
                    target,
                    args: roots,
                    result: res.clone(),
                });
                if let Some(r) = result {
                    self.assign(*site, r, Rhs::Path(res.path()));
                }
            }
        }
    }
}

pub fn lower_proc(program: &Program, proc: &Procedure) -> LoweredProc {
    let mut l = Lowerer { proc: &proc.id, temps: 0, out: LoweredProc::default() };
    for (i, p) in proc.params.iter().enumerate() {
        let local = l.var(p);
        l.push(local.path(), Rhs::Path(Root::Param(i as u32).path()));
    }
    for s in &proc.body {
        l.statement(program, s);
    }
    l.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse;

    fn lowered(src: &str, proc: &str) -> LoweredProc {
        let p = parse(src).unwrap();
        lower_proc(&p, p.proc(&ProcId::new(proc)).unwrap())
    }

    fn strings(l: &LoweredProc) -> Vec<String> {
        l.constraints.iter().map(|c| c.to_string()).collect()
    }

    #[test]
    fn identity() {
        let l = lowered("proc id(this, x) { tv = x; return tv; }", "id");
        assert_eq!(strings(&l), vec!["this ⊇ par0", "x ⊇ par1", "tv ⊇ x", "ret ⊇ tv"]);
        assert!(l.calls.is_empty() && l.index_ops.is_empty());
    }

    #[test]
    fn var_index_is_isolated() {
        let l = lowered("proc getP(this, map, key) { return map[key]; }", "getP");
        assert_eq!(l.index_ops.len(), 1);
        assert!(matches!(
            &l.index_ops[0].op,
            IndexOp::Load { dst, .. } if dst.to_string() == "$t0"
        ));
        assert_eq!(strings(&l).last().unwrap(), "ret ⊇ $t0");
    }

    #[test]
    fn nested_store_through_index() {
        let l = lowered("proc f(a, k, v) { a.f[k].g = v; a.h[k] = \"c\"; }", "f");
        assert_eq!(l.index_ops.len(), 2);
        assert!(strings(&l).iter().any(|s| s == "$t1.g ⊇ v"));
        assert!(matches!(&l.index_ops[1].op, IndexOp::Store { .. }));
    }

    #[test]
    fn calls_use_temporaries() {
        let src = "
            class X { abstract m; }
            class A : X { method m = m@A; }
            class B : X { method m = m@B; }
            class C { method only = only@C; }
            proc m@A(this) {} proc m@B(this) {} proc only@C(this) {}
            proc main(x) { x.f = vcall m(x); vcall only(x); }
        ";
        let l = lowered(src, "main");
        assert_eq!(l.calls.len(), 2);
        assert_eq!(l.calls[0].target, CallTarget::Virtual("m".into()));
        assert_eq!(l.calls[1].target, CallTarget::Direct(ProcId::new("only@C")));
        assert_eq!(l.critical_sites().len(), 1);
        assert!(strings(&l).iter().any(|s| s == "x.f ⊇ $t1"));
    }
}
