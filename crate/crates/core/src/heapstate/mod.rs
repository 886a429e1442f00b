//! Access paths, set constraints and their solver.
//!
//! A state is a set of constraints `ω ⊇ rhs`. Solving computes, for every
//! variable and every heap cell `(object, offset)`, the set of values it may
//! hold. Values are allocation sites, constants, the unknown `⊤`, or symbolic
//! objects `Sym(ω)` standing for whatever `ω` denotes in the caller's context
//! (parameters, globals, and anything reachable from them).

mod emit;
mod solve;

use std::fmt;

use serde::Serialize;

use crate::ir::{Const, Name, ProcId, SiteId, GLOBALS};

pub use emit::{emit_summary, escaping_allocs};
pub use solve::{SeedPolicy, Solution};

/// Call-site chain distinguishing renamed copies of a procedure's locals and
/// allocation sites.
pub type Ctx = Vec<SiteId>;

fn fmt_ctx(f: &mut fmt::Formatter<'_>, ctx: &Ctx) -> fmt::Result {
    if !ctx.is_empty() {
        f.write_str("@")?;
        for (i, s) in ctx.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{s}")?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AllocSite {
    pub label: Name,
    pub class: Name,
    pub ctx: Ctx,
}

impl fmt::Display for AllocSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.label)?;
        fmt_ctx(f, &self.ctx)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LocalVar {
    pub proc: ProcId,
    pub var: Name,
    pub ctx: Ctx,
}

impl fmt::Display for LocalVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ctx.is_empty() {
            f.write_str(&self.var)
        } else {
            write!(f, "{}::{}", self.proc, self.var)?;
            fmt_ctx(f, &self.ctx)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Root {
    Param(u32),
    Ret,
    Global,
    Local(LocalVar),
    Alloc(AllocSite),
}

impl Root {
    pub fn local(proc: &ProcId, var: &str) -> Root {
        Root::Local(LocalVar {
            proc: proc.clone(),
            var: Name::from(var),
            ctx: Vec::new(),
        })
    }

    pub fn path(self) -> AccessPath {
        AccessPath { root: self, offsets: Vec::new() }
    }
}

impl fmt::Display for Root {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Root::Param(i) => write!(f, "par{i}"),
            Root::Ret => f.write_str("ret"),
            Root::Global => f.write_str(GLOBALS),
            Root::Local(l) => l.fmt(f),
            Root::Alloc(a) => a.fmt(f),
        }
    }
}

/// One step of an access path. `Pi` is the unknown index; `Any` marks a path
/// truncated by the depth bound and stands for every longer suffix.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Off {
    Field(Name),
    Index(Const),
    Pi,
    Any,
}

impl fmt::Display for Off {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Off::Field(n) => write!(f, ".{n}"),
            Off::Index(c) => write!(f, "[{c}]"),
            Off::Pi => f.write_str("[π]"),
            Off::Any => f.write_str(".*"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AccessPath {
    pub root: Root,
    pub offsets: Vec<Off>,
}

impl AccessPath {
    pub fn new(root: Root, offsets: Vec<Off>) -> Self {
        AccessPath { root, offsets }
    }

    pub fn child(&self, o: Off) -> AccessPath {
        let mut offsets = self.offsets.clone();
        offsets.push(o);
        AccessPath { root: self.root.clone(), offsets }
    }

    pub fn has_pi(&self) -> bool {
        self.offsets.iter().any(|o| matches!(o, Off::Pi))
    }
}

impl fmt::Display for AccessPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)?;
        for o in &self.offsets {
            o.fmt(f)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Value {
    Alloc(AllocSite),
    Const(Const),
    Sym(AccessPath),
    Top,
}

impl Value {
    /// Free values are those whose identity is decided by a caller.
    pub fn is_free(&self) -> bool {
        matches!(self, Value::Sym(_))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Alloc(a) => a.fmt(f),
            Value::Const(c) => c.fmt(f),
            Value::Sym(p) => p.fmt(f),
            Value::Top => f.write_str("⊤"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Rhs {
    Path(AccessPath),
    Alloc(AllocSite),
    Const(Const),
    Top,
}

impl From<Value> for Rhs {
    fn from(v: Value) -> Rhs {
        match v {
            Value::Alloc(a) => Rhs::Alloc(a),
            Value::Const(c) => Rhs::Const(c),
            Value::Sym(p) => Rhs::Path(p),
            Value::Top => Rhs::Top,
        }
    }
}

impl fmt::Display for Rhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rhs::Path(p) => p.fmt(f),
            Rhs::Alloc(a) => write!(f, "{{{a}}}"),
            Rhs::Const(c) => write!(f, "{{{c}}}"),
            Rhs::Top => f.write_str("⊤"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Constraint {
    pub lhs: AccessPath,
    pub rhs: Rhs,
}

impl Constraint {
    /// Builds `lhs ⊇ rhs`, or nothing for a self-loop. A loop through `π`
    /// or `.*` reads several cells but writes one, so it is kept.
    pub fn new(lhs: AccessPath, rhs: Rhs) -> Option<Constraint> {
        match &rhs {
            Rhs::Path(p) if *p == lhs && !p.offsets.iter().any(|o| matches!(o, Off::Pi | Off::Any)) => None,
            _ => Some(Constraint { lhs, rhs }),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ⊇ {}", self.lhs, self.rhs)
    }
}

/// Maps a callee's roots into a caller at one call site.
#[derive(Clone, Debug)]
pub struct Renaming {
    pub args: Vec<Root>,
    pub result: Root,
    /// Prepended to the context of every renamed local and allocation site.
    pub prefix: Ctx,
}

impl Renaming {
    fn prefixed(&self, ctx: &Ctx) -> Ctx {
        let mut c = self.prefix.clone();
        c.extend_from_slice(ctx);
        c
    }

    pub fn alloc(&self, a: &AllocSite) -> AllocSite {
        AllocSite {
            label: a.label.clone(),
            class: a.class.clone(),
            ctx: self.prefixed(&a.ctx),
        }
    }

    pub fn local(&self, l: &LocalVar) -> LocalVar {
        LocalVar {
            proc: l.proc.clone(),
            var: l.var.clone(),
            ctx: self.prefixed(&l.ctx),
        }
    }

    pub fn root(&self, r: &Root) -> Root {
        match r {
            Root::Param(i) => self.args[*i as usize].clone(),
            Root::Ret => self.result.clone(),
            Root::Global => Root::Global,
            Root::Local(l) => Root::Local(self.local(l)),
            Root::Alloc(a) => Root::Alloc(self.alloc(a)),
        }
    }

    pub fn path(&self, p: &AccessPath) -> AccessPath {
        AccessPath {
            root: self.root(&p.root),
            offsets: p.offsets.clone(),
        }
    }

    pub fn rhs(&self, r: &Rhs) -> Rhs {
        match r {
            Rhs::Path(p) => Rhs::Path(self.path(p)),
            Rhs::Alloc(a) => Rhs::Alloc(self.alloc(a)),
            Rhs::Const(c) => Rhs::Const(c.clone()),
            Rhs::Top => Rhs::Top,
        }
    }

    pub fn constraint(&self, c: &Constraint) -> Option<Constraint> {
        Constraint::new(self.path(&c.lhs), self.rhs(&c.rhs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_loops_are_dropped() {
        let p = Root::Ret.path();
        assert!(Constraint::new(p.clone(), Rhs::Path(p)).is_none());
        let pi = Root::Param(2).path().child(Off::Pi);
        assert!(Constraint::new(pi.clone(), Rhs::Path(pi)).is_some());
    }

    #[test]
    fn display_forms() {
        let l = AllocSite {
            label: "8".into(),
            class: "Obj".into(),
            ctx: vec![SiteId(3), SiteId(7)],
        };
        let p = AccessPath::new(
            Root::Alloc(l),
            vec![Off::Index(Const::Str("old".into())), Off::Pi],
        );
        assert_eq!(p.to_string(), "l8@s3.s7[\"old\"][π]");
        let c = Constraint::new(Root::Ret.path(), Rhs::Path(Root::Param(1).path())).unwrap();
        assert_eq!(c.to_string(), "ret ⊇ par1");
    }
}
