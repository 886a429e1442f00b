//! Hybrid summaries: constraint deltas plus the critical statements that
//! were not yet summarized, and the per-statement rules that build them.

pub mod lower;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::heapstate::{AccessPath, Constraint, Ctx, LocalVar, Off, Renaming, Rhs, Root, Solution, Value};
use crate::ir::{
    CallKind, LValue, Name, Offset, ProcId, Program, RValue, ReceiverClasses, SiteId,
    Statement, GLOBALS,
};

pub use lower::{lower_proc, CallTarget, IndexOp, LoweredCall, LoweredIndex, LoweredProc};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CritKind {
    VCall { method: Name, args: Vec<Root>, result: Root },
    Index(IndexOp),
}

/// A statement kept unsummarized until its context is adequate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CriticalStatement {
    pub kind: CritKind,
    pub site: SiteId,
    /// Procedure whose body contains the statement.
    pub owner: ProcId,
    /// Call sites between the current procedure and `owner`, outermost
    /// first, with the callee entered at each.
    pub prefix: Vec<(SiteId, ProcId)>,
    /// Summaries the statement has been published through.
    pub steps: usize,
}

impl CriticalStatement {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn prefix_sites(&self) -> Ctx {
        self.prefix.iter().map(|(s, _)| *s).collect()
    }

    pub fn roots(&self) -> Vec<&Root> {
        match &self.kind {
            CritKind::VCall { args, result, .. } => args.iter().chain([result]).collect(),
            CritKind::Index(IndexOp::Load { dst, base, index }) => vec![dst, base, index],
            CritKind::Index(IndexOp::Store { base, index, src }) => vec![base, index, src],
        }
    }

    /// The variable the statement assigns, if any.
    pub fn written(&self) -> Option<&Root> {
        match &self.kind {
            CritKind::VCall { result, .. } => Some(result),
            CritKind::Index(IndexOp::Load { dst, .. }) => Some(dst),
            CritKind::Index(IndexOp::Store { .. }) => None,
        }
    }

    /// The operand whose points-to set decides the resolution.
    pub fn key_operand(&self) -> &Root {
        match &self.kind {
            CritKind::VCall { args, .. } => &args[0],
            CritKind::Index(op) => op.index(),
        }
    }

    /// The statement as seen by a caller: `outer` lists the call sites from
    /// the caller down to the procedure this statement was summarized in.
    pub fn propagate(&self, ren: &Renaming, outer: &[(SiteId, ProcId)]) -> CriticalStatement {
        let kind = match &self.kind {
            CritKind::VCall { method, args, result } => CritKind::VCall {
                method: method.clone(),
                args: args.iter().map(|a| ren.root(a)).collect(),
                result: ren.root(result),
            },
            CritKind::Index(IndexOp::Load { dst, base, index }) => CritKind::Index(IndexOp::Load {
                dst: ren.root(dst),
                base: ren.root(base),
                index: ren.root(index),
            }),
            CritKind::Index(IndexOp::Store { base, index, src }) => {
                CritKind::Index(IndexOp::Store {
                    base: ren.root(base),
                    index: ren.root(index),
                    src: ren.root(src),
                })
            }
        };
        let mut prefix = outer.to_vec();
        prefix.extend(self.prefix.iter().cloned());
        CriticalStatement { kind, site: self.site, owner: self.owner.clone(), prefix, steps: self.steps + 1 }
    }
}

impl fmt::Display for CriticalStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            CritKind::VCall { method, args, result } => {
                let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                write!(f, "{result} = vcall {method}({})", args.join(", "))?;
            }
            CritKind::Index(IndexOp::Load { dst, base, index }) => {
                write!(f, "{dst} = {base}[{index}]")?
            }
            CritKind::Index(IndexOp::Store { base, index, src }) => {
                write!(f, "{base}[{index}] = {src}")?
            }
        }
        write!(f, "  ({}@{}, steps {})", self.owner, self.site, self.steps())
    }
}

/// Something the analysis approximated or found suspicious.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// A symbolic path was cut at the depth bound.
    Widened { proc: ProcId },
    /// A recursive call was replaced by an unknown result.
    RecursionCut { site: SiteId, callee: ProcId },
    /// A chain of dispatches through too many implementations was cut.
    PermutationCut { site: SiteId, callee: ProcId, method: Name },
    /// A virtual call has no possible target.
    UnreachableCall { site: SiteId, method: Name },
    /// Pending statements were resolved early to respect the pending cap.
    PendingCap { proc: ProcId },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::Widened { proc } => write!(f, "widened symbolic paths in {proc}"),
            Diagnostic::RecursionCut { site, callee } => write!(f, "recursion cut at {site} calling {callee}"),
            Diagnostic::PermutationCut { site, callee, method } => {
                write!(f, "dispatch chain of {method} cut at {site} calling {callee}")
            }
            Diagnostic::UnreachableCall { site, method } => write!(f, "no target for {method} at {site}"),
            Diagnostic::PendingCap { proc } => write!(f, "pending cap forced resolution in {proc}"),
        }
    }
}

/// A call-graph edge, with the call sites leading from the summarized
/// procedure to the procedure containing `site`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CtxEdge {
    pub ctx: Ctx,
    pub site: SiteId,
    pub target: ProcId,
}

/// Coverage counters: every critical statement that entered this summary was
/// either resolved here or is still pending.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SummaryStats {
    pub entered: usize,
    pub resolved: usize,
    pub remaining: usize,
    pub widened: bool,
    pub forced_by_cap: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HybridSummary {
    pub owner: ProcId,
    pub constraints: BTreeSet<Constraint>,
    pub pending: BTreeSet<CriticalStatement>,
    pub edges: BTreeSet<CtxEdge>,
    /// Largest number of steps at which each critical site was resolved.
    pub resolved_steps: BTreeMap<SiteId, usize>,
    pub stats: SummaryStats,
    pub diagnostics: BTreeSet<Diagnostic>,
}

impl HybridSummary {
    pub fn empty(owner: ProcId) -> Self {
        HybridSummary {
            owner,
            constraints: BTreeSet::new(),
            pending: BTreeSet::new(),
            edges: BTreeSet::new(),
            resolved_steps: BTreeMap::new(),
            stats: SummaryStats::default(),
            diagnostics: BTreeSet::new(),
        }
    }

    /// Componentwise union.
    pub fn join(&self, other: &HybridSummary) -> HybridSummary {
        let mut out = self.clone();
        out.constraints.extend(other.constraints.iter().cloned());
        out.pending.extend(other.pending.iter().cloned());
        out.edges.extend(other.edges.iter().cloned());
        out.diagnostics.extend(other.diagnostics.iter().cloned());
        for (s, k) in &other.resolved_steps {
            let e = out.resolved_steps.entry(*s).or_insert(0);
            *e = (*e).max(*k);
        }
        out
    }

    /// Text dump: one constraint per line, then the pending statements.
    pub fn dump(&self) -> String {
        let mut out = format!("summary {}\n", self.owner);
        for c in &self.constraints {
            out.push_str(&format!("  {c}\n"));
        }
        for p in &self.pending {
            out.push_str(&format!("  pending {p}\n"));
        }
        out
    }
}

/// Whether a statement's summary depends on its calling context: it indexes
/// with a variable, or calls a method with more than one implementation.
pub fn is_critical(stmt: &Statement, program: &Program) -> bool {
    let var_index = |lv: &LValue| lv.has_var_index();
    match stmt {
        Statement::Assign { lhs, rhs, .. } => {
            var_index(lhs) || matches!(rhs, RValue::Lv(lv) if var_index(lv))
        }
        Statement::Return { value, .. } => var_index(value),
        Statement::Call { result, callee, args, kind, .. } => {
            result.as_ref().is_some_and(var_index)
                || args.iter().any(var_index)
                || (*kind == CallKind::Virtual
                    && program.dispatch_targets(callee, &ReceiverClasses::Top).len() > 1)
        }
    }
}

/// Index offsets for a variable index with points-to set `pt`: one constant
/// index per constant when the set holds only constants, otherwise `π`.
pub fn index_offsets(pt: &BTreeSet<Value>) -> Vec<Off> {
    let mut consts = Vec::new();
    for v in pt {
        match v {
            Value::Const(c) => consts.push(Off::Index(c.clone())),
            _ => return vec![Off::Pi],
        }
    }
    consts
}

fn var_root(proc: &ProcId, name: &Name) -> Root {
    if &**name == GLOBALS {
        Root::Global
    } else {
        Root::Local(LocalVar { proc: proc.clone(), var: name.clone(), ctx: Vec::new() })
    }
}

/// Access paths denoted by `lv` in procedure `proc` under the solved state.
pub fn eval_lv(proc: &ProcId, lv: &LValue, state: &Solution) -> BTreeSet<AccessPath> {
    let mut paths = BTreeSet::from([var_root(proc, &lv.base).path()]);
    for o in &lv.offsets {
        let offs = match o {
            Offset::Field(f) => vec![Off::Field(f.clone())],
            Offset::ConstIndex(c) => vec![Off::Index(c.clone())],
            Offset::VarIndex(v) => index_offsets(&state.var(&var_root(proc, v))),
        };
        paths = paths
            .iter()
            .flat_map(|p| offs.iter().map(move |o| p.child(o.clone())))
            .collect();
    }
    paths
}

/// Constraints generated by an assignment (or `return`) under a context.
/// Calls generate nothing here; their effect comes from callee summaries.
pub fn cons_stmt(proc: &ProcId, state: &Solution, stmt: &Statement) -> BTreeSet<Constraint> {
    let (lhs, rhs): (BTreeSet<AccessPath>, Vec<Rhs>) = match stmt {
        Statement::Assign { lhs, rhs, .. } => {
            let rhs = match rhs {
                RValue::Lv(lv) => eval_lv(proc, lv, state).into_iter().map(Rhs::Path).collect(),
                RValue::Const(c) => vec![Rhs::Const(c.clone())],
                RValue::New { class, label } => vec![Rhs::Alloc(crate::heapstate::AllocSite {
                    label: label.clone(),
                    class: class.clone(),
                    ctx: Vec::new(),
                })],
            };
            (eval_lv(proc, lhs, state), rhs)
        }
        Statement::Return { value, .. } => (
            BTreeSet::from([Root::Ret.path()]),
            eval_lv(proc, value, state).into_iter().map(Rhs::Path).collect(),
        ),
        Statement::Call { .. } => return BTreeSet::new(),
    };
    lhs.iter()
        .flat_map(|l| rhs.iter().filter_map(|r| Constraint::new(l.clone(), r.clone())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heapstate::SeedPolicy;
    use crate::ir::{parse, Const};

    #[test]
    fn criticality() {
        let p = parse(
            "class X { abstract poly; }
             class Y : X { method poly = poly@Y; }
             class Z : X { method poly = poly@Z; }
             class W { method m = m@W; }
             proc poly@Y(this, o) {} proc poly@Z(this, o) {} proc m@W(this) {}
             proc foo(tx, obj, x) { r = vcall poly(tx, obj); tv = x; s = vcall m(x); v = tx[obj]; }",
        )
        .unwrap();
        let body = &p.proc(&ProcId::new("foo")).unwrap().body;
        let marks: Vec<bool> = body.iter().map(|s| is_critical(s, &p)).collect();
        assert_eq!(marks, vec![true, false, false, true]);
    }

    fn state(cs: &[(&str, Rhs)]) -> Solution {
        let proc = ProcId::new("p");
        let cs: Vec<Constraint> = cs
            .iter()
            .map(|(v, r)| Constraint::new(Root::local(&proc, v).path(), r.clone()).unwrap())
            .collect();
        Solution::solve(&cs, SeedPolicy::summary(6))
    }

    #[test]
    fn eval_rules() {
        let proc = ProcId::new("p");
        let p = parse("proc p(map, key) { a = map.f; b = map[key]; }").unwrap();
        let body = &p.procs[0].body;
        let Statement::Assign { rhs: RValue::Lv(field), .. } = &body[0] else { panic!() };
        let Statement::Assign { rhs: RValue::Lv(indexed), .. } = &body[1] else { panic!() };

        let s = state(&[]);
        let show = |ps: BTreeSet<AccessPath>| ps.iter().map(|p| p.to_string()).collect::<Vec<_>>();
        assert_eq!(show(eval_lv(&proc, field, &s)), vec!["map.f"]);

        let s = state(&[("key", Rhs::Const(Const::Str("cur".into())))]);
        assert_eq!(show(eval_lv(&proc, indexed, &s)), vec!["map[\"cur\"]"]);

        let s = state(&[("key", Rhs::Path(Root::Param(2).path()))]);
        assert_eq!(show(eval_lv(&proc, indexed, &s)), vec!["map[π]"]);
    }

    #[test]
    fn cons_examples() {
        let p = parse("class Obj {} proc q(x, v) { tv = x; first = new Obj@37; v.f = x; }").unwrap();
        let proc = ProcId::new("q");
        let s = state(&[]);
        let got: Vec<String> = p.procs[0]
            .body
            .iter()
            .flat_map(|st| cons_stmt(&proc, &s, st))
            .map(|c| c.to_string())
            .collect();
        assert_eq!(got, vec!["tv ⊇ x", "first ⊇ {l37}", "v.f ⊇ x"]);
    }
}
