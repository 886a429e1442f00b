//! Instantiation of callee summaries and resolution of critical statements,
//! both while summarizing a procedure and when applying a root.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use crate::heapstate::{
    emit_summary, escaping_allocs, AllocSite, Constraint, LocalVar, Renaming, Rhs, Root,
    SeedPolicy, Solution, Value,
};
use crate::ir::{Name, ProcId, Program, ReceiverClasses, SiteId};
use crate::summarize::{
    index_offsets, CallTarget, CritKind, CriticalStatement, CtxEdge, Diagnostic, HybridSummary,
    IndexOp, LoweredProc, SummaryStats,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Every critical statement is resolved in its own procedure.
    ComCi,
    /// Critical statements may travel at most `k` call sites up.
    HiK(usize),
    /// Critical statements travel until their context decides them.
    Hia,
}

impl Mode {
    pub fn label(&self) -> String {
        match self {
            Mode::ComCi => "comci".into(),
            Mode::HiK(k) => format!("hi{k}"),
            Mode::Hia => "hia".into(),
        }
    }

    fn step_limit(&self) -> Option<usize> {
        match self {
            Mode::ComCi => Some(0),
            Mode::HiK(k) => Some(*k),
            Mode::Hia => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// When more than `threshold` pending virtual calls share a method, they are
/// resolved once they have travelled `fallback_k` call sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Opt1 {
    pub threshold: usize,
    pub fallback_k: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Config {
    pub mode: Mode,
    /// Longest symbolic access path.
    pub depth_bound: usize,
    /// How many times a procedure may occur on the call chain.
    pub unroll: usize,
    /// Distinct implementations of one method tolerated on the call chain.
    pub dispatch_bound: usize,
    pub opt1: Option<Opt1>,
    /// Resolve a virtual call whose receiver reaches through an unknown index.
    pub opt2: bool,
    pub pending_cap: Option<usize>,
    pub fuel: u64,
}

impl Config {
    pub fn new(mode: Mode) -> Self {
        Config {
            mode,
            depth_bound: 6,
            unroll: 2,
            dispatch_bound: 5,
            opt1: Some(Opt1 { threshold: 16, fallback_k: 4 }),
            opt2: true,
            pending_cap: Some(64),
            fuel: 1_000_000,
        }
    }

    /// Without the scalability shortcuts, so that results only depend on the
    /// mode and the bounds.
    pub fn exact(mode: Mode) -> Self {
        Config { opt1: None, opt2: false, pending_cap: None, ..Config::new(mode) }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("analysis ran out of fuel after {0} steps")]
    OutOfFuel(u64),
    #[error("unknown procedure `{0}`")]
    UnknownProc(ProcId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutReason {
    Recursion,
    Permutation,
}

pub enum Callee {
    Summary(Arc<HybridSummary>),
    Cut(CutReason),
}

/// Supplies callee summaries to [`Work`].
pub trait Summaries {
    fn lowered(&self, proc: &ProcId) -> Result<Arc<LoweredProc>, AnalysisError>;

    /// Summary of `target` when called with `chain` on the call stack
    /// (outermost first), or why the call is cut.
    fn enter(
        &mut self,
        chain: &[ProcId],
        target: &ProcId,
        method: Option<&Name>,
    ) -> Result<Callee, AnalysisError>;

    fn tick(&mut self, amount: u64) -> Result<(), AnalysisError>;
}

/// Possible targets of a virtual call whose receiver points to `pt`.
pub fn dispatch(program: &Program, method: &Name, pt: &BTreeSet<Value>) -> BTreeSet<ProcId> {
    let classes = if pt.iter().any(|v| matches!(v, Value::Sym(_) | Value::Top)) {
        ReceiverClasses::Top
    } else {
        ReceiverClasses::Set(
            pt.iter()
                .filter_map(|v| match v {
                    Value::Alloc(a) => Some(a.class.clone()),
                    _ => None,
                })
                .collect(),
        )
    };
    program.dispatch_targets(method, &classes)
}

/// Constraints for an index access whose index variable points to `pt`.
pub fn resolve_index(op: &IndexOp, pt: &BTreeSet<Value>) -> Vec<Constraint> {
    index_offsets(pt)
        .into_iter()
        .filter_map(|o| match op {
            IndexOp::Load { dst, base, .. } => {
                Constraint::new(dst.clone().path(), Rhs::Path(base.clone().path().child(o)))
            }
            IndexOp::Store { base, src, .. } => {
                Constraint::new(base.clone().path().child(o), Rhs::Path(src.clone().path()))
            }
        })
        .collect()
}

fn has_pi_sym(pt: &BTreeSet<Value>) -> bool {
    pt.iter().any(|v| matches!(v, Value::Sym(p) if p.has_pi()))
}

type InstanceKey = (Vec<(SiteId, ProcId)>, SiteId, ProcId);

/// The state of one procedure being summarized or applied as a root.
pub struct Work<'a> {
    program: &'a Program,
    config: &'a Config,
    proc: ProcId,
    /// Call chain above and including `proc`.
    stack: Vec<ProcId>,
    root: bool,
    constraints: BTreeSet<Constraint>,
    pending: BTreeSet<CriticalStatement>,
    seen: BTreeSet<CriticalStatement>,
    edges: BTreeSet<CtxEdge>,
    resolved_steps: BTreeMap<SiteId, usize>,
    diagnostics: BTreeSet<Diagnostic>,
    widened: bool,
    forced_by_cap: usize,
    instantiated: HashSet<InstanceKey>,
}

/// Outcome of applying a root procedure.
pub struct RootState {
    pub summary: HybridSummary,
    pub solution: Solution,
}

impl<'a> Work<'a> {
    /// Starts from the body of `proc`, with direct calls already instantiated.
    pub fn new(
        program: &'a Program,
        config: &'a Config,
        provider: &mut dyn Summaries,
        stack: Vec<ProcId>,
        root: bool,
    ) -> Result<Self, AnalysisError> {
        let proc = stack.last().expect("non-empty call stack").clone();
        let lowered = provider.lowered(&proc)?;
        let mut w = Work {
            program,
            config,
            proc: proc.clone(),
            stack,
            root,
            constraints: lowered.constraints.iter().cloned().collect(),
            pending: BTreeSet::new(),
            seen: BTreeSet::new(),
            edges: BTreeSet::new(),
            resolved_steps: BTreeMap::new(),
            diagnostics: BTreeSet::new(),
            widened: false,
            forced_by_cap: 0,
            instantiated: HashSet::new(),
        };
        for ix in &lowered.index_ops {
            w.add_pending(CriticalStatement {
                kind: CritKind::Index(ix.op.clone()),
                site: ix.site,
                owner: proc.clone(),
                prefix: Vec::new(),
                steps: 0,
            });
        }
        for call in &lowered.calls {
            match &call.target {
                CallTarget::Direct(t) => {
                    w.instantiate(provider, &[], call.site, t, &call.args, &call.result, None)?
                }
                CallTarget::Virtual(m) => w.add_pending(CriticalStatement {
                    kind: CritKind::VCall {
                        method: m.clone(),
                        args: call.args.clone(),
                        result: call.result.clone(),
                    },
                    site: call.site,
                    owner: proc.clone(),
                    prefix: Vec::new(),
                steps: 0,
                }),
            }
        }
        Ok(w)
    }

    fn add_pending(&mut self, s: CriticalStatement) {
        if self.seen.insert(s.clone()) {
            self.pending.insert(s);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn instantiate(
        &mut self,
        provider: &mut dyn Summaries,
        frames: &[(SiteId, ProcId)],
        site: SiteId,
        target: &ProcId,
        args: &[Root],
        result: &Root,
        method: Option<&Name>,
    ) -> Result<(), AnalysisError> {
        if !self.instantiated.insert((frames.to_vec(), site, target.clone())) {
            return Ok(());
        }
        let mut chain = self.stack.clone();
        chain.extend(frames.iter().map(|(_, p)| p.clone()));
        let ctx: Vec<SiteId> = frames.iter().map(|(s, _)| *s).collect();
        self.edges.insert(CtxEdge { ctx: ctx.clone(), site, target: target.clone() });
        let s = match provider.enter(&chain, target, method)? {
            Callee::Summary(s) => s,
            Callee::Cut(reason) => {
                self.constraints.extend(Constraint::new(result.clone().path(), Rhs::Top));
                self.diagnostics.insert(match reason {
                    CutReason::Recursion => {
                        Diagnostic::RecursionCut { site, callee: target.clone() }
                    }
                    CutReason::Permutation => Diagnostic::PermutationCut {
                        site,
                        callee: target.clone(),
                        method: method.cloned().unwrap_or_else(|| target.0.clone()),
                    },
                });
                return Ok(());
            }
        };
        provider.tick(1 + s.constraints.len() as u64 + s.pending.len() as u64)?;
        let mut prefix = ctx;
        prefix.push(site);
        let ren = Renaming { args: args.to_vec(), result: result.clone(), prefix: prefix.clone() };
        self.constraints.extend(s.constraints.iter().filter_map(|c| ren.constraint(c)));
        let mut outer = frames.to_vec();
        outer.push((site, target.clone()));
        for p in &s.pending {
            self.add_pending(p.propagate(&ren, &outer));
        }
        for e in &s.edges {
            let mut ctx = prefix.clone();
            ctx.extend(e.ctx.iter().copied());
            self.edges.insert(CtxEdge { ctx, site: e.site, target: e.target.clone() });
        }
        for (site, k) in &s.resolved_steps {
            let e = self.resolved_steps.entry(*site).or_insert(0);
            *e = (*e).max(*k);
        }
        self.diagnostics.extend(s.diagnostics.iter().cloned());
        self.widened |= s.stats.widened;
        Ok(())
    }

    fn resolve(
        &mut self,
        provider: &mut dyn Summaries,
        s: &CriticalStatement,
        sol: &Solution,
    ) -> Result<(), AnalysisError> {
        let pt = sol.var(s.key_operand());
        match &s.kind {
            CritKind::VCall { method, args, result } => {
                let targets = dispatch(self.program, method, &pt);
                if targets.is_empty() && !self.root {
                    self.diagnostics
                        .insert(Diagnostic::UnreachableCall { site: s.site, method: method.clone() });
                }
                for t in &targets {
                    self.instantiate(provider, &s.prefix, s.site, t, args, result, Some(method))?;
                }
            }
            CritKind::Index(op) => self.constraints.extend(resolve_index(op, &pt)),
        }
        Ok(())
    }

    fn pending_vars(&self) -> (BTreeSet<LocalVar>, BTreeSet<LocalVar>) {
        let local = |r: &Root| match r {
            Root::Local(l) => Some(l.clone()),
            _ => None,
        };
        let all = self.pending.iter().flat_map(|s| s.roots()).filter_map(local).collect();
        let written = self.pending.iter().filter_map(|s| s.written()).filter_map(local).collect();
        (all, written)
    }

    fn solve_summary(&self) -> (Solution, BTreeSet<AllocSite>) {
        let (all, written) = self.pending_vars();
        let mut escaping = BTreeSet::new();
        loop {
            let policy = SeedPolicy {
                summary: true,
                escaping: escaping.clone(),
                pending_written: written.clone(),
                depth: self.config.depth_bound,
            };
            let sol = Solution::solve(&self.constraints, policy);
            let found = escaping_allocs(&sol, &all);
            if found.is_subset(&escaping) {
                return (sol, escaping);
            }
            escaping.extend(found);
        }
    }

    /// Pending statements to resolve now: those whose context is adequate,
    /// plus those forced by the step limit, the shortcuts, or the cap.
    fn select(&mut self, sol: &Solution) -> Vec<CriticalStatement> {
        let mut per_method: HashMap<&Name, usize> = HashMap::new();
        for s in &self.pending {
            if let CritKind::VCall { method, .. } = &s.kind {
                *per_method.entry(method).or_default() += 1;
            }
        }
        let limit = self.config.mode.step_limit();
        let mut chosen = Vec::new();
        let mut rest = Vec::new();
        for s in &self.pending {
            let pt = sol.var(s.key_operand());
            let mut limit = limit;
            let mut opt2 = false;
            if let CritKind::VCall { method, .. } = &s.kind {
                if let Some(o) = self.config.opt1 {
                    if per_method[method] > o.threshold {
                        limit = Some(limit.map_or(o.fallback_k, |k| k.min(o.fallback_k)));
                    }
                }
                opt2 = self.config.opt2 && has_pi_sym(&pt);
            }
            let adequate = !pt.iter().any(Value::is_free);
            if adequate || opt2 || limit.is_some_and(|k| s.steps() >= k) {
                chosen.push(s.clone());
            } else {
                rest.push(s.clone());
            }
        }
        if let Some(cap) = self.config.pending_cap {
            if rest.len() > cap {
                rest.sort_by_key(|s| std::cmp::Reverse(s.steps()));
                let excess = rest.len() - cap;
                self.forced_by_cap += excess;
                self.diagnostics.insert(Diagnostic::PendingCap { proc: self.proc.clone() });
                chosen.extend(rest.into_iter().take(excess));
            }
        }
        chosen
    }

    fn record_resolved(&mut self, s: &CriticalStatement) {
        let e = self.resolved_steps.entry(s.site).or_insert(0);
        *e = (*e).max(s.steps());
    }

    fn stats(&self) -> SummaryStats {
        SummaryStats {
            entered: self.seen.len(),
            resolved: self.seen.len() - self.pending.len(),
            remaining: self.pending.len(),
            widened: self.widened,
            forced_by_cap: self.forced_by_cap,
        }
    }

    fn into_summary(self, constraints: BTreeSet<Constraint>) -> HybridSummary {
        let mut diagnostics = self.diagnostics.clone();
        if self.widened {
            diagnostics.insert(Diagnostic::Widened { proc: self.proc.clone() });
        }
        HybridSummary {
            owner: self.proc.clone(),
            stats: self.stats(),
            constraints,
            pending: self.pending,
            edges: self.edges,
            resolved_steps: self.resolved_steps,
            diagnostics,
        }
    }

    /// Resolves critical statements as their contexts allow, then projects
    /// the state onto what callers observe.
    pub fn summarize(mut self, provider: &mut dyn Summaries) -> Result<HybridSummary, AnalysisError> {
        loop {
            provider.tick(1)?;
            let (sol, escaping) = self.solve_summary();
            let ready = self.select(&sol);
            if ready.is_empty() {
                // A widened state would lose precision when projected, so
                // such summaries keep their constraints unsolved instead.
                let constraints = if sol.widened() {
                    self.widened = true;
                    self.constraints.clone()
                } else {
                    let (all, _) = self.pending_vars();
                    emit_summary(&sol, &all, &escaping)
                };
                return Ok(self.into_summary(constraints));
            }
            for s in &ready {
                self.pending.remove(s);
                self.record_resolved(s);
                self.resolve(provider, s, &sol)?;
            }
        }
    }

    /// Resolves every critical statement against the root's own state until
    /// nothing changes.
    pub fn apply_at_root(mut self, provider: &mut dyn Summaries) -> Result<RootState, AnalysisError> {
        let policy = SeedPolicy::root(self.config.depth_bound);
        loop {
            provider.tick(1)?;
            let sol = Solution::solve(&self.constraints, policy.clone());
            let before = (self.constraints.len(), self.seen.len(), self.instantiated.len());
            for s in self.pending.clone() {
                self.resolve(provider, &s, &sol)?;
            }
            let after = (self.constraints.len(), self.seen.len(), self.instantiated.len());
            if before != after {
                continue;
            }
            self.widened |= sol.widened();
            for s in self.pending.clone() {
                self.record_resolved(&s);
                if let CritKind::VCall { method, args, .. } = &s.kind {
                    if dispatch(self.program, method, &sol.var(&args[0])).is_empty() {
                        self.diagnostics.insert(Diagnostic::UnreachableCall {
                            site: s.site,
                            method: method.clone(),
                        });
                    }
                }
            }
            let constraints = self.constraints.clone();
            let resolved = std::mem::take(&mut self.pending);
            let mut summary = self.into_summary(constraints);
            summary.stats.resolved = resolved.len();
            summary.stats.entered = resolved.len();
            summary.stats.remaining = 0;
            return Ok(RootState { summary, solution: sol });
        }
    }
}
