//! Reference top-down analyses. Procedure bodies are copied per calling
//! context: the whole call string for unbounded inlining, its last `k` call
//! sites for k-callsite sensitivity, nothing at all for the
//! context-insensitive analysis.

pub mod facts;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::heapstate::{AllocSite, Constraint, Ctx, LocalVar, Renaming, Rhs, Root, SeedPolicy, Solution, Value};
use crate::inline::{dispatch, resolve_index, AnalysisError};
use crate::ir::{Name, ProcId, Program, SiteId};
use crate::summarize::{lower_proc, CallTarget, IndexOp, LoweredProc};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    /// Call sites kept per context; `None` keeps whole call strings.
    pub k: Option<usize>,
    pub depth_bound: usize,
    pub unroll: usize,
    pub fuel: u64,
}

impl OracleConfig {
    pub fn inline(k: Option<usize>) -> Self {
        OracleConfig { k, depth_bound: 6, unroll: 2, fuel: 1_000_000 }
    }

    /// Context-insensitive: one copy of every procedure.
    pub fn insensitive() -> Self {
        OracleConfig::inline(Some(0))
    }

    pub fn label(&self) -> String {
        match self.k {
            Some(0) => "topci".into(),
            Some(k) => format!("inline{k}"),
            None => "inlineinf".into(),
        }
    }
}

struct VCall {
    chain: Vec<ProcId>,
    string: Ctx,
    site: SiteId,
    method: Name,
    args: Vec<Root>,
    result: Root,
}

/// Result of a top-down analysis of one root.
pub struct OracleRoot {
    pub solution: Solution,
    /// Number of call strings mapped onto each procedure copy.
    pub copies: HashMap<(ProcId, Ctx), usize>,
    /// Call edges as (caller call string, site, callee).
    pub edges: BTreeSet<(Ctx, SiteId, ProcId)>,
    alloc_owner: Arc<HashMap<Name, ProcId>>,
}

impl OracleRoot {
    /// How many call strings share the copy that allocates `a`.
    pub fn multiplicity(&self, a: &AllocSite) -> usize {
        self.alloc_owner
            .get(&a.label)
            .and_then(|p| self.copies.get(&(p.clone(), a.ctx.clone())))
            .copied()
            .unwrap_or(0)
    }
}

struct Explorer<'a> {
    program: &'a Program,
    config: &'a OracleConfig,
    lowered: &'a HashMap<ProcId, LoweredProc>,
    constraints: BTreeSet<Constraint>,
    copies: HashMap<(ProcId, Ctx), usize>,
    vcalls: Vec<VCall>,
    index_ops: Vec<IndexOp>,
    edges: BTreeSet<(Ctx, SiteId, ProcId)>,
    resolved: BTreeSet<(Ctx, SiteId, ProcId)>,
    fuel: u64,
}

impl Explorer<'_> {
    fn copy_ctx(&self, string: &[SiteId]) -> Ctx {
        match self.config.k {
            Some(k) => string[string.len().saturating_sub(k)..].to_vec(),
            None => string.to_vec(),
        }
    }

    fn burn(&mut self, n: u64) -> Result<(), AnalysisError> {
        self.fuel += n;
        if self.fuel > self.config.fuel {
            return Err(AnalysisError::OutOfFuel(self.config.fuel));
        }
        Ok(())
    }

    fn renaming(&self, proc: &ProcId, string: &[SiteId]) -> Renaming {
        let ctx = self.copy_ctx(string);
        let arity = self.program.proc(proc).map_or(0, |p| p.params.len());
        if string.is_empty() {
            return Renaming {
                args: (0..arity as u32).map(Root::Param).collect(),
                result: Root::Ret,
                prefix: Vec::new(),
            };
        }
        let local = |var: String| {
            Root::Local(LocalVar { proc: proc.clone(), var: var.into(), ctx: ctx.clone() })
        };
        Renaming {
            args: (0..arity).map(|i| local(format!("$par{i}"))).collect(),
            result: local("$ret".into()),
            prefix: ctx.clone(),
        }
    }

    /// Adds the copy of `proc` reached by `string`, with `chain` the
    /// procedures on that string including `proc`.
    fn enter(&mut self, proc: &ProcId, string: Ctx, chain: Vec<ProcId>) -> Result<(), AnalysisError> {
        let lowered = self.lowered;
        let body = lowered.get(proc).ok_or_else(|| AnalysisError::UnknownProc(proc.clone()))?;
        self.burn(1 + body.constraints.len() as u64)?;
        *self.copies.entry((proc.clone(), self.copy_ctx(&string))).or_default() += 1;
        let ren = self.renaming(proc, &string);
        self.constraints.extend(body.constraints.iter().filter_map(|c| ren.constraint(c)));
        for ix in &body.index_ops {
            let op = match &ix.op {
                IndexOp::Load { dst, base, index } => IndexOp::Load {
                    dst: ren.root(dst),
                    base: ren.root(base),
                    index: ren.root(index),
                },
                IndexOp::Store { base, index, src } => IndexOp::Store {
                    base: ren.root(base),
                    index: ren.root(index),
                    src: ren.root(src),
                },
            };
            self.index_ops.push(op);
        }
        for call in &body.calls {
            let args: Vec<Root> = call.args.iter().map(|a| ren.root(a)).collect();
            let result = ren.root(&call.result);
            match &call.target {
                CallTarget::Direct(t) => {
                    self.call(&chain, &string, call.site, t, &args, &result)?;
                }
                CallTarget::Virtual(m) => self.vcalls.push(VCall {
                    chain: chain.clone(),
                    string: string.clone(),
                    site: call.site,
                    method: m.clone(),
                    args,
                    result,
                }),
            }
        }
        Ok(())
    }

    fn call(
        &mut self,
        chain: &[ProcId],
        string: &Ctx,
        site: SiteId,
        target: &ProcId,
        args: &[Root],
        result: &Root,
    ) -> Result<(), AnalysisError> {
        self.edges.insert((string.clone(), site, target.clone()));
        if chain.iter().filter(|p| *p == target).count() >= self.config.unroll {
            self.constraints.extend(Constraint::new(result.clone().path(), Rhs::Top));
            return Ok(());
        }
        let mut callee_string = string.clone();
        callee_string.push(site);
        let ren = self.renaming(target, &callee_string);
        for (formal, actual) in ren.args.iter().zip(args) {
            self.constraints.extend(Constraint::new(formal.clone().path(), Rhs::Path(actual.clone().path())));
        }
        self.constraints.extend(Constraint::new(result.clone().path(), Rhs::Path(ren.result.clone().path())));
        let mut chain = chain.to_vec();
        chain.push(target.clone());
        self.enter(target, callee_string, chain)
    }

    fn run(&mut self, root: &ProcId) -> Result<Solution, AnalysisError> {
        self.enter(root, Vec::new(), vec![root.clone()])?;
        let policy = SeedPolicy::root(self.config.depth_bound);
        loop {
            self.burn(1)?;
            let sol = Solution::solve(&self.constraints, policy.clone());
            let before = (self.constraints.len(), self.vcalls.len());
            let mut i = 0;
            while i < self.vcalls.len() {
                let targets = dispatch(self.program, &self.vcalls[i].method, &sol.var(&self.vcalls[i].args[0]));
                for t in targets {
                    let c = &self.vcalls[i];
                    if !self.resolved.insert((c.string.clone(), c.site, t.clone())) {
                        continue;
                    }
                    let (chain, string, site) = (c.chain.clone(), c.string.clone(), c.site);
                    let (args, result) = (c.args.clone(), c.result.clone());
                    self.call(&chain, &string, site, &t, &args, &result)?;
                }
                i += 1;
            }
            let new: Vec<Constraint> = self
                .index_ops
                .iter()
                .flat_map(|op| resolve_index(op, &sol.var(op.index())))
                .collect();
            self.constraints.extend(new);
            if before == (self.constraints.len(), self.vcalls.len()) {
                return Ok(sol);
            }
        }
    }
}

/// Top-down analysis of every root of `program`.
pub fn inline_analysis(
    program: &Program,
    config: &OracleConfig,
) -> Result<BTreeMap<ProcId, OracleRoot>, AnalysisError> {
    let lowered: HashMap<ProcId, LoweredProc> =
        program.procs.iter().map(|p| (p.id.clone(), lower_proc(program, p))).collect();
    let mut alloc_owner = HashMap::new();
    for p in &program.procs {
        for s in &p.body {
            if let crate::ir::Statement::Assign { rhs: crate::ir::RValue::New { label, .. }, .. } = s {
                alloc_owner.insert(label.clone(), p.id.clone());
            }
        }
    }
    let alloc_owner = Arc::new(alloc_owner);
    let mut out = BTreeMap::new();
    for root in &program.roots {
        let mut ex = Explorer {
            program,
            config,
            lowered: &lowered,
            constraints: BTreeSet::new(),
            copies: HashMap::new(),
            vcalls: Vec::new(),
            index_ops: Vec::new(),
            edges: BTreeSet::new(),
            resolved: BTreeSet::new(),
            fuel: 0,
        };
        let solution = ex.run(root)?;
        out.insert(
            root.clone(),
            OracleRoot { solution, copies: ex.copies, edges: ex.edges, alloc_owner: alloc_owner.clone() },
        );
    }
    Ok(out)
}

/// Points-to set of a root's variable in a top-down result.
pub fn points_to(root: &OracleRoot, proc: &ProcId, var: &str) -> BTreeSet<Value> {
    let r = if var == crate::ir::GLOBALS { Root::Global } else { Root::local(proc, var) };
    root.solution.var(&r)
}
