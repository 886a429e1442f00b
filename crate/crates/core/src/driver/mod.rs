//! Whole-program analysis: summaries on demand, memoized per calling
//! context where recursion or dispatch bounds could tell contexts apart, and
//! root procedures applied to their own summaries.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;
use std::time::Instant;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::heapstate::{Root, Value};
use crate::inline::{AnalysisError, Callee, Config, CutReason, Mode, RootState, Summaries, Work};
use crate::ir::{Name, ProcId, Program, ReceiverClasses, SiteId};
use crate::summarize::{lower_proc, CallTarget, CtxEdge, Diagnostic, HybridSummary, LoweredProc};

type CacheKey = (ProcId, Vec<(ProcId, usize)>);

pub struct Analyzer<'p> {
    program: &'p Program,
    config: Config,
    lowered: HashMap<ProcId, Arc<LoweredProc>>,
    impls: HashMap<Name, BTreeSet<ProcId>>,
    /// Procedures whose occurrences on the call chain can change a summary.
    sensitive: HashSet<ProcId>,
    cache: HashMap<CacheKey, Arc<HybridSummary>>,
    fuel_used: u64,
}

impl<'p> Analyzer<'p> {
    pub fn new(program: &'p Program, config: Config) -> Self {
        let lowered: HashMap<ProcId, Arc<LoweredProc>> = program
            .procs
            .iter()
            .map(|p| (p.id.clone(), Arc::new(lower_proc(program, p))))
            .collect();
        let mut impls: HashMap<Name, BTreeSet<ProcId>> = HashMap::new();
        for c in &program.classes {
            for m in c.methods.keys() {
                impls
                    .entry(m.clone())
                    .or_insert_with(|| program.dispatch_targets(m, &ReceiverClasses::Top));
            }
        }
        let mut sensitive: HashSet<ProcId> = recursive_procs(program, &lowered, &impls);
        for set in impls.values() {
            if set.len() > config.dispatch_bound {
                sensitive.extend(set.iter().cloned());
            }
        }
        Analyzer {
            program,
            config,
            lowered,
            impls,
            sensitive,
            cache: HashMap::new(),
            fuel_used: 0,
        }
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    /// Summary of `proc` when called from nowhere in particular.
    pub fn summary(&mut self, proc: &ProcId) -> Result<Arc<HybridSummary>, AnalysisError> {
        match self.enter(&[], proc, None)? {
            Callee::Summary(s) => Ok(s),
            Callee::Cut(_) => unreachable!("an empty chain never cuts"),
        }
    }

    /// Summaries computed so far, one per procedure and chain signature.
    pub fn summaries(&self) -> Vec<Arc<HybridSummary>> {
        let mut keys: Vec<&CacheKey> = self.cache.keys().collect();
        keys.sort();
        keys.into_iter().map(|k| self.cache[k].clone()).collect()
    }

    pub fn apply_root(&mut self, root: &ProcId) -> Result<RootState, AnalysisError> {
        let program = self.program;
        let config = self.config.clone();
        Work::new(program, &config, self, vec![root.clone()], true)?.apply_at_root(self)
    }

    /// Applies every root (or every procedure, with `all_procs`).
    pub fn run(mut self, all_procs: bool) -> Result<Analysis, AnalysisError> {
        let start = Instant::now();
        let roots: Vec<ProcId> = if all_procs {
            self.program.procs.iter().map(|p| p.id.clone()).collect()
        } else {
            self.program.roots.clone()
        };
        let mut states = BTreeMap::new();
        for r in &roots {
            let st = self.apply_root(r)?;
            states.insert(r.clone(), st);
        }
        let runtime_ms = start.elapsed().as_secs_f64() * 1000.0;
        let mut analysis = Analysis {
            mode: self.config.mode,
            roots: states,
            metrics: Metrics::default(),
            fuel_used: self.fuel_used,
            summaries_computed: self.cache.len(),
            summaries: self.summaries(),
            site_owner: self
                .program
                .procs
                .iter()
                .flat_map(|p| p.body.iter().map(|s| (s.site(), p.id.clone())))
                .collect(),
        };
        analysis.metrics = analysis.compute_metrics(self.program, &self.lowered, runtime_ms);
        Ok(analysis)
    }

    fn cache_key(&self, chain: &[ProcId], target: &ProcId) -> CacheKey {
        let mut counts: BTreeMap<&ProcId, usize> = BTreeMap::new();
        for p in chain.iter().chain([target]) {
            if self.sensitive.contains(p) {
                *counts.entry(p).or_default() += 1;
            }
        }
        (target.clone(), counts.into_iter().map(|(p, n)| (p.clone(), n)).collect())
    }

    fn exceeds_dispatch_bound(&self, chain: &[ProcId], target: &ProcId, method: &Name) -> bool {
        let Some(impls) = self.impls.get(method) else { return false };
        let on_chain: BTreeSet<&ProcId> = chain.iter().filter(|p| impls.contains(*p)).collect();
        if on_chain.is_empty() {
            return false;
        }
        let mut distinct = on_chain;
        distinct.insert(target);
        distinct.len() > self.config.dispatch_bound
    }
}

/// Procedures on a cycle of the call graph that assumes every implementation
/// of a method may be called.
fn recursive_procs(
    program: &Program,
    lowered: &HashMap<ProcId, Arc<LoweredProc>>,
    impls: &HashMap<Name, BTreeSet<ProcId>>,
) -> HashSet<ProcId> {
    let mut g = DiGraph::<ProcId, ()>::new();
    let nodes: HashMap<&ProcId, _> =
        program.procs.iter().map(|p| (&p.id, g.add_node(p.id.clone()))).collect();
    let mut self_loops = HashSet::new();
    for p in &program.procs {
        for call in &lowered[&p.id].calls {
            let targets: Vec<&ProcId> = match &call.target {
                CallTarget::Direct(t) => vec![t],
                CallTarget::Virtual(m) => impls.get(m).map_or(vec![], |s| s.iter().collect()),
            };
            for t in targets {
                if t == &p.id {
                    self_loops.insert(t.clone());
                }
                g.add_edge(nodes[&p.id], nodes[t], ());
            }
        }
    }
    let mut out = self_loops;
    for scc in tarjan_scc(&g) {
        if scc.len() > 1 {
            out.extend(scc.into_iter().map(|n| g[n].clone()));
        }
    }
    out
}

impl Summaries for Analyzer<'_> {
    fn lowered(&self, proc: &ProcId) -> Result<Arc<LoweredProc>, AnalysisError> {
        self.lowered.get(proc).cloned().ok_or_else(|| AnalysisError::UnknownProc(proc.clone()))
    }

    fn enter(
        &mut self,
        chain: &[ProcId],
        target: &ProcId,
        method: Option<&Name>,
    ) -> Result<Callee, AnalysisError> {
        if chain.iter().filter(|p| *p == target).count() >= self.config.unroll {
            return Ok(Callee::Cut(CutReason::Recursion));
        }
        if method.is_some_and(|m| self.exceeds_dispatch_bound(chain, target, m)) {
            return Ok(Callee::Cut(CutReason::Permutation));
        }
        let key = self.cache_key(chain, target);
        if let Some(s) = self.cache.get(&key) {
            return Ok(Callee::Summary(s.clone()));
        }
        let program = self.program;
        let config = self.config.clone();
        let mut stack = chain.to_vec();
        stack.push(target.clone());
        let summary = Arc::new(Work::new(program, &config, self, stack, false)?.summarize(self)?);
        self.cache.insert(key, summary.clone());
        Ok(Callee::Summary(summary))
    }

    fn tick(&mut self, amount: u64) -> Result<(), AnalysisError> {
        self.fuel_used += amount;
        if self.fuel_used > self.config.fuel {
            return Err(AnalysisError::OutOfFuel(self.config.fuel));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Metrics {
    pub reached_procs: usize,
    pub poly_callsites: usize,
    pub critical_total: usize,
    pub critical_propagated: usize,
    /// Step counts over the statements that left their own procedure.
    pub k_max: usize,
    pub k_avg: f64,
    pub prop_ratio: f64,
    pub runtime_ms: f64,
}

pub struct Analysis {
    pub mode: Mode,
    pub roots: BTreeMap<ProcId, RootState>,
    pub metrics: Metrics,
    pub fuel_used: u64,
    pub summaries_computed: usize,
    /// Published summaries, one per procedure and chain signature.
    pub summaries: Vec<Arc<HybridSummary>>,
    site_owner: HashMap<SiteId, ProcId>,
}

impl Analysis {
    /// Points-to set of variable `var` of the root `proc`.
    pub fn points_to(&self, proc: &ProcId, var: &str) -> BTreeSet<Value> {
        let Some(st) = self.roots.get(proc) else { return BTreeSet::new() };
        let root = if var == crate::ir::GLOBALS { Root::Global } else { Root::local(proc, var) };
        st.solution.var(&root)
    }

    pub fn diagnostics(&self) -> BTreeSet<Diagnostic> {
        self.roots.values().flat_map(|st| st.summary.diagnostics.iter().cloned()).collect()
    }

    /// Every call-graph edge, in the context of the root it was reached from.
    pub fn edges(&self) -> impl Iterator<Item = (&ProcId, &CtxEdge)> {
        self.roots.iter().flat_map(|(r, st)| st.summary.edges.iter().map(move |e| (r, e)))
    }

    /// Procedures along an edge's call string, from the root to the callee.
    /// The first site lies in the root; every later site lies in the
    /// procedure its predecessor called.
    fn edge_path(&self, root: &ProcId, e: &CtxEdge) -> Vec<ProcId> {
        let mut path = vec![root.clone()];
        path.extend(e.ctx.iter().chain([&e.site]).skip(1).map(|s| self.site_owner[s].clone()));
        path.push(e.target.clone());
        path
    }

    /// Call strings from each root, as dotted procedure names.
    pub fn call_strings(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.roots.keys().map(|r| r.to_string()).collect();
        for (r, e) in self.edges() {
            let path: Vec<String> = self.edge_path(r, e).iter().map(|p| p.to_string()).collect();
            out.insert(path.join("."));
        }
        out
    }

    /// Context-insensitive call graph: caller, call site, callee.
    pub fn call_graph(&self) -> BTreeSet<(ProcId, SiteId, ProcId)> {
        self.edges()
            .map(|(_, e)| (self.site_owner[&e.site].clone(), e.site, e.target.clone()))
            .collect()
    }

    pub fn reached_procs(&self) -> BTreeSet<ProcId> {
        self.roots.keys().cloned().chain(self.edges().map(|(_, e)| e.target.clone())).collect()
    }

    fn compute_metrics(
        &self,
        program: &Program,
        lowered: &HashMap<ProcId, Arc<LoweredProc>>,
        runtime_ms: f64,
    ) -> Metrics {
        let reached = self.reached_procs();
        let mut groups: BTreeMap<(&ProcId, &Vec<SiteId>, SiteId), BTreeSet<&ProcId>> =
            BTreeMap::new();
        for (r, e) in self.edges() {
            groups.entry((r, &e.ctx, e.site)).or_default().insert(&e.target);
        }
        let poly: BTreeSet<SiteId> =
            groups.iter().filter(|(_, t)| t.len() > 1).map(|((_, _, s), _)| *s).collect();
        let critical: BTreeSet<SiteId> =
            reached.iter().flat_map(|p| lowered[p].critical_sites()).collect();
        let mut steps: BTreeMap<SiteId, usize> = BTreeMap::new();
        for st in self.roots.values() {
            for (s, k) in &st.summary.resolved_steps {
                let e = steps.entry(*s).or_insert(0);
                *e = (*e).max(*k);
            }
        }
        let moved: Vec<usize> = steps.values().copied().filter(|k| *k >= 1).collect();
        let propagated = moved.len();
        let statements: usize =
            reached.iter().filter_map(|p| program.proc(p)).map(|p| p.body.len()).sum();
        Metrics {
            reached_procs: reached.len(),
            poly_callsites: poly.len(),
            critical_total: critical.len(),
            critical_propagated: propagated,
            k_max: moved.iter().copied().max().unwrap_or(0),
            k_avg: if moved.is_empty() { 0.0 } else { moved.iter().sum::<usize>() as f64 / propagated as f64 },
            prop_ratio: if statements == 0 { 0.0 } else { propagated as f64 / statements as f64 },
            runtime_ms,
        }
    }
}

/// Runs the analysis on a thread with a large stack, since summaries are
/// computed by recursion along call chains.
pub fn analyze(program: &Program, config: Config) -> Result<Analysis, AnalysisError> {
    analyze_with(program, config, false)
}

pub fn analyze_with(
    program: &Program,
    config: Config,
    all_procs: bool,
) -> Result<Analysis, AnalysisError> {
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(512 << 20)
            .spawn_scoped(scope, || Analyzer::new(program, config).run(all_procs))
            .expect("spawn analysis thread")
            .join()
            .expect("analysis thread panicked")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse;

    const OVERVIEW: &str = include_str!("../../../../corpus/overview/overviewExample.hir");

    #[test]
    fn receiver_is_split_by_propagation() {
        let p = parse(OVERVIEW).unwrap();
        let service = ProcId::new("service");
        let poly = |mode| {
            let a = analyze(&p, Config::exact(mode)).unwrap();
            a.edges().filter(|(_, e)| e.target.0.starts_with("poly")).count()
        };
        // Two call strings reach `poly`, one per receiver class.
        assert_eq!(poly(Mode::Hia), 2);
        let a = analyze(&p, Config::exact(Mode::HiK(1))).unwrap();
        assert_eq!(a.metrics.poly_callsites, 1);
        let a = analyze(&p, Config::exact(Mode::HiK(3))).unwrap();
        assert_eq!(a.metrics.poly_callsites, 0);
        assert!(a.metrics.k_max <= 3);
        let second = a.points_to(&service, "second");
        assert_eq!(second, a.points_to(&service, "first"));
    }

    #[test]
    fn comci_propagates_nothing() {
        let p = parse(OVERVIEW).unwrap();
        let m = analyze(&p, Config::new(Mode::ComCi)).unwrap().metrics;
        assert_eq!((m.k_max, m.k_avg, m.critical_propagated), (0, 0.0, 0));
        assert_eq!(m.critical_total, 1);
    }

    #[test]
    fn mutual_recursion_is_detected() {
        let p = parse(
            "proc a(this) { scall b(this); } proc b(this) { scall a(this); } proc c(this) { scall a(this); } root c;",
        )
        .unwrap();
        let an = Analyzer::new(&p, Config::new(Mode::Hia));
        let mut rec: Vec<&str> = an.sensitive.iter().map(|p| p.0.as_ref()).collect();
        rec.sort();
        assert_eq!(rec, ["a", "b"]);
        let diags = analyze(&p, Config::new(Mode::Hia)).unwrap().diagnostics();
        assert!(diags.iter().any(|d| matches!(d, Diagnostic::RecursionCut { .. })));
    }
}
