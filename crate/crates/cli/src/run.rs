//! One analysis of one program, reduced to what the command line reports.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

use hybrid_inline::assertions::{self, Facts, Outcome};
use hybrid_inline::driver::{analyze_with, Metrics};
use hybrid_inline::inline::{AnalysisError, Config};
use hybrid_inline::ir::{ProcId, Program, SiteId};
use hybrid_inline::oracle::facts::{not_covered, project, tables, FactTable};
use hybrid_inline::oracle::{inline_analysis, OracleConfig};
use hybrid_inline::summarize::Diagnostic;
use serde::Serialize;

use crate::mode::ModeSpec;

/// Offsets followed below each root variable in fact tables.
pub const FACT_DEPTH: usize = 3;

#[derive(Clone, Debug)]
pub struct Options {
    pub config: Config,
    pub all_procs: bool,
    pub summaries: bool,
}

pub struct Report {
    pub mode: ModeSpec,
    pub facts: BTreeMap<ProcId, FactTable>,
    pub outcomes: Vec<Outcome>,
    pub call_graph: BTreeSet<(ProcId, SiteId, ProcId)>,
    pub row: MetricsRow,
    pub diagnostics: Vec<Diagnostic>,
    pub summaries: Vec<String>,
}

impl Report {
    /// Whether a recursion or dispatch-chain cut made the result coarser than
    /// plain inlining.
    pub fn cut(&self) -> bool {
        self.diagnostics
            .iter()
            .any(|d| matches!(d, Diagnostic::RecursionCut { .. } | Diagnostic::PermutationCut { .. }))
    }
}

/// One line of the metrics table.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsRow {
    pub file: String,
    pub mode: String,
    pub reached_procs: usize,
    pub poly_callsites: usize,
    pub runtime_ms: f64,
    /// Propagation statistics, for the hybrid modes only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hybrid: Option<Metrics>,
}

fn site_owners(program: &Program) -> HashMap<SiteId, ProcId> {
    program
        .procs
        .iter()
        .flat_map(|p| p.body.iter().map(|s| (s.site(), p.id.clone())))
        .collect()
}

pub fn run(file: &str, program: &Program, mode: ModeSpec, opts: &Options) -> Result<Report, AnalysisError> {
    match mode {
        ModeSpec::Hybrid(m) => {
            let config = Config { mode: m, ..opts.config.clone() };
            let a = analyze_with(program, config, opts.all_procs)?;
            let facts = tables(program, a.roots.iter().map(|(r, s)| (r, &s.solution)), FACT_DEPTH);
            let outcomes = assertions::evaluate(program, &a, &mode.label());
            let row = MetricsRow {
                file: file.into(),
                mode: mode.to_string(),
                reached_procs: a.metrics.reached_procs,
                poly_callsites: a.metrics.poly_callsites,
                runtime_ms: a.metrics.runtime_ms,
                hybrid: Some(a.metrics.clone()),
            };
            let summaries = if opts.summaries { a.summaries.iter().map(|s| s.dump()).collect() } else { vec![] };
            Ok(Report {
                mode,
                facts,
                outcomes,
                call_graph: a.call_graph(),
                row,
                diagnostics: a.diagnostics().into_iter().collect(),
                summaries,
            })
        }
        ModeSpec::TopCi | ModeSpec::Inline(_) => {
            let k = match mode {
                ModeSpec::Inline(k) => k,
                _ => Some(0),
            };
            let oc = OracleConfig {
                k,
                depth_bound: opts.config.depth_bound,
                unroll: opts.config.unroll,
                fuel: opts.config.fuel,
            };
            let start = Instant::now();
            let roots = inline_analysis(program, &oc)?;
            let runtime_ms = start.elapsed().as_secs_f64() * 1000.0;
            let facts = tables(program, roots.iter().map(|(r, o)| (r, &o.solution)), FACT_DEPTH);
            let outcomes = assertions::evaluate(program, &roots as &dyn Facts, &mode.label());
            let owner = site_owners(program);
            let mut targets: BTreeMap<(&ProcId, _, SiteId), BTreeSet<&ProcId>> = BTreeMap::new();
            let mut call_graph = BTreeSet::new();
            let mut reached: BTreeSet<&ProcId> = roots.keys().collect();
            for (r, o) in &roots {
                for (ctx, site, target) in &o.edges {
                    targets.entry((r, ctx, *site)).or_default().insert(target);
                    call_graph.insert((owner[site].clone(), *site, target.clone()));
                    reached.insert(target);
                }
            }
            let poly: BTreeSet<SiteId> =
                targets.iter().filter(|(_, t)| t.len() > 1).map(|((_, _, s), _)| *s).collect();
            let row = MetricsRow {
                file: file.into(),
                mode: mode.to_string(),
                reached_procs: reached.len(),
                poly_callsites: poly.len(),
                runtime_ms,
                hybrid: None,
            };
            Ok(Report { mode, facts, outcomes, call_graph, row, diagnostics: vec![], summaries: vec![] })
        }
    }
}

/// A fact where an analysis disagrees with the reference.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub root: ProcId,
    pub path: String,
    /// `true` when the analysis misses a reference value, `false` when it
    /// only reports extra ones.
    pub unsound: bool,
}

/// Compares `report` with the reference analysis. Unbounded hybrid inlining
/// must agree exactly with unbounded inlining unless a cut made it coarser.
/// Otherwise only facts of the reference missing from `report` are listed;
/// against a bounded reference these can be precision differences rather
/// than unsoundness.
pub fn check(report: &Report, reference: &Report) -> Vec<Mismatch> {
    let exact = matches!(report.mode, ModeSpec::Hybrid(hybrid_inline::inline::Mode::Hia))
        && matches!(reference.mode, ModeSpec::Inline(None))
        && !report.cut();
    let bound = |m: ModeSpec| match m {
        ModeSpec::TopCi => Some(0),
        ModeSpec::Inline(k) => k,
        ModeSpec::Hybrid(_) => None,
    };
    let k = match (bound(report.mode), bound(reference.mode)) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let view = |t: &FactTable| k.map_or_else(|| t.clone(), |k| project(t, k));
    let empty = FactTable::new();
    let mut out = Vec::new();
    for (r, theirs) in &reference.facts {
        let mine = view(report.facts.get(r).unwrap_or(&empty));
        let theirs = view(theirs);
        let (mine, theirs) = (&mine, &theirs);
        let unsound: BTreeSet<String> = not_covered(mine, theirs).into_iter().collect();
        for path in &unsound {
            out.push(Mismatch { root: r.clone(), path: path.clone(), unsound: true });
        }
        if exact {
            for path in not_covered(theirs, mine) {
                if !unsound.contains(&path) {
                    out.push(Mismatch { root: r.clone(), path, unsound: false });
                }
            }
        }
    }
    out
}
