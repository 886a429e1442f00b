use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use hybrid_inline::corpus::{generate, load_file, CorpusError, GenParams};
use hybrid_inline::inline::{Config, Mode};
use hybrid_inline::ir::Program;
use rayon::prelude::*;

use crate::mode::{parse_modes, parse_reference, ModeSpec};
use crate::run::{check, run, MetricsRow, Options, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "hia", version, about = "Pointer analysis with hybrid inlining")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Analyze program files, or every `.hir` file under a directory.
    Analyze(AnalyzeArgs),
    /// Print a random program.
    Gen(GenArgs),
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    /// comci, hi:<k>, hia, topci, inline:<k|inf> or all. The full path to
    /// `Vec` keeps clap from reading it as a repeated flag.
    #[arg(long, default_value = "hia", value_parser = parse_modes)]
    pub mode: std::vec::Vec<ModeSpec>,
    /// Check alias assertions against their expectations.
    #[arg(long)]
    pub assert: bool,
    /// Compare with the inlining reference bounded at k call sites.
    #[arg(long, value_name = "K|inf", value_parser = parse_reference)]
    pub check_oracle: Option<ModeSpec>,
    /// Write metrics rows as JSON.
    #[arg(long, value_name = "PATH")]
    pub metrics: Option<PathBuf>,
    /// Write call-graph edges, one per line.
    #[arg(long, value_name = "PATH")]
    pub callgraph: Option<PathBuf>,
    /// Write points-to facts and call edges as JSON lines.
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
    /// Print the published summaries.
    #[arg(long)]
    pub summaries: bool,
    #[arg(long, value_name = "D", default_value_t = 6)]
    pub depth_bound: usize,
    #[arg(long, value_name = "N", default_value_t = 2)]
    pub unroll: usize,
    #[arg(long, value_name = "M", default_value_t = 5)]
    pub dispatch_bound: usize,
    /// Pending statements per summary before the deepest are resolved; 0 disables.
    #[arg(long, value_name = "C", default_value_t = 64)]
    pub pending_cap: usize,
    /// Turn off the scalability shortcuts.
    #[arg(long)]
    pub exact: bool,
    /// Analyses run in parallel.
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub jobs: usize,
    /// Apply every procedure, not just the roots.
    #[arg(long)]
    pub all_procs: bool,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Defaults to HI_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub minimal: bool,
    #[arg(long)]
    pub max_procs: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub max_width: Option<usize>,
    #[arg(long)]
    pub max_stmts: Option<usize>,
}

/// Text written to standard output and standard error, and the exit code.
#[derive(Debug, Default)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Output {
    fn raise(&mut self, code: i32) {
        let rank = |c: i32| match c {
            EXIT_INTERNAL => 4,
            EXIT_PARSE => 3,
            EXIT_DIVERGENCE => 2,
            EXIT_MISMATCH => 1,
            _ => 0,
        };
        if rank(code) > rank(self.code) {
            self.code = code;
        }
    }
}

pub fn execute(cli: Cli) -> Output {
    match cli.command {
        Command::Analyze(a) => analyze(&a),
        Command::Gen(g) => gen(&g),
    }
}

fn gen(g: &GenArgs) -> Output {
    let seed = g.seed.or_else(|| std::env::var("HI_SEED").ok()?.parse().ok()).unwrap_or(0);
    let mut params = if g.minimal { GenParams::minimal() } else { GenParams::default() };
    params.max_procs = g.max_procs.unwrap_or(params.max_procs);
    params.max_depth = g.max_depth.unwrap_or(params.max_depth);
    params.max_width = g.max_width.unwrap_or(params.max_width);
    params.max_stmts = g.max_stmts.unwrap_or(params.max_stmts);
    Output { stdout: generate(seed, params).to_source(), ..Output::default() }
}

fn collect(path: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    if !path.is_dir() {
        out.push(path.to_owned());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(path)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    entries.sort();
    for e in entries {
        if e.is_dir() {
            collect(&e, out)?;
        } else if e.extension().is_some_and(|x| x == "hir") {
            out.push(e);
        }
    }
    Ok(())
}

struct FileResult {
    name: String,
    reports: Vec<Result<Report, String>>,
    reference: Option<Result<Report, String>>,
}

fn analyze(a: &AnalyzeArgs) -> Output {
    let mut out = Output::default();
    let mut files = Vec::new();
    for p in &a.paths {
        if let Err(e) = collect(p, &mut files) {
            let _ = writeln!(out.stderr, "{}: {e}", p.display());
            out.raise(EXIT_PARSE);
        }
    }
    let mut programs: Vec<(String, Program)> = Vec::new();
    for f in &files {
        match load_file(f) {
            Ok(p) => programs.push((f.display().to_string(), p)),
            Err(e @ CorpusError::Io { .. }) | Err(e @ CorpusError::Parse { .. }) => {
                let _ = writeln!(out.stderr, "{e}");
                out.raise(EXIT_PARSE);
            }
        }
    }

    let mut config = if a.exact { Config::exact(Mode::Hia) } else { Config::new(Mode::Hia) };
    config.depth_bound = a.depth_bound;
    config.unroll = a.unroll;
    config.dispatch_bound = a.dispatch_bound;
    if !a.exact {
        config.pending_cap = (a.pending_cap > 0).then_some(a.pending_cap);
    }
    let opts = Options { config, all_procs: a.all_procs, summaries: a.summaries };
    let reference = a.check_oracle;

    let work = |(name, program): &(String, Program)| FileResult {
        name: name.clone(),
        reports: a
            .mode
            .iter()
            .map(|m| run(name, program, *m, &opts).map_err(|e| e.to_string()))
            .collect(),
        reference: reference.map(|m| run(name, program, m, &opts).map_err(|e| e.to_string())),
    };
    let results: Vec<FileResult> = match rayon::ThreadPoolBuilder::new().num_threads(a.jobs.max(1)).build() {
        Ok(pool) => pool.install(|| programs.par_iter().map(work).collect()),
        Err(e) => {
            let _ = writeln!(out.stderr, "thread pool: {e}");
            out.raise(EXIT_INTERNAL);
            return out;
        }
    };

    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut edges = String::new();
    let mut json = String::new();
    for fr in &results {
        for rep in &fr.reports {
            let rep = match rep {
                Ok(r) => r,
                Err(e) => {
                    let _ = writeln!(out.stderr, "{}: {e}", fr.name);
                    out.raise(EXIT_INTERNAL);
                    continue;
                }
            };
            print_report(&mut out, &fr.name, rep, a.assert);
            if let Some(reference) = &fr.reference {
                match reference {
                    Ok(refr) => {
                        let ms = check(rep, refr);
                        let _ = writeln!(
                            out.stdout,
                            "  oracle {}: {} divergence(s)",
                            refr.mode,
                            ms.len()
                        );
                        for m in &ms {
                            let kind = if m.unsound { "missing" } else { "extra" };
                            let _ = writeln!(out.stdout, "    {kind} {}.{}", m.root, m.path);
                        }
                        if !ms.is_empty() {
                            out.raise(EXIT_DIVERGENCE);
                        }
                    }
                    Err(e) => {
                        let _ = writeln!(out.stderr, "{}: oracle out of scope: {e}", fr.name);
                        out.raise(EXIT_INTERNAL);
                    }
                }
            }
            for (caller, site, target) in &rep.call_graph {
                let _ = writeln!(edges, "{}\t{}\t{caller}\t{site}\t{target}", fr.name, rep.mode);
                let rec = serde_json::json!({
                    "kind": "edge", "file": fr.name, "mode": rep.mode.to_string(),
                    "caller": caller.to_string(), "callsite": site.to_string(), "target": target.to_string(),
                });
                let _ = writeln!(json, "{rec}");
            }
            for (root, table) in &rep.facts {
                for (path, vals) in table {
                    for v in vals {
                        let rec = serde_json::json!({
                            "kind": "pt", "file": fr.name, "mode": rep.mode.to_string(),
                            "scope": root.to_string(), "path": path, "target": v.to_string(),
                        });
                        let _ = writeln!(json, "{rec}");
                    }
                }
            }
            rows.push(rep.row.clone());
        }
    }
    if a.mode.len() > 1 {
        let _ = writeln!(out.stdout, "{:<40} {:<11} {:>6} {:>5} {:>10}", "file", "mode", "reach", "poly", "time(ms)");
        for r in &rows {
            let _ = writeln!(
                out.stdout,
                "{:<40} {:<11} {:>6} {:>5} {:>10.3}",
                r.file, r.mode, r.reached_procs, r.poly_callsites, r.runtime_ms
            );
        }
    }
    let writes = [
        (&a.metrics, serde_json::to_string_pretty(&rows).map(|s| s + "\n").unwrap_or_default()),
        (&a.callgraph, edges),
        (&a.json, json),
    ];
    for (path, text) in writes {
        if let Some(p) = path {
            if let Err(e) = std::fs::write(p, text).with_context(|| format!("writing {}", p.display())) {
                let _ = writeln!(out.stderr, "{e:#}");
                out.raise(EXIT_INTERNAL);
            }
        }
    }
    out
}

fn print_report(out: &mut Output, file: &str, rep: &Report, assert: bool) {
    let _ = writeln!(out.stdout, "{file} [{}]", rep.mode);
    for (root, table) in &rep.facts {
        for (path, vals) in table.iter().filter(|(p, _)| !p.contains(['.', '['])) {
            let vals: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out.stdout, "  {root}: {path} -> {{{}}}", vals.join(", "));
        }
    }
    for d in &rep.diagnostics {
        let _ = writeln!(out.stdout, "  note: {d}");
    }
    for s in &rep.summaries {
        for line in s.lines() {
            let _ = writeln!(out.stdout, "  {line}");
        }
    }
    if assert {
        for o in &rep.outcomes {
            let a = &o.assertion;
            let kind = match a.kind {
                hybrid_inline::ir::AliasKind::MustAlias => "alias",
                hybrid_inline::ir::AliasKind::NotAlias => "noalias",
            };
            let word = |b: bool| if b { "pass" } else { "fail" };
            let _ = writeln!(
                out.stdout,
                "  assert {kind} {}.{}, {}.{}: {} (expected {}){}",
                a.proc,
                a.vars.0,
                a.proc,
                a.vars.1,
                word(o.holds),
                word(o.expected),
                if o.matches() { "" } else { "  MISMATCH" }
            );
            if !o.matches() {
                out.raise(EXIT_MISMATCH);
            }
        }
    }
}
