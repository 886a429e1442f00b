//! Program model for the analysed language: classes, procedures made of
//! assignments and calls, roots, and alias assertions.
//!
//! Programs are written in a small textual syntax (see [`parse`]) and are
//! immutable once validated.

mod dispatch;
mod parse;
mod print;
mod validate;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

pub use dispatch::ReceiverClasses;
pub use parse::{parse, ParseError};
pub use validate::ValidationError;

pub type Name = Arc<str>;

/// Name of the distinguished object whose fields model global variables.
pub const GLOBALS: &str = "$G";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ProcId(pub Name);

impl ProcId {
    pub fn new(s: &str) -> Self {
        ProcId(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ProcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Program-wide statement identifier, assigned in source order at parse time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct SiteId(pub u32);

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Const {
    Str(Name),
    Int(i64),
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const::Str(s) => write!(f, "{s:?}"),
            Const::Int(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Offset {
    Field(Name),
    ConstIndex(Const),
    VarIndex(Name),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LValue {
    pub base: Name,
    pub offsets: Vec<Offset>,
}

impl LValue {
    pub fn var(name: &str) -> Self {
        LValue {
            base: Arc::from(name),
            offsets: Vec::new(),
        }
    }

    pub fn is_var(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn has_var_index(&self) -> bool {
        self.offsets
            .iter()
            .any(|o| matches!(o, Offset::VarIndex(_)))
    }

    /// Every variable this lvalue reads or names, base first.
    pub fn variables(&self) -> impl Iterator<Item = &Name> {
        std::iter::once(&self.base).chain(self.offsets.iter().filter_map(|o| match o {
            Offset::VarIndex(v) => Some(v),
            _ => None,
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RValue {
    Lv(LValue),
    Const(Const),
    New { class: Name, label: Name },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum CallKind {
    Virtual,
    Static,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Statement {
    Assign {
        site: SiteId,
        lhs: LValue,
        rhs: RValue,
    },
    Call {
        site: SiteId,
        result: Option<LValue>,
        callee: Name,
        args: Vec<LValue>,
        kind: CallKind,
    },
    /// `return lv;`, the assignment of `lv` to the procedure's return slot.
    Return { site: SiteId, value: LValue },
}

impl Statement {
    pub fn site(&self) -> SiteId {
        match self {
            Statement::Assign { site, .. }
            | Statement::Call { site, .. }
            | Statement::Return { site, .. } => *site,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Procedure {
    pub id: ProcId,
    pub params: Vec<Name>,
    pub body: Vec<Statement>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassDecl {
    pub name: Name,
    pub supers: Vec<Name>,
    pub methods: BTreeMap<Name, ProcId>,
    pub abstracts: Vec<Name>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum AliasKind {
    MustAlias,
    NotAlias,
}

/// What the analysis is expected to report for an assertion, with optional
/// per-mode overrides (`expect pass comci=fail;`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expectation {
    pub pass: bool,
    pub overrides: Vec<(Name, bool)>,
}

impl Expectation {
    pub fn for_mode(&self, mode_label: &str) -> bool {
        self.overrides
            .iter()
            .rev()
            .find(|(m, _)| &**m == mode_label)
            .map_or(self.pass, |(_, p)| *p)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AliasAssertion {
    pub proc: ProcId,
    pub kind: AliasKind,
    pub vars: (Name, Name),
    pub expected: Expectation,
}

#[derive(Clone, Debug)]
pub struct Program {
    pub classes: Vec<ClassDecl>,
    pub procs: Vec<Procedure>,
    pub roots: Vec<ProcId>,
    pub assertions: Vec<AliasAssertion>,
    proc_index: HashMap<ProcId, usize>,
    class_index: HashMap<Name, usize>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.classes == other.classes
            && self.procs == other.procs
            && self.roots == other.roots
            && self.assertions == other.assertions
    }
}

impl Program {
    /// Builds and validates a program from its parts.
    pub fn new(
        classes: Vec<ClassDecl>,
        procs: Vec<Procedure>,
        roots: Vec<ProcId>,
        assertions: Vec<AliasAssertion>,
    ) -> Result<Self, ValidationError> {
        let mut program = Program {
            classes,
            procs,
            roots,
            assertions,
            proc_index: HashMap::new(),
            class_index: HashMap::new(),
        };
        validate::validate(&mut program)?;
        Ok(program)
    }

    pub fn proc(&self, id: &ProcId) -> Option<&Procedure> {
        self.proc_index.get(id).map(|&i| &self.procs[i])
    }

    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.class_index.get(name).map(|&i| &self.classes[i])
    }

    /// Number of statements over all procedures.
    pub fn statement_count(&self) -> usize {
        self.procs.iter().map(|p| p.body.len()).sum()
    }

    /// Pretty-prints the program in the textual syntax accepted by [`parse`].
    pub fn to_source(&self) -> String {
        print::print_program(self)
    }
}
