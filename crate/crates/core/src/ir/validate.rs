use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use super::{
    CallKind, Name, ProcId, Program, RValue, ReceiverClasses, Statement, GLOBALS,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValidationError {
    #[error("duplicate procedure `{0}`")]
    DuplicateProc(String),
    #[error("duplicate class `{0}`")]
    DuplicateClass(String),
    #[error("class `{class}` binds method `{method}` twice")]
    DuplicateMethod { class: String, method: String },
    #[error("duplicate allocation-site label `{0}`")]
    DuplicateSiteLabel(String),
    #[error("cycle in the supers relation through class `{0}`")]
    SupersCycle(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("unknown procedure `{0}`")]
    UnknownProc(String),
    #[error("class `{class}` declares `{method}` abstract and also binds it")]
    AbstractBound { class: String, method: String },
    #[error("no class implements method `{0}`")]
    UnresolvableMethod(String),
    #[error("call to `{callee}` in `{proc}` passes {given} arguments, `{target}` takes {expected}")]
    ArityMismatch {
        proc: String,
        callee: String,
        target: String,
        given: usize,
        expected: usize,
    },
    #[error("variable `{var}` is not defined in `{proc}`")]
    UndefinedVariable { proc: String, var: String },
    #[error("assertion names `{0}`, which is not a root")]
    AssertionNotInRoot(String),
}

pub(super) fn validate(p: &mut Program) -> Result<(), ValidationError> {
    p.proc_index.clear();
    p.class_index.clear();
    for (i, proc) in p.procs.iter().enumerate() {
        if p.proc_index.insert(proc.id.clone(), i).is_some() {
            return Err(ValidationError::DuplicateProc(proc.id.to_string()));
        }
    }
    for (i, c) in p.classes.iter().enumerate() {
        if p.class_index.insert(c.name.clone(), i).is_some() {
            return Err(ValidationError::DuplicateClass(c.name.to_string()));
        }
    }
    check_classes(p)?;
    check_procs(p)?;
    for r in &p.roots {
        if p.proc(r).is_none() {
            return Err(ValidationError::UnknownProc(r.to_string()));
        }
    }
    let roots: HashSet<&ProcId> = p.roots.iter().collect();
    for a in &p.assertions {
        let proc = p
            .proc(&a.proc)
            .ok_or_else(|| ValidationError::UnknownProc(a.proc.to_string()))?;
        if !roots.contains(&a.proc) {
            return Err(ValidationError::AssertionNotInRoot(a.proc.to_string()));
        }
        let defined = defined_vars(proc);
        for v in [&a.vars.0, &a.vars.1] {
            if !defined.contains(v) {
                return Err(ValidationError::UndefinedVariable {
                    proc: a.proc.to_string(),
                    var: v.to_string(),
                });
            }
        }
    }
    Ok(())
}

fn check_classes(p: &Program) -> Result<(), ValidationError> {
    for c in &p.classes {
        for s in &c.supers {
            if p.class(s).is_none() {
                return Err(ValidationError::UnknownClass(s.to_string()));
            }
        }
        for proc in c.methods.values() {
            if p.proc(proc).is_none() {
                return Err(ValidationError::UnknownProc(proc.to_string()));
            }
        }
        for a in &c.abstracts {
            if c.methods.contains_key(a) {
                return Err(ValidationError::AbstractBound {
                    class: c.name.to_string(),
                    method: a.to_string(),
                });
            }
        }
    }
    // Three-colour DFS over supers.
    let mut state: HashMap<&str, u8> = HashMap::new();
    fn visit<'a>(
        p: &'a Program,
        name: &'a str,
        state: &mut HashMap<&'a str, u8>,
    ) -> Result<(), ValidationError> {
        match state.get(name) {
            Some(1) => return Err(ValidationError::SupersCycle(name.to_string())),
            Some(_) => return Ok(()),
            None => {}
        }
        state.insert(name, 1);
        if let Some(c) = p.class(name) {
            for s in &c.supers {
                visit(p, s, state)?;
            }
        }
        state.insert(name, 2);
        Ok(())
    }
    for c in &p.classes {
        visit(p, &c.name, &mut state)?;
    }
    Ok(())
}

pub(super) fn defined_vars(proc: &super::Procedure) -> HashSet<Name> {
    let mut defined: HashSet<Name> = proc.params.iter().cloned().collect();
    defined.insert(Name::from(GLOBALS));
    for s in &proc.body {
        match s {
            Statement::Assign { lhs, .. } if lhs.is_var() => {
                defined.insert(lhs.base.clone());
            }
            Statement::Call { result: Some(r), .. } if r.is_var() => {
                defined.insert(r.base.clone());
            }
            _ => {}
        }
    }
    defined
}

fn check_procs(p: &Program) -> Result<(), ValidationError> {
    let mut labels = BTreeSet::new();
    for proc in &p.procs {
        let defined = defined_vars(proc);
        let undefined = |v: &Name| ValidationError::UndefinedVariable {
            proc: proc.id.to_string(),
            var: v.to_string(),
        };
        let mut used: Vec<&Name> = Vec::new();
        for s in &proc.body {
            match s {
                Statement::Assign { lhs, rhs, .. } => {
                    used.extend(lhs.variables());
                    match rhs {
                        RValue::Lv(lv) => used.extend(lv.variables()),
                        RValue::New { class, label } => {
                            if p.class(class).is_none() {
                                return Err(ValidationError::UnknownClass(class.to_string()));
                            }
                            if !labels.insert(label.clone()) {
                                return Err(ValidationError::DuplicateSiteLabel(
                                    label.to_string(),
                                ));
                            }
                        }
                        RValue::Const(_) => {}
                    }
                }
                Statement::Call { result, callee, args, kind, .. } => {
                    if let Some(r) = result {
                        used.extend(r.variables());
                    }
                    for a in args {
                        used.extend(a.variables());
                    }
                    let targets: Vec<ProcId> = match kind {
                        CallKind::Static => {
                            let id = ProcId(callee.clone());
                            if p.proc(&id).is_none() {
                                return Err(ValidationError::UnknownProc(callee.to_string()));
                            }
                            vec![id]
                        }
                        CallKind::Virtual => {
                            let t = p.dispatch_targets(callee, &ReceiverClasses::Top);
                            if t.is_empty() {
                                return Err(ValidationError::UnresolvableMethod(
                                    callee.to_string(),
                                ));
                            }
                            t.into_iter().collect()
                        }
                    };
                    for t in targets {
                        let expected = p.procs[p.proc_index[&t]].params.len();
                        if expected != args.len() {
                            return Err(ValidationError::ArityMismatch {
                                proc: proc.id.to_string(),
                                callee: callee.to_string(),
                                target: t.to_string(),
                                given: args.len(),
                                expected,
                            });
                        }
                    }
                }
                Statement::Return { value, .. } => used.extend(value.variables()),
            }
        }
        if let Some(v) = used.into_iter().find(|v| !defined.contains(*v)) {
            return Err(undefined(v));
        }
    }
    Ok(())
}
