//! Seeded random programs for property tests. Procedures are arranged in
//! levels and only call deeper levels, so programs never recurse.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ir::{parse, Program};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenParams {
    pub max_procs: usize,
    pub max_depth: usize,
    /// Most implementations of one method.
    pub max_width: usize,
    pub max_stmts: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { max_procs: 12, max_depth: 5, max_width: 4, max_stmts: 8 }
    }
}

impl GenParams {
    /// Produces a single empty root.
    pub fn minimal() -> Self {
        GenParams { max_procs: 1, max_depth: 1, max_width: 1, max_stmts: 0 }
    }
}

struct Method {
    name: String,
    arity: usize,
    level: usize,
    classes: Vec<String>,
}

struct Proc {
    name: String,
    arity: usize,
    level: usize,
    /// Class whose method this procedure implements.
    owner: Option<String>,
}

const FIELDS: [&str; 3] = ["f", "g", "h"];
const CONSTS: [&str; 4] = ["\"a\"", "\"b\"", "1", "2"];

struct Gen {
    rng: ChaCha8Rng,
    params: GenParams,
    methods: Vec<Method>,
    procs: Vec<Proc>,
    labels: usize,
}

impl Gen {
    fn lv(&mut self, vars: &[String]) -> String {
        let mut s = vars.choose(&mut self.rng).unwrap().clone();
        if self.rng.gen_bool(0.4) {
            match self.rng.gen_range(0..3) {
                0 => s += &format!(".{}", FIELDS.choose(&mut self.rng).unwrap()),
                1 => s += &format!("[{}]", CONSTS.choose(&mut self.rng).unwrap()),
                _ => s += &format!("[{}]", vars.choose(&mut self.rng).unwrap()),
            }
        }
        s
    }

    fn alloc(&mut self) -> String {
        self.labels += 1;
        let mut classes = vec!["Obj".to_string()];
        for m in &self.methods {
            classes.extend(m.classes.iter().cloned());
        }
        format!("new {}@{}", classes.choose(&mut self.rng).unwrap(), self.labels)
    }

    fn body(&mut self, p: usize) -> String {
        let (level, arity) = (self.procs[p].level, self.procs[p].arity);
        let params: Vec<String> = (0..arity).map(|i| format!("p{i}")).collect();
        if self.params.max_stmts == 0 {
            return String::new();
        }
        let locals: Vec<String> = (0..self.rng.gen_range(1..=3)).map(|i| format!("v{i}")).collect();
        let mut vars = params.clone();
        vars.extend(locals.iter().cloned());
        let mut out = Vec::new();
        for l in &locals {
            let rhs = match self.rng.gen_range(0..4) {
                0 if !params.is_empty() => params.choose(&mut self.rng).unwrap().clone(),
                1 => CONSTS.choose(&mut self.rng).unwrap().to_string(),
                _ => self.alloc(),
            };
            out.push(format!("{l} = {rhs};"));
        }
        let n = self.rng.gen_range(0..=self.params.max_stmts);
        for _ in 0..n {
            let stmt = match self.rng.gen_range(0..10) {
                0..=2 => {
                    let lhs = self.lv(&vars);
                    let rhs = self.lv(&vars);
                    format!("{lhs} = {rhs};")
                }
                3 => {
                    let lhs = self.lv(&vars);
                    format!("{lhs} = {};", self.alloc())
                }
                4 => {
                    let lhs = self.lv(&vars);
                    format!("{lhs} = {};", CONSTS.choose(&mut self.rng).unwrap())
                }
                5 => {
                    let v = self.lv(&vars);
                    if self.rng.gen_bool(0.5) {
                        format!("$G.{} = {v};", FIELDS.choose(&mut self.rng).unwrap())
                    } else {
                        format!("{v} = $G.{};", FIELDS.choose(&mut self.rng).unwrap())
                    }
                }
                6 => format!("return {};", self.lv(&vars)),
                _ => match self.call(level, &vars) {
                    Some(c) => c,
                    None => continue,
                },
            };
            out.push(stmt);
        }
        out.join(" ")
    }

    fn call(&mut self, level: usize, vars: &[String]) -> Option<String> {
        let statics: Vec<usize> = (0..self.procs.len())
            .filter(|&q| self.procs[q].level > level && self.procs[q].owner.is_none())
            .collect();
        let virtuals: Vec<usize> =
            (0..self.methods.len()).filter(|&m| self.methods[m].level > level).collect();
        let use_virtual = !virtuals.is_empty() && (statics.is_empty() || self.rng.gen_bool(0.5));
        let (head, arity) = if use_virtual {
            let m = &self.methods[*virtuals.choose(&mut self.rng).unwrap()];
            (format!("vcall {}", m.name), m.arity)
        } else {
            let q = &self.procs[*statics.choose(&mut self.rng)?];
            (format!("scall {}", q.name), q.arity)
        };
        let args: Vec<String> = (0..arity).map(|_| self.lv(vars)).collect();
        let result = if self.rng.gen_bool(0.8) { format!("{} = ", self.lv(vars)) } else { String::new() };
        Some(format!("{result}{head}({});", args.join(", ")))
    }
}

/// A valid, non-recursive program; the same seed gives the same program.
pub fn generate(seed: u64, params: GenParams) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = rng.gen_range(1..=params.max_depth.max(1));
    let mut methods = Vec::new();
    let mut procs = vec![Proc { name: "main".into(), arity: 0, level: 0, owner: None }];
    if levels > 1 && params.max_width >= 2 {
        for i in 0..rng.gen_range(0..=2) {
            let width = rng.gen_range(2..=params.max_width);
            let arity = rng.gen_range(1..=3);
            let level = rng.gen_range(1..levels);
            if procs.len() + width > params.max_procs {
                break;
            }
            let classes: Vec<String> = (0..width).map(|j| format!("C{i}x{j}")).collect();
            for c in &classes {
                procs.push(Proc { name: format!("m{i}@{c}"), arity, level, owner: Some(c.clone()) });
            }
            methods.push(Method { name: format!("m{i}"), arity, level, classes });
        }
    }
    let mut i = 0;
    while levels > 1 && procs.len() < params.max_procs && rng.gen_bool(0.8) {
        let level = rng.gen_range(1..levels);
        procs.push(Proc { name: format!("p{i}"), arity: rng.gen_range(0..=3), level, owner: None });
        i += 1;
    }
    let mut g = Gen { rng, params, methods, procs, labels: 0 };

    let mut src = String::from("class Obj {}\n");
    for (i, m) in g.methods.iter().enumerate() {
        src += &format!("class B{i} {{ abstract {}; }}\n", m.name);
        for c in &m.classes {
            src += &format!("class {c} : B{i} {{ method {} = {}@{c}; }}\n", m.name, m.name);
        }
    }
    for p in 0..g.procs.len() {
        let body = g.body(p);
        let params: Vec<String> = (0..g.procs[p].arity).map(|i| format!("p{i}")).collect();
        src += &format!("proc {}({}) {{ {body} }}\n", g.procs[p].name, params.join(", "));
    }
    src += "root main;\n";
    parse(&src).unwrap_or_else(|e| panic!("generated program is invalid: {e}\n{src}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_is_single_empty_root() {
        let p = generate(0, GenParams::minimal());
        assert_eq!(p.procs.len(), 1);
        assert!(p.procs[0].body.is_empty());
        assert_eq!(p.roots.len(), 1);
    }

    #[test]
    fn deterministic_and_valid() {
        for seed in 0..200 {
            let p = generate(seed, GenParams::default());
            assert_eq!(p, generate(seed, GenParams::default()));
            assert!(p.procs.len() <= 12);
        }
    }
}
