use std::fmt::Write;

use super::{
    AliasKind, CallKind, Const, LValue, Offset, Program, RValue, Statement,
};

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub(crate) fn const_src(c: &Const) -> String {
    match c {
        Const::Str(s) => escape(s),
        Const::Int(i) => i.to_string(),
    }
}

pub(crate) fn lvalue_src(lv: &LValue) -> String {
    let mut s = lv.base.to_string();
    for o in &lv.offsets {
        match o {
            Offset::Field(f) => {
                s.push('.');
                s.push_str(f);
            }
            Offset::ConstIndex(c) => {
                let _ = write!(s, "[{}]", const_src(c));
            }
            Offset::VarIndex(v) => {
                let _ = write!(s, "[{v}]");
            }
        }
    }
    s
}

pub(crate) fn statement_src(stmt: &Statement) -> String {
    match stmt {
        Statement::Assign { lhs, rhs, .. } => {
            let rhs = match rhs {
                RValue::Lv(lv) => lvalue_src(lv),
                RValue::Const(c) => const_src(c),
                RValue::New { class, label } => format!("new {class}@{label}"),
            };
            format!("{} = {rhs};", lvalue_src(lhs))
        }
        Statement::Call { result, callee, args, kind, .. } => {
            let kw = match kind {
                CallKind::Virtual => "vcall",
                CallKind::Static => "scall",
            };
            let args: Vec<String> = args.iter().map(lvalue_src).collect();
            let call = format!("{kw} {callee}({});", args.join(", "));
            match result {
                Some(r) => format!("{} = {call}", lvalue_src(r)),
                None => call,
            }
        }
        Statement::Return { value, .. } => format!("return {};", lvalue_src(value)),
    }
}

pub(crate) fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for c in &p.classes {
        out.push_str("class ");
        out.push_str(&c.name);
        if !c.supers.is_empty() {
            let supers: Vec<&str> = c.supers.iter().map(|s| &**s).collect();
            let _ = write!(out, " : {}", supers.join(", "));
        }
        out.push_str(" {\n");
        for a in &c.abstracts {
            let _ = writeln!(out, "  abstract {a};");
        }
        for (m, proc) in &c.methods {
            let _ = writeln!(out, "  method {m} = {proc};");
        }
        out.push_str("}\n");
    }
    for proc in &p.procs {
        let params: Vec<&str> = proc.params.iter().map(|s| &**s).collect();
        let _ = writeln!(out, "proc {}({}) {{", proc.id, params.join(", "));
        for s in &proc.body {
            let _ = writeln!(out, "  {}", statement_src(s));
        }
        out.push_str("}\n");
    }
    for r in &p.roots {
        let _ = writeln!(out, "root {r};");
    }
    for a in &p.assertions {
        let kind = match a.kind {
            AliasKind::MustAlias => "alias",
            AliasKind::NotAlias => "noalias",
        };
        let outcome = |b: bool| if b { "pass" } else { "fail" };
        let _ = write!(
            out,
            "assert {kind} {p}.{}, {p}.{} expect {}",
            a.vars.0,
            a.vars.1,
            outcome(a.expected.pass),
            p = a.proc
        );
        for (m, b) in &a.expected.overrides {
            let _ = write!(out, " {m}={}", outcome(*b));
        }
        out.push_str(";\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse;

    #[test]
    fn round_trip_small() {
        let src = r#"
            class X { abstract poly; }
            class Y : X { method poly = poly@Y; }
            proc poly@Y(this, o) { return o; }
            proc main() {
              a = new Y@1;
              k = "a\"b";
              a.f[k][2] = a;
              r = vcall poly(a, a);
              scall main();
            }
            root main;
            assert noalias main.a, main.r expect fail hia=pass;
        "#;
        let p = parse(src).unwrap();
        let again = parse(&p.to_source()).unwrap();
        assert_eq!(p, again);
    }
}
