use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::{
    AliasAssertion, AliasKind, CallKind, ClassDecl, Const, Expectation, LValue, Name, Offset,
    ProcId, Procedure, Program, RValue, SiteId, Statement, ValidationError,
};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Punct(char),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const RESERVED: &[&str] = &["vcall", "scall", "new", "return"];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: String| ParseError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$')
            {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Token { tok: Tok::Ident(s), line: tl, col: tc });
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            let v = s
                .parse::<i64>()
                .map_err(|e| err(tl, tc, format!("bad integer {s}: {e}")))?;
            out.push(Token { tok: Tok::Int(v), line: tl, col: tc });
            continue;
        }
        if c == '"' {
            i += 1;
            col += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(tl, tc, "unterminated string".into())),
                    Some('"') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\\') => {
                        let esc = chars.get(i + 1).copied();
                        match esc {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some('n') => s.push('\n'),
                            _ => return Err(err(line, col, "bad escape".into())),
                        }
                        i += 2;
                        col += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                        col += 1;
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), line: tl, col: tc });
            continue;
        }
        if "{}()[];,.=:@".contains(c) {
            i += 1;
            col += 1;
            out.push(Token { tok: Tok::Punct(c), line: tl, col: tc });
            continue;
        }
        return Err(err(tl, tc, format!("unexpected character {c:?}")));
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    next_site: u32,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(ParseError::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Str(s) => format!("{s:?}"),
            Tok::Punct(c) => format!("`{c}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_punct(&self, c: char) -> bool {
        *self.peek() == Tok::Punct(c)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_punct(&mut self, c: char) -> PResult<()> {
        if self.is_punct(c) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{c}`, found {}", self.describe()))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(Arc::from(s.as_str()))
            }
            _ => self.error(format!("expected a name, found {}", self.describe())),
        }
    }

    fn var_name(&mut self) -> PResult<Name> {
        if let Tok::Ident(s) = self.peek() {
            if RESERVED.contains(&s.as_str()) {
                return self.error(format!("`{s}` is reserved"));
            }
        }
        self.ident()
    }

    /// `NAME ("@" NAME)?`
    fn proc_name(&mut self) -> PResult<ProcId> {
        let base = self.ident()?;
        if self.is_punct('@') {
            self.bump();
            let suffix = self.ident()?;
            Ok(ProcId(Arc::from(format!("{base}@{suffix}").as_str())))
        } else {
            Ok(ProcId(base))
        }
    }

    fn site(&mut self) -> SiteId {
        let s = SiteId(self.next_site);
        self.next_site += 1;
        s
    }

    fn program(&mut self) -> PResult<Program> {
        let mut classes = Vec::new();
        let mut procs = Vec::new();
        let mut roots = Vec::new();
        let mut assertions = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(kw) if kw == "class" => classes.push(self.class_decl()?),
                Tok::Ident(kw) if kw == "proc" => procs.push(self.proc_decl()?),
                Tok::Ident(kw) if kw == "root" => {
                    self.bump();
                    roots.push(self.proc_name()?);
                    self.expect_punct(';')?;
                }
                Tok::Ident(kw) if kw == "assert" => assertions.push(self.assert_decl()?),
                _ => {
                    return self.error(format!(
                        "expected `class`, `proc`, `root` or `assert`, found {}",
                        self.describe()
                    ))
                }
            }
        }
        Ok(Program::new(classes, procs, roots, assertions)?)
    }

    fn class_decl(&mut self) -> PResult<ClassDecl> {
        self.expect_kw("class")?;
        let name = self.ident()?;
        let mut supers = Vec::new();
        if self.is_punct(':') {
            self.bump();
            supers.push(self.ident()?);
            while self.is_punct(',') {
                self.bump();
                supers.push(self.ident()?);
            }
        }
        self.expect_punct('{')?;
        let mut methods = BTreeMap::new();
        let mut abstracts = Vec::new();
        while !self.is_punct('}') {
            if self.is_kw("method") {
                self.bump();
                let m = self.ident()?;
                self.expect_punct('=')?;
                let p = self.proc_name()?;
                self.expect_punct(';')?;
                if methods.insert(m.clone(), p).is_some() {
                    return Err(ValidationError::DuplicateMethod {
                        class: name.to_string(),
                        method: m.to_string(),
                    }
                    .into());
                }
            } else if self.is_kw("abstract") {
                self.bump();
                abstracts.push(self.ident()?);
                self.expect_punct(';')?;
            } else {
                return self.error(format!(
                    "expected `method`, `abstract` or `}}`, found {}",
                    self.describe()
                ));
            }
        }
        self.bump();
        Ok(ClassDecl { name, supers, methods, abstracts })
    }

    fn proc_decl(&mut self) -> PResult<Procedure> {
        self.expect_kw("proc")?;
        let id = self.proc_name()?;
        self.expect_punct('(')?;
        let mut params = Vec::new();
        if !self.is_punct(')') {
            params.push(self.var_name()?);
            while self.is_punct(',') {
                self.bump();
                params.push(self.var_name()?);
            }
        }
        self.expect_punct(')')?;
        self.expect_punct('{')?;
        let mut body = Vec::new();
        while !self.is_punct('}') {
            if *self.peek() == Tok::Eof {
                return self.error("unterminated procedure body");
            }
            body.push(self.stmt()?);
        }
        self.bump();
        Ok(Procedure { id, params, body })
    }

    fn stmt(&mut self) -> PResult<Statement> {
        if self.is_kw("return") {
            self.bump();
            let value = self.lvalue()?;
            self.expect_punct(';')?;
            let site = self.site();
            return Ok(Statement::Return { site, value });
        }
        if self.is_kw("vcall") || self.is_kw("scall") {
            return self.call(None);
        }
        let lhs = self.lvalue()?;
        self.expect_punct('=')?;
        if self.is_kw("vcall") || self.is_kw("scall") {
            return self.call(Some(lhs));
        }
        let rhs = self.rvalue()?;
        self.expect_punct(';')?;
        let site = self.site();
        Ok(Statement::Assign { site, lhs, rhs })
    }

    fn call(&mut self, result: Option<LValue>) -> PResult<Statement> {
        let kind = if self.is_kw("vcall") {
            CallKind::Virtual
        } else {
            CallKind::Static
        };
        self.bump();
        let callee = match kind {
            CallKind::Virtual => self.ident()?,
            CallKind::Static => self.proc_name()?.0,
        };
        self.expect_punct('(')?;
        let mut args = Vec::new();
        if !self.is_punct(')') {
            args.push(self.lvalue()?);
            while self.is_punct(',') {
                self.bump();
                args.push(self.lvalue()?);
            }
        }
        self.expect_punct(')')?;
        self.expect_punct(';')?;
        if kind == CallKind::Virtual && args.is_empty() {
            return self.error("a virtual call needs a receiver argument");
        }
        let site = self.site();
        Ok(Statement::Call { site, result, callee, args, kind })
    }

    fn lvalue(&mut self) -> PResult<LValue> {
        let base = self.var_name()?;
        let mut offsets = Vec::new();
        loop {
            if self.is_punct('.') {
                self.bump();
                offsets.push(Offset::Field(self.ident()?));
            } else if self.is_punct('[') {
                self.bump();
                let off = match self.peek().clone() {
                    Tok::Int(i) => {
                        self.bump();
                        Offset::ConstIndex(Const::Int(i))
                    }
                    Tok::Str(s) => {
                        self.bump();
                        Offset::ConstIndex(Const::Str(Arc::from(s.as_str())))
                    }
                    _ => Offset::VarIndex(self.var_name()?),
                };
                self.expect_punct(']')?;
                offsets.push(off);
            } else {
                break;
            }
        }
        Ok(LValue { base, offsets })
    }

    fn rvalue(&mut self) -> PResult<RValue> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(RValue::Const(Const::Int(i)))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(RValue::Const(Const::Str(Arc::from(s.as_str()))))
            }
            Tok::Ident(kw) if kw == "new" && matches!(self.peek_at(1), Tok::Ident(_)) => {
                self.bump();
                let class = self.ident()?;
                self.expect_punct('@')?;
                let label: Name = match self.bump() {
                    Tok::Ident(s) => Arc::from(s.as_str()),
                    Tok::Int(i) => Arc::from(i.to_string().as_str()),
                    _ => return self.error("expected an allocation-site label"),
                };
                Ok(RValue::New { class, label })
            }
            _ => Ok(RValue::Lv(self.lvalue()?)),
        }
    }

    fn assert_decl(&mut self) -> PResult<AliasAssertion> {
        self.expect_kw("assert")?;
        let kind = if self.is_kw("alias") {
            AliasKind::MustAlias
        } else if self.is_kw("noalias") {
            AliasKind::NotAlias
        } else {
            return self.error(format!("expected `alias` or `noalias`, found {}", self.describe()));
        };
        self.bump();
        let proc = self.proc_name()?;
        self.expect_punct('.')?;
        let a = self.var_name()?;
        self.expect_punct(',')?;
        let proc2 = self.proc_name()?;
        if proc2 != proc {
            return self.error("both assertion operands must name the same procedure");
        }
        self.expect_punct('.')?;
        let b = self.var_name()?;
        self.expect_kw("expect")?;
        let pass = self.outcome()?;
        let mut overrides = Vec::new();
        while let Tok::Ident(_) = self.peek() {
            let mode = self.ident()?;
            self.expect_punct('=')?;
            overrides.push((mode, self.outcome()?));
        }
        self.expect_punct(';')?;
        Ok(AliasAssertion {
            proc,
            kind,
            vars: (a, b),
            expected: Expectation { pass, overrides },
        })
    }

    fn outcome(&mut self) -> PResult<bool> {
        if self.is_kw("pass") {
            self.bump();
            Ok(true)
        } else if self.is_kw("fail") {
            self.bump();
            Ok(false)
        } else {
            self.error(format!("expected `pass` or `fail`, found {}", self.describe()))
        }
    }
}

/// Parses and validates a program in the textual IR.
pub fn parse(src: &str) -> Result<Program, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, next_site: 0 };
    p.program()
}
