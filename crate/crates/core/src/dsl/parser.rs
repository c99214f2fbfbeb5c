//! Lexer and recursive-descent parser for generator descriptions.
//!
//! ```text
//! spec      := decl* part+
//! decl      := "kernel" IDENT profile [scaletag] ";"
//!            | "const" IDENT "=" NUMBER [scaletag] ";"
//! scaletag  := "scale" ("eps" | "inveps")
//! profile   := ("gaussian" | "tophat" | "exponential") "(" NUMBER ")"
//!            | "table" "(" STRING ")"
//! part      := ("death" | "birth" | "hop") "=" expr ";"
//! expr      := term (("+" | "-") term)*
//! term      := factor ("*" factor)*
//! factor    := NUMBER [scaletag] | IDENT | IDENT "(" disp ")"
//!            | "exp" "(" expr ")" | "sum" "[" IDENT "in" domain "]" term
//!            | "(" expr ")" | "-" factor
//! domain    := "gamma" [ "\" var ]
//! disp      := var "-" var
//! var       := "x" | "y" | IDENT
//! ```
//!
//! A `sum` binds the remainder of its enclosing product, so
//! `sum[p in gamma] a(x-p) * exp(-sum[u in gamma\p] phi(p-u))` places the
//! exponential inside the sum over `p`, matching the usual mathematical
//! reading. `#` starts a comment running to end of line. Tabulated kernels
//! load `x,value` CSV rows from the quoted path.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelProfile, Scaling};

use super::ast::{ConstDecl, Domain, GeneratorSpec, PartKind, RateAst, Var};

const RESERVED: &[&str] = &[
    "x", "y", "exp", "sum", "in", "gamma", "scale", "eps", "inveps", "kernel", "const", "death",
    "birth", "hop", "gaussian", "tophat", "exponential", "table", "rho", "mass", "conv",
];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Sym(char),
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let bump = |ch: char, line: &mut usize, col: &mut usize| {
            if ch == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        if c.is_whitespace() {
            chars.next();
            bump(c, &mut line, &mut col);
            continue;
        }
        if c == '#' {
            while let Some(&ch) = chars.peek() {
                chars.next();
                bump(ch, &mut line, &mut col);
                if ch == '\n' {
                    break;
                }
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_ascii_alphanumeric() || ch == '_' {
                    s.push(ch);
                    chars.next();
                    bump(ch, &mut line, &mut col);
                } else {
                    break;
                }
            }
            out.push(Spanned { tok: Tok::Ident(s), line: tline, col: tcol });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            let mut saw_exp = false;
            while let Some(&ch) = chars.peek() {
                if ch.is_ascii_digit() || ch == '.' {
                    s.push(ch);
                    chars.next();
                    bump(ch, &mut line, &mut col);
                } else if (ch == 'e' || ch == 'E') && !saw_exp {
                    // Exponent only if followed by digit or sign+digit.
                    let mut look = chars.clone();
                    look.next();
                    let next = look.peek().copied();
                    let ok = match next {
                        Some(d) if d.is_ascii_digit() => true,
                        Some('+') | Some('-') => {
                            look.next();
                            matches!(look.peek(), Some(d) if d.is_ascii_digit())
                        }
                        _ => false,
                    };
                    if !ok {
                        break;
                    }
                    saw_exp = true;
                    s.push(ch);
                    chars.next();
                    bump(ch, &mut line, &mut col);
                    if let Some(&sign @ ('+' | '-')) = chars.peek() {
                        s.push(sign);
                        chars.next();
                        bump(sign, &mut line, &mut col);
                    }
                } else {
                    break;
                }
            }
            let v: f64 = s.parse().map_err(|_| Error::Parse {
                line: tline,
                col: tcol,
                msg: format!("malformed number literal `{s}`"),
            })?;
            out.push(Spanned { tok: Tok::Num(v), line: tline, col: tcol });
            continue;
        }
        if c == '"' {
            chars.next();
            bump(c, &mut line, &mut col);
            let mut s = String::new();
            let mut closed = false;
            while let Some(&ch) = chars.peek() {
                chars.next();
                bump(ch, &mut line, &mut col);
                if ch == '"' {
                    closed = true;
                    break;
                }
                s.push(ch);
            }
            if !closed {
                return Err(Error::Parse {
                    line: tline,
                    col: tcol,
                    msg: "unterminated string literal".into(),
                });
            }
            out.push(Spanned { tok: Tok::Str(s), line: tline, col: tcol });
            continue;
        }
        if "+-*()[]\\;=,".contains(c) {
            chars.next();
            bump(c, &mut line, &mut col);
            out.push(Spanned { tok: Tok::Sym(c), line: tline, col: tcol });
            continue;
        }
        return Err(Error::Parse {
            line: tline,
            col: tcol,
            msg: format!("unexpected character `{c}`"),
        });
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

pub struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    table_loader: &'a dyn Fn(&str) -> Result<String>,
}

/// Parse a generator description, loading tabulated kernels from disk.
pub fn parse_generator(src: &str) -> Result<GeneratorSpec> {
    let loader = |path: &str| -> Result<String> { Ok(std::fs::read_to_string(path)?) };
    parse_generator_with_loader(src, &loader)
}

/// Parse with an injected loader for `table("…")` kernel files.
pub fn parse_generator_with_loader(
    src: &str,
    table_loader: &dyn Fn(&str) -> Result<String>,
) -> Result<GeneratorSpec> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, table_loader };
    p.parse_spec()
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> (usize, usize) {
        let s = &self.toks[self.pos];
        (s.line, s.col)
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (line, col) = self.span();
        Err(Error::Parse { line, col, msg: msg.into() })
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Sym(c) {
            self.advance();
            Ok(())
        } else {
            self.err(format!("expected `{c}`, found {}", describe(self.peek())))
        }
    }

    fn expect_number(&mut self) -> Result<f64> {
        // A leading minus is allowed in declarations like `const c = -0.5`.
        let neg = if *self.peek() == Tok::Sym('-') {
            self.advance();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Num(v) => {
                self.advance();
                Ok(if neg { -v } else { v })
            }
            t => self.err(format!("expected a number, found {}", describe(&t))),
        }
    }

    fn expect_ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            t => self.err(format!("expected an identifier, found {}", describe(&t))),
        }
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn parse_spec(&mut self) -> Result<GeneratorSpec> {
        let mut kernels: BTreeMap<String, Kernel> = BTreeMap::new();
        let mut consts: BTreeMap<String, ConstDecl> = BTreeMap::new();
        let mut parts: Vec<(PartKind, RateAst)> = Vec::new();

        loop {
            if self.at_kw("kernel") || self.at_kw("const") {
                if !parts.is_empty() {
                    return self.err("declarations must precede the rate parts");
                }
                self.parse_decl(&mut kernels, &mut consts)?;
            } else if self.at_kw("death") || self.at_kw("birth") || self.at_kw("hop") {
                let kind = match self.advance() {
                    Tok::Ident(s) if s == "death" => PartKind::Death,
                    Tok::Ident(s) if s == "birth" => PartKind::Birth,
                    _ => PartKind::Hop,
                };
                if parts.iter().any(|(k, _)| *k == kind) {
                    return Err(Error::Declaration(format!(
                        "part `{}` is defined twice",
                        kind.name()
                    )));
                }
                self.expect_sym('=')?;
                let mut scope = Vec::new();
                let ast =
                    self.parse_expr(kind, &kernels, &consts, &mut scope)?;
                self.expect_sym(';')?;
                parts.push((kind, ast));
            } else if *self.peek() == Tok::Eof {
                break;
            } else {
                return self.err(format!(
                    "expected `kernel`, `const`, `death`, `birth` or `hop`, found {}",
                    describe(self.peek())
                ));
            }
        }
        if parts.is_empty() {
            return Err(Error::Declaration(
                "a generator needs at least one of death, birth, hop".into(),
            ));
        }
        Ok(GeneratorSpec { kernels, consts, parts })
    }

    fn parse_decl(
        &mut self,
        kernels: &mut BTreeMap<String, Kernel>,
        consts: &mut BTreeMap<String, ConstDecl>,
    ) -> Result<()> {
        let which = self.expect_ident()?;
        let name = self.expect_ident()?;
        if RESERVED.contains(&name.as_str()) {
            return Err(Error::Declaration(format!("`{name}` is a reserved word")));
        }
        if kernels.contains_key(&name) || consts.contains_key(&name) {
            return Err(Error::Declaration(format!("`{name}` is declared twice")));
        }
        if which == "kernel" {
            let profile = self.parse_profile()?;
            let scaling = self.parse_scaletag()?;
            self.expect_sym(';')?;
            if scaling == Scaling::InvEps {
                return Err(Error::Declaration(format!(
                    "kernel `{name}`: kernels scale with `eps` or stay fixed, not `inveps`"
                )));
            }
            kernels.insert(name.clone(), Kernel::new(&name, profile, 1.0, scaling)?);
        } else {
            self.expect_sym('=')?;
            let value = self.expect_number()?;
            let scaling = self.parse_scaletag()?;
            self.expect_sym(';')?;
            consts.insert(name.clone(), ConstDecl { name, value, scaling });
        }
        Ok(())
    }

    fn parse_profile(&mut self) -> Result<KernelProfile> {
        let kind = self.expect_ident()?;
        self.expect_sym('(')?;
        let profile = match kind.as_str() {
            "gaussian" => {
                let sigma = self.expect_number()?;
                KernelProfile::Gaussian { sigma }
            }
            "tophat" => {
                let radius = self.expect_number()?;
                KernelProfile::TopHat { radius }
            }
            "exponential" => {
                let kappa = self.expect_number()?;
                KernelProfile::Exponential { kappa }
            }
            "table" => {
                let path = match self.advance() {
                    Tok::Str(s) => s,
                    t => return self.err(format!("expected a quoted path, found {}", describe(&t))),
                };
                let text = (self.table_loader)(&path)?;
                parse_table(&path, &text)?
            }
            other => {
                return self.err(format!(
                    "unknown profile `{other}` (expected gaussian, tophat, exponential or table)"
                ))
            }
        };
        self.expect_sym(')')?;
        Ok(profile)
    }

    fn parse_scaletag(&mut self) -> Result<Scaling> {
        if !self.at_kw("scale") {
            return Ok(Scaling::Fixed);
        }
        self.advance();
        let tag = self.expect_ident()?;
        match tag.as_str() {
            "eps" => Ok(Scaling::Eps),
            "inveps" => Ok(Scaling::InvEps),
            other => self.err(format!("unknown scaling `{other}` (expected eps or inveps)")),
        }
    }

    fn parse_expr(
        &mut self,
        part: PartKind,
        kernels: &BTreeMap<String, Kernel>,
        consts: &BTreeMap<String, ConstDecl>,
        scope: &mut Vec<String>,
    ) -> Result<RateAst> {
        let mut acc = self.parse_term(part, kernels, consts, scope)?;
        loop {
            match self.peek() {
                Tok::Sym('+') => {
                    self.advance();
                    let rhs = self.parse_term(part, kernels, consts, scope)?;
                    acc = RateAst::Add(Box::new(acc), Box::new(rhs));
                }
                Tok::Sym('-') => {
                    self.advance();
                    let rhs = self.parse_term(part, kernels, consts, scope)?;
                    acc = RateAst::Sub(Box::new(acc), Box::new(rhs));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_term(
        &mut self,
        part: PartKind,
        kernels: &BTreeMap<String, Kernel>,
        consts: &BTreeMap<String, ConstDecl>,
        scope: &mut Vec<String>,
    ) -> Result<RateAst> {
        let mut acc: Option<RateAst> = None;
        loop {
            let f = self.parse_factor(part, kernels, consts, scope)?;
            acc = Some(match acc {
                Some(a) => RateAst::Mul(Box::new(a), Box::new(f)),
                None => f,
            });
            if *self.peek() == Tok::Sym('*') {
                self.advance();
            } else {
                return Ok(acc.unwrap());
            }
        }
    }

    fn parse_sum(
        &mut self,
        part: PartKind,
        kernels: &BTreeMap<String, Kernel>,
        consts: &BTreeMap<String, ConstDecl>,
        scope: &mut Vec<String>,
    ) -> Result<RateAst> {
        self.advance(); // `sum`
        self.expect_sym('[')?;
        let var = self.expect_ident()?;
        if RESERVED.contains(&var.as_str())
            || kernels.contains_key(&var)
            || consts.contains_key(&var)
            || scope.contains(&var)
        {
            return self.err(format!("sum variable `{var}` shadows an existing name"));
        }
        if !self.at_kw("in") {
            return self.err("expected `in`");
        }
        self.advance();
        let domain = self.parse_domain(part, scope)?;
        self.expect_sym(']')?;
        scope.push(var.clone());
        let body = self.parse_term(part, kernels, consts, scope)?;
        scope.pop();
        Ok(RateAst::Sum { var, domain, body: Box::new(body) })
    }

    fn parse_domain(&mut self, part: PartKind, scope: &[String]) -> Result<Domain> {
        if !self.at_kw("gamma") {
            return self.err("expected `gamma`");
        }
        self.advance();
        if *self.peek() != Tok::Sym('\\') {
            return Ok(Domain::Gamma);
        }
        self.advance();
        let v = self.parse_var(part, scope)?;
        if v == Var::Y {
            return self.err("`y` is an arrival location, never a member of gamma");
        }
        Ok(Domain::GammaExcluding(v))
    }

    fn parse_var(&mut self, part: PartKind, scope: &[String]) -> Result<Var> {
        let name = self.expect_ident()?;
        match name.as_str() {
            "x" => Ok(Var::X),
            "y" => {
                if part != PartKind::Hop {
                    self.err("`y` only exists in the hop part")
                } else {
                    Ok(Var::Y)
                }
            }
            _ => {
                if scope.contains(&name) {
                    Ok(Var::Bound(name))
                } else {
                    self.err(format!("unknown variable `{name}`"))
                }
            }
        }
    }

    fn parse_factor(
        &mut self,
        part: PartKind,
        kernels: &BTreeMap<String, Kernel>,
        consts: &BTreeMap<String, ConstDecl>,
        scope: &mut Vec<String>,
    ) -> Result<RateAst> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.advance();
                let scaling = self.parse_scaletag()?;
                if scaling == Scaling::Fixed {
                    Ok(RateAst::Num(v))
                } else {
                    Ok(RateAst::ScaledNum { value: v, scaling })
                }
            }
            Tok::Sym('-') => {
                self.advance();
                let f = self.parse_factor(part, kernels, consts, scope)?;
                Ok(RateAst::Neg(Box::new(f)))
            }
            Tok::Sym('(') => {
                self.advance();
                let e = self.parse_expr(part, kernels, consts, scope)?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Ident(name) if name == "exp" => {
                self.advance();
                self.expect_sym('(')?;
                let arg = self.parse_expr(part, kernels, consts, scope)?;
                self.expect_sym(')')?;
                Ok(RateAst::Exp(Box::new(arg)))
            }
            // A sum swallows the remainder of the product: its body is a full
            // term, so everything after `sum[v in …]` up to +, -, ) or ; is
            // parsed inside the sum's scope.
            Tok::Ident(name) if name == "sum" => self.parse_sum(part, kernels, consts, scope),
            Tok::Ident(name) => {
                if kernels.contains_key(&name) {
                    self.advance();
                    self.expect_sym('(')?;
                    let from = self.parse_var(part, scope)?;
                    self.expect_sym('-')?;
                    let to = self.parse_var(part, scope)?;
                    self.expect_sym(')')?;
                    Ok(RateAst::KernelAt { kernel: name, from, to })
                } else if consts.contains_key(&name) {
                    self.advance();
                    Ok(RateAst::Const(name))
                } else {
                    self.err(format!("undeclared identifier `{name}`"))
                }
            }
            t => self.err(format!("unexpected {}", describe(&t))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Num(v) => format!("number `{v}`"),
        Tok::Str(s) => format!("string \"{s}\""),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

/// Parse a kernel table: `x,value` rows, `#` comments, blank lines ignored.
fn parse_table(path: &str, text: &str) -> Result<KernelProfile> {
    let mut xs = Vec::new();
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let bad = |what: &str| {
            Error::Config(format!("kernel table {path} line {}: {what}", i + 1))
        };
        let x: f64 = cols
            .next()
            .ok_or_else(|| bad("missing x column"))?
            .trim()
            .parse()
            .map_err(|_| bad("x is not a number"))?;
        let v: f64 = cols
            .next()
            .ok_or_else(|| bad("missing value column"))?
            .trim()
            .parse()
            .map_err(|_| bad("value is not a number"))?;
        if cols.next().is_some() {
            return Err(bad("expected exactly two columns"));
        }
        xs.push(x);
        values.push(v);
    }
    Ok(KernelProfile::Table { xs, values })
}
