//! Concrete syntax.
//!
//! ```text
//! program ::= def* expr
//! def     ::= "def" ident [":" type] "=" expr
//! ```
//!
//! A def body extends to the next token in the first column, so the main
//! expression and further defs start at column 1 and continuation lines of a
//! body are indented.
//!
//! Expressions follow ML conventions. Binary operators, application and
//! pairs are all evaluated right to left. Sugar expands as
//!
//! * `let x = e1 in e2`      to `(fun x -> e2) e1`
//! * `e1; e2`                to `let _ = e1 in e2`
//! * `let (x, y) = e in b`   through `fst`/`snd` of a fresh variable
//! * `a || b`, `a && b`      to conditionals
//! * `e1 ||| e2`             to a forked `e1` joined through a reference cell,
//!   while the parent runs `e2`
//!
//! `diverge` and `nondet` are predefined unless the program defines them.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use thiserror::Error;

use super::subst::{free_vars, subst_expr};
use super::syntax::{BinOp, Binder, Expr, ExprRef};
use super::types::Type;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("unsupported fragment: {0}")]
    Unsupported(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    TyVar(String),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const KEYWORDS: &[&str] = &[
    "let", "rec", "in", "fun", "if", "then", "else", "case", "of", "inl", "inr", "ref", "fst",
    "snd", "fork", "rand", "alloctape", "faa", "cas", "true", "false", "mod", "def",
];

// longest first so that greedy matching works
const SYMBOLS: &[&str] = &[
    "|||", "->", "=>", ":=", "<=", "||", "&&", "(", ")", ",", ";", "=", "<", "+", "-", "*", "!",
    "|", ":", "_", ".",
];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, msg: String| ParseError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
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
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = (line, col);
        if c == 'ℓ' || c == 'ι' {
            return Err(err(
                line,
                col,
                "location and label literals are not allowed in source".into(),
            ));
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            out.push(Token {
                tok: Tok::Int(s.parse().expect("digits")),
                line: start.0,
                col: start.1,
            });
            col += j - i;
            i = j;
            continue;
        }
        if c.is_alphabetic() || (c == '_' && i + 1 < chars.len() && is_ident_char(chars[i + 1])) {
            let mut j = i;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            out.push(Token {
                tok: Tok::Ident(s),
                line: start.0,
                col: start.1,
            });
            col += j - i;
            i = j;
            continue;
        }
        if c == '\'' {
            let mut j = i + 1;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            out.push(Token {
                tok: Tok::TyVar(s),
                line: start.0,
                col: start.1,
            });
            col += j - i;
            i = j;
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                out.push(Token {
                    tok: Tok::Sym(s),
                    line: start.0,
                    col: start.1,
                });
                i += s.chars().count();
                col += s.chars().count();
            }
            None => return Err(err(line, col, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

/// A top-level `def`.
#[derive(Clone, Debug)]
pub struct Def {
    pub name: String,
    pub ty: Option<Type>,
    pub body: ExprRef,
}

/// A parsed source file: `defs` have prior defs already substituted into
/// them, `main` has every def and prelude function substituted.
#[derive(Clone, Debug)]
pub struct Program {
    pub defs: Vec<Def>,
    pub main: ExprRef,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    fresh: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
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
        Err(ParseError::Syntax {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Int(n) => format!("`{n}`"),
            Tok::Ident(s) | Tok::TyVar(s) => format!("`{s}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected `{s}`, found {}", self.describe()))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.error(format!("expected `{k}`, found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.error(format!("expected an identifier, found {}", self.describe())),
        }
    }

    fn fresh(&mut self, base: &str) -> String {
        self.fresh += 1;
        format!("${base}{}", self.fresh)
    }

    fn program(&mut self) -> PResult<(Vec<Def>, ExprRef)> {
        let mut defs = Vec::new();
        while self.eat_kw("def") {
            let name = self.ident()?;
            let ty = if self.eat_sym(":") {
                Some(self.ty()?)
            } else {
                None
            };
            self.expect_sym("=")?;
            let body = self.def_body()?;
            defs.push(Def { name, ty, body });
        }
        let main = self.expr()?;
        if *self.peek() != Tok::Eof {
            return self.error(format!("unexpected {}", self.describe()));
        }
        Ok((defs, main))
    }

    /// A def body runs until the next token in the first column.
    fn def_body(&mut self) -> PResult<ExprRef> {
        let end = (self.pos + 1..self.toks.len())
            .find(|&i| self.toks[i].col == 1 || self.toks[i].tok == Tok::Eof)
            .unwrap_or(self.toks.len() - 1);
        let mut toks = self.toks[self.pos..end].to_vec();
        let last = &self.toks[end];
        toks.push(Token {
            tok: Tok::Eof,
            line: last.line,
            col: last.col,
        });
        let mut sub = Parser {
            toks,
            pos: 0,
            fresh: self.fresh,
        };
        let body = sub.expr()?;
        if *sub.peek() != Tok::Eof {
            return sub.error(format!("unexpected {}", sub.describe()));
        }
        self.fresh = sub.fresh;
        self.pos = end;
        Ok(body)
    }

    fn expr(&mut self) -> PResult<ExprRef> {
        let e = self.par()?;
        if self.eat_sym(";") {
            let rest = self.expr()?;
            return Ok(Expr::seq(e, rest));
        }
        Ok(e)
    }

    fn par(&mut self) -> PResult<ExprRef> {
        let mut e = self.assign()?;
        while self.eat_sym("|||") {
            let r = self.assign()?;
            e = self.par_template(e, r);
        }
        Ok(e)
    }

    /// The child thread runs `e1` and publishes `inr v` in a fresh cell; the
    /// parent runs `e2` and then spins until the cell is filled.
    fn par_template(&mut self, e1: ExprRef, e2: ExprRef) -> ExprRef {
        let h = self.fresh("h");
        let j = self.fresh("j");
        let v = self.fresh("v");
        let hv = || Expr::var(&h);
        let peek = |k: ExprRef| {
            Expr::case(
                Expr::load(hv()),
                Binder::Anon,
                k,
                Binder::named(&v),
                Expr::var(&v),
            )
        };
        let spin = Expr::app(
            Expr::rec(
                Binder::named(&j),
                Binder::Anon,
                peek(Expr::app(Expr::var(&j), Expr::unit())),
            ),
            Expr::unit(),
        );
        let join = peek(spin);
        Expr::let_(
            Binder::named(&h),
            Expr::alloc(Expr::inl(Expr::unit())),
            Expr::seq(
                Expr::fork(Expr::store(hv(), Expr::inr(e1))),
                Expr::pair(join, e2),
            ),
        )
    }

    fn assign(&mut self) -> PResult<ExprRef> {
        let e = self.or()?;
        if self.eat_sym(":=") {
            let r = self.assign()?;
            return Ok(Expr::store(e, r));
        }
        Ok(e)
    }

    fn or(&mut self) -> PResult<ExprRef> {
        let mut e = self.and()?;
        while self.eat_sym("||") {
            let r = self.and()?;
            e = Expr::if_(e, Expr::bool(true), r);
        }
        Ok(e)
    }

    fn and(&mut self) -> PResult<ExprRef> {
        let mut e = self.cmp()?;
        while self.eat_sym("&&") {
            let r = self.cmp()?;
            e = Expr::if_(e, r, Expr::bool(false));
        }
        Ok(e)
    }

    fn cmp(&mut self) -> PResult<ExprRef> {
        let e = self.add()?;
        for (s, op) in [("=", BinOp::Eq), ("<=", BinOp::Le), ("<", BinOp::Lt)] {
            if self.eat_sym(s) {
                let r = self.add()?;
                return Ok(Expr::binop(op, e, r));
            }
        }
        Ok(e)
    }

    fn add(&mut self) -> PResult<ExprRef> {
        let mut e = self.mul()?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else {
                return Ok(e);
            };
            let r = self.mul()?;
            e = Expr::binop(op, e, r);
        }
    }

    fn mul(&mut self) -> PResult<ExprRef> {
        let mut e = self.app()?;
        loop {
            let op = if self.eat_sym("*") {
                BinOp::Mul
            } else if self.eat_kw("mod") {
                BinOp::Mod
            } else {
                return Ok(e);
            };
            let r = self.app()?;
            e = Expr::binop(op, e, r);
        }
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Tok::Int(_) => true,
            Tok::Ident(s) => !KEYWORDS.contains(&s.as_str()) || s == "true" || s == "false",
            Tok::Sym(s) => *s == "(" || *s == "!",
            _ => false,
        }
    }

    fn app(&mut self) -> PResult<ExprRef> {
        let mut e = self.prefix()?;
        while self.starts_atom() {
            let a = self.atom()?;
            e = Expr::app(e, a);
        }
        Ok(e)
    }

    fn prefix(&mut self) -> PResult<ExprRef> {
        let Tok::Ident(k) = self.peek().clone() else {
            if self.eat_sym("-") {
                let e = self.prefix()?;
                if let Some(super::syntax::Val::Int(n)) = e.as_val() {
                    return Ok(Expr::val(super::syntax::Val::Int(-n)));
                }
                return Ok(Expr::binop(BinOp::Sub, Expr::int(0), e));
            }
            return self.atom();
        };
        let unary: Option<fn(ExprRef) -> ExprRef> = match k.as_str() {
            "ref" => Some(Expr::alloc),
            "fst" => Some(Expr::fst),
            "snd" => Some(Expr::snd),
            "inl" => Some(Expr::inl),
            "inr" => Some(Expr::inr),
            "fork" => Some(Expr::fork),
            "alloctape" => Some(Expr::alloc_tape),
            _ => None,
        };
        if let Some(mk) = unary {
            self.bump();
            let a = self.atom()?;
            return Ok(mk(a));
        }
        match k.as_str() {
            "rand" => {
                self.bump();
                let a = self.atom()?;
                if self.starts_atom() {
                    let b = self.atom()?;
                    return Ok(Expr::rand_lbl(a, b));
                }
                Ok(Expr::rand(a))
            }
            "faa" => {
                self.bump();
                let a = self.atom()?;
                let b = self.atom()?;
                Ok(Expr::faa(a, b))
            }
            "cas" => {
                self.bump();
                let a = self.atom()?;
                let b = self.atom()?;
                let c = self.atom()?;
                Ok(Expr::cas(a, b, c))
            }
            "let" => self.let_expr(),
            "fun" => {
                self.bump();
                let params = self.params()?;
                self.expect_sym("->")?;
                let body = self.expr()?;
                Ok(curry(params, body))
            }
            "rec" => {
                self.bump();
                Ok(self.rec_binding()?.1)
            }
            "if" => {
                self.bump();
                let c = self.expr()?;
                self.expect_kw("then")?;
                let t = self.expr()?;
                self.expect_kw("else")?;
                let f = self.assign()?;
                Ok(Expr::if_(c, t, f))
            }
            "case" => self.case_expr(),
            _ => self.atom(),
        }
    }

    /// `f p1 .. pn = body` after `rec`.
    fn rec_binding(&mut self) -> PResult<(String, ExprRef)> {
        let f = self.ident()?;
        let mut params = self.params()?;
        self.expect_sym("=")?;
        let body = self.expr()?;
        let x = params.remove(0);
        let body = curry(params, body);
        Ok((f.clone(), Expr::rec(Binder::named(&f), x, body)))
    }

    fn param(&mut self) -> PResult<Option<Binder>> {
        if self.eat_sym("_") {
            return Ok(Some(Binder::Anon));
        }
        if self.is_sym("(") && matches!(self.peek_at(1), Tok::Sym(")")) {
            self.bump();
            self.bump();
            return Ok(Some(Binder::Anon));
        }
        match self.peek() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = self.ident()?;
                Ok(Some(Binder::named(&s)))
            }
            _ => Ok(None),
        }
    }

    fn params(&mut self) -> PResult<Vec<Binder>> {
        let mut out = Vec::new();
        while let Some(p) = self.param()? {
            out.push(p);
        }
        if out.is_empty() {
            return self.error(format!("expected a parameter, found {}", self.describe()));
        }
        Ok(out)
    }

    fn let_expr(&mut self) -> PResult<ExprRef> {
        self.expect_kw("let")?;
        if self.eat_kw("rec") {
            let (f, e1) = self.rec_binding()?;
            self.expect_kw("in")?;
            let e2 = self.expr()?;
            return Ok(Expr::let_(Binder::named(&f), e1, e2));
        }
        if self.is_sym("(") && !matches!(self.peek_at(1), Tok::Sym(")")) {
            self.bump();
            let mut names = vec![self.pat_binder()?];
            while self.eat_sym(",") {
                names.push(self.pat_binder()?);
            }
            self.expect_sym(")")?;
            if names.len() < 2 {
                return self.error("tuple pattern needs at least two components");
            }
            self.expect_sym("=")?;
            let e1 = self.expr()?;
            self.expect_kw("in")?;
            let e2 = self.expr()?;
            return Ok(self.destructure(names, e1, e2));
        }
        let mut params = self.params()?;
        self.expect_sym("=")?;
        let e1 = self.expr()?;
        self.expect_kw("in")?;
        let e2 = self.expr()?;
        let x = params.remove(0);
        let e1 = if params.is_empty() {
            e1
        } else {
            curry(params, e1)
        };
        Ok(Expr::let_(x, e1, e2))
    }

    fn pat_binder(&mut self) -> PResult<Binder> {
        if self.eat_sym("_") {
            Ok(Binder::Anon)
        } else {
            Ok(Binder::named(&self.ident()?))
        }
    }

    /// `let (x1, .., xn) = e1 in e2` on right-nested pairs.
    fn destructure(&mut self, names: Vec<Binder>, e1: ExprRef, e2: ExprRef) -> ExprRef {
        let p = self.fresh("p");
        let (first, rest) = names.split_first().expect("nonempty");
        let inner = if rest.len() == 1 {
            Expr::let_(rest[0].clone(), Expr::snd(Expr::var(&p)), e2)
        } else {
            self.destructure(rest.to_vec(), Expr::snd(Expr::var(&p)), e2)
        };
        Expr::let_(
            Binder::named(&p),
            e1,
            Expr::let_(first.clone(), Expr::fst(Expr::var(&p)), inner),
        )
    }

    fn case_expr(&mut self) -> PResult<ExprRef> {
        self.expect_kw("case")?;
        let s = self.expr()?;
        self.expect_kw("of")?;
        self.eat_sym("|");
        let (l1, x1, e1) = self.case_arm()?;
        self.expect_sym("|")?;
        let (l2, x2, e2) = self.case_arm()?;
        match (l1, l2) {
            (true, false) => Ok(Expr::case(s, x1, e1, x2, e2)),
            (false, true) => Ok(Expr::case(s, x2, e2, x1, e1)),
            _ => self.error("case needs one `inl` arm and one `inr` arm"),
        }
    }

    fn case_arm(&mut self) -> PResult<(bool, Binder, ExprRef)> {
        let left = if self.eat_kw("inl") {
            true
        } else if self.eat_kw("inr") {
            false
        } else {
            return self.error(format!("expected `inl` or `inr`, found {}", self.describe()));
        };
        let Some(x) = self.param()? else {
            return self.error(format!("expected a binder, found {}", self.describe()));
        };
        self.expect_sym("=>")?;
        let e = self.expr()?;
        Ok((left, x, e))
    }

    fn atom(&mut self) -> PResult<ExprRef> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::val(super::syntax::Val::Int(n)))
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Expr::bool(s == "true"))
            }
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(Expr::var(&s))
            }
            Tok::Sym("!") => {
                self.bump();
                let a = self.atom()?;
                Ok(Expr::load(a))
            }
            Tok::Sym("(") => {
                self.bump();
                if self.eat_sym(")") {
                    return Ok(Expr::unit());
                }
                let mut items = vec![self.expr()?];
                while self.eat_sym(",") {
                    items.push(self.expr()?);
                }
                self.expect_sym(")")?;
                let last = items.pop().expect("nonempty");
                Ok(items.into_iter().rev().fold(last, |acc, e| Expr::pair(e, acc)))
            }
            _ => self.error(format!("expected an expression, found {}", self.describe())),
        }
    }

    fn ty(&mut self) -> PResult<Type> {
        let a = self.ty_sum()?;
        if self.eat_sym("->") {
            let b = self.ty()?;
            return Ok(Type::arrow(a, b));
        }
        Ok(a)
    }

    fn ty_sum(&mut self) -> PResult<Type> {
        let mut a = self.ty_prod()?;
        while self.eat_sym("+") {
            let b = self.ty_prod()?;
            a = Type::sum(a, b);
        }
        Ok(a)
    }

    fn ty_prod(&mut self) -> PResult<Type> {
        let mut a = self.ty_app()?;
        while self.eat_sym("*") {
            let b = self.ty_app()?;
            a = Type::prod(a, b);
        }
        Ok(a)
    }

    fn ty_app(&mut self) -> PResult<Type> {
        if self.eat_kw("ref") {
            return Ok(Type::reference(self.ty_app()?));
        }
        match self.peek().clone() {
            Tok::TyVar(v) => Err(ParseError::Unsupported(format!("type variable {v}"))),
            Tok::Ident(s) => {
                let t = match s.as_str() {
                    "unit" => Type::Unit,
                    "bool" => Type::Bool,
                    "nat" => Type::Nat,
                    "int" => Type::Int,
                    "tape" => Type::Tape,
                    "forall" | "exists" | "mu" => {
                        return Err(ParseError::Unsupported(format!("`{s}` types")))
                    }
                    _ => return self.error(format!("unknown type `{s}`")),
                };
                self.bump();
                Ok(t)
            }
            Tok::Sym("(") => {
                self.bump();
                let t = self.ty()?;
                self.expect_sym(")")?;
                Ok(t)
            }
            _ => self.error(format!("expected a type, found {}", self.describe())),
        }
    }
}

fn curry(params: Vec<Binder>, body: ExprRef) -> ExprRef {
    params
        .into_iter()
        .rev()
        .fold(body, |acc, x| Expr::lam(x, acc))
}

const PRELUDE: &[(&str, &str)] = &[
    ("diverge", "rec f _ = f ()"),
    (
        "nondet",
        "fun _ -> let x = ref 0 in fork ((rec f _ = x := !x + 1; f ()) ()); !x",
    ),
];

fn raw(src: &str) -> PResult<(Vec<Def>, ExprRef)> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        fresh: 0,
    };
    p.program()
}

fn prelude() -> BTreeMap<&'static str, ExprRef> {
    PRELUDE
        .iter()
        .map(|(n, src)| (*n, raw(src).expect("prelude parses").1))
        .collect()
}

fn close_with(
    e: &ExprRef,
    defs: &[Def],
    prelude: &BTreeMap<&'static str, ExprRef>,
) -> ExprRef {
    let mut out = e.clone();
    for d in defs.iter().rev() {
        out = subst_expr(&out, &d.name, &d.body);
    }
    let user: Vec<&str> = defs.iter().map(|d| d.name.as_str()).collect();
    for (name, body) in prelude {
        if !user.contains(name) {
            out = subst_expr(&out, name, body);
        }
    }
    out
}

/// Parses a source file. Open terms are allowed in `main`.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let (raw_defs, main) = raw(src)?;
    let pre = prelude();
    let mut defs: Vec<Def> = Vec::new();
    for d in raw_defs {
        let body = close_with(&d.body, &defs, &pre);
        defs.push(Def {
            name: d.name,
            ty: d.ty,
            body,
        });
    }
    let main = close_with(&main, &defs, &pre);
    Ok(Program { defs, main })
}

/// Parses an expression (with optional defs); free variables are allowed.
pub fn parse_expr(src: &str) -> Result<ExprRef, ParseError> {
    Ok(parse_program(src)?.main)
}

/// Parses a closed program.
pub fn parse_closed(src: &str) -> Result<ExprRef, ParseError> {
    let e = parse_expr(src)?;
    match free_vars(&e).into_iter().next() {
        Some(x) => Err(ParseError::Unbound(x.to_string())),
        None => Ok(e),
    }
}

pub fn parse_type(src: &str) -> Result<Type, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        fresh: 0,
    };
    let t = p.ty()?;
    if *p.peek() != Tok::Eof {
        return p.error(format!("unexpected {}", p.describe()));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::syntax::Val;

    #[test]
    fn conditional() {
        let e = parse_expr("if true then 1 else 2").unwrap();
        assert_eq!(e, Expr::if_(Expr::bool(true), Expr::int(1), Expr::int(2)));
    }

    #[test]
    fn let_is_application() {
        let e = parse_expr("let x = rand 7 in x").unwrap();
        let want = Expr::app(
            Expr::rec(Binder::Anon, Binder::named("x"), Expr::var("x")),
            Expr::rand(Expr::int(7)),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn precedence() {
        let e = parse_expr("1 + 2 * 3 = 7").unwrap();
        let want = Expr::binop(
            BinOp::Eq,
            Expr::binop(
                BinOp::Add,
                Expr::int(1),
                Expr::binop(BinOp::Mul, Expr::int(2), Expr::int(3)),
            ),
            Expr::int(7),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn labelled_rand_takes_two_atoms() {
        let e = parse_expr("rand l 1").unwrap();
        assert_eq!(e, Expr::rand_lbl(Expr::var("l"), Expr::int(1)));
        let e = parse_expr("rand (n + 1)").unwrap();
        assert!(matches!(&*e, Expr::Rand(_)));
    }

    #[test]
    fn tuples_and_unit() {
        assert_eq!(parse_expr("()").unwrap(), Expr::unit());
        let e = parse_expr("(1, 2, 3)").unwrap();
        let Expr::Val(Val::Pair(a, _)) = &*e else {
            panic!("expected pair value")
        };
        assert_eq!(**a, Val::int(1));
    }

    #[test]
    fn negative_literal() {
        assert_eq!(parse_expr("-3").unwrap(), Expr::int(-3));
    }

    #[test]
    fn location_literal_rejected() {
        let err = parse_expr("!ℓ0").unwrap_err();
        assert!(err.to_string().contains("not allowed"));
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_expr("let x =\n  in 3").unwrap_err();
        match err {
            ParseError::Syntax { line, col, .. } => assert_eq!((line, col), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unbound_when_closed_required() {
        assert_eq!(
            parse_closed("x + 1").unwrap_err(),
            ParseError::Unbound("x".into())
        );
        assert!(parse_expr("x + 1").is_ok());
    }

    #[test]
    fn defs_substitute() {
        let e = parse_closed("# comment\ndef k = 3\ndef f = fun x -> x + k\nf 1").unwrap();
        let want = parse_closed("(fun x -> x + 3) 1").unwrap();
        assert_eq!(e, want);
    }

    #[test]
    fn prelude_available() {
        assert!(parse_closed("diverge ()").is_ok());
        assert!(parse_closed("nondet ()").is_ok());
    }

    #[test]
    fn pattern_let() {
        assert!(parse_closed("let (x, y) = (1, 2) in x + y").is_ok());
        assert!(parse_closed("let (a, b, c) = (1, 2, 3) in a + b + c").is_ok());
    }

    #[test]
    fn case_either_order() {
        let a = parse_expr("case s of inl x => x | inr y => y").unwrap();
        let b = parse_expr("case s of inr y => y | inl x => x").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seq_binds_loosest() {
        let e = parse_expr("if c then a else b; d").unwrap();
        assert!(matches!(&*e, Expr::App(..)));
    }

    #[test]
    fn types_parse() {
        assert_eq!(
            parse_type("unit -> int").unwrap(),
            Type::arrow(Type::Unit, Type::Int)
        );
        assert_eq!(
            parse_type("ref nat -> unit").unwrap(),
            Type::arrow(Type::reference(Type::Nat), Type::Unit)
        );
        assert!(matches!(
            parse_type("forall a. a"),
            Err(ParseError::Unsupported(_))
        ));
        assert!(matches!(parse_type("'a -> 'a"), Err(ParseError::Unsupported(_))));
    }
}
