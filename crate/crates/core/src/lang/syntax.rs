use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;

pub type Name = Arc<str>;
pub type ExprRef = Arc<Expr>;

/// A binding position: `_` or a named variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Binder {
    Anon,
    Named(Name),
}

impl Binder {
    pub fn named(s: &str) -> Self {
        Binder::Named(Arc::from(s))
    }

    pub fn binds(&self, x: &str) -> bool {
        matches!(self, Binder::Named(n) if &**n == x)
    }

    pub fn name(&self) -> Option<&Name> {
        match self {
            Binder::Anon => None,
            Binder::Named(n) => Some(n),
        }
    }
}

impl fmt::Display for Binder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binder::Anon => f.write_str("_"),
            Binder::Named(n) => f.write_str(n),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Mod,
    Eq,
    Lt,
    Le,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Mod => "mod",
            BinOp::Eq => "=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
        }
    }
}

/// Runtime values. Functions are values even when their body mentions
/// variables bound further out; by the time a closure is applied the
/// surrounding substitutions have closed it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Val {
    Unit,
    Bool(bool),
    Int(BigInt),
    Loc(usize),
    Lbl(usize),
    Rec(Binder, Binder, ExprRef),
    Pair(Arc<Val>, Arc<Val>),
    InjL(Arc<Val>),
    InjR(Arc<Val>),
}

impl Val {
    pub fn int(n: i64) -> Val {
        Val::Int(BigInt::from(n))
    }

    /// Unboxed values are the ones compared by `=` and `cas`.
    pub fn is_unboxed(&self) -> bool {
        matches!(
            self,
            Val::Unit | Val::Bool(_) | Val::Int(_) | Val::Loc(_) | Val::Lbl(_)
        )
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Val::Int(n) => Some(n),
            _ => None,
        }
    }
}

/// Core expressions. Surface sugar (`let`, `;`, `|||`, `fun`, tuple
/// patterns, `||`, `&&`) is expanded by the parser and never appears here.
///
/// Build compound expressions through the constructor functions below:
/// they collapse pairs and injections of values into [`Val`]s, which keeps
/// "is a value" a purely syntactic check on `Expr::Val`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Val(Val),
    Var(Name),
    App(ExprRef, ExprRef),
    BinOp(BinOp, ExprRef, ExprRef),
    If(ExprRef, ExprRef, ExprRef),
    Pair(ExprRef, ExprRef),
    Fst(ExprRef),
    Snd(ExprRef),
    InjL(ExprRef),
    InjR(ExprRef),
    Case(ExprRef, Binder, ExprRef, Binder, ExprRef),
    Alloc(ExprRef),
    Load(ExprRef),
    Store(ExprRef, ExprRef),
    Faa(ExprRef, ExprRef),
    Cas(ExprRef, ExprRef, ExprRef),
    Rand(ExprRef),
    /// `rand ι N`: labelled sampling, label first.
    RandLbl(ExprRef, ExprRef),
    AllocTape(ExprRef),
    Fork(ExprRef),
}

impl Expr {
    pub fn is_value(&self) -> bool {
        matches!(self, Expr::Val(_))
    }

    pub fn as_val(&self) -> Option<&Val> {
        match self {
            Expr::Val(v) => Some(v),
            _ => None,
        }
    }

    pub fn val(v: Val) -> ExprRef {
        Arc::new(Expr::Val(v))
    }

    pub fn int(n: i64) -> ExprRef {
        Expr::val(Val::int(n))
    }

    pub fn unit() -> ExprRef {
        Expr::val(Val::Unit)
    }

    pub fn bool(b: bool) -> ExprRef {
        Expr::val(Val::Bool(b))
    }

    pub fn var(x: &str) -> ExprRef {
        Arc::new(Expr::Var(Arc::from(x)))
    }

    pub fn rec(f: Binder, x: Binder, body: ExprRef) -> ExprRef {
        Expr::val(Val::Rec(f, x, body))
    }

    pub fn lam(x: Binder, body: ExprRef) -> ExprRef {
        Expr::rec(Binder::Anon, x, body)
    }

    pub fn app(f: ExprRef, a: ExprRef) -> ExprRef {
        Arc::new(Expr::App(f, a))
    }

    pub fn binop(op: BinOp, a: ExprRef, b: ExprRef) -> ExprRef {
        Arc::new(Expr::BinOp(op, a, b))
    }

    pub fn if_(c: ExprRef, t: ExprRef, e: ExprRef) -> ExprRef {
        Arc::new(Expr::If(c, t, e))
    }

    pub fn pair(a: ExprRef, b: ExprRef) -> ExprRef {
        match (&*a, &*b) {
            (Expr::Val(va), Expr::Val(vb)) => {
                Expr::val(Val::Pair(Arc::new(va.clone()), Arc::new(vb.clone())))
            }
            _ => Arc::new(Expr::Pair(a, b)),
        }
    }

    pub fn inl(a: ExprRef) -> ExprRef {
        match &*a {
            Expr::Val(v) => Expr::val(Val::InjL(Arc::new(v.clone()))),
            _ => Arc::new(Expr::InjL(a)),
        }
    }

    pub fn inr(a: ExprRef) -> ExprRef {
        match &*a {
            Expr::Val(v) => Expr::val(Val::InjR(Arc::new(v.clone()))),
            _ => Arc::new(Expr::InjR(a)),
        }
    }

    pub fn fst(a: ExprRef) -> ExprRef {
        Arc::new(Expr::Fst(a))
    }

    pub fn snd(a: ExprRef) -> ExprRef {
        Arc::new(Expr::Snd(a))
    }

    pub fn case(s: ExprRef, x1: Binder, e1: ExprRef, x2: Binder, e2: ExprRef) -> ExprRef {
        Arc::new(Expr::Case(s, x1, e1, x2, e2))
    }

    pub fn alloc(a: ExprRef) -> ExprRef {
        Arc::new(Expr::Alloc(a))
    }

    pub fn load(a: ExprRef) -> ExprRef {
        Arc::new(Expr::Load(a))
    }

    pub fn store(l: ExprRef, v: ExprRef) -> ExprRef {
        Arc::new(Expr::Store(l, v))
    }

    pub fn faa(l: ExprRef, v: ExprRef) -> ExprRef {
        Arc::new(Expr::Faa(l, v))
    }

    pub fn cas(l: ExprRef, v1: ExprRef, v2: ExprRef) -> ExprRef {
        Arc::new(Expr::Cas(l, v1, v2))
    }

    pub fn rand(n: ExprRef) -> ExprRef {
        Arc::new(Expr::Rand(n))
    }

    pub fn rand_lbl(l: ExprRef, n: ExprRef) -> ExprRef {
        Arc::new(Expr::RandLbl(l, n))
    }

    pub fn alloc_tape(n: ExprRef) -> ExprRef {
        Arc::new(Expr::AllocTape(n))
    }

    pub fn fork(e: ExprRef) -> ExprRef {
        Arc::new(Expr::Fork(e))
    }

    /// `let x = e1 in e2`, as the parser expands it.
    pub fn let_(x: Binder, e1: ExprRef, e2: ExprRef) -> ExprRef {
        Expr::app(Expr::lam(x, e2), e1)
    }

    /// `e1; e2`
    pub fn seq(e1: ExprRef, e2: ExprRef) -> ExprRef {
        Expr::let_(Binder::Anon, e1, e2)
    }
}

fn write_val(v: &Val, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match v {
        Val::Unit => f.write_str("()"),
        Val::Bool(b) => write!(f, "{b}"),
        Val::Int(n) => write!(f, "{n}"),
        Val::Loc(l) => write!(f, "ℓ{l}"),
        Val::Lbl(l) => write!(f, "ι{l}"),
        Val::Rec(Binder::Anon, x, body) => write!(f, "(fun {x} -> {body})"),
        Val::Rec(g, x, body) => write!(f, "(rec {g} {x} = {body})"),
        Val::Pair(a, b) => write!(f, "({a}, {b})"),
        Val::InjL(a) => write!(f, "inl {}", Atom(a)),
        Val::InjR(a) => write!(f, "inr {}", Atom(a)),
    }
}

struct Atom<'a>(&'a Val);

impl fmt::Display for Atom<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Val::InjL(_) | Val::InjR(_) => write!(f, "({})", self.0),
            Val::Int(n) if n < &BigInt::from(0) => write!(f, "({})", self.0),
            v => write!(f, "{v}"),
        }
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_val(self, f)
    }
}

/// Fully parenthesised rendering of the core term. Not meant to be
/// re-parsed (core application of a lambda is shown as such, not as `let`).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Val(v) => write_val(v, f),
            Expr::Var(x) => f.write_str(x),
            Expr::App(a, b) => write!(f, "({a} {b})"),
            Expr::BinOp(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::If(c, t, e) => write!(f, "(if {c} then {t} else {e})"),
            Expr::Pair(a, b) => write!(f, "({a}, {b})"),
            Expr::Fst(a) => write!(f, "(fst {a})"),
            Expr::Snd(a) => write!(f, "(snd {a})"),
            Expr::InjL(a) => write!(f, "(inl {a})"),
            Expr::InjR(a) => write!(f, "(inr {a})"),
            Expr::Case(s, x1, e1, x2, e2) => {
                write!(f, "(case {s} of inl {x1} => {e1} | inr {x2} => {e2})")
            }
            Expr::Alloc(a) => write!(f, "(ref {a})"),
            Expr::Load(a) => write!(f, "!{a}"),
            Expr::Store(a, b) => write!(f, "({a} := {b})"),
            Expr::Faa(a, b) => write!(f, "(faa {a} {b})"),
            Expr::Cas(a, b, c) => write!(f, "(cas {a} {b} {c})"),
            Expr::Rand(a) => write!(f, "(rand {a})"),
            Expr::RandLbl(l, a) => write!(f, "(rand {l} {a})"),
            Expr::AllocTape(a) => write!(f, "(alloctape {a})"),
            Expr::Fork(a) => write!(f, "(fork {a})"),
        }
    }
}
