use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::syntax::{BinOp, Expr, Name, Val};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Type {
    Unit,
    Bool,
    Nat,
    Int,
    Tape,
    Prod(Box<Type>, Box<Type>),
    Sum(Box<Type>, Box<Type>),
    Arrow(Box<Type>, Box<Type>),
    Ref(Box<Type>),
    /// Unconstrained part of an inferred type.
    Var(u32),
}

impl Type {
    pub fn prod(a: Type, b: Type) -> Type {
        Type::Prod(Box::new(a), Box::new(b))
    }

    pub fn sum(a: Type, b: Type) -> Type {
        Type::Sum(Box::new(a), Box::new(b))
    }

    pub fn arrow(a: Type, b: Type) -> Type {
        Type::Arrow(Box::new(a), Box::new(b))
    }

    pub fn reference(a: Type) -> Type {
        Type::Ref(Box::new(a))
    }

    fn prec(&self) -> u8 {
        match self {
            Type::Arrow(..) => 0,
            Type::Sum(..) => 1,
            Type::Prod(..) => 2,
            Type::Ref(_) => 3,
            _ => 4,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            write!(f, "(")?;
            self.write_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Type::Unit => write!(f, "unit"),
            Type::Bool => write!(f, "bool"),
            Type::Nat => write!(f, "nat"),
            Type::Int => write!(f, "int"),
            Type::Tape => write!(f, "tape"),
            Type::Var(k) => write!(f, "'t{k}"),
            Type::Arrow(a, b) => {
                a.write_at(f, 1)?;
                write!(f, " -> ")?;
                b.write_at(f, 0)
            }
            Type::Sum(a, b) => {
                a.write_at(f, 1)?;
                write!(f, " + ")?;
                b.write_at(f, 2)
            }
            Type::Prod(a, b) => {
                a.write_at(f, 2)?;
                write!(f, " * ")?;
                b.write_at(f, 3)
            }
            Type::Ref(a) => {
                write!(f, "ref ")?;
                a.write_at(f, 3)
            }
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TypeError {
    #[error("type mismatch: expected {expected}, found {found}")]
    Mismatch { expected: Type, found: Type },
    #[error("expected a numeric type, found {0}")]
    NotNumeric(Type),
    #[error("cyclic type")]
    Occurs,
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("unsupported fragment: {0}")]
    Unsupported(String),
}

pub type TypeCtx = BTreeMap<String, Type>;

struct Infer {
    bound: Vec<Option<Type>>,
    numeric: Vec<bool>,
}

impl Infer {
    fn new() -> Self {
        Infer {
            bound: Vec::new(),
            numeric: Vec::new(),
        }
    }

    fn fresh(&mut self, numeric: bool) -> Type {
        self.bound.push(None);
        self.numeric.push(numeric);
        Type::Var((self.bound.len() - 1) as u32)
    }

    fn shallow(&self, t: &Type) -> Type {
        let mut t = t.clone();
        while let Type::Var(k) = t {
            match &self.bound[k as usize] {
                Some(b) => t = b.clone(),
                None => break,
            }
        }
        t
    }

    fn resolve(&self, t: &Type) -> Type {
        match self.shallow(t) {
            Type::Prod(a, b) => Type::prod(self.resolve(&a), self.resolve(&b)),
            Type::Sum(a, b) => Type::sum(self.resolve(&a), self.resolve(&b)),
            Type::Arrow(a, b) => Type::arrow(self.resolve(&a), self.resolve(&b)),
            Type::Ref(a) => Type::reference(self.resolve(&a)),
            t => t,
        }
    }

    fn occurs(&self, k: u32, t: &Type) -> bool {
        match self.shallow(t) {
            Type::Var(j) => j == k,
            Type::Prod(a, b) | Type::Sum(a, b) | Type::Arrow(a, b) => {
                self.occurs(k, &a) || self.occurs(k, &b)
            }
            Type::Ref(a) => self.occurs(k, &a),
            _ => false,
        }
    }

    fn bind_var(&mut self, k: u32, t: Type) -> Result<(), TypeError> {
        if let Type::Var(j) = t {
            if j == k {
                return Ok(());
            }
            if self.numeric[k as usize] {
                self.numeric[j as usize] = true;
            }
            self.bound[k as usize] = Some(t);
            return Ok(());
        }
        if self.numeric[k as usize] && !matches!(t, Type::Int | Type::Nat) {
            return Err(TypeError::NotNumeric(self.resolve(&t)));
        }
        if self.occurs(k, &t) {
            return Err(TypeError::Occurs);
        }
        self.bound[k as usize] = Some(t);
        Ok(())
    }

    fn unify(&mut self, expected: &Type, found: &Type) -> Result<(), TypeError> {
        let (a, b) = (self.shallow(expected), self.shallow(found));
        match (&a, &b) {
            (Type::Var(k), _) => self.bind_var(*k, b.clone()),
            (_, Type::Var(k)) => self.bind_var(*k, a.clone()),
            (Type::Prod(a1, a2), Type::Prod(b1, b2))
            | (Type::Sum(a1, a2), Type::Sum(b1, b2))
            | (Type::Arrow(a1, a2), Type::Arrow(b1, b2)) => {
                self.unify(a1, b1).map_err(|_| self.mismatch(&a, &b))?;
                self.unify(a2, b2).map_err(|_| self.mismatch(&a, &b))
            }
            (Type::Ref(x), Type::Ref(y)) => self.unify(x, y).map_err(|_| self.mismatch(&a, &b)),
            _ if a == b => Ok(()),
            _ => Err(self.mismatch(&a, &b)),
        }
    }

    fn mismatch(&self, a: &Type, b: &Type) -> TypeError {
        TypeError::Mismatch {
            expected: self.finish(a),
            found: self.finish(b),
        }
    }

    fn numeric(&mut self, t: &Type) -> Result<(), TypeError> {
        match self.shallow(t) {
            Type::Int | Type::Nat => Ok(()),
            Type::Var(k) => {
                self.numeric[k as usize] = true;
                Ok(())
            }
            other => Err(TypeError::NotNumeric(self.finish(&other))),
        }
    }

    /// Resolves, defaulting numeric variables to `int`.
    fn finish(&self, t: &Type) -> Type {
        match self.resolve(t) {
            Type::Var(k) if self.numeric[k as usize] => Type::Int,
            Type::Prod(a, b) => Type::prod(self.finish(&a), self.finish(&b)),
            Type::Sum(a, b) => Type::sum(self.finish(&a), self.finish(&b)),
            Type::Arrow(a, b) => Type::arrow(self.finish(&a), self.finish(&b)),
            Type::Ref(a) => Type::reference(self.finish(&a)),
            t => t,
        }
    }

    fn default_numeric(&mut self) {
        for k in 0..self.bound.len() {
            if self.numeric[k] && self.bound[k].is_none() {
                self.bound[k] = Some(Type::Int);
            }
        }
    }

    fn val(&mut self, env: &mut Vec<(Name, Type)>, v: &Val) -> Result<Type, TypeError> {
        Ok(match v {
            Val::Unit => Type::Unit,
            Val::Bool(_) => Type::Bool,
            Val::Int(_) => self.fresh(true),
            Val::Loc(_) => {
                let a = self.fresh(false);
                Type::reference(a)
            }
            Val::Lbl(_) => Type::Tape,
            Val::Rec(f, x, body) => {
                let a = self.fresh(false);
                let b = self.fresh(false);
                let n = env.len();
                if let Some(f) = f.name() {
                    env.push((f.clone(), Type::arrow(a.clone(), b.clone())));
                }
                if let Some(x) = x.name() {
                    env.push((x.clone(), a.clone()));
                }
                let tb = self.expr(env, body);
                env.truncate(n);
                self.unify(&b, &tb?)?;
                Type::arrow(a, b)
            }
            Val::Pair(a, b) => {
                let ta = self.val(env, a)?;
                let tb = self.val(env, b)?;
                Type::prod(ta, tb)
            }
            Val::InjL(a) => {
                let ta = self.val(env, a)?;
                let r = self.fresh(false);
                Type::sum(ta, r)
            }
            Val::InjR(a) => {
                let ta = self.val(env, a)?;
                let l = self.fresh(false);
                Type::sum(l, ta)
            }
        })
    }

    fn expr(&mut self, env: &mut Vec<(Name, Type)>, e: &Expr) -> Result<Type, TypeError> {
        Ok(match e {
            Expr::Val(v) => self.val(env, v)?,
            Expr::Var(x) => env
                .iter()
                .rev()
                .find(|(n, _)| n == x)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| TypeError::Unbound(x.to_string()))?,
            Expr::App(f, a) => {
                let ta = self.expr(env, a)?;
                let tf = self.expr(env, f)?;
                let r = self.fresh(false);
                self.unify(&tf, &Type::arrow(ta, r.clone()))?;
                r
            }
            Expr::BinOp(op, a, b) => {
                let ta = self.expr(env, a)?;
                let tb = self.expr(env, b)?;
                self.unify(&ta, &tb)?;
                match op {
                    BinOp::Eq => Type::Bool,
                    BinOp::Lt | BinOp::Le => {
                        self.numeric(&ta)?;
                        Type::Bool
                    }
                    _ => {
                        self.numeric(&ta)?;
                        ta
                    }
                }
            }
            Expr::If(c, t, f) => {
                let tc = self.expr(env, c)?;
                self.unify(&Type::Bool, &tc)?;
                let tt = self.expr(env, t)?;
                let tf = self.expr(env, f)?;
                self.unify(&tt, &tf)?;
                tt
            }
            Expr::Pair(a, b) => {
                let ta = self.expr(env, a)?;
                let tb = self.expr(env, b)?;
                Type::prod(ta, tb)
            }
            Expr::Fst(p) | Expr::Snd(p) => {
                let tp = self.expr(env, p)?;
                let a = self.fresh(false);
                let b = self.fresh(false);
                self.unify(&Type::prod(a.clone(), b.clone()), &tp)?;
                if matches!(e, Expr::Fst(_)) {
                    a
                } else {
                    b
                }
            }
            Expr::InjL(a) => {
                let ta = self.expr(env, a)?;
                Type::sum(ta, self.fresh(false))
            }
            Expr::InjR(a) => {
                let ta = self.expr(env, a)?;
                let l = self.fresh(false);
                Type::sum(l, ta)
            }
            Expr::Case(s, x1, e1, x2, e2) => {
                let ts = self.expr(env, s)?;
                let a = self.fresh(false);
                let b = self.fresh(false);
                self.unify(&Type::sum(a.clone(), b.clone()), &ts)?;
                let mut arm = |this: &mut Self, x: &super::syntax::Binder, body, t: Type| {
                    let n = env.len();
                    if let Some(x) = x.name() {
                        env.push((x.clone(), t));
                    }
                    let r = this.expr(env, body);
                    env.truncate(n);
                    r
                };
                let t1 = arm(self, x1, e1, a)?;
                let t2 = arm(self, x2, e2, b)?;
                self.unify(&t1, &t2)?;
                t1
            }
            Expr::Alloc(a) => Type::reference(self.expr(env, a)?),
            Expr::Load(a) => {
                let ta = self.expr(env, a)?;
                let r = self.fresh(false);
                self.unify(&Type::reference(r.clone()), &ta)?;
                r
            }
            Expr::Store(l, v) => {
                let tv = self.expr(env, v)?;
                let tl = self.expr(env, l)?;
                self.unify(&tl, &Type::reference(tv))?;
                Type::Unit
            }
            Expr::Faa(l, v) => {
                let tv = self.expr(env, v)?;
                self.numeric(&tv)?;
                let tl = self.expr(env, l)?;
                self.unify(&tl, &Type::reference(tv.clone()))?;
                tv
            }
            Expr::Cas(l, a, b) => {
                let tb = self.expr(env, b)?;
                let ta = self.expr(env, a)?;
                self.unify(&ta, &tb)?;
                let tl = self.expr(env, l)?;
                self.unify(&tl, &Type::reference(ta))?;
                Type::Bool
            }
            Expr::Rand(n) => {
                let tn = self.expr(env, n)?;
                self.numeric(&tn)?;
                tn
            }
            Expr::RandLbl(l, n) => {
                let tn = self.expr(env, n)?;
                self.numeric(&tn)?;
                let tl = self.expr(env, l)?;
                self.unify(&Type::Tape, &tl)?;
                tn
            }
            Expr::AllocTape(n) => {
                let tn = self.expr(env, n)?;
                self.numeric(&tn)?;
                Type::Tape
            }
            Expr::Fork(a) => {
                self.expr(env, a)?;
                Type::Unit
            }
        })
    }
}

fn env_of(ctx: &TypeCtx) -> Vec<(Name, Type)> {
    ctx.iter()
        .map(|(k, t)| (Name::from(k.as_str()), t.clone()))
        .collect()
}

fn renumber(t: &Type, map: &mut BTreeMap<u32, u32>) -> Type {
    match t {
        Type::Var(k) => {
            let n = map.len() as u32;
            Type::Var(*map.entry(*k).or_insert(n))
        }
        Type::Prod(a, b) => Type::prod(renumber(a, map), renumber(b, map)),
        Type::Sum(a, b) => Type::sum(renumber(a, map), renumber(b, map)),
        Type::Arrow(a, b) => Type::arrow(renumber(a, map), renumber(b, map)),
        Type::Ref(a) => Type::reference(renumber(a, map)),
        t => t.clone(),
    }
}

/// Infers the type of `e`. Unconstrained numeric literals default to `int`;
/// any other unconstrained part is left as a `Var`.
pub fn typecheck(ctx: &TypeCtx, e: &Expr) -> Result<Type, TypeError> {
    let mut inf = Infer::new();
    let t = inf.expr(&mut env_of(ctx), e)?;
    inf.default_numeric();
    Ok(renumber(&inf.finish(&t), &mut BTreeMap::new()))
}

/// Checks `e` against an expected type.
pub fn check(ctx: &TypeCtx, e: &Expr, expected: &Type) -> Result<(), TypeError> {
    let mut inf = Infer::new();
    let t = inf.expr(&mut env_of(ctx), e)?;
    inf.unify(expected, &t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse::parse_expr;

    fn ty(src: &str) -> Result<Type, TypeError> {
        typecheck(&TypeCtx::new(), &parse_expr(src).unwrap())
    }

    #[test]
    fn literals() {
        assert_eq!(ty("1 + 2").unwrap(), Type::Int);
        assert_eq!(ty("true").unwrap(), Type::Bool);
        assert_eq!(ty("(1, ())").unwrap(), Type::prod(Type::Int, Type::Unit));
    }

    #[test]
    fn int_plus_bool_fails() {
        assert!(ty("1 + true").is_err());
    }

    #[test]
    fn adversary_at_ref_nat() {
        let e = parse_expr("fun l -> ()").unwrap();
        let want = Type::arrow(Type::reference(Type::Nat), Type::Unit);
        check(&TypeCtx::new(), &e, &want).unwrap();
        let t = typecheck(&TypeCtx::new(), &e).unwrap();
        assert_eq!(t, Type::arrow(Type::Var(0), Type::Unit));
    }

    #[test]
    fn nat_and_int_do_not_mix() {
        let e = parse_expr("fun l -> l := true").unwrap();
        let want = Type::arrow(Type::reference(Type::Nat), Type::Unit);
        assert!(check(&TypeCtx::new(), &e, &want).is_err());
    }

    #[test]
    fn tapes() {
        assert_eq!(ty("let l = alloctape 3 in rand l 3").unwrap(), Type::Int);
        assert!(ty("rand 1 3").is_err());
    }

    #[test]
    fn par_types_as_pair() {
        assert_eq!(
            ty("rand 1 ||| true").unwrap(),
            Type::prod(Type::Int, Type::Bool)
        );
    }

    #[test]
    fn display() {
        let t = Type::arrow(
            Type::arrow(Type::Unit, Type::Int),
            Type::prod(Type::sum(Type::Nat, Type::Bool), Type::reference(Type::Int)),
        );
        assert_eq!(t.to_string(), "(unit -> int) -> (nat + bool) * ref int");
    }
}
