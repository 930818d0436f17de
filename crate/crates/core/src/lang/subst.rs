use std::collections::BTreeSet;
use std::sync::Arc;

use super::syntax::{Binder, Expr, ExprRef, Name, Val};

/// Capture-avoiding substitution of a closed value for `x`.
///
/// The replacement is closed, so no binder in `e` can capture it; the only
/// care needed is to stop at binders that shadow `x`.
pub fn subst(e: &ExprRef, x: &str, v: &Val) -> ExprRef {
    subst_expr(e, x, &Expr::val(v.clone()))
}

/// Substitutes a closed expression for the free occurrences of `x`. Used for
/// probe contexts and `def` bindings, where the plugged term need not be a
/// value.
pub fn subst_expr(e: &ExprRef, x: &str, r: &ExprRef) -> ExprRef {
    go(e, x, r).unwrap_or_else(|| e.clone())
}

fn go_val(v: &Val, x: &str, r: &ExprRef) -> Option<Val> {
    match v {
        Val::Unit | Val::Bool(_) | Val::Int(_) | Val::Loc(_) | Val::Lbl(_) => None,
        Val::Rec(f, y, body) => {
            if f.binds(x) || y.binds(x) {
                None
            } else {
                go(body, x, r).map(|b| Val::Rec(f.clone(), y.clone(), b))
            }
        }
        Val::Pair(a, b) => {
            let na = go_val(a, x, r);
            let nb = go_val(b, x, r);
            if na.is_none() && nb.is_none() {
                return None;
            }
            Some(Val::Pair(
                na.map(Arc::new).unwrap_or_else(|| a.clone()),
                nb.map(Arc::new).unwrap_or_else(|| b.clone()),
            ))
        }
        Val::InjL(a) => go_val(a, x, r).map(|a| Val::InjL(Arc::new(a))),
        Val::InjR(a) => go_val(a, x, r).map(|a| Val::InjR(Arc::new(a))),
    }
}

fn pick(new: Option<ExprRef>, old: &ExprRef) -> ExprRef {
    new.unwrap_or_else(|| old.clone())
}

/// Returns `None` when `e` has no free occurrence of `x`, so untouched
/// subtrees stay shared.
fn go(e: &ExprRef, x: &str, r: &ExprRef) -> Option<ExprRef> {
    match &**e {
        Expr::Val(v) => {
            let nv = go_val(v, x, r)?;
            // a pair value may now be rebuilt from an open component
            Some(Expr::val(nv))
        }
        Expr::Var(y) => {
            if &**y == x {
                Some(r.clone())
            } else {
                None
            }
        }
        Expr::App(a, b) => two(a, b, x, r, Expr::app),
        Expr::BinOp(op, a, b) => {
            let op = *op;
            two(a, b, x, r, move |a, b| Expr::binop(op, a, b))
        }
        Expr::If(c, t, f) => {
            let (nc, nt, nf) = (go(c, x, r), go(t, x, r), go(f, x, r));
            if nc.is_none() && nt.is_none() && nf.is_none() {
                return None;
            }
            Some(Expr::if_(pick(nc, c), pick(nt, t), pick(nf, f)))
        }
        Expr::Pair(a, b) => two(a, b, x, r, Expr::pair),
        Expr::Fst(a) => go(a, x, r).map(Expr::fst),
        Expr::Snd(a) => go(a, x, r).map(Expr::snd),
        Expr::InjL(a) => go(a, x, r).map(Expr::inl),
        Expr::InjR(a) => go(a, x, r).map(Expr::inr),
        Expr::Case(s, x1, e1, x2, e2) => {
            let ns = go(s, x, r);
            let n1 = if x1.binds(x) { None } else { go(e1, x, r) };
            let n2 = if x2.binds(x) { None } else { go(e2, x, r) };
            if ns.is_none() && n1.is_none() && n2.is_none() {
                return None;
            }
            Some(Expr::case(
                pick(ns, s),
                x1.clone(),
                pick(n1, e1),
                x2.clone(),
                pick(n2, e2),
            ))
        }
        Expr::Alloc(a) => go(a, x, r).map(Expr::alloc),
        Expr::Load(a) => go(a, x, r).map(Expr::load),
        Expr::Store(a, b) => two(a, b, x, r, Expr::store),
        Expr::Faa(a, b) => two(a, b, x, r, Expr::faa),
        Expr::Cas(a, b, c) => {
            let (na, nb, nc) = (go(a, x, r), go(b, x, r), go(c, x, r));
            if na.is_none() && nb.is_none() && nc.is_none() {
                return None;
            }
            Some(Expr::cas(pick(na, a), pick(nb, b), pick(nc, c)))
        }
        Expr::Rand(a) => go(a, x, r).map(Expr::rand),
        Expr::RandLbl(a, b) => two(a, b, x, r, Expr::rand_lbl),
        Expr::AllocTape(a) => go(a, x, r).map(Expr::alloc_tape),
        Expr::Fork(a) => go(a, x, r).map(Expr::fork),
    }
}

fn two<F: FnOnce(ExprRef, ExprRef) -> ExprRef>(
    a: &ExprRef,
    b: &ExprRef,
    x: &str,
    r: &ExprRef,
    mk: F,
) -> Option<ExprRef> {
    let na = go(a, x, r);
    let nb = go(b, x, r);
    if na.is_none() && nb.is_none() {
        return None;
    }
    Some(mk(pick(na, a), pick(nb, b)))
}

/// Free variables of `e`.
pub fn free_vars(e: &Expr) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    fv(e, &mut Vec::new(), &mut out);
    out
}

pub fn is_closed(e: &Expr) -> bool {
    free_vars(e).is_empty()
}

fn fv_val(v: &Val, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match v {
        Val::Rec(f, x, body) => {
            let n = bound.len();
            bound.extend(f.name().cloned());
            bound.extend(x.name().cloned());
            fv(body, bound, out);
            bound.truncate(n);
        }
        Val::Pair(a, b) => {
            fv_val(a, bound, out);
            fv_val(b, bound, out);
        }
        Val::InjL(a) | Val::InjR(a) => fv_val(a, bound, out),
        _ => {}
    }
}

fn fv(e: &Expr, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match e {
        Expr::Val(v) => fv_val(v, bound, out),
        Expr::Var(x) => {
            if !bound.iter().any(|b| b == x) {
                out.insert(x.clone());
            }
        }
        Expr::Case(s, x1, e1, x2, e2) => {
            fv(s, bound, out);
            for (x, body) in [(x1, e1), (x2, e2)] {
                let n = bound.len();
                bound.extend(x.name().cloned());
                fv(body, bound, out);
                bound.truncate(n);
            }
        }
        _ => for_each_child(e, |c| fv(c, bound, out)),
    }
}

/// Visits the immediate subexpressions of non-binding forms.
pub(crate) fn for_each_child<'a, F: FnMut(&'a Expr)>(e: &'a Expr, mut f: F) {
    match e {
        Expr::Val(_) | Expr::Var(_) => {}
        Expr::App(a, b)
        | Expr::BinOp(_, a, b)
        | Expr::Pair(a, b)
        | Expr::Store(a, b)
        | Expr::Faa(a, b)
        | Expr::RandLbl(a, b) => {
            f(a);
            f(b);
        }
        Expr::If(a, b, c) | Expr::Cas(a, b, c) => {
            f(a);
            f(b);
            f(c);
        }
        Expr::Case(a, _, b, _, c) => {
            f(a);
            f(b);
            f(c);
        }
        Expr::Fst(a)
        | Expr::Snd(a)
        | Expr::InjL(a)
        | Expr::InjR(a)
        | Expr::Alloc(a)
        | Expr::Load(a)
        | Expr::Rand(a)
        | Expr::AllocTape(a)
        | Expr::Fork(a) => f(a),
    }
}

/// α-equivalence: equal up to consistent renaming of bound variables.
pub fn alpha_eq(a: &Expr, b: &Expr) -> bool {
    aeq(a, b, &mut Vec::new())
}

type Env = Vec<(Option<Name>, Option<Name>)>;

fn lookup(env: &Env, x: &Name, left: bool) -> Option<usize> {
    env.iter().rposition(|(l, r)| {
        let side = if left { l } else { r };
        side.as_ref() == Some(x)
    })
}

fn aeq_binder(b1: &Binder, b2: &Binder, env: &mut Env) {
    env.push((b1.name().cloned(), b2.name().cloned()));
}

fn aeq_val(a: &Val, b: &Val, env: &mut Env) -> bool {
    match (a, b) {
        (Val::Rec(f1, x1, e1), Val::Rec(f2, x2, e2)) => {
            if matches!(f1, Binder::Anon) != matches!(f2, Binder::Anon)
                || matches!(x1, Binder::Anon) != matches!(x2, Binder::Anon)
            {
                return false;
            }
            let n = env.len();
            aeq_binder(f1, f2, env);
            aeq_binder(x1, x2, env);
            let ok = aeq(e1, e2, env);
            env.truncate(n);
            ok
        }
        (Val::Pair(a1, b1), Val::Pair(a2, b2)) => aeq_val(a1, a2, env) && aeq_val(b1, b2, env),
        (Val::InjL(a1), Val::InjL(a2)) | (Val::InjR(a1), Val::InjR(a2)) => aeq_val(a1, a2, env),
        _ => a == b,
    }
}

fn aeq(a: &Expr, b: &Expr, env: &mut Env) -> bool {
    match (a, b) {
        (Expr::Val(v1), Expr::Val(v2)) => aeq_val(v1, v2, env),
        (Expr::Var(x), Expr::Var(y)) => match (lookup(env, x, true), lookup(env, y, false)) {
            (Some(i), Some(j)) => i == j,
            (None, None) => x == y,
            _ => false,
        },
        (Expr::Case(s1, x1, e1, y1, f1), Expr::Case(s2, x2, e2, y2, f2)) => {
            if !aeq(s1, s2, env) {
                return false;
            }
            let n = env.len();
            aeq_binder(x1, x2, env);
            let ok1 = aeq(e1, e2, env);
            env.truncate(n);
            aeq_binder(y1, y2, env);
            let ok2 = aeq(f1, f2, env);
            env.truncate(n);
            ok1 && ok2
        }
        (Expr::BinOp(o1, ..), Expr::BinOp(o2, ..)) if o1 != o2 => false,
        _ => {
            if std::mem::discriminant(a) != std::mem::discriminant(b) {
                return false;
            }
            let mut ca: Vec<&Expr> = Vec::new();
            let mut cb: Vec<&Expr> = Vec::new();
            for_each_child(a, |c| ca.push(c));
            for_each_child(b, |c| cb.push(c));
            ca.len() == cb.len() && ca.iter().zip(&cb).all(|(x, y)| aeq(x, y, env))
        }
    }
}
