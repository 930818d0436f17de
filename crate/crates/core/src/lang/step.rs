use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use super::ctx::{decompose, fill};
use super::subst::subst;
use super::syntax::{BinOp, Expr, ExprRef, Val};
use crate::dist::Dist;

/// Largest `N` accepted by `rand N`; the support of `unif(N)` is enumerated
/// eagerly.
pub const MAX_RAND_BOUND: u64 = 1 << 24;

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tape {
    pub bound: u64,
    pub contents: Vec<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State {
    pub heap: BTreeMap<usize, Val>,
    pub tapes: BTreeMap<usize, Tape>,
}

fn smallest_unused<V>(m: &BTreeMap<usize, V>) -> usize {
    // keys are sorted, so the first gap is the answer
    let mut want = 0;
    for k in m.keys() {
        if *k != want {
            break;
        }
        want += 1;
    }
    want
}

impl State {
    pub fn fresh_loc(&self) -> usize {
        smallest_unused(&self.heap)
    }

    pub fn fresh_lbl(&self) -> usize {
        smallest_unused(&self.tapes)
    }

    /// Every tape entry (N, t) satisfies x ≤ N for x in t.
    pub fn tapes_well_formed(&self) -> bool {
        self.tapes
            .values()
            .all(|t| t.contents.iter().all(|x| *x <= t.bound))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Config {
    pub threads: Vec<ExprRef>,
    pub state: State,
}

impl Config {
    pub fn new(e: ExprRef) -> Self {
        Config {
            threads: vec![e],
            state: State::default(),
        }
    }

    pub fn head_value(&self) -> Option<&Val> {
        self.threads.first().and_then(|e| e.as_val())
    }

    pub fn is_final(&self) -> bool {
        self.head_value().is_some()
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, t) in self.threads.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, "]")
    }
}

pub type StepOut = (ExprRef, State, Vec<ExprRef>);

fn det(e: ExprRef, s: &State) -> Dist<StepOut> {
    Dist::ret((e, s.clone(), Vec::new()))
}

fn uniform_ints(n: &BigInt, s: &State) -> Dist<StepOut> {
    let Some(n) = n.to_u64() else {
        return Dist::zero();
    };
    assert!(
        n <= MAX_RAND_BOUND,
        "rand bound {n} exceeds the enumeration limit {MAX_RAND_BOUND}"
    );
    Dist::<u64>::unif(n).map(|k| (Expr::val(Val::Int(BigInt::from(*k))), s.clone(), Vec::new()))
}

fn eval_binop(op: BinOp, a: &Val, b: &Val) -> Option<Val> {
    if op == BinOp::Eq {
        return (a.is_unboxed() && b.is_unboxed()).then(|| Val::Bool(a == b));
    }
    let (x, y) = (a.as_int()?, b.as_int()?);
    Some(match op {
        BinOp::Add => Val::Int(x + y),
        BinOp::Sub => Val::Int(x - y),
        BinOp::Mul => Val::Int(x * y),
        BinOp::Mod => {
            if y.is_zero() {
                return None;
            }
            Val::Int(x.mod_floor(y))
        }
        BinOp::Lt => Val::Bool(x < y),
        BinOp::Le => Val::Bool(x <= y),
        BinOp::Eq => unreachable!(),
    })
}

/// One step of a term in redex position. Stuck terms (and values, which are
/// not redexes) give the zero distribution.
pub fn head_step(r: &ExprRef, s: &State) -> Dist<StepOut> {
    match &**r {
        Expr::App(f, a) => match (f.as_val(), a.as_val()) {
            (Some(fv @ Val::Rec(g, x, body)), Some(av)) => {
                let mut b = body.clone();
                if let Some(g) = g.name() {
                    b = subst(&b, g, fv);
                }
                if let Some(x) = x.name() {
                    b = subst(&b, x, av);
                }
                det(b, s)
            }
            _ => Dist::zero(),
        },
        Expr::BinOp(op, a, b) => match (a.as_val(), b.as_val()) {
            (Some(a), Some(b)) => match eval_binop(*op, a, b) {
                Some(v) => det(Expr::val(v), s),
                None => Dist::zero(),
            },
            _ => Dist::zero(),
        },
        Expr::If(c, t, e) => match c.as_val() {
            Some(Val::Bool(true)) => det(t.clone(), s),
            Some(Val::Bool(false)) => det(e.clone(), s),
            _ => Dist::zero(),
        },
        Expr::Fst(p) => match p.as_val() {
            Some(Val::Pair(a, _)) => det(Expr::val((**a).clone()), s),
            _ => Dist::zero(),
        },
        Expr::Snd(p) => match p.as_val() {
            Some(Val::Pair(_, b)) => det(Expr::val((**b).clone()), s),
            _ => Dist::zero(),
        },
        Expr::Case(sc, x1, e1, x2, e2) => {
            let (x, body, v) = match sc.as_val() {
                Some(Val::InjL(v)) => (x1, e1, v),
                Some(Val::InjR(v)) => (x2, e2, v),
                _ => return Dist::zero(),
            };
            let out = match x.name() {
                Some(x) => subst(body, x, v),
                None => body.clone(),
            };
            det(out, s)
        }
        Expr::Alloc(a) => match a.as_val() {
            Some(v) => {
                let l = s.fresh_loc();
                let mut s2 = s.clone();
                s2.heap.insert(l, v.clone());
                Dist::ret((Expr::val(Val::Loc(l)), s2, Vec::new()))
            }
            None => Dist::zero(),
        },
        Expr::Load(a) => match a.as_val() {
            Some(Val::Loc(l)) => match s.heap.get(l) {
                Some(v) => det(Expr::val(v.clone()), s),
                None => Dist::zero(),
            },
            _ => Dist::zero(),
        },
        Expr::Store(a, b) => match (a.as_val(), b.as_val()) {
            (Some(Val::Loc(l)), Some(v)) if s.heap.contains_key(l) => {
                let mut s2 = s.clone();
                s2.heap.insert(*l, v.clone());
                Dist::ret((Expr::unit(), s2, Vec::new()))
            }
            _ => Dist::zero(),
        },
        Expr::Faa(a, b) => match (a.as_val(), b.as_val()) {
            (Some(Val::Loc(l)), Some(Val::Int(k))) => match s.heap.get(l) {
                Some(Val::Int(old)) => {
                    let mut s2 = s.clone();
                    s2.heap.insert(*l, Val::Int(old + k));
                    Dist::ret((Expr::val(Val::Int(old.clone())), s2, Vec::new()))
                }
                _ => Dist::zero(),
            },
            _ => Dist::zero(),
        },
        Expr::Cas(a, b, c) => match (a.as_val(), b.as_val(), c.as_val()) {
            (Some(Val::Loc(l)), Some(v1), Some(v2)) => match s.heap.get(l) {
                Some(cur) if cur.is_unboxed() && v1.is_unboxed() => {
                    if cur == v1 {
                        let mut s2 = s.clone();
                        s2.heap.insert(*l, v2.clone());
                        Dist::ret((Expr::bool(true), s2, Vec::new()))
                    } else {
                        det(Expr::bool(false), s)
                    }
                }
                _ => Dist::zero(),
            },
            _ => Dist::zero(),
        },
        Expr::Rand(a) => match a.as_val() {
            Some(Val::Int(n)) => uniform_ints(n, s),
            _ => Dist::zero(),
        },
        Expr::RandLbl(l, n) => match (l.as_val(), n.as_val()) {
            (Some(Val::Lbl(l)), Some(Val::Int(n))) => {
                let Some(tape) = s.tapes.get(l) else {
                    return Dist::zero();
                };
                let Some(nn) = n.to_u64() else {
                    return Dist::zero();
                };
                if tape.bound != nn {
                    return uniform_ints(n, s);
                }
                match tape.contents.first() {
                    None => uniform_ints(n, s),
                    Some(k) => {
                        let mut s2 = s.clone();
                        let t = s2.tapes.get_mut(l).expect("tape present");
                        t.contents.remove(0);
                        Dist::ret((Expr::val(Val::Int(BigInt::from(*k))), s2, Vec::new()))
                    }
                }
            }
            _ => Dist::zero(),
        },
        Expr::AllocTape(a) => match a.as_val().and_then(Val::as_int).and_then(|n| n.to_u64()) {
            Some(n) => {
                let l = s.fresh_lbl();
                let mut s2 = s.clone();
                s2.tapes.insert(
                    l,
                    Tape {
                        bound: n,
                        contents: Vec::new(),
                    },
                );
                Dist::ret((Expr::val(Val::Lbl(l)), s2, Vec::new()))
            }
            None => Dist::zero(),
        },
        Expr::Fork(e) => Dist::ret((Expr::unit(), s.clone(), vec![e.clone()])),
        Expr::Val(_)
        | Expr::Var(_)
        | Expr::Pair(..)
        | Expr::InjL(_)
        | Expr::InjR(_) => Dist::zero(),
    }
}

/// Reduces the redex of `e` and plugs the results back into its context.
///
/// # Panics
/// If `e` is a value.
pub fn step(e: &ExprRef, s: &State) -> Dist<StepOut> {
    let (k, r) = decompose(e).expect("step called on a value");
    if k.is_empty() {
        return head_step(&r, s);
    }
    head_step(&r, s).map(|(r2, s2, forks)| (fill(&k, r2.clone()), s2.clone(), forks.clone()))
}

/// Whether `(e, s)` can take a step; the mass of `step` is 0 or 1.
pub fn reducible(e: &ExprRef, s: &State) -> bool {
    !e.is_value() && !step(e, s).is_zero()
}

/// Renames locations and labels in order of first occurrence (threads left
/// to right, then reachable heap cells, then the rest), so configurations
/// equal up to renaming share a key.
pub fn canonicalize(cfg: &Config) -> Config {
    let mut r = Renamer::default();
    for t in &cfg.threads {
        r.scan_expr(t);
    }
    let mut i = 0;
    while i < r.loc_order.len() {
        if let Some(v) = cfg.state.heap.get(&r.loc_order[i]) {
            r.scan_val(v);
        }
        i += 1;
    }
    for (l, v) in &cfg.state.heap {
        if !r.locs.contains_key(l) {
            r.add_loc(*l);
            r.scan_val(v);
        }
    }
    for l in cfg.state.tapes.keys() {
        r.add_lbl(*l);
    }
    if r.is_identity() {
        return cfg.clone();
    }
    let threads = cfg.threads.iter().map(|t| r.rename_expr(t)).collect();
    let heap = cfg
        .state
        .heap
        .iter()
        .map(|(l, v)| (r.locs[l], r.rename_val(v)))
        .collect();
    let tapes = cfg
        .state
        .tapes
        .iter()
        .map(|(l, t)| (r.lbls[l], t.clone()))
        .collect();
    Config {
        threads,
        state: State { heap, tapes },
    }
}

#[derive(Default)]
struct Renamer {
    locs: HashMap<usize, usize>,
    lbls: HashMap<usize, usize>,
    loc_order: Vec<usize>,
}

impl Renamer {
    fn add_loc(&mut self, l: usize) {
        if !self.locs.contains_key(&l) {
            self.locs.insert(l, self.loc_order.len());
            self.loc_order.push(l);
        }
    }

    fn add_lbl(&mut self, l: usize) {
        let n = self.lbls.len();
        self.lbls.entry(l).or_insert(n);
    }

    fn is_identity(&self) -> bool {
        self.locs.iter().all(|(a, b)| a == b) && self.lbls.iter().all(|(a, b)| a == b)
    }

    fn scan_val(&mut self, v: &Val) {
        match v {
            Val::Loc(l) => self.add_loc(*l),
            Val::Lbl(l) => self.add_lbl(*l),
            Val::Rec(_, _, b) => self.scan_expr(b),
            Val::Pair(a, b) => {
                self.scan_val(a);
                self.scan_val(b);
            }
            Val::InjL(a) | Val::InjR(a) => self.scan_val(a),
            _ => {}
        }
    }

    fn scan_expr(&mut self, e: &Expr) {
        match e {
            Expr::Val(v) => self.scan_val(v),
            _ => super::subst::for_each_child(e, |c| self.scan_expr(c)),
        }
    }

    fn rename_val(&self, v: &Val) -> Val {
        match v {
            Val::Loc(l) => Val::Loc(*self.locs.get(l).unwrap_or(l)),
            Val::Lbl(l) => Val::Lbl(*self.lbls.get(l).unwrap_or(l)),
            Val::Rec(f, x, b) => Val::Rec(f.clone(), x.clone(), self.rename_expr(b)),
            Val::Pair(a, b) => Val::Pair(Arc::new(self.rename_val(a)), Arc::new(self.rename_val(b))),
            Val::InjL(a) => Val::InjL(Arc::new(self.rename_val(a))),
            Val::InjR(a) => Val::InjR(Arc::new(self.rename_val(a))),
            other => other.clone(),
        }
    }

    fn rename_expr(&self, e: &ExprRef) -> ExprRef {
        let r = |x: &ExprRef| self.rename_expr(x);
        match &**e {
            Expr::Val(v) => Expr::val(self.rename_val(v)),
            Expr::Var(_) => e.clone(),
            Expr::App(a, b) => Expr::app(r(a), r(b)),
            Expr::BinOp(op, a, b) => Expr::binop(*op, r(a), r(b)),
            Expr::If(a, b, c) => Expr::if_(r(a), r(b), r(c)),
            Expr::Pair(a, b) => Expr::pair(r(a), r(b)),
            Expr::Fst(a) => Expr::fst(r(a)),
            Expr::Snd(a) => Expr::snd(r(a)),
            Expr::InjL(a) => Expr::inl(r(a)),
            Expr::InjR(a) => Expr::inr(r(a)),
            Expr::Case(s, x1, e1, x2, e2) => {
                Expr::case(r(s), x1.clone(), r(e1), x2.clone(), r(e2))
            }
            Expr::Alloc(a) => Expr::alloc(r(a)),
            Expr::Load(a) => Expr::load(r(a)),
            Expr::Store(a, b) => Expr::store(r(a), r(b)),
            Expr::Faa(a, b) => Expr::faa(r(a), r(b)),
            Expr::Cas(a, b, c) => Expr::cas(r(a), r(b), r(c)),
            Expr::Rand(a) => Expr::rand(r(a)),
            Expr::RandLbl(a, b) => Expr::rand_lbl(r(a), r(b)),
            Expr::AllocTape(a) => Expr::alloc_tape(r(a)),
            Expr::Fork(a) => Expr::fork(r(a)),
        }
    }
}

/// Applies an explicit location renaming; used to test that renaming
/// commutes with stepping.
pub fn rename_locations(cfg: &Config, f: &dyn Fn(usize) -> usize) -> Config {
    let mut r = Renamer::default();
    for l in cfg.state.heap.keys() {
        r.locs.insert(*l, f(*l));
    }
    for t in &cfg.threads {
        r.scan_expr(t);
    }
    let extra: Vec<usize> = r.loc_order.clone();
    for l in extra {
        r.locs.insert(l, f(l));
    }
    for l in cfg.state.tapes.keys() {
        r.lbls.insert(*l, *l);
    }
    Config {
        threads: cfg.threads.iter().map(|t| r.rename_expr(t)).collect(),
        state: State {
            heap: cfg
                .state
                .heap
                .iter()
                .map(|(l, v)| (f(*l), r.rename_val(v)))
                .collect(),
            tapes: cfg.state.tapes.clone(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::rat;

    fn empty() -> State {
        State::default()
    }

    fn out(e: ExprRef, s: State) -> StepOut {
        (e, s, Vec::new())
    }

    #[test]
    fn rand_is_uniform() {
        let d = head_step(&Expr::rand(Expr::int(1)), &empty());
        assert_eq!(d.len(), 2);
        assert_eq!(d.prob(&out(Expr::int(0), empty())), rat(1, 2));
        assert_eq!(d.prob(&out(Expr::int(1), empty())), rat(1, 2));
    }

    #[test]
    fn negative_rand_is_stuck() {
        assert!(head_step(&Expr::rand(Expr::int(-1)), &empty()).is_zero());
    }

    #[test]
    fn fork_spawns() {
        let e = Expr::rand(Expr::int(1));
        let d = head_step(&Expr::fork(e.clone()), &empty());
        assert_eq!(d, Dist::ret((Expr::unit(), empty(), vec![e])));
    }

    fn with_tape(bound: u64, contents: Vec<u64>) -> State {
        let mut s = empty();
        s.tapes.insert(0, Tape { bound, contents });
        s
    }

    #[test]
    fn labelled_rand_pops() {
        let s = with_tape(1, vec![1, 0]);
        let e = Expr::rand_lbl(Expr::val(Val::Lbl(0)), Expr::int(1));
        let d = head_step(&e, &s);
        assert_eq!(d, Dist::ret(out(Expr::int(1), with_tape(1, vec![0]))));
    }

    #[test]
    fn labelled_rand_empty_tape_matches_plain() {
        let s = with_tape(3, vec![]);
        let lbl = head_step(&Expr::rand_lbl(Expr::val(Val::Lbl(0)), Expr::int(3)), &s);
        let plain = head_step(&Expr::rand(Expr::int(3)), &s);
        assert_eq!(lbl, plain);
    }

    #[test]
    fn labelled_rand_bound_mismatch_leaves_tape() {
        let s = with_tape(3, vec![2]);
        let d = head_step(&Expr::rand_lbl(Expr::val(Val::Lbl(0)), Expr::int(1)), &s);
        assert_eq!(d, head_step(&Expr::rand(Expr::int(1)), &s));
    }

    #[test]
    fn alloctape_fresh() {
        let s = with_tape(1, vec![]);
        let d = head_step(&Expr::alloc_tape(Expr::int(5)), &s);
        let (e, s2, _) = d.support().next().unwrap().clone();
        assert_eq!(e, Expr::val(Val::Lbl(1)));
        assert_eq!(s2.tapes[&1], Tape { bound: 5, contents: vec![] });
    }

    #[test]
    fn heap_ops() {
        let s = empty();
        let d = head_step(&Expr::alloc(Expr::int(4)), &s);
        let (l, s1, _) = d.support().next().unwrap().clone();
        assert_eq!(l, Expr::val(Val::Loc(0)));
        let d = head_step(&Expr::faa(l.clone(), Expr::int(3)), &s1);
        let (old, s2, _) = d.support().next().unwrap().clone();
        assert_eq!(old, Expr::int(4));
        assert_eq!(s2.heap[&0], Val::int(7));
        let d = head_step(&Expr::cas(l.clone(), Expr::int(7), Expr::int(0)), &s2);
        let (ok, s3, _) = d.support().next().unwrap().clone();
        assert_eq!(ok, Expr::bool(true));
        assert_eq!(s3.heap[&0], Val::int(0));
        assert!(head_step(&Expr::load(Expr::val(Val::Loc(9))), &s3).is_zero());
    }

    #[test]
    fn cas_on_closure_is_stuck() {
        let mut s = empty();
        let f = Val::Rec(
            super::super::syntax::Binder::Anon,
            super::super::syntax::Binder::Anon,
            Expr::unit(),
        );
        s.heap.insert(0, f.clone());
        let e = Expr::cas(Expr::val(Val::Loc(0)), Expr::val(f), Expr::unit());
        assert!(head_step(&e, &s).is_zero());
    }

    #[test]
    fn step_refills_context() {
        let e = Expr::binop(BinOp::Add, Expr::int(1), Expr::rand(Expr::int(1)));
        let d = step(&e, &empty());
        let want = Dist::from_weights([
            (
                out(Expr::binop(BinOp::Add, Expr::int(1), Expr::int(0)), empty()),
                rat(1, 2),
            ),
            (
                out(Expr::binop(BinOp::Add, Expr::int(1), Expr::int(1)), empty()),
                rat(1, 2),
            ),
        ]);
        assert_eq!(d, want);
    }

    #[test]
    fn fresh_fills_gaps() {
        let mut s = empty();
        s.heap.insert(0, Val::Unit);
        s.heap.insert(2, Val::Unit);
        assert_eq!(s.fresh_loc(), 1);
    }

    #[test]
    fn mod_is_floored_and_zero_stuck() {
        let e = Expr::binop(BinOp::Mod, Expr::int(-1), Expr::int(2));
        assert_eq!(step(&e, &empty()), Dist::ret(out(Expr::int(1), empty())));
        let z = Expr::binop(BinOp::Mod, Expr::int(1), Expr::int(0));
        assert!(step(&z, &empty()).is_zero());
    }

    #[test]
    fn canonical_renaming() {
        let mut s = empty();
        s.heap.insert(3, Val::int(1));
        s.heap.insert(5, Val::Loc(3));
        let cfg = Config {
            threads: vec![Expr::load(Expr::val(Val::Loc(5)))],
            state: s,
        };
        let c = canonicalize(&cfg);
        assert_eq!(c.threads[0], Expr::load(Expr::val(Val::Loc(0))));
        assert_eq!(c.state.heap[&0], Val::Loc(1));
        assert_eq!(c.state.heap[&1], Val::int(1));
        assert_eq!(canonicalize(&c), c);
    }
}
