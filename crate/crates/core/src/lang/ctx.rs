use super::syntax::{BinOp, Binder, Expr, ExprRef, Val};

/// One layer of an evaluation context. Operands are evaluated right to
/// left, so a frame ending in `L` holds the already-evaluated right operand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    AppR(ExprRef),
    AppL(Val),
    BinOpR(BinOp, ExprRef),
    BinOpL(BinOp, Val),
    If(ExprRef, ExprRef),
    PairR(ExprRef),
    PairL(Val),
    Fst,
    Snd,
    InjL,
    InjR,
    Case(Binder, ExprRef, Binder, ExprRef),
    Alloc,
    Load,
    StoreR(ExprRef),
    StoreL(Val),
    FaaR(ExprRef),
    FaaL(Val),
    CasR(ExprRef, ExprRef),
    CasM(ExprRef, Val),
    CasL(Val, Val),
    Rand,
    RandLblR(ExprRef),
    RandLblL(Val),
    AllocTape,
}

/// Frames listed outermost first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EvalCtx {
    pub frames: Vec<Frame>,
}

impl EvalCtx {
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }
}

fn v(e: &ExprRef) -> Option<&Val> {
    e.as_val()
}

/// Splits a non-value into its evaluation context and the subterm in redex
/// position. The focus is either a head redex or a stuck term; `Var` and
/// ill-typed eliminations count as stuck.
pub fn decompose(e: &ExprRef) -> Option<(EvalCtx, ExprRef)> {
    if e.is_value() {
        return None;
    }
    let mut frames = Vec::new();
    let mut cur = e.clone();
    loop {
        let next = match &*cur {
            Expr::Val(_) => unreachable!("values are never descended into"),
            Expr::Var(_) | Expr::Fork(_) => None,
            Expr::App(f, a) => match (v(f), v(a)) {
                (_, None) => Some((Frame::AppR(f.clone()), a.clone())),
                (None, Some(av)) => Some((Frame::AppL(av.clone()), f.clone())),
                _ => None,
            },
            Expr::BinOp(op, a, b) => match (v(a), v(b)) {
                (_, None) => Some((Frame::BinOpR(*op, a.clone()), b.clone())),
                (None, Some(bv)) => Some((Frame::BinOpL(*op, bv.clone()), a.clone())),
                _ => None,
            },
            Expr::If(c, t, f) => {
                (!c.is_value()).then(|| (Frame::If(t.clone(), f.clone()), c.clone()))
            }
            Expr::Pair(a, b) => match (v(a), v(b)) {
                (_, None) => Some((Frame::PairR(a.clone()), b.clone())),
                (None, Some(bv)) => Some((Frame::PairL(bv.clone()), a.clone())),
                _ => None,
            },
            Expr::Fst(a) => (!a.is_value()).then(|| (Frame::Fst, a.clone())),
            Expr::Snd(a) => (!a.is_value()).then(|| (Frame::Snd, a.clone())),
            Expr::InjL(a) => (!a.is_value()).then(|| (Frame::InjL, a.clone())),
            Expr::InjR(a) => (!a.is_value()).then(|| (Frame::InjR, a.clone())),
            Expr::Case(s, x1, e1, x2, e2) => (!s.is_value()).then(|| {
                (
                    Frame::Case(x1.clone(), e1.clone(), x2.clone(), e2.clone()),
                    s.clone(),
                )
            }),
            Expr::Alloc(a) => (!a.is_value()).then(|| (Frame::Alloc, a.clone())),
            Expr::Load(a) => (!a.is_value()).then(|| (Frame::Load, a.clone())),
            Expr::Store(l, x) => match (v(l), v(x)) {
                (_, None) => Some((Frame::StoreR(l.clone()), x.clone())),
                (None, Some(xv)) => Some((Frame::StoreL(xv.clone()), l.clone())),
                _ => None,
            },
            Expr::Faa(l, x) => match (v(l), v(x)) {
                (_, None) => Some((Frame::FaaR(l.clone()), x.clone())),
                (None, Some(xv)) => Some((Frame::FaaL(xv.clone()), l.clone())),
                _ => None,
            },
            Expr::Cas(l, a, b) => match (v(l), v(a), v(b)) {
                (_, _, None) => Some((Frame::CasR(l.clone(), a.clone()), b.clone())),
                (_, None, Some(bv)) => Some((Frame::CasM(l.clone(), bv.clone()), a.clone())),
                (None, Some(av), Some(bv)) => {
                    Some((Frame::CasL(av.clone(), bv.clone()), l.clone()))
                }
                _ => None,
            },
            Expr::Rand(a) => (!a.is_value()).then(|| (Frame::Rand, a.clone())),
            Expr::RandLbl(l, n) => match (v(l), v(n)) {
                (_, None) => Some((Frame::RandLblR(l.clone()), n.clone())),
                (None, Some(nv)) => Some((Frame::RandLblL(nv.clone()), l.clone())),
                _ => None,
            },
            Expr::AllocTape(a) => (!a.is_value()).then(|| (Frame::AllocTape, a.clone())),
        };
        match next {
            Some((frame, inner)) => {
                frames.push(frame);
                cur = inner;
            }
            None => return Some((EvalCtx { frames }, cur)),
        }
    }
}

fn val(x: &Val) -> ExprRef {
    Expr::val(x.clone())
}

/// Plugs `e` into one frame.
pub fn fill_frame(frame: &Frame, e: ExprRef) -> ExprRef {
    match frame {
        Frame::AppR(f) => Expr::app(f.clone(), e),
        Frame::AppL(a) => Expr::app(e, val(a)),
        Frame::BinOpR(op, a) => Expr::binop(*op, a.clone(), e),
        Frame::BinOpL(op, b) => Expr::binop(*op, e, val(b)),
        Frame::If(t, f) => Expr::if_(e, t.clone(), f.clone()),
        Frame::PairR(a) => Expr::pair(a.clone(), e),
        Frame::PairL(b) => Expr::pair(e, val(b)),
        Frame::Fst => Expr::fst(e),
        Frame::Snd => Expr::snd(e),
        Frame::InjL => Expr::inl(e),
        Frame::InjR => Expr::inr(e),
        Frame::Case(x1, e1, x2, e2) => Expr::case(e, x1.clone(), e1.clone(), x2.clone(), e2.clone()),
        Frame::Alloc => Expr::alloc(e),
        Frame::Load => Expr::load(e),
        Frame::StoreR(l) => Expr::store(l.clone(), e),
        Frame::StoreL(x) => Expr::store(e, val(x)),
        Frame::FaaR(l) => Expr::faa(l.clone(), e),
        Frame::FaaL(x) => Expr::faa(e, val(x)),
        Frame::CasR(l, a) => Expr::cas(l.clone(), a.clone(), e),
        Frame::CasM(l, b) => Expr::cas(l.clone(), e, val(b)),
        Frame::CasL(a, b) => Expr::cas(e, val(a), val(b)),
        Frame::Rand => Expr::rand(e),
        Frame::RandLblR(l) => Expr::rand_lbl(l.clone(), e),
        Frame::RandLblL(n) => Expr::rand_lbl(e, val(n)),
        Frame::AllocTape => Expr::alloc_tape(e),
    }
}

pub fn fill(k: &EvalCtx, e: ExprRef) -> ExprRef {
    k.frames.iter().rev().fold(e, |acc, fr| fill_frame(fr, acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_do_not_decompose() {
        assert!(decompose(&Expr::int(3)).is_none());
    }

    #[test]
    fn argument_before_function() {
        let f = Expr::app(Expr::var("g"), Expr::unit());
        let e = Expr::app(f.clone(), Expr::rand(Expr::int(1)));
        let (k, r) = decompose(&e).unwrap();
        assert_eq!(r, Expr::rand(Expr::int(1)));
        assert_eq!(k.frames, vec![Frame::AppR(f)]);
    }

    #[test]
    fn right_component_first() {
        let e = Expr::pair(Expr::rand(Expr::int(1)), Expr::rand(Expr::int(2)));
        let (k, r) = decompose(&e).unwrap();
        assert_eq!(r, Expr::rand(Expr::int(2)));
        assert_eq!(k.depth(), 1);
        assert_eq!(fill(&k, r), e);
    }

    #[test]
    fn binop_right_to_left() {
        let e = Expr::binop(
            BinOp::Add,
            Expr::rand(Expr::int(1)),
            Expr::rand(Expr::int(3)),
        );
        let (_, r) = decompose(&e).unwrap();
        assert_eq!(r, Expr::rand(Expr::int(3)));
    }

    #[test]
    fn roundtrip_nested() {
        let inner = Expr::binop(BinOp::Add, Expr::int(1), Expr::load(Expr::var("x")));
        let e = Expr::if_(
            Expr::binop(BinOp::Eq, inner, Expr::int(2)),
            Expr::unit(),
            Expr::unit(),
        );
        let (k, r) = decompose(&e).unwrap();
        assert_eq!(r, Expr::var("x"));
        assert_eq!(fill(&k, r), e);
    }
}
