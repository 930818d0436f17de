#![allow(dead_code)]

use fox_core::dist::{rat, Dist};
use fox_core::lang::{BinOp, Binder, Expr, ExprRef};
use rand::Rng;

/// A random subdistribution over `0..8` with weights in lowest terms.
pub fn small_dist<R: Rng>(rng: &mut R) -> Dist<u64> {
    let k = rng.gen_range(0..=4);
    let mut w: Vec<(u64, i64)> = (0..k).map(|_| (rng.gen_range(0..8), rng.gen_range(1..=5))).collect();
    w.sort();
    let total: i64 = w.iter().map(|x| x.1).sum::<i64>() + rng.gen_range(0..=2);
    Dist::from_weights(w.into_iter().map(|(v, x)| (v, rat(x, total.max(1)))))
}

/// A random kernel `0..8 → Dist`, tabulated.
pub fn small_kernel<R: Rng>(rng: &mut R) -> Vec<Dist<u64>> {
    (0..8).map(|_| small_dist(rng)).collect()
}

/// Checks left unit, right unit and associativity for one instance.
pub fn monad_laws(a: u64, m: &Dist<u64>, f: &[Dist<u64>], g: &[Dist<u64>]) -> bool {
    let fk = |x: &u64| f[*x as usize].clone();
    let gk = |x: &u64| g[*x as usize].clone();
    let left_unit = Dist::ret(a).bind(fk) == fk(&a);
    let right_unit = m.bind(|x| Dist::ret(*x)) == *m;
    let assoc = m.bind(fk).bind(gk) == m.bind(|x| fk(x).bind(gk));
    left_unit && right_unit && assoc
}

const OPS: [BinOp; 7] = [
    BinOp::Add,
    BinOp::Sub,
    BinOp::Mul,
    BinOp::Mod,
    BinOp::Eq,
    BinOp::Lt,
    BinOp::Le,
];

fn leaf<R: Rng>(rng: &mut R, env: &[String]) -> ExprRef {
    match rng.gen_range(0..5) {
        0 => Expr::unit(),
        1 => Expr::bool(rng.gen()),
        2 if !env.is_empty() => Expr::var(&env[rng.gen_range(0..env.len())]),
        _ => Expr::int(rng.gen_range(-3..6)),
    }
}

/// A random closed term of at most `depth` nested constructors. Terms need
/// not be well typed.
pub fn closed_term<R: Rng>(rng: &mut R, depth: usize) -> ExprRef {
    term(rng, depth, &mut Vec::new())
}

fn term<R: Rng>(rng: &mut R, depth: usize, env: &mut Vec<String>) -> ExprRef {
    if depth == 0 || rng.gen_ratio(1, 5) {
        return leaf(rng, env);
    }
    let d = depth - 1;
    match rng.gen_range(0..16) {
        0 => {
            let op = OPS[rng.gen_range(0..OPS.len())];
            Expr::binop(op, term(rng, d, env), term(rng, d, env))
        }
        1 => Expr::if_(term(rng, d, env), term(rng, d, env), term(rng, d, env)),
        2 => Expr::app(term(rng, d, env), term(rng, d, env)),
        3 => Expr::pair(term(rng, d, env), term(rng, d, env)),
        4 => Expr::fst(term(rng, d, env)),
        5 => Expr::snd(term(rng, d, env)),
        6 => Expr::inl(term(rng, d, env)),
        7 => Expr::inr(term(rng, d, env)),
        8 => Expr::alloc(term(rng, d, env)),
        9 => Expr::load(term(rng, d, env)),
        10 => Expr::store(term(rng, d, env), term(rng, d, env)),
        11 => Expr::faa(term(rng, d, env), term(rng, d, env)),
        12 => Expr::rand(term(rng, d, env)),
        13 => Expr::fork(term(rng, d, env)),
        14 => {
            let x = format!("x{}", env.len());
            env.push(x.clone());
            let body = term(rng, d, env);
            env.pop();
            Expr::lam(Binder::named(&x), body)
        }
        _ => {
            let x = format!("x{}", env.len());
            let scrut = term(rng, d, env);
            env.push(x.clone());
            let l = term(rng, d, env);
            let r = term(rng, d, env);
            env.pop();
            Expr::case(scrut, Binder::named(&x), l, Binder::named(&x), r)
        }
    }
}
