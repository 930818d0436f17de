//! Approximate couplings of finite subdistributions.
//!
//! `ARcoupl(μ1, μ2, ε, R)` holds when every pair of `[0,1]`-valued functions
//! `X`, `Y` with `X(a) <= Y(b)` for `(a, b) ∈ R` satisfies
//! `E_μ1[X] <= E_μ2[Y] + ε`. The least such `ε` is the optimum of a linear
//! program, computed here three ways: exact simplex, subset enumeration and
//! a min-cut reduction.
//!
//! Only support points matter. A pair whose right side lies outside
//! `supp μ2` constrains nothing, because setting `Y` to 1 there costs nothing.
//! A pair whose left side lies outside `supp μ1` is irrelevant, because `X`
//! there carries no weight and may be 0.

pub mod flow;
pub mod simplex;

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{dist_from_json, fmt_rat, parse_rat, rat, Dist, DistEntryJson, Rat};
use flow::FlowNet;
use simplex::{maximize, LpOutcome};

pub const SUBSET_ORACLE_LIMIT: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CouplingError {
    #[error("subset oracle supports at most {limit} points, got {got}")]
    TooLarge { limit: usize, got: usize },
    #[error("error amplification needs M < N, got N = {n}, M = {m}")]
    BadAmp { n: u64, m: u64 },
    #[error("invalid query: {0}")]
    Query(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CouplingQuery<A: Ord, B: Ord> {
    pub mu1: Dist<A>,
    pub mu2: Dist<B>,
    pub rel: BTreeSet<(A, B)>,
    pub eps: Rat,
}

/// The pairs that matter: both sides in the respective supports.
fn effective_rel<'r, A: Ord, B: Ord>(
    mu1: &Dist<A>,
    mu2: &Dist<B>,
    rel: &'r BTreeSet<(A, B)>,
) -> Vec<&'r (A, B)> {
    rel.iter()
        .filter(|(a, b)| !mu1.prob(a).is_zero() && !mu2.prob(b).is_zero())
        .collect()
}

/// Least `ε` with `ARcoupl(μ1, μ2, ε, R)`, by exact simplex.
pub fn arcoupl_min_eps<A: Ord + Clone, B: Ord + Clone>(
    mu1: &Dist<A>,
    mu2: &Dist<B>,
    rel: &BTreeSet<(A, B)>,
) -> Rat {
    let pairs = effective_rel(mu1, mu2, rel);
    let xs: Vec<&A> = mu1.support().collect();
    let ys: Vec<&B> = pairs
        .iter()
        .map(|(_, b)| b)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let xi: BTreeMap<&A, usize> = xs.iter().enumerate().map(|(i, a)| (*a, i)).collect();
    let yi: BTreeMap<&B, usize> = ys
        .iter()
        .enumerate()
        .map(|(i, b)| (*b, xs.len() + i))
        .collect();
    let n = xs.len() + ys.len();

    let mut c: Vec<Rat> = xs.iter().map(|a| mu1.prob(a)).collect();
    c.extend(ys.iter().map(|b| -mu2.prob(b)));
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for j in 0..n {
        let mut row = vec![Rat::zero(); n];
        row[j] = Rat::one();
        rows.push(row);
        rhs.push(Rat::one());
    }
    for (a, b) in pairs {
        let mut row = vec![Rat::zero(); n];
        row[xi[a]] = Rat::one();
        row[yi[b]] = -Rat::one();
        rows.push(row);
        rhs.push(Rat::zero());
    }
    match maximize(&c, &rows, &rhs) {
        LpOutcome::Optimal { value, .. } => value,
        LpOutcome::Unbounded => unreachable!("every variable is boxed"),
    }
}

pub fn arcoupl_check<A: Ord + Clone, B: Ord + Clone>(q: &CouplingQuery<A, B>) -> bool {
    arcoupl_min_eps(&q.mu1, &q.mu2, &q.rel) <= q.eps
}

/// Least `ε` by enumerating every `U ⊆ supp μ1` and taking the largest
/// `μ1(U) − μ2(R(U))`.
pub fn arcoupl_subset_oracle<A: Ord + Clone, B: Ord + Clone>(
    mu1: &Dist<A>,
    mu2: &Dist<B>,
    rel: &BTreeSet<(A, B)>,
) -> Result<Rat, CouplingError> {
    let xs: Vec<&A> = mu1.support().collect();
    if xs.len() > SUBSET_ORACLE_LIMIT {
        return Err(CouplingError::TooLarge {
            limit: SUBSET_ORACLE_LIMIT,
            got: xs.len(),
        });
    }
    let pairs = effective_rel(mu1, mu2, rel);
    let image: Vec<BTreeSet<&B>> = xs
        .iter()
        .map(|a| {
            pairs
                .iter()
                .filter(|(a2, _)| a2 == *a)
                .map(|(_, b)| b)
                .collect()
        })
        .collect();
    let mut best = Rat::zero();
    for mask in 0u32..(1u32 << xs.len()) {
        let mut gain = Rat::zero();
        let mut img: BTreeSet<&B> = BTreeSet::new();
        for (i, a) in xs.iter().enumerate() {
            if mask & (1 << i) != 0 {
                gain += mu1.prob(a);
                img.extend(image[i].iter().copied());
            }
        }
        for b in img {
            gain -= mu2.prob(b);
        }
        if gain > best {
            best = gain;
        }
    }
    Ok(best)
}

/// Least `ε` through the project-selection reduction: choosing `U` earns
/// `μ1(U)` and pays `μ2` on its image, so the optimum is `mass(μ1)` minus a
/// minimum cut.
pub fn arcoupl_maxflow<A: Ord + Clone, B: Ord + Clone>(
    mu1: &Dist<A>,
    mu2: &Dist<B>,
    rel: &BTreeSet<(A, B)>,
) -> Rat {
    let xs: Vec<&A> = mu1.support().collect();
    let ys: Vec<&B> = mu2.support().collect();
    let xi: BTreeMap<&A, usize> = xs.iter().enumerate().map(|(i, a)| (*a, 2 + i)).collect();
    let yi: BTreeMap<&B, usize> = ys
        .iter()
        .enumerate()
        .map(|(i, b)| (*b, 2 + xs.len() + i))
        .collect();
    let mut g = FlowNet::new(2 + xs.len() + ys.len());
    for a in &xs {
        g.add_edge(0, xi[a], Some(mu1.prob(a)));
    }
    for b in &ys {
        g.add_edge(yi[b], 1, Some(mu2.prob(b)));
    }
    for (a, b) in effective_rel(mu1, mu2, rel) {
        g.add_edge(xi[a], yi[b], None);
    }
    let cut = g.max_flow(0, 1).expect("source edges are finite");
    mu1.mass() - cut
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ComposeOutcome {
    /// The first-stage coupling does not hold at the given `ε`.
    BasePremiseFailed { min_eps: Rat },
    /// Some second-stage coupling does not hold at its error budget.
    StepPremiseFailed { pair: usize, min_eps: Rat, budget: Rat },
    /// Premises hold; records the conclusion's least `ε` and its budget.
    Checked { min_eps: Rat, budget: Rat, holds: bool },
}

impl ComposeOutcome {
    pub fn conclusion_holds(&self) -> bool {
        matches!(self, ComposeOutcome::Checked { holds: true, .. })
    }

    pub fn premises_hold(&self) -> bool {
        matches!(self, ComposeOutcome::Checked { .. })
    }
}

/// Oracle for the conclusion: subset enumeration when small enough,
/// simplex otherwise.
fn oracle_min_eps<A: Ord + Clone, B: Ord + Clone>(
    mu1: &Dist<A>,
    mu2: &Dist<B>,
    rel: &BTreeSet<(A, B)>,
) -> Rat {
    arcoupl_subset_oracle(mu1, mu2, rel).unwrap_or_else(|_| arcoupl_min_eps(mu1, mu2, rel))
}

/// Checks one instance of coupling composition: from `ARcoupl(μ1, μ2, ε, R)`
/// and `ARcoupl(f a, g b, err b, R')` for every related support pair,
/// concludes `ARcoupl(μ1 ≫= f, μ2 ≫= g, ε + E_μ2[err], R')`.
#[allow(clippy::too_many_arguments)]
pub fn compose_check<A, B, C, D, F, G, E>(
    mu1: &Dist<A>,
    mu2: &Dist<B>,
    f: F,
    g: G,
    rel: &BTreeSet<(A, B)>,
    rel2: &BTreeSet<(C, D)>,
    eps: &Rat,
    errfun: E,
) -> ComposeOutcome
where
    A: Ord + Clone,
    B: Ord + Clone,
    C: Ord + Clone,
    D: Ord + Clone,
    F: Fn(&A) -> Dist<C>,
    G: Fn(&B) -> Dist<D>,
    E: Fn(&B) -> Rat,
{
    let base = arcoupl_min_eps(mu1, mu2, rel);
    if base > *eps {
        return ComposeOutcome::BasePremiseFailed { min_eps: base };
    }
    for (i, (a, b)) in effective_rel(mu1, mu2, rel).into_iter().enumerate() {
        let budget = errfun(b);
        let m = arcoupl_min_eps(&f(a), &g(b), rel2);
        if m > budget {
            return ComposeOutcome::StepPremiseFailed {
                pair: i,
                min_eps: m,
                budget,
            };
        }
    }
    let budget = eps + mu2.integrate(&errfun);
    let min_eps = oracle_min_eps(&mu1.bind(&f), &mu2.bind(&g), rel2);
    let holds = min_eps <= budget;
    ComposeOutcome::Checked {
        min_eps,
        budget,
        holds,
    }
}

/// Expected error after a fragmented step over `unif(N)` whose first `M+1`
/// outcomes are accepted at no cost and whose rejected outcomes carry the
/// amplified error `(N+1)/(N−M) · ε`.
pub fn error_amp_identity(n: u64, m: u64, eps: &Rat) -> Result<Rat, CouplingError> {
    if m >= n {
        return Err(CouplingError::BadAmp { n, m });
    }
    let k = rat((n + 1) as i64, (n - m) as i64);
    let amplified = &k * eps;
    Ok(Dist::<u64>::unif(n).integrate(|j| {
        if *j <= m {
            Rat::zero()
        } else {
            amplified.clone()
        }
    }))
}

fn identity_rel<T: Ord + Clone>(d: &Dist<T>) -> BTreeSet<(T, T)> {
    d.support().map(|a| (a.clone(), a.clone())).collect()
}

/// Equal uniforms related by the bijection `j ↦ (j + shift) mod (N+1)`.
pub fn premise_bijection(n: u64, shift: u64) -> bool {
    let mu = Dist::<u64>::unif(n);
    let rel = (0..=n).map(|j| (j, (j + shift) % (n + 1))).collect();
    arcoupl_min_eps(&mu, &mu, &rel).is_zero()
}

/// Equal uniforms related by reversal, the shape used for labelled samples.
pub fn premise_reverse(n: u64) -> bool {
    let mu = Dist::<u64>::unif(n);
    let rel = (0..=n).map(|j| (j, n - j)).collect();
    arcoupl_min_eps(&mu, &mu, &rel).is_zero()
}

/// Two independent samples against one flat sample via `(i, j) ↦ i(M+1) + j`.
pub fn premise_product_flat(n: u64, m: u64) -> bool {
    let prod = Dist::<u64>::unif(n).product(&Dist::<u64>::unif(m));
    let flat = Dist::<u64>::unif((n + 1) * (m + 1) - 1);
    let rel: BTreeSet<((u64, u64), u64)> = prod
        .support()
        .map(|&(i, j)| ((i, j), i * (m + 1) + j))
        .collect();
    arcoupl_min_eps(&prod, &flat, &rel).is_zero()
}

/// The mirror image of [`premise_product_flat`].
pub fn premise_flat_product(n: u64, m: u64) -> bool {
    let prod = Dist::<u64>::unif(n).product(&Dist::<u64>::unif(m));
    let flat = Dist::<u64>::unif((n + 1) * (m + 1) - 1);
    let rel: BTreeSet<(u64, (u64, u64))> = prod
        .support()
        .map(|&(i, j)| (i * (m + 1) + j, (i, j)))
        .collect();
    arcoupl_min_eps(&flat, &prod, &rel).is_zero()
}

/// The implementation samples `unif(N)`; the specification steps only on the
/// `M+1` accepted outcomes and otherwise records "not stepped" (`None`).
pub fn premise_fragmented(n: u64, m: u64) -> bool {
    let mu1 = Dist::<u64>::unif(n);
    let each = rat(1, (n + 1) as i64);
    let mut items: Vec<(Option<u64>, Rat)> = (0..=m).map(|j| (Some(j), each.clone())).collect();
    items.push((None, rat((n - m) as i64, (n + 1) as i64)));
    let mu2 = Dist::from_weights(items);
    let rel = (0..=n)
        .map(|j| (j, if j <= m { Some(j) } else { None }))
        .collect();
    arcoupl_min_eps(&mu1, &mu2, &rel).is_zero()
}

/// Expectation bookkeeping: the amplified per-branch error averages to at
/// most the credit spent, and the composed coupling stays within it.
pub fn premise_rand_exp(n: u64, m: u64, eps: &Rat) -> bool {
    let Ok(avg) = error_amp_identity(n, m, eps) else {
        return false;
    };
    if avg > *eps {
        return false;
    }
    let mu = Dist::<u64>::unif(n);
    let k = rat((n + 1) as i64, (n - m) as i64);
    let amplified = (&k * eps).min(Rat::one());
    let err = |j: &u64| {
        if *j <= m {
            Rat::zero()
        } else {
            amplified.clone()
        }
    };
    let out = compose_check(
        &mu,
        &mu,
        |a: &u64| Dist::ret(*a),
        |b: &u64| Dist::ret(*b),
        &identity_rel(&mu),
        &identity_rel(&mu),
        &Rat::zero(),
        err,
    );
    match out {
        ComposeOutcome::Checked { holds, budget, .. } => holds && budget <= *eps,
        _ => false,
    }
}

/// Every rule-premise fact at a few desk-scale parameters.
pub fn rule_premises() -> Vec<(String, bool)> {
    let mut out = Vec::new();
    for n in [1u64, 3, 7] {
        for shift in 0..=n {
            out.push((format!("bijection N={n} shift={shift}"), premise_bijection(n, shift)));
        }
        out.push((format!("labelled reverse N={n}"), premise_reverse(n)));
    }
    for (n, m) in [(1u64, 1u64), (3, 1), (1, 3), (3, 3)] {
        out.push((format!("product-flat N={n} M={m}"), premise_product_flat(n, m)));
        out.push((format!("flat-product N={n} M={m}"), premise_flat_product(n, m)));
    }
    for (n, m) in [(1u64, 0u64), (3, 1), (7, 2), (7, 6)] {
        out.push((format!("fragmented N={n} M={m}"), premise_fragmented(n, m)));
        out.push((
            format!("rand-exp N={n} M={m}"),
            premise_rand_exp(n, m, &rat(1, 16)),
        ));
    }
    out
}

/// A random subdistribution over `0..range` with at most `max_supp` points.
pub fn random_dist<R: Rng>(rng: &mut R, max_supp: usize, range: u64) -> Dist<u64> {
    let k = rng.gen_range(0..=max_supp);
    let mut w: Vec<(u64, i64)> = (0..k)
        .map(|_| (rng.gen_range(0..range), rng.gen_range(1..=6)))
        .collect();
    w.sort();
    let total: i64 = w.iter().map(|x| x.1).sum::<i64>() + rng.gen_range(0..=3);
    Dist::from_weights(w.into_iter().map(|(v, x)| (v, rat(x, total.max(1)))))
}

pub fn random_rel<R: Rng>(rng: &mut R, range: u64, density: f64) -> BTreeSet<(u64, u64)> {
    let mut rel = BTreeSet::new();
    for a in 0..range {
        for b in 0..range {
            if rng.gen_bool(density) {
                rel.insert((a, b));
            }
        }
    }
    rel
}

/// Counts random queries on which simplex and subset oracle agree.
pub fn lp_oracle_agreement<R: Rng>(rng: &mut R, trials: usize) -> (usize, usize) {
    let mut ok = 0;
    for _ in 0..trials {
        let mu1 = random_dist(rng, 6, 8);
        let mu2 = random_dist(rng, 6, 8);
        let density = rng.gen_range(0.0..0.4);
        let rel = random_rel(rng, 8, density);
        let lp = arcoupl_min_eps(&mu1, &mu2, &rel);
        let oracle = arcoupl_subset_oracle(&mu1, &mu2, &rel).expect("support below limit");
        ok += (lp == oracle) as usize;
    }
    (ok, trials)
}

/// Random composition instances: picks a base coupling and per-pair
/// continuations, sets `ε` and `err` to their least feasible values so the
/// premises hold, and checks the conclusion. Returns (conclusions held,
/// instances run).
pub fn compose_random<R: Rng>(rng: &mut R, trials: usize) -> (usize, usize) {
    let mut held = 0;
    for _ in 0..trials {
        let mu1 = random_dist(rng, 4, 5);
        let mu2 = random_dist(rng, 4, 5);
        let d1 = rng.gen_range(0.2..0.7);
        let rel = random_rel(rng, 5, d1);
        let d2 = rng.gen_range(0.2..0.7);
        let rel2 = random_rel(rng, 6, d2);
        let fs: Vec<Dist<u64>> = (0..5).map(|_| random_dist(rng, 3, 6)).collect();
        let gs: Vec<Dist<u64>> = (0..5).map(|_| random_dist(rng, 3, 6)).collect();
        let f = |a: &u64| fs[*a as usize].clone();
        let g = |b: &u64| gs[*b as usize].clone();
        let eps = arcoupl_min_eps(&mu1, &mu2, &rel);
        let mut errs: BTreeMap<u64, Rat> = BTreeMap::new();
        for (a, b) in effective_rel(&mu1, &mu2, &rel) {
            let m = arcoupl_min_eps(&f(a), &g(b), &rel2);
            let slot = errs.entry(*b).or_insert_with(Rat::zero);
            if m > *slot {
                *slot = m;
            }
        }
        let errfun = |b: &u64| errs.get(b).cloned().unwrap_or_else(Rat::zero);
        let out = compose_check(&mu1, &mu2, f, g, &rel, &rel2, &eps, errfun);
        held += out.conclusion_holds() as usize;
    }
    (held, trials)
}

/// JSON form of a query over canonical value strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryJson {
    pub mu1: Vec<DistEntryJson>,
    pub mu2: Vec<DistEntryJson>,
    pub rel: Vec<(String, String)>,
    pub eps: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingVerdict {
    pub min_eps: String,
    pub eps: String,
    pub holds: bool,
}

fn checked_dist(entries: &[DistEntryJson], side: &str) -> Result<Dist<String>, CouplingError> {
    let mut mass = Rat::zero();
    for e in entries {
        let p = parse_rat(&e.p).map_err(|err| CouplingError::Query(format!("{side}: {err}")))?;
        if p < Rat::zero() {
            return Err(CouplingError::Query(format!("{side}: negative weight {}", e.p)));
        }
        mass += p;
    }
    if mass > Rat::one() {
        return Err(CouplingError::Query(format!(
            "{side}: total mass {} exceeds 1",
            fmt_rat(&mass)
        )));
    }
    dist_from_json(entries).map_err(|err| CouplingError::Query(format!("{side}: {err}")))
}

impl QueryJson {
    pub fn to_query(&self) -> Result<CouplingQuery<String, String>, CouplingError> {
        let eps = parse_rat(&self.eps).map_err(|e| CouplingError::Query(format!("eps: {e}")))?;
        if eps < Rat::zero() || eps > Rat::one() {
            return Err(CouplingError::Query(format!("eps {} outside [0, 1]", self.eps)));
        }
        Ok(CouplingQuery {
            mu1: checked_dist(&self.mu1, "mu1")?,
            mu2: checked_dist(&self.mu2, "mu2")?,
            rel: self.rel.iter().cloned().collect(),
            eps,
        })
    }
}

pub fn answer_query(q: &CouplingQuery<String, String>) -> CouplingVerdict {
    let m = arcoupl_min_eps(&q.mu1, &q.mu2, &q.rel);
    CouplingVerdict {
        holds: m <= q.eps,
        min_eps: fmt_rat(&m),
        eps: fmt_rat(&q.eps),
    }
}
