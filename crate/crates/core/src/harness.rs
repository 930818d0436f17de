//! Example corpus, probe contexts and refinement reports.
//!
//! Refinement is checked through a fixed family of probe contexts rather
//! than all contexts. A probe turns value observation into termination:
//! `C_k[e] = if e = k then () else diverge ()` terminates exactly when `e`
//! returns `k`. Every report is a finite-depth bracket: `sup_term` at depth
//! `d` is a lower bound of the supremum, and each program carries an
//! analytic bound on the mass still missing at that depth.

use std::fmt;

use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::dist::{fmt_rat, rat, Rat};
use crate::lang::{parse_closed, typecheck, BinOp, Config, Expr, ExprRef, TypeCtx, Val};
use crate::sched::{par_map, sup_search, term_prob, Scripted, SupOptions};

pub const PROBE_NOTE: &str = "checked on the listed probe contexts only; \
sup_term at the stated depth is a lower bound of the supremum";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Refines,
    Equiv,
    /// The left side is expected to exceed the right.
    StrictGap,
}

/// Bound on the termination mass a program has yet to gain after `d` steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Residual {
    Zero,
    /// `ratio^⌊d / cost⌋`: each loop iteration of `cost` steps leaves at most
    /// a `ratio` fraction unterminated.
    Geometric { ratio: Rat, cost: usize },
}

impl Residual {
    pub fn at(&self, depth: usize) -> Rat {
        match self {
            Residual::Zero => Rat::zero(),
            Residual::Geometric { ratio, cost } => pow(ratio, depth / cost),
        }
    }
}

impl fmt::Display for Residual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Residual::Zero => f.write_str("0"),
            Residual::Geometric { ratio, cost } => {
                write!(f, "({})^floor(d/{cost})", fmt_rat(ratio))
            }
        }
    }
}

pub fn pow(r: &Rat, k: usize) -> Rat {
    (0..k).fold(Rat::one(), |acc, _| acc * r)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Probe {
    /// Observes termination directly.
    Identity,
    /// `e; ()`.
    Seq,
    /// `if e = k then () else diverge ()`.
    Value(Val),
    /// A value probe run next to a forked thread that allocates.
    Interfere(Val),
}

impl fmt::Display for Probe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Probe::Identity => f.write_str("identity"),
            Probe::Seq => f.write_str("seq"),
            Probe::Value(v) => write!(f, "value {v}"),
            Probe::Interfere(v) => write!(f, "interfere {v}"),
        }
    }
}

fn diverge() -> ExprRef {
    parse_closed("diverge").expect("prelude defines diverge")
}

impl Probe {
    pub fn apply(&self, e: &ExprRef) -> ExprRef {
        match self {
            Probe::Identity => e.clone(),
            Probe::Seq => Expr::seq(e.clone(), Expr::unit()),
            Probe::Value(k) => Expr::if_(
                Expr::binop(BinOp::Eq, e.clone(), Expr::val(k.clone())),
                Expr::unit(),
                Expr::app(diverge(), Expr::unit()),
            ),
            Probe::Interfere(k) => Expr::seq(
                Expr::fork(Expr::alloc(Expr::int(0))),
                Probe::Value(k.clone()).apply(e),
            ),
        }
    }

    /// Steps the context itself takes around an already evaluated result it
    /// accepts, stepping the main thread only.
    pub fn overhead(&self) -> usize {
        let v = match self {
            Probe::Identity | Probe::Seq => Val::Unit,
            Probe::Value(k) | Probe::Interfere(k) => k.clone(),
        };
        let c = Config::new(self.apply(&Expr::val(v)));
        let head = Scripted { script: vec![] };
        (0..64)
            .find(|&n| term_prob(&head, n, &0, &c).is_one())
            .unwrap_or(64)
    }
}

pub fn value_probes(vals: &[Val]) -> Vec<Probe> {
    vals.iter().cloned().map(Probe::Value).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Side {
    pub src: String,
    pub residual: Residual,
}

impl Side {
    fn exact(src: String) -> Side {
        Side {
            src,
            residual: Residual::Zero,
        }
    }

    pub fn expr(&self) -> ExprRef {
        parse_closed(&self.src).expect("corpus program parses")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusEntry {
    pub name: String,
    pub left: Side,
    pub right: Side,
    pub relation: Relation,
    pub params: Vec<(String, String)>,
    pub probes: Vec<Probe>,
    pub depth: usize,
}

/// Amortised loop cost of a program whose every iteration terminates with
/// probability `1 − ratio`: the least `c` such that `k` iterations plus the
/// probe overhead fit in `k·c` steps, for `k` up to `iters`, stepping the
/// main thread only.
pub fn measure_loop_cost(src: &str, ratio: &Rat, overhead: usize, iters: usize) -> usize {
    let c = Config::new(parse_closed(src).expect("corpus program parses"));
    let head = Scripted { script: vec![] };
    let mut cost = 1;
    let mut d = 0;
    for k in 1..=iters {
        let target = Rat::one() - pow(ratio, k);
        while term_prob(&head, d, &0, &c) < target {
            d += 1;
            assert!(d < 2000, "loop cost measurement did not converge");
        }
        cost = cost.max((d + overhead).div_ceil(k));
    }
    cost
}

fn looping(src: String, ratio: Rat, probes: &[Probe]) -> Side {
    let overhead = probes.iter().map(Probe::overhead).max().unwrap_or(0);
    let cost = measure_loop_cost(&src, &ratio, overhead, 6);
    Side {
        src,
        residual: Residual::Geometric { ratio, cost },
    }
}

fn ints(range: std::ops::RangeInclusive<i64>) -> Vec<Val> {
    range.map(Val::int).collect()
}

fn entry(
    name: &str,
    left: Side,
    right: Side,
    relation: Relation,
    params: &[(&str, String)],
    probes: Vec<Probe>,
    depth: usize,
) -> CorpusEntry {
    CorpusEntry {
        name: name.to_string(),
        left,
        right,
        relation,
        params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        probes,
        depth,
    }
}

pub fn mixer_src() -> String {
    "let (y, r) = (ref 0, ref 0) in \
     ((let x1 = !y in let x2 = rand 1 in r := (x1 + x2) mod 2) ||| (y := 1)); !r"
        .to_string()
}

pub fn batch_src(n: u64, m: u64) -> (String, String) {
    (
        format!("let (x, y) = (rand {n} ||| rand {m}) in x * {} + y", m + 1),
        format!("rand {}", (n + 1) * (m + 1) - 1),
    )
}

pub fn rejection_src(n: u64, m: u64) -> (String, String) {
    (
        format!("(rec f _ = let x = rand {n} in if x <= {m} then x else f ()) ()"),
        format!("rand {m}"),
    )
}

/// Adversaries receive the shared bias cell.
pub const ADVERSARIES: &[(&str, &str)] = &[
    ("unit", "fun l -> ()"),
    ("writer", "fun l -> l := 1"),
    ("forking", "fun l -> fork (l := 1); l := 0"),
];

pub fn vn_src(n: u64, adv: &str) -> (String, String) {
    (
        format!(
            "(fun adv -> let l = ref 0 in fork (adv l); \
             (rec f _ = let b = (let v = !l in if v <= {n} then v else {n}) in \
              let x = rand {n1} <= b in let y = rand {n1} <= b in \
              if x = y then f () else x)) ({adv}) ()",
            n1 = n + 1
        ),
        format!("(fun adv _ -> rand 1 = 1) ({adv}) ()"),
    )
}

pub fn sodium_src(max: u64, ub: u64) -> (String, String) {
    (
        format!(
            "(fun ub -> if {max} <= ub then 0 else if ub < 2 then 0 else \
             let min = {max} mod ub in let r = ref 0 in \
             (rec f _ = r := rand ({max} - 1); if !r < min then f () else !r mod ub) ()) {ub}"
        ),
        format!("(fun ub -> if {max} <= ub || ub = 0 then 0 else rand (ub - 1)) {ub}"),
    )
}

pub fn otp_src(n: u64) -> (String, String) {
    (
        format!(
            "let x = ref 0 in \
             ((let msg = rand {n} in faa x msg) ||| (let key = rand {n} in faa x key)); \
             !x mod {}",
            n + 1
        ),
        format!("rand {n}"),
    )
}

pub const PROG_A: &str = "()";
pub const PROG_B: &str = "if nondet () = rand 1 then () else diverge ()";
pub const PROG_C: &str =
    "let l = alloctape 1 in if rand l 1 = nondet () then () else diverge ()";
pub const PROG_D: &str = "if rand 1 = 1 then () else diverge ()";
pub const NO_OPTIMAL_LHS: &str = "let n = nondet () in if rand n = 0 then diverge () else ()";
pub const NO_OPTIMAL_RHS: &str = "()";

/// Sodium's bound is 2^32; desk runs use smaller values.
pub const SODIUM_FULL_MAX: u64 = 1 << 32;

/// Depth at which the mixer's probe masses, interference probe included,
/// stop changing.
pub const MIXER_DEPTH: usize = 28;

/// The example corpus at desk-scale parameters.
pub fn corpus() -> Vec<CorpusEntry> {
    let mut out = Vec::new();
    let bits = ints(0..=1);

    let mut probes = value_probes(&bits);
    probes.push(Probe::Interfere(Val::int(0)));
    out.push(entry(
        "mixer",
        Side::exact(mixer_src()),
        Side::exact("rand 1".into()),
        Relation::Equiv,
        &[],
        probes,
        MIXER_DEPTH,
    ));

    for (n, m, depth) in [(1u64, 1u64, 20usize), (3, 1, 20)] {
        let (l, r) = batch_src(n, m);
        let k = ((n + 1) * (m + 1) - 1) as i64;
        let mut probes = value_probes(&ints(0..=k));
        probes.push(Probe::Interfere(Val::int(0)));
        out.push(entry(
            &format!("batch-{n}-{m}"),
            Side::exact(l),
            Side::exact(r),
            Relation::Equiv,
            &[("N", n.to_string()), ("M", m.to_string())],
            probes,
            depth,
        ));
    }

    let (l, r) = batch_src(7, 31);
    out.push(entry(
        "fimpl",
        Side::exact(l),
        Side::exact(r),
        Relation::Equiv,
        &[("N", "7".into()), ("M", "31".into())],
        value_probes(&[Val::int(0), Val::int(100), Val::int(255)]),
        18,
    ));

    let (n, m) = (3u64, 1u64);
    let (l, r) = rejection_src(n, m);
    let vals = ints(0..=m as i64);
    let mut probes = value_probes(&vals);
    probes.push(Probe::Interfere(Val::int(0)));
    out.push(entry(
        "rejection",
        looping(l, rat(1, 2), &probes),
        Side::exact(r),
        Relation::Equiv,
        &[("N", n.to_string()), ("M", m.to_string())],
        probes,
        40,
    ));

    for (name, adv) in ADVERSARIES {
        let (l, r) = vn_src(1, adv);
        let vals = [Val::Bool(true), Val::Bool(false)];
        let probes = value_probes(&vals);
        out.push(entry(
            &format!("vn-coin-{name}"),
            looping(l, rat(5, 9), &probes),
            Side::exact(r),
            Relation::Equiv,
            &[("N", "1".into()), ("adversary", adv.to_string())],
            probes,
            40,
        ));
    }

    for (max, ub, ratio) in [(8u64, 3u64, rat(1, 4)), (16, 5, rat(1, 16))] {
        let (l, r) = sodium_src(max, ub);
        let vals = ints(0..=ub as i64 - 1);
        let probes = value_probes(&vals);
        out.push(entry(
            &format!("sodium-{max}-{ub}"),
            looping(l, ratio, &probes),
            Side::exact(r),
            Relation::Equiv,
            &[
                ("MAX", max.to_string()),
                ("upper_bound", ub.to_string()),
                ("full MAX", SODIUM_FULL_MAX.to_string()),
            ],
            probes,
            40,
        ));
    }

    let (l, r) = otp_src(1);
    let mut probes = value_probes(&bits);
    probes.push(Probe::Interfere(Val::int(1)));
    out.push(entry(
        "otp",
        Side::exact(l),
        Side::exact(r),
        Relation::Equiv,
        &[("N", "1".into())],
        probes,
        22,
    ));

    out.push(entry(
        "progA-progD",
        Side::exact(PROG_A.into()),
        Side::exact(PROG_D.into()),
        Relation::StrictGap,
        &[],
        vec![Probe::Identity],
        10,
    ));

    out.push(entry(
        "no-optimal",
        Side::exact(NO_OPTIMAL_LHS.into()),
        Side::exact(NO_OPTIMAL_RHS.into()),
        Relation::Refines,
        &[],
        vec![Probe::Identity, Probe::Seq],
        20,
    ));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "EXPECTED-FAIL")]
    ExpectedFail,
}

impl Verdict {
    pub fn is_bad(self) -> bool {
        self == Verdict::Fail
    }

    fn all(vs: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::Pass;
        for v in vs {
            match v {
                Verdict::Fail => return Verdict::Fail,
                Verdict::ExpectedFail => out = Verdict::ExpectedFail,
                Verdict::Pass => {}
            }
        }
        out
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::ExpectedFail => "EXPECTED-FAIL",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeLine {
    pub probe: String,
    pub left: String,
    pub right: String,
    pub residual: String,
    pub gap: String,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineReport {
    pub left: String,
    pub right: String,
    pub depth: usize,
    pub right_residual: String,
    pub probes: Vec<ProbeLine>,
    pub verdict: Verdict,
    pub note: String,
}

pub struct RefineInput<'a> {
    pub left_name: &'a str,
    pub right_name: &'a str,
    pub left: &'a ExprRef,
    pub right: &'a ExprRef,
    pub right_residual: &'a Residual,
    pub depth: usize,
    pub probes: &'a [Probe],
    pub workers: usize,
    pub expect_gap: bool,
}

/// `sup_term` of `e` at `depth` without stuttering.
pub fn sup(depth: usize, e: &ExprRef, workers: usize) -> Rat {
    let opts = SupOptions {
        stutter: false,
        workers,
    };
    sup_search(depth, &Config::new(e.clone()), &|_| true, opts).value
}

/// Per probe: `L = sup_term(d, C[left])`, `R = sup_term(d, C[right])` and
/// PASS iff `L <= R + r(d)`.
pub fn refine_report(inp: &RefineInput<'_>) -> RefineReport {
    let r = inp.right_residual.at(inp.depth);
    let mut lines = Vec::new();
    for p in inp.probes {
        let lv = sup(inp.depth, &p.apply(inp.left), inp.workers);
        let rv = sup(inp.depth, &p.apply(inp.right), inp.workers);
        let ok = lv <= &rv + &r;
        let verdict = match (ok, inp.expect_gap) {
            (true, _) => Verdict::Pass,
            (false, true) => Verdict::ExpectedFail,
            (false, false) => Verdict::Fail,
        };
        let gap = if lv > rv { &lv - &rv } else { Rat::zero() };
        lines.push(ProbeLine {
            probe: p.to_string(),
            left: fmt_rat(&lv),
            right: fmt_rat(&rv),
            residual: fmt_rat(&r),
            gap: fmt_rat(&gap),
            verdict,
        });
    }
    RefineReport {
        left: inp.left_name.to_string(),
        right: inp.right_name.to_string(),
        depth: inp.depth,
        right_residual: inp.right_residual.to_string(),
        verdict: Verdict::all(lines.iter().map(|l| l.verdict)),
        probes: lines,
        note: PROBE_NOTE.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivReport {
    pub forward: RefineReport,
    pub backward: RefineReport,
    pub verdict: Verdict,
}

pub fn equiv_report(
    names: (&str, &str),
    left: &Side,
    right: &Side,
    depth: usize,
    probes: &[Probe],
    workers: usize,
) -> EquivReport {
    let (le, re) = (left.expr(), right.expr());
    let forward = refine_report(&RefineInput {
        left_name: names.0,
        right_name: names.1,
        left: &le,
        right: &re,
        right_residual: &right.residual,
        depth,
        probes,
        workers,
        expect_gap: false,
    });
    let backward = refine_report(&RefineInput {
        left_name: names.1,
        right_name: names.0,
        left: &re,
        right: &le,
        right_residual: &left.residual,
        depth,
        probes,
        workers,
        expect_gap: false,
    });
    let verdict = Verdict::all([forward.verdict, backward.verdict]);
    EquivReport {
        forward,
        backward,
        verdict,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryReport {
    pub name: String,
    pub relation: Relation,
    pub params: Vec<(String, String)>,
    pub reports: Vec<RefineReport>,
    pub verdict: Verdict,
}

pub fn run_entry(e: &CorpusEntry, depth: usize, workers: usize) -> EntryReport {
    let names = (format!("{}.left", e.name), format!("{}.right", e.name));
    let reports = match e.relation {
        Relation::Equiv => {
            let eq = equiv_report(
                (&names.0, &names.1),
                &e.left,
                &e.right,
                depth,
                &e.probes,
                workers,
            );
            vec![eq.forward, eq.backward]
        }
        Relation::Refines | Relation::StrictGap => {
            let (le, re) = (e.left.expr(), e.right.expr());
            vec![refine_report(&RefineInput {
                left_name: &names.0,
                right_name: &names.1,
                left: &le,
                right: &re,
                right_residual: &e.right.residual,
                depth,
                probes: &e.probes,
                workers,
                expect_gap: e.relation == Relation::StrictGap,
            })]
        }
    };
    let mut verdict = Verdict::all(reports.iter().map(|r| r.verdict));
    if e.relation == Relation::StrictGap && verdict == Verdict::Pass {
        // the gap is part of the claim
        verdict = Verdict::Fail;
    }
    EntryReport {
        name: e.name.clone(),
        relation: e.relation,
        params: e.params.clone(),
        reports,
        verdict,
    }
}

/// Lower and upper ends of the two-sided bracket for a looping program whose
/// probe value has limit mass `limit`.
pub fn loop_bracket(limit: &Rat, residual: &Residual, depth: usize) -> (Rat, Rat) {
    (limit * (Rat::one() - residual.at(depth)), limit.clone())
}

/// Least depth at which every probe mass of `e` equals its value at
/// `cap`. Meaningful for programs whose probe masses are reached within
/// `cap` steps.
pub fn saturation_depth(e: &ExprRef, probes: &[Probe], cap: usize) -> usize {
    let masses = |d: usize| -> Vec<Rat> { probes.iter().map(|p| sup(d, &p.apply(e), 1)).collect() };
    let target = masses(cap);
    (0..=cap).find(|&d| masses(d) == target).unwrap_or(cap)
}

/// Depth cap for locating saturation of the choice-law programs.
pub const ALGEBRA_CAP: usize = 40;

/// `e1 ⊕_p e2`, sampling `rand N < M` with `M / (N+1) = p` in lowest terms.
pub fn pchoice(p: &Rat, e1: &str, e2: &str) -> String {
    let g = p.numer().gcd(p.denom());
    let m = p.numer() / &g;
    let n = p.denom() / &g - 1;
    format!("(if rand {n} < {m} then {e1} else {e2})")
}

/// `e1 or e2` through `nondet`.
pub fn ndchoice(e1: &str, e2: &str) -> String {
    format!("(if nondet () = 0 then {e1} else {e2})")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LawReport {
    pub law: String,
    pub left: String,
    pub right: String,
    pub depth: usize,
    pub reports: Vec<RefineReport>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgebraReport {
    pub p: String,
    pub q: String,
    pub leaves: Vec<i64>,
    pub laws: Vec<LawReport>,
    pub verdict: Verdict,
}

/// Checks the choice-operator laws on integer leaves at saturation depth.
/// The distributive law is checked in its stated direction only.
pub fn algebraic_suite(p: &Rat, q: &Rat, leaves: [i64; 3]) -> AlgebraReport {
    let [a, b, c] = leaves.map(|x| x.to_string());
    let one = Rat::one();
    let pq = p * q;
    let inner = if pq == one {
        Rat::zero()
    } else {
        (q - &pq) / (&one - &pq)
    };
    let div = "diverge ()".to_string();
    // (name, left, right, equivalence?)
    let laws: Vec<(&str, String, String, bool)> = vec![
        ("prob-idempotence", pchoice(p, &a, &a), a.clone(), true),
        (
            "prob-commutativity",
            pchoice(p, &a, &b),
            pchoice(&(&one - p), &b, &a),
            true,
        ),
        (
            "prob-associativity",
            pchoice(q, &pchoice(p, &a, &b), &c),
            pchoice(&pq, &a, &pchoice(&inner, &b, &c)),
            true,
        ),
        ("nd-idempotence", ndchoice(&a, &a), a.clone(), true),
        ("nd-commutativity", ndchoice(&a, &b), ndchoice(&b, &a), true),
        (
            "nd-associativity",
            ndchoice(&a, &ndchoice(&b, &c)),
            ndchoice(&ndchoice(&a, &b), &c),
            true,
        ),
        ("nd-unit", ndchoice(&a, &div), a.clone(), true),
        (
            "distributivity",
            ndchoice(&pchoice(p, &a, &b), &pchoice(p, &a, &c)),
            pchoice(p, &a, &ndchoice(&b, &c)),
            false,
        ),
    ];
    let mut vals: Vec<i64> = leaves.to_vec();
    vals.sort();
    vals.dedup();
    let probes = value_probes(&vals.iter().map(|&v| Val::int(v)).collect::<Vec<_>>());
    let mut out = Vec::new();
    for (name, l, r, equiv) in laws {
        let le = parse_closed(&l).expect("law program parses");
        let re = parse_closed(&r).expect("law program parses");
        let depth = saturation_depth(&le, &probes, ALGEBRA_CAP).max(saturation_depth(&re, &probes, ALGEBRA_CAP));
        let (ls, rs) = (Side::exact(l.clone()), Side::exact(r.clone()));
        let reports = if equiv {
            let eq = equiv_report(("lhs", "rhs"), &ls, &rs, depth, &probes, 1);
            vec![eq.forward, eq.backward]
        } else {
            vec![refine_report(&RefineInput {
                left_name: "lhs",
                right_name: "rhs",
                left: &le,
                right: &re,
                right_residual: &Residual::Zero,
                depth,
                probes: &probes,
                workers: 1,
                expect_gap: false,
            })]
        };
        out.push(LawReport {
            law: name.to_string(),
            verdict: Verdict::all(reports.iter().map(|r| r.verdict)),
            left: l,
            right: r,
            depth,
            reports,
        });
    }
    AlgebraReport {
        p: fmt_rat(p),
        q: fmt_rat(q),
        leaves: leaves.to_vec(),
        verdict: Verdict::all(out.iter().map(|l| l.verdict)),
        laws: out,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLink {
    pub from: String,
    pub to: String,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub depth: usize,
    /// `sup_term` of progA through progD.
    pub sups: Vec<(String, String)>,
    pub chain: Vec<ChainLink>,
    pub gap: String,
    pub gap_verdict: Verdict,
    /// `(k, depth(k), sup_term)` for the no-optimal-scheduler program.
    pub no_optimal: Vec<(usize, usize, String)>,
    pub no_optimal_ok: bool,
}

/// Depth at which the no-optimal-scheduler program can first reach
/// `1 − 1/(k+1)`.
pub fn no_optimal_depth(k: usize) -> usize {
    NO_OPTIMAL_BASE + NO_OPTIMAL_STRIDE * k
}

pub const NO_OPTIMAL_BASE: usize = 9;
pub const NO_OPTIMAL_STRIDE: usize = 5;

pub fn counterexample_suite(depth: usize) -> CounterexampleReport {
    let progs = [
        ("progA", PROG_A),
        ("progB", PROG_B),
        ("progC", PROG_C),
        ("progD", PROG_D),
    ];
    let vals: Vec<Rat> = progs
        .iter()
        .map(|(_, s)| sup(depth, &parse_closed(s).expect("program parses"), 1))
        .collect();
    let chain = (0..3)
        .map(|i| ChainLink {
            from: progs[i].0.to_string(),
            to: progs[i + 1].0.to_string(),
            holds: vals[i] <= vals[i + 1],
        })
        .collect();
    let gap = &vals[0] - &vals[3];
    let gap_verdict = if gap > Rat::zero() {
        Verdict::ExpectedFail
    } else {
        Verdict::Fail
    };
    let lhs = parse_closed(NO_OPTIMAL_LHS).expect("program parses");
    let mut no_optimal = Vec::new();
    let mut ok = true;
    let mut prev: Option<Rat> = None;
    for k in 1..=8 {
        let d = no_optimal_depth(k);
        let v = sup(d, &lhs, 1);
        let bound = Rat::one() - rat(1, k as i64 + 1);
        ok &= v >= bound && v <= Rat::one();
        if let Some(p) = &prev {
            ok &= v > *p;
        }
        no_optimal.push((k, d, fmt_rat(&v)));
        prev = Some(v);
    }
    CounterexampleReport {
        depth,
        sups: progs
            .iter()
            .zip(&vals)
            .map(|((n, _), v)| (n.to_string(), fmt_rat(v)))
            .collect(),
        chain,
        gap: fmt_rat(&gap),
        gap_verdict,
        no_optimal,
        no_optimal_ok: ok,
    }
}

pub fn typechecks(src: &str) -> bool {
    parse_closed(src)
        .map(|e| typecheck(&TypeCtx::new(), &e).is_ok())
        .unwrap_or(false)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelftestLine {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub lines: Vec<SelftestLine>,
}

impl SelftestReport {
    pub fn ok(&self) -> bool {
        self.lines.iter().all(|l| !l.verdict.is_bad())
    }
}

fn line(name: &str, pass: bool, detail: String) -> SelftestLine {
    SelftestLine {
        name: name.to_string(),
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        detail,
    }
}

/// Runs the corpus, the counterexample and algebraic suites and quick
/// versions of the coupling and scheduler-lemma validations.
pub fn selftest(workers: usize) -> SelftestReport {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    let entries = corpus();
    let reports = par_map(&entries, workers, |e| run_entry(e, e.depth, 1));
    let mut lines: Vec<SelftestLine> = reports
        .iter()
        .map(|r| SelftestLine {
            name: format!("corpus {}", r.name),
            verdict: r.verdict,
            detail: r
                .reports
                .iter()
                .flat_map(|rr| rr.probes.iter().map(|p| format!("{} {}<={}", p.probe, p.left, p.right)))
                .collect::<Vec<_>>()
                .join("; "),
        })
        .collect();

    let ce = counterexample_suite(30);
    lines.push(SelftestLine {
        name: "progA vs progD gap".into(),
        verdict: ce.gap_verdict,
        detail: format!(
            "sups {}; gap {}",
            ce.sups
                .iter()
                .map(|(n, v)| format!("{n}={v}"))
                .collect::<Vec<_>>()
                .join(" "),
            ce.gap
        ),
    });
    lines.push(line(
        "no optimal scheduler",
        ce.no_optimal_ok,
        ce.no_optimal
            .iter()
            .map(|(k, d, v)| format!("k={k} d={d} {v}"))
            .collect::<Vec<_>>()
            .join("; "),
    ));

    let alg = algebraic_suite(&rat(1, 3), &rat(1, 3), [0, 1, 2]);
    for l in &alg.laws {
        lines.push(SelftestLine {
            name: format!("law {}", l.law),
            verdict: l.verdict,
            detail: format!("depth {}", l.depth),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (ok, n) = crate::coupling::lp_oracle_agreement(&mut rng, 100);
    lines.push(line("coupling lp/oracle", ok == n, format!("{ok}/{n}")));
    let prem = crate::coupling::rule_premises();
    let bad: Vec<&String> = prem.iter().filter(|(_, ok)| !ok).map(|(n, _)| n).collect();
    lines.push(line(
        "coupling rule premises",
        bad.is_empty(),
        format!("{} facts, failing: {:?}", prem.len(), bad),
    ));
    let (held, n) = crate::coupling::compose_random(&mut rng, 50);
    lines.push(line("coupling composition", held == n, format!("{held}/{n}")));

    let t = crate::fisch::validate_random(&mut rng, 30, 4);
    lines.push(line("scheduler lemmas", t.all_pass(), format!("{t:?}")));

    SelftestReport { lines }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_semantics() {
        let e = parse_closed("rand 1").unwrap();
        let p = Probe::Value(Val::int(0));
        assert_eq!(sup(10, &p.apply(&e), 1), rat(1, 2));
        let never = Probe::Value(Val::int(5));
        assert_eq!(sup(10, &never.apply(&e), 1), Rat::zero());
        assert_eq!(sup(10, &Probe::Seq.apply(&e), 1), Rat::one());
        assert_eq!(sup(12, &Probe::Interfere(Val::int(1)).apply(&e), 1), rat(1, 2));
    }

    #[test]
    fn overhead_is_small() {
        assert_eq!(Probe::Identity.overhead(), 0);
        assert_eq!(Probe::Value(Val::int(0)).overhead(), 2);
        assert_eq!(Probe::Interfere(Val::int(0)).overhead(), 4);
    }

    #[test]
    fn pchoice_lowest_terms() {
        assert_eq!(pchoice(&rat(2, 6), "0", "1"), "(if rand 2 < 1 then 0 else 1)");
        assert_eq!(pchoice(&rat(1, 2), "0", "1"), "(if rand 1 < 1 then 0 else 1)");
        assert_eq!(pchoice(&Rat::zero(), "0", "1"), "(if rand 0 < 0 then 0 else 1)");
    }

    #[test]
    fn corpus_closed_and_typed() {
        for e in corpus() {
            assert!(typechecks(&e.left.src), "{} left: {}", e.name, e.left.src);
            assert!(typechecks(&e.right.src), "{} right: {}", e.name, e.right.src);
        }
        for s in [PROG_A, PROG_B, PROG_C, PROG_D, NO_OPTIMAL_LHS] {
            assert!(typechecks(s), "{s}");
        }
    }

    #[test]
    fn residual_values() {
        let r = Residual::Geometric {
            ratio: rat(1, 2),
            cost: 5,
        };
        assert_eq!(r.at(4), Rat::one());
        assert_eq!(r.at(10), rat(1, 4));
        assert_eq!(Residual::Zero.at(3), Rat::zero());
    }

    #[test]
    fn prog_d_hand_trace() {
        let d = parse_closed(PROG_D).unwrap();
        assert_eq!(sup(2, &d, 1), Rat::zero());
        assert_eq!(sup(3, &d, 1), rat(1, 2));
        assert_eq!(sup(10, &d, 1), rat(1, 2));
    }

    #[test]
    fn e_refines_e() {
        let s = Side::exact("rand 2".into());
        let r = equiv_report(("a", "b"), &s, &s, 6, &value_probes(&ints(0..=2)), 1);
        assert_eq!(r.verdict, Verdict::Pass);
    }
}
