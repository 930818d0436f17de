//! Thread-pool stepping, schedulers, bounded execution and the exact
//! maximisation of termination probability over schedulers.

use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;
use std::sync::Mutex;
use std::time::Instant;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{fmt_rat, Dist, Rat};
use crate::lang::{canonicalize, step, Config, ExprRef, Val};

/// Steps thread `j`. With `eager` the step is attempted even when the
/// configuration is final; otherwise final configurations have no successor.
pub(crate) fn thread_step(rho: &Config, j: usize, eager: bool) -> Dist<Config> {
    if !eager && rho.is_final() {
        return Dist::zero();
    }
    let Some(e) = rho.threads.get(j) else {
        return Dist::ret(rho.clone());
    };
    if e.is_value() {
        return Dist::ret(rho.clone());
    }
    step(e, &rho.state).map(|(e2, s2, forks)| {
        let mut threads = rho.threads.clone();
        threads[j] = e2.clone();
        threads.extend(forks.iter().cloned());
        Config {
            threads,
            state: s2.clone(),
        }
    })
}

pub fn tp_step(rho: &Config, j: usize) -> Dist<Config> {
    thread_step(rho, j, false)
}

/// Indices of threads that are not values.
pub fn active_threads(rho: &Config) -> Vec<usize> {
    rho.threads
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.is_value())
        .map(|(i, _)| i)
        .collect()
}

pub trait Scheduler: Sync {
    type State: Clone + Ord + Hash + Debug + Send + Sync;

    fn initial(&self) -> Self::State;

    fn transition(&self, z: &Self::State, rho: &Config) -> Dist<(Self::State, usize)>;
}

pub fn sch_step<S: Scheduler>(s: &S, z: &S::State, rho: &Config) -> Dist<(S::State, Config)> {
    s.transition(z, rho)
        .bind(|(z2, j)| tp_step(rho, *j).map(|r| (z2.clone(), r.clone())))
}

/// Distribution of the value returned by the first thread within `n` steps.
pub fn exec<S: Scheduler>(s: &S, n: usize, z: &S::State, rho: &Config) -> Dist<Val> {
    let mut done: Vec<(Val, Rat)> = Vec::new();
    let mut frontier: Dist<(S::State, Config)> = Dist::ret((z.clone(), rho.clone()));
    for left in (0..=n).rev() {
        let mut next = Vec::new();
        for ((z, c), p) in frontier.iter() {
            if let Some(v) = c.head_value() {
                done.push((v.clone(), p.clone()));
            } else if left > 0 {
                for (succ, q) in sch_step(s, z, c).iter() {
                    next.push((succ.clone(), p * q));
                }
            }
        }
        frontier = Dist::from_weights(next);
        if frontier.is_empty() {
            break;
        }
    }
    Dist::from_weights(done)
}

/// Like [`exec`] but keeps the mass of configurations that have not finished.
pub fn pexec<S: Scheduler>(
    s: &S,
    n: usize,
    z: &S::State,
    rho: &Config,
) -> Dist<(S::State, Config)> {
    let mut frontier: Dist<(S::State, Config)> = Dist::ret((z.clone(), rho.clone()));
    for _ in 0..n {
        let mut next = Vec::new();
        let mut moved = false;
        for ((z, c), p) in frontier.iter() {
            if c.is_final() {
                next.push(((z.clone(), c.clone()), p.clone()));
            } else {
                moved = true;
                for (succ, q) in sch_step(s, z, c).iter() {
                    next.push((succ.clone(), p * q));
                }
            }
        }
        frontier = Dist::from_weights(next);
        if !moved {
            break;
        }
    }
    frontier
}

pub fn term_prob<S: Scheduler>(s: &S, n: usize, z: &S::State, rho: &Config) -> Rat {
    exec(s, n, z, rho).mass()
}

/// Cycles through thread indices 0, 1, 2, ... modulo the pool size.
#[derive(Clone, Copy, Debug, Default)]
pub struct RoundRobin;

impl Scheduler for RoundRobin {
    type State = u64;

    fn initial(&self) -> u64 {
        0
    }

    fn transition(&self, z: &u64, rho: &Config) -> Dist<(u64, usize)> {
        let j = (*z % rho.threads.len() as u64) as usize;
        Dist::ret((z + 1, j))
    }
}

/// Picks any thread index uniformly at random, values included.
#[derive(Clone, Copy, Debug, Default)]
pub struct Uniform;

impl Scheduler for Uniform {
    type State = ();

    fn initial(&self) {}

    fn transition(&self, _: &(), rho: &Config) -> Dist<((), usize)> {
        let k = rho.threads.len() as u64;
        Dist::<u64>::unif(k - 1).map(|j| ((), *j as usize))
    }
}

/// Always steps the most recently spawned thread that is not yet a value.
#[derive(Clone, Copy, Debug, Default)]
pub struct Greedy;

impl Scheduler for Greedy {
    type State = ();

    fn initial(&self) {}

    fn transition(&self, _: &(), rho: &Config) -> Dist<((), usize)> {
        let j = active_threads(rho).last().copied().unwrap_or(0);
        Dist::ret(((), j))
    }
}

/// Deterministic pseudo-random choice among active threads.
///
/// The state is the step counter `k`; the choice at step `k` is drawn from a
/// ChaCha8 generator seeded with `seed` on stream `k`, so any prefix of a
/// run can be replayed without the ones before it.
#[derive(Clone, Copy, Debug)]
pub struct Seeded {
    pub seed: u64,
}

impl Seeded {
    pub fn choose(&self, k: u64, candidates: usize) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k);
        rng.gen_range(0..candidates)
    }
}

impl Scheduler for Seeded {
    type State = u64;

    fn initial(&self) -> u64 {
        0
    }

    fn transition(&self, k: &u64, rho: &Config) -> Dist<(u64, usize)> {
        let act = active_threads(rho);
        let j = if act.is_empty() {
            0
        } else {
            act[self.choose(*k, act.len())]
        };
        Dist::ret((k + 1, j))
    }
}

/// Follows a fixed list of thread indices, then steps the first active
/// thread.
#[derive(Clone, Debug)]
pub struct Scripted {
    pub script: Vec<usize>,
}

impl Scheduler for Scripted {
    type State = usize;

    fn initial(&self) -> usize {
        0
    }

    fn transition(&self, k: &usize, rho: &Config) -> Dist<(usize, usize)> {
        let j = match self.script.get(*k) {
            Some(j) => *j,
            None => active_threads(rho).first().copied().unwrap_or(0),
        };
        Dist::ret((k + 1, j))
    }
}

/// Options for the supremum search.
#[derive(Clone, Copy, Debug)]
pub struct SupOptions {
    /// Also consider stepping a value or out-of-range thread.
    pub stutter: bool,
    pub workers: usize,
}

impl Default for SupOptions {
    fn default() -> Self {
        SupOptions {
            stutter: false,
            workers: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupResult {
    pub value: Rat,
    pub nodes: u64,
}

type Accept<'a> = &'a (dyn Fn(&Val) -> bool + Sync);

struct Engine<'a> {
    accept: Accept<'a>,
    stutter: bool,
    memo: HashMap<(Config, usize), Rat>,
    nodes: u64,
}

impl<'a> Engine<'a> {
    fn new(accept: Accept<'a>, stutter: bool) -> Self {
        Engine {
            accept,
            stutter,
            memo: HashMap::new(),
            nodes: 0,
        }
    }

    fn choices(&self, rho: &Config) -> Vec<usize> {
        let mut js = active_threads(rho);
        if self.stutter {
            js.push(rho.threads.len());
        }
        js
    }

    fn expected(&mut self, d: &Dist<Config>, n: usize) -> Rat {
        let mut acc = Rat::zero();
        for (c, p) in d.iter() {
            acc += p * self.value(c, n);
        }
        acc
    }

    fn value(&mut self, rho: &Config, n: usize) -> Rat {
        if let Some(v) = rho.head_value() {
            return if (self.accept)(v) { Rat::one() } else { Rat::zero() };
        }
        if n == 0 {
            return Rat::zero();
        }
        let c = canonicalize(rho);
        let key = (c, n);
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        self.nodes += 1;
        let c = &key.0;
        let mut best = Rat::zero();
        for j in self.choices(c) {
            let v = self.expected(&tp_step(c, j), n - 1);
            if v > best {
                best = v;
                if best.is_one() {
                    break;
                }
            }
        }
        self.memo.insert(key, best.clone());
        best
    }

    /// Per-choice values at the root, used by the maximal scheduler.
    fn scores(&mut self, rho: &Config, n: usize) -> Vec<(usize, Rat)> {
        self.choices(rho)
            .into_iter()
            .map(|j| (j, self.expected(&tp_step(rho, j), n.saturating_sub(1))))
            .collect()
    }
}

/// Runs `f` over `items` on up to `workers` threads, keeping input order.
pub fn par_map<T: Sync, U: Send, F: Fn(&T) -> U + Sync>(items: &[T], workers: usize, f: F) -> Vec<U> {
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|sc| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                sc.spawn(move || part.iter().map(f).collect::<Vec<U>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Maximum over schedulers of the probability that the first thread returns
/// an accepted value within `n` steps.
///
/// The root's successors are solved as independent tasks with their own
/// memo tables, so the value and the node count do not depend on the number
/// of workers.
pub fn sup_search(n: usize, rho: &Config, accept: Accept<'_>, opts: SupOptions) -> SupResult {
    if let Some(v) = rho.head_value() {
        let value = if accept(v) { Rat::one() } else { Rat::zero() };
        return SupResult { value, nodes: 0 };
    }
    if n == 0 {
        return SupResult {
            value: Rat::zero(),
            nodes: 0,
        };
    }
    let root = canonicalize(rho);
    let probe = Engine::new(accept, opts.stutter);
    let mut tasks: Vec<(usize, Config, Rat)> = Vec::new();
    for j in probe.choices(&root) {
        for (c, p) in tp_step(&root, j).iter() {
            tasks.push((j, c.clone(), p.clone()));
        }
    }
    let solved = par_map(&tasks, opts.workers, |(_, c, _)| {
        let mut eng = Engine::new(accept, opts.stutter);
        let v = eng.value(c, n - 1);
        (v, eng.nodes)
    });
    let mut per_choice: Vec<(usize, Rat)> = Vec::new();
    let mut nodes = 1;
    for ((j, _, p), (v, k)) in tasks.iter().zip(solved) {
        nodes += k;
        match per_choice.last_mut() {
            Some((jj, acc)) if jj == j => *acc += p * v,
            _ => per_choice.push((*j, p * v)),
        }
    }
    let value = per_choice
        .into_iter()
        .map(|(_, v)| v)
        .max()
        .unwrap_or_else(Rat::zero);
    SupResult { value, nodes }
}

fn accept_all(_: &Val) -> bool {
    true
}

pub fn sup_term(n: usize, rho: &Config) -> Rat {
    sup_search(n, rho, &accept_all, SupOptions::default()).value
}

pub fn sup_term_with(n: usize, rho: &Config, opts: SupOptions) -> SupResult {
    sup_search(n, rho, &accept_all, opts)
}

pub fn sup_value_mass(n: usize, rho: &Config, accept: Accept<'_>) -> Rat {
    sup_search(n, rho, accept, SupOptions::default()).value
}

/// Raises the depth from `start` by `stride` until the value has not changed
/// for `window` consecutive depths or `max_depth` is reached. Returns the
/// last depth and value. The plateau is a heuristic stopping rule, not a
/// proof of convergence.
pub fn sup_until_stable(
    rho: &Config,
    accept: Accept<'_>,
    start: usize,
    stride: usize,
    window: usize,
    max_depth: usize,
) -> (usize, Rat) {
    let mut d = start;
    let mut last = sup_value_mass(d, rho, accept);
    let mut same = 0;
    while same < window && d + stride <= max_depth {
        d += stride;
        let v = sup_value_mass(d, rho, accept);
        if v == last {
            same += 1;
        } else {
            same = 0;
            last = v;
        }
    }
    (d, last)
}

/// The scheduler that realises the supremum: with `k` steps remaining it
/// steps the first thread whose successors have the largest value at depth
/// `k - 1`. Its state is the remaining budget.
pub struct Maximal<'a> {
    engine: Mutex<Engine<'a>>,
    budget: usize,
}

impl<'a> Maximal<'a> {
    pub fn new(budget: usize, accept: Accept<'a>) -> Self {
        Maximal {
            engine: Mutex::new(Engine::new(accept, false)),
            budget,
        }
    }
}

impl Scheduler for Maximal<'_> {
    type State = usize;

    fn initial(&self) -> usize {
        self.budget
    }

    fn transition(&self, k: &usize, rho: &Config) -> Dist<(usize, usize)> {
        let scores = self.engine.lock().expect("engine lock").scores(rho, *k);
        let mut best: Option<(usize, Rat)> = None;
        for (j, v) in scores {
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((j, v));
            }
        }
        let j = best.map_or(0, |(j, _)| j);
        Dist::ret((k.saturating_sub(1), j))
    }
}

/// A left-side scheduler run that beats the right side's supremum.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterTrace {
    pub seed: u64,
    pub depth: usize,
    pub left_prob: String,
    pub right_sup: String,
    pub gap: String,
    /// Thread choices along the most likely branch of the run.
    pub choices: Vec<usize>,
}

#[derive(Clone, Copy, Debug)]
pub struct Budget {
    pub depth: usize,
    pub tries: u64,
}

fn likely_path<S: Scheduler>(s: &S, n: usize, rho: &Config) -> Vec<usize> {
    let mut out = Vec::new();
    let mut z = s.initial();
    let mut c = rho.clone();
    for _ in 0..n {
        if c.is_final() {
            break;
        }
        let Some(((z2, j), _)) = s.transition(&z, &c).iter().max_by(|a, b| a.1.cmp(b.1)).map(|(k, p)| (k.clone(), p.clone())) else {
            break;
        };
        out.push(j);
        let Some((c2, _)) = tp_step(&c, j).iter().max_by(|a, b| a.1.cmp(b.1)).map(|(k, p)| (k.clone(), p.clone())) else {
            break;
        };
        z = z2;
        c = c2;
    }
    out
}

/// Randomised search for a scheduler under which `left` terminates with
/// higher probability than `right` can under any scheduler. Each try runs
/// `left` exactly under a [`Seeded`] scheduler. `None` means the search was
/// inconclusive.
pub fn falsify(left: &ExprRef, right: &ExprRef, budget: Budget) -> Option<CounterTrace> {
    let l = Config::new(left.clone());
    let r = Config::new(right.clone());
    let right_sup = sup_term(budget.depth, &r);
    for seed in 0..budget.tries {
        let s = Seeded { seed };
        let p = term_prob(&s, budget.depth, &0, &l);
        if p > right_sup {
            return Some(CounterTrace {
                seed,
                depth: budget.depth,
                left_prob: fmt_rat(&p),
                right_sup: fmt_rat(&right_sup),
                gap: fmt_rat(&(&p - &right_sup)),
                choices: likely_path(&s, budget.depth, &l),
            });
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeMass {
    pub value: String,
    pub mass: String,
}

/// Result of a supremum computation on one program.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub program: String,
    pub depth: usize,
    pub sup_term: String,
    pub probes: Vec<ProbeMass>,
    pub nodes: u64,
    pub ms: u64,
}

/// Computes `sup_term` and the supremum mass of each probe value. `ms` stays
/// 0 unless `timed`, so that untimed reports are reproducible byte for byte.
pub fn sup_report(
    name: &str,
    depth: usize,
    rho: &Config,
    probes: &[Val],
    workers: usize,
    timed: bool,
) -> Report {
    let t0 = Instant::now();
    let opts = SupOptions {
        stutter: false,
        workers,
    };
    let total = sup_search(depth, rho, &accept_all, opts);
    let mut nodes = total.nodes;
    let mut out = Vec::new();
    for v in probes {
        let want = v.clone();
        let res = sup_search(depth, rho, &move |x: &Val| *x == want, opts);
        nodes += res.nodes;
        out.push(ProbeMass {
            value: v.to_string(),
            mass: fmt_rat(&res.value),
        });
    }
    Report {
        program: name.to_string(),
        depth,
        sup_term: fmt_rat(&total.value),
        probes: out,
        nodes,
        ms: if timed {
            t0.elapsed().as_millis() as u64
        } else {
            0
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::rat;
    use crate::lang::{parse_closed, Expr, State};

    fn cfg(src: &str) -> Config {
        Config::new(parse_closed(src).unwrap())
    }

    #[test]
    fn final_config_has_no_successor() {
        let c = Config {
            threads: vec![Expr::int(3), Expr::rand(Expr::int(1))],
            state: State::default(),
        };
        assert!(tp_step(&c, 1).is_zero());
        assert!(sch_step(&RoundRobin, &0, &c).is_zero());
    }

    #[test]
    fn out_of_range_stutters() {
        let c = cfg("rand 1");
        assert_eq!(tp_step(&c, 5), Dist::ret(c.clone()));
    }

    #[test]
    fn fork_appends() {
        let c = cfg("fork (rand 1)");
        let want = Config {
            threads: vec![Expr::unit(), Expr::rand(Expr::int(1))],
            state: State::default(),
        };
        assert_eq!(tp_step(&c, 0), Dist::ret(want));
    }

    #[test]
    fn round_robin_alternates() {
        let c = cfg("fork (rand 1); rand 1");
        let two = Config {
            threads: vec![c.threads[0].clone(), c.threads[0].clone()],
            state: State::default(),
        };
        let picks: Vec<usize> = (0..4)
            .map(|k| RoundRobin.transition(&k, &two).support().next().unwrap().1)
            .collect();
        assert_eq!(picks, vec![0, 1, 0, 1]);
    }

    #[test]
    fn uniform_weights() {
        let c = Config {
            threads: vec![Expr::rand(Expr::int(1)), Expr::rand(Expr::int(1))],
            state: State::default(),
        };
        let d = sch_step(&Uniform, &(), &c);
        assert_eq!(d.len(), 4);
        assert!(d.iter().all(|(_, p)| *p == rat(1, 4)));
    }

    #[test]
    fn exec_basics() {
        let c = cfg("rand 1");
        assert!(exec(&RoundRobin, 0, &0, &c).is_zero());
        let d = exec(&RoundRobin, 1, &0, &c);
        assert_eq!(d.prob(&Val::int(0)), rat(1, 2));
        assert_eq!(d.prob(&Val::int(1)), rat(1, 2));
        let v = cfg("7");
        for n in 0..3 {
            assert_eq!(exec(&RoundRobin, n, &0, &v), Dist::ret(Val::int(7)));
        }
    }

    #[test]
    fn pexec_basics() {
        let c = cfg("rand 1");
        assert_eq!(pexec(&RoundRobin, 0, &0, &c), Dist::ret((0, c.clone())));
        let v = cfg("()");
        assert_eq!(pexec(&RoundRobin, 5, &0, &v), Dist::ret((0, v.clone())));
        let p = cfg("if rand 1 = 1 then () else diverge ()");
        for n in 0..8 {
            assert!(pexec(&RoundRobin, n, &0, &p).mass() >= term_prob(&RoundRobin, n, &0, &p));
        }
    }

    #[test]
    fn diverge_never_terminates() {
        let c = cfg("diverge ()");
        for n in [0, 5, 20] {
            assert!(term_prob(&RoundRobin, n, &0, &c).is_zero());
            assert!(sup_term(n, &c).is_zero());
        }
    }

    #[test]
    fn coin_then_diverge() {
        let c = cfg("if rand 1 = 1 then () else diverge ()");
        assert_eq!(term_prob(&RoundRobin, 4, &0, &c), rat(1, 2));
        assert_eq!(sup_term(10, &c), rat(1, 2));
    }

    #[test]
    fn maximal_scheduler_attains_sup() {
        let c = cfg("let r = ref 0 in fork (r := 1); if !r = 1 then () else diverge ()");
        for n in 0..10 {
            let s = sup_term(n, &c);
            let m = Maximal::new(n, &accept_all);
            assert_eq!(term_prob(&m, n, &n, &c), s, "depth {n}");
            assert!(term_prob(&RoundRobin, n, &0, &c) <= s);
        }
        assert_eq!(sup_term(12, &c), Rat::one());
    }

    #[test]
    fn workers_do_not_change_results() {
        let c = cfg("let r = ref 0 in fork (r := 1); fork (r := 2); !r");
        let a = sup_search(12, &c, &|v| *v == Val::int(2), SupOptions { stutter: false, workers: 1 });
        let b = sup_search(12, &c, &|v| *v == Val::int(2), SupOptions { stutter: false, workers: 4 });
        assert_eq!(a, b);
        assert_eq!(a.value, Rat::one());
    }

    #[test]
    fn falsify_finds_gap() {
        let a = parse_closed("()").unwrap();
        let d = parse_closed("if rand 1 = 1 then () else diverge ()").unwrap();
        let t = falsify(&a, &d, Budget { depth: 10, tries: 4 }).unwrap();
        assert_eq!(t.gap, "1/2");
        assert!(falsify(&d, &d, Budget { depth: 10, tries: 4 }).is_none());
    }

    #[test]
    fn seeded_is_replayable() {
        let s = Seeded { seed: 9 };
        let a: Vec<usize> = (0..20).map(|k| s.choose(k, 5)).collect();
        let b: Vec<usize> = (0..20).rev().map(|k| s.choose(k, 5)).collect();
        let mut b = b;
        b.reverse();
        assert_eq!(a, b);
    }

    #[test]
    fn report_shape() {
        let r = sup_report("coin", 3, &cfg("rand 1"), &[Val::int(0)], 1, false);
        assert_eq!(r.sup_term, "1/1");
        assert_eq!(r.probes[0].mass, "1/2");
        assert_eq!(r.ms, 0);
    }
}
