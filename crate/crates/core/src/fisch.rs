//! Full-information schedulers.
//!
//! A full-information scheduler sees the whole tape-free history of the run
//! and may stop. Whether it stops is a function of the history alone, which
//! makes the consistency condition hold by construction.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::Zero;
use rand::Rng;

use crate::dist::{Dist, Rat};
use crate::lang::{parse_closed, Config, ExprRef, Val};
use crate::sched::{exec, thread_step, Scheduler};

/// A configuration with the tape map removed.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CfgView {
    pub threads: Vec<ExprRef>,
    pub heap: BTreeMap<usize, Val>,
}

impl From<&Config> for CfgView {
    fn from(c: &Config) -> Self {
        CfgView {
            threads: c.threads.clone(),
            heap: c.state.heap.clone(),
        }
    }
}

pub type HistEntry = (CfgView, usize);
pub type History = Vec<HistEntry>;

pub fn is_prefix(a: &[HistEntry], b: &[HistEntry]) -> bool {
    a.len() <= b.len() && a == &b[..a.len()]
}

pub trait FiPolicy: Send + Sync {
    /// Whether the scheduler returns `None` at this history.
    fn stopped(&self, h: &[HistEntry]) -> bool;

    /// Thread distribution at a history where the scheduler has not stopped.
    fn choose(&self, h: &[HistEntry], view: &CfgView) -> Dist<usize>;
}

#[derive(Clone)]
pub struct FiSch(pub Arc<dyn FiPolicy>);

impl fmt::Debug for FiSch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FiSch(..)")
    }
}

impl FiSch {
    pub fn new<P: FiPolicy + 'static>(p: P) -> Self {
        FiSch(Arc::new(p))
    }

    pub fn stopped(&self, h: &[HistEntry]) -> bool {
        self.0.stopped(h)
    }

    pub fn transition(&self, h: &[HistEntry], rho: &Config) -> Option<Dist<usize>> {
        if self.0.stopped(h) {
            None
        } else {
            Some(self.0.choose(h, &CfgView::from(rho)))
        }
    }
}

/// Steps thread `j` even if the configuration is final.
pub fn fi_tp_step(rho: &Config, j: usize) -> Dist<Config> {
    thread_step(rho, j, true)
}

pub fn fisch_step(phi: &FiSch, h: &[HistEntry], rho: &Config) -> Dist<(History, Config)> {
    match phi.transition(h, rho) {
        None => Dist::ret((h.to_vec(), rho.clone())),
        Some(mu) => {
            let view = CfgView::from(rho);
            mu.bind(|j| {
                let mut h2 = h.to_vec();
                h2.push((view.clone(), *j));
                fi_tp_step(rho, *j).map(|c| (h2.clone(), c.clone()))
            })
        }
    }
}

/// Runs `phi` for at most `n` steps; only runs that stop carry mass.
pub fn fiexec(phi: &FiSch, n: usize, h: &[HistEntry], rho: &Config) -> Dist<(History, Config)> {
    let mut done: Vec<((History, Config), Rat)> = Vec::new();
    let mut frontier = Dist::ret((h.to_vec(), rho.clone()));
    for left in (0..=n).rev() {
        let mut next = Vec::new();
        for ((h, c), p) in frontier.iter() {
            if phi.stopped(h) {
                done.push(((h.clone(), c.clone()), p.clone()));
            } else if left > 0 {
                for (succ, q) in fisch_step(phi, h, c).iter() {
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

struct Initial;

impl FiPolicy for Initial {
    fn stopped(&self, _: &[HistEntry]) -> bool {
        true
    }

    fn choose(&self, _: &[HistEntry], _: &CfgView) -> Dist<usize> {
        Dist::zero()
    }
}

/// The scheduler that stops immediately.
pub fn initialfisch() -> FiSch {
    FiSch::new(Initial)
}

struct Lift {
    prefix: History,
    inner: FiSch,
}

impl FiPolicy for Lift {
    fn stopped(&self, h: &[HistEntry]) -> bool {
        !is_prefix(&self.prefix, h) || self.inner.stopped(&h[self.prefix.len()..])
    }

    fn choose(&self, h: &[HistEntry], view: &CfgView) -> Dist<usize> {
        self.inner.0.choose(&h[self.prefix.len()..], view)
    }
}

/// Behaves as `phi` on the part of the history after `prefix`; stops on
/// histories that do not extend `prefix`.
pub fn liftfisch(prefix: &[HistEntry], phi: &FiSch) -> FiSch {
    FiSch::new(Lift {
        prefix: prefix.to_vec(),
        inner: phi.clone(),
    })
}

pub type Family = Arc<dyn Fn(&[HistEntry]) -> FiSch + Send + Sync>;

struct App {
    first: FiSch,
    then: Family,
}

impl App {
    /// Shortest prefix of `h` at which `first` has stopped.
    fn split(&self, h: &[HistEntry]) -> Option<usize> {
        (0..=h.len()).find(|&k| self.first.stopped(&h[..k]))
    }

    fn continuation(&self, h: &[HistEntry]) -> Option<(usize, FiSch)> {
        self.split(h).map(|k| (k, (self.then)(&h[..k])))
    }
}

impl FiPolicy for App {
    fn stopped(&self, h: &[HistEntry]) -> bool {
        match self.continuation(h) {
            None => false,
            Some((k, g)) => g.stopped(&h[k..]),
        }
    }

    fn choose(&self, h: &[HistEntry], view: &CfgView) -> Dist<usize> {
        match self.continuation(h) {
            None => self.first.0.choose(h, view),
            Some((k, g)) => g.0.choose(&h[k..], view),
        }
    }
}

/// Runs `phi` until it stops at some history `z`, then continues as `f(z)`.
/// Requires `phi`'s stop predicate to be decidable, which holds for every
/// scheduler built in this module.
pub fn appfisch(phi: &FiSch, f: Family) -> FiSch {
    FiSch::new(App {
        first: phi.clone(),
        then: f,
    })
}

pub type FirstStep = Arc<dyn Fn(&CfgView) -> Dist<usize> + Send + Sync>;
pub type AfterStep = Arc<dyn Fn(usize) -> FiSch + Send + Sync>;

struct Cons {
    first: FirstStep,
    then: AfterStep,
}

impl FiPolicy for Cons {
    fn stopped(&self, h: &[HistEntry]) -> bool {
        match h.first() {
            None => false,
            Some((_, j)) => (self.then)(*j).stopped(&h[1..]),
        }
    }

    fn choose(&self, h: &[HistEntry], view: &CfgView) -> Dist<usize> {
        match h.first() {
            None => (self.first)(view),
            Some((_, j)) => (self.then)(*j).0.choose(&h[1..], view),
        }
    }
}

/// Takes one step chosen by `f`, then continues as `g(j)` for the chosen
/// thread `j`.
pub fn consfisch(f: FirstStep, g: AfterStep) -> FiSch {
    FiSch::new(Cons { first: f, then: g })
}

/// The stutter scheduler: picks `k` uniformly from `0..=n` and steps the
/// nonexistent thread `k + |threads|`, so its history records `k` while the
/// configuration stays put.
pub fn stutter_fisch(n: u64) -> FiSch {
    consfisch(
        Arc::new(move |view: &CfgView| {
            let len = view.threads.len();
            Dist::<u64>::unif(n).map(|k| *k as usize + len)
        }),
        Arc::new(|_| initialfisch()),
    )
}

/// Decision table keyed by (history length, last chosen thread, pool size),
/// stopping once the history reaches `stop_len`.
#[derive(Clone, Debug)]
pub struct TableFiSch {
    pub stop_len: usize,
    pub table: BTreeMap<(usize, Option<usize>, usize), Dist<usize>>,
    pub default: Dist<usize>,
}

impl FiPolicy for TableFiSch {
    fn stopped(&self, h: &[HistEntry]) -> bool {
        h.len() >= self.stop_len
    }

    fn choose(&self, h: &[HistEntry], view: &CfgView) -> Dist<usize> {
        let key = (h.len(), h.last().map(|e| e.1), view.threads.len());
        self.table
            .get(&key)
            .cloned()
            .unwrap_or_else(|| self.default.clone())
    }
}

fn random_choice<R: Rng>(rng: &mut R, max_index: usize) -> Dist<usize> {
    let k = rng.gen_range(1..=3usize);
    let picks: Vec<usize> = (0..k).map(|_| rng.gen_range(0..=max_index)).collect();
    let weights: Vec<u64> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
    let total: u64 = weights.iter().sum();
    Dist::from_weights(
        picks
            .into_iter()
            .zip(weights)
            .map(|(j, w)| (j, Rat::new((w as i64).into(), (total as i64).into()))),
    )
}

/// A random table scheduler choosing among threads `0..=3`; index 3 is
/// usually out of range and stutters.
pub fn random_table<R: Rng>(rng: &mut R, max_stop: usize) -> TableFiSch {
    let stop_len = rng.gen_range(0..=max_stop);
    let mut table = BTreeMap::new();
    for len in 0..stop_len {
        for last in [None, Some(0), Some(1), Some(2), Some(3)] {
            for pool in 1..=3 {
                if rng.gen_bool(0.6) {
                    table.insert((len, last, pool), random_choice(rng, 3));
                }
            }
        }
    }
    TableFiSch {
        stop_len,
        table,
        default: random_choice(rng, 3),
    }
}

/// Small concurrent programs used as start configurations.
pub const SAMPLE_PROGRAMS: &[&str] = &[
    "rand 1",
    "fork (rand 1); rand 1 + 1",
    "let r = ref 0 in fork (r := 1); !r",
    "let r = ref 0 in fork (r := rand 1); fork (r := 2); !r",
    "let l = alloctape 1 in fork (rand l 1); rand l 1",
    "(rand 1 ||| rand 1)",
];

pub fn sample_configs() -> Vec<Config> {
    SAMPLE_PROGRAMS
        .iter()
        .map(|s| Config::new(parse_closed(s).expect("sample program parses")))
        .collect()
}

/// Finite-depth form of the lift lemma:
/// `fiexec(lift(z0, phi), n, z0 ++ z, rho)` equals `fiexec(phi, n, z, rho)`
/// with `z0` prepended to every history.
pub fn check_lift(phi: &FiSch, z0: &[HistEntry], z: &[HistEntry], rho: &Config, n: usize) -> bool {
    let lifted = liftfisch(z0, phi);
    let mut start = z0.to_vec();
    start.extend_from_slice(z);
    let lhs = fiexec(&lifted, n, &start, rho);
    let rhs = fiexec(phi, n, z, rho).map(|(h, c)| {
        let mut full = z0.to_vec();
        full.extend_from_slice(h);
        (full, c.clone())
    });
    lhs == rhs
}

/// Finite-depth form of the chaining lemma: running `phi` for `n` steps and
/// then the continuation for `n` more is dominated pointwise by running the
/// chained scheduler for `2n` steps.
pub fn check_app(phi: &FiSch, f: &Family, rho: &Config, n: usize) -> bool {
    let chained = appfisch(phi, f.clone());
    let lhs = fiexec(phi, n, &[], rho).bind(|(z1, c1)| {
        match (0..=z1.len()).find(|&k| phi.stopped(&z1[..k])) {
            Some(k) => {
                let z2 = &z1[..k];
                fiexec(&liftfisch(z2, &f(z2)), n, z1, c1)
            }
            None => Dist::zero(),
        }
    });
    let rhs = fiexec(&chained, 2 * n, &[], rho);
    lhs.le_pointwise(&rhs)
}

/// Finite-depth form of the one-step constructor equation.
pub fn check_cons(f: &FirstStep, g: &AfterStep, rho: &Config, n: usize) -> bool {
    let phi = consfisch(f.clone(), g.clone());
    let lhs = fiexec(&phi, n + 1, &[], rho);
    let view = CfgView::from(rho);
    let rhs = f(&view).bind(|j| {
        let h = vec![(view.clone(), *j)];
        let lifted = liftfisch(&h, &g(*j));
        fi_tp_step(rho, *j).bind(|c| fiexec(&lifted, n, &h, c))
    });
    lhs == rhs
}

/// A scheduler that follows `phi` and stutters once it stops. Its state is
/// the history.
pub struct FiSchScheduler {
    pub phi: FiSch,
}

pub fn fisch_to_sch(phi: &FiSch) -> FiSchScheduler {
    FiSchScheduler { phi: phi.clone() }
}

impl Scheduler for FiSchScheduler {
    type State = History;

    fn initial(&self) -> History {
        Vec::new()
    }

    fn transition(&self, h: &History, rho: &Config) -> Dist<(History, usize)> {
        match self.phi.transition(h, rho) {
            None => Dist::ret((h.clone(), rho.threads.len())),
            Some(mu) => {
                let view = CfgView::from(rho);
                mu.map(|j| {
                    let mut h2 = h.clone();
                    h2.push((view.clone(), *j));
                    (h2, *j)
                })
            }
        }
    }
}

/// Finite-depth form of the scheduler-conversion lemma with `n2 >= n`.
pub fn check_to_sch(phi: &FiSch, z: &[HistEntry], rho: &Config, n: usize, n2: usize) -> bool {
    let lhs = fiexec(phi, n, z, rho).bind(|(_, c)| match c.head_value() {
        Some(v) => Dist::ret(v.clone()),
        None => Dist::zero(),
    });
    let rhs = exec(&fisch_to_sch(phi), n2, &z.to_vec(), rho);
    lhs.le_pointwise(&rhs)
}

/// Outcome of a randomized lemma validation run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LemmaTally {
    pub lift: (usize, usize),
    pub app: (usize, usize),
    pub cons: (usize, usize),
    pub to_sch: (usize, usize),
}

impl LemmaTally {
    pub fn all_pass(&self) -> bool {
        [self.lift, self.app, self.cons, self.to_sch]
            .iter()
            .all(|(ok, total)| ok == total && *total > 0)
    }
}

fn bump(slot: &mut (usize, usize), ok: bool) {
    slot.0 += ok as usize;
    slot.1 += 1;
}

/// Checks all four lemmas on `instances` random table schedulers at every
/// depth up to `max_depth`, cycling through the sample configurations.
pub fn validate_random<R: Rng>(rng: &mut R, instances: usize, max_depth: usize) -> LemmaTally {
    let cfgs = sample_configs();
    let mut tally = LemmaTally::default();
    for i in 0..instances {
        let rho = &cfgs[i % cfgs.len()];
        let phi = FiSch::new(random_table(rng, 3));
        let fam: Vec<FiSch> = (0..3)
            .map(|_| FiSch::new(random_table(rng, 3)))
            .collect();
        let family: Family = Arc::new(move |z: &[HistEntry]| {
            let key = z.last().map_or(0, |e| e.1) + z.len();
            fam[key % fam.len()].clone()
        });
        let first = random_table(rng, 1).default;
        let first: FirstStep = Arc::new(move |_| first.clone());
        let gs: Vec<FiSch> = (0..4)
            .map(|_| FiSch::new(random_table(rng, 3)))
            .collect();
        let g: AfterStep = Arc::new(move |j| gs[j % gs.len()].clone());
        // a prefix taken from an actual run of some other scheduler
        let pre_sched = FiSch::new(random_table(rng, 2));
        let prefix: History = fiexec(&pre_sched, 2, &[], rho)
            .support()
            .next()
            .map(|(h, _)| h.clone())
            .unwrap_or_default();
        for n in 0..=max_depth {
            bump(&mut tally.lift, check_lift(&phi, &prefix, &[], rho, n));
            bump(&mut tally.app, check_app(&phi, &family, rho, n));
            if n > 0 {
                bump(&mut tally.cons, check_cons(&first, &g, rho, n - 1));
            }
            bump(&mut tally.to_sch, check_to_sch(&phi, &[], rho, n, n));
        }
    }
    tally
}

/// Mass of `fiexec` at depth `n`.
pub fn fiexec_mass(phi: &FiSch, n: usize, rho: &Config) -> Rat {
    let m = fiexec(phi, n, &[], rho).mass();
    if m.is_zero() {
        Rat::zero()
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::rat;
    use crate::lang::{Expr, State, Tape};
    use crate::sched::{exec, tp_step};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(src: &str) -> Config {
        Config::new(parse_closed(src).unwrap())
    }

    fn det_table(stop_len: usize, picks: &[usize]) -> FiSch {
        let mut table = BTreeMap::new();
        for (i, j) in picks.iter().enumerate() {
            for last in [None, Some(0), Some(1), Some(2), Some(3)] {
                for pool in 1..=3 {
                    table.insert((i, last, pool), Dist::ret(*j));
                }
            }
        }
        FiSch::new(TableFiSch {
            stop_len,
            table,
            default: Dist::ret(0),
        })
    }

    #[test]
    fn eager_step_on_final() {
        let c = Config {
            threads: vec![Expr::int(3), Expr::rand(Expr::int(1))],
            state: State::default(),
        };
        assert_eq!(fi_tp_step(&c, 1).len(), 2);
        assert!(tp_step(&c, 1).is_zero());
        assert_eq!(fi_tp_step(&c, 7), Dist::ret(c.clone()));
        let d = cfg("fork (rand 1); rand 1");
        assert_eq!(fi_tp_step(&d, 0), tp_step(&d, 0));
    }

    #[test]
    fn initial_is_identity() {
        let c = cfg("rand 1");
        for n in 0..4 {
            assert_eq!(fiexec(&initialfisch(), n, &[], &c), Dist::ret((vec![], c.clone())));
        }
        assert!(initialfisch().transition(&[], &c).is_none());
    }

    #[test]
    fn depth_zero_is_null_unless_stopped() {
        let c = cfg("rand 1");
        assert!(fiexec(&det_table(1, &[0]), 0, &[], &c).is_zero());
    }

    #[test]
    fn two_step_trace() {
        let c = cfg("fork (rand 1); 5");
        let phi = det_table(2, &[0, 1]);
        let d = fiexec(&phi, 2, &[], &c);
        assert_eq!(d.mass(), Rat::from_integer(1.into()));
        let after_fork = tp_step(&c, 0).support().next().unwrap().clone();
        for (h, c2) in d.support() {
            assert_eq!(h.len(), 2);
            assert_eq!(h[0], (CfgView::from(&c), 0));
            assert_eq!(h[1], (CfgView::from(&after_fork), 1));
            assert!(c2.threads[1].is_value());
        }
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn history_grows_by_one() {
        let c = cfg("rand 1");
        let phi = det_table(5, &[0]);
        for ((h, _), _) in fisch_step(&phi, &[], &c).iter() {
            assert_eq!(h.len(), 1);
        }
    }

    #[test]
    fn lift_of_empty_prefix_and_initial() {
        let c = cfg("fork (rand 1); rand 2");
        let phi = det_table(2, &[1, 0]);
        for n in 0..4 {
            assert_eq!(fiexec(&liftfisch(&[], &phi), n, &[], &c), fiexec(&phi, n, &[], &c));
        }
        let pre = vec![(CfgView::from(&c), 0)];
        assert!(liftfisch(&pre, &initialfisch()).stopped(&pre));
        assert!(liftfisch(&pre, &phi).stopped(&[]));
    }

    #[test]
    fn app_with_initial_delegates() {
        let c = cfg("fork (rand 1); rand 2");
        let phi = det_table(2, &[0, 1]);
        let p2 = phi.clone();
        let chained = appfisch(&initialfisch(), Arc::new(move |_| p2.clone()));
        for n in 0..4 {
            assert_eq!(fiexec(&chained, n, &[], &c), fiexec(&phi, n, &[], &c));
        }
        let back = appfisch(&phi, Arc::new(|_| initialfisch()));
        for n in 0..4 {
            assert_eq!(fiexec(&back, n, &[], &c), fiexec(&phi, n, &[], &c));
        }
    }

    #[test]
    fn cons_single_step() {
        let c = cfg("rand 1");
        let phi = consfisch(Arc::new(|_| Dist::ret(0)), Arc::new(|_| initialfisch()));
        let d = fiexec(&phi, 3, &[], &c);
        assert_eq!(d.len(), 2);
        for ((h, c2), p) in d.iter() {
            assert_eq!(h.len(), 1);
            assert!(c2.is_final());
            assert_eq!(*p, rat(1, 2));
        }
    }

    #[test]
    fn stutter_encodes_uniform_choice() {
        let c = cfg("fork (rand 1); ()");
        let d = fiexec(&stutter_fisch(3), 1, &[], &c);
        assert_eq!(d.len(), 4);
        for ((h, c2), p) in d.iter() {
            assert_eq!(c2, &c);
            assert!(h[0].1 >= 1 && h[0].1 <= 4);
            assert_eq!(*p, rat(1, 4));
        }
    }

    #[test]
    fn converted_initial_returns_head() {
        let c = cfg("4");
        let s = fisch_to_sch(&initialfisch());
        assert_eq!(exec(&s, 3, &vec![], &c), Dist::ret(Val::int(4)));
    }

    #[test]
    fn converted_cons_matches_hand_trace() {
        let c = cfg("rand 1");
        let phi = consfisch(Arc::new(|_| Dist::ret(0)), Arc::new(|_| initialfisch()));
        let d = exec(&fisch_to_sch(&phi), 2, &vec![], &c);
        assert_eq!(d.mass(), rat(1, 1));
        assert_eq!(d.prob(&Val::int(1)), rat(1, 2));
    }

    #[test]
    fn tape_blind() {
        let c = cfg("let l = alloctape 1 in fork (rand l 1); rand l 1");
        let c1 = tp_step(&c, 0).support().next().unwrap().clone();
        let mut c2 = c1.clone();
        for t in c2.state.tapes.values_mut() {
            *t = Tape {
                bound: t.bound,
                contents: vec![1, 0],
            };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let phi = FiSch::new(random_table(&mut rng, 3));
            let a = phi.transition(&[], &c1);
            let b = phi.transition(&[], &c2);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn lemmas_small_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = validate_random(&mut rng, 12, 4);
        assert!(t.all_pass(), "{t:?}");
    }

    #[test]
    fn mass_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for c in sample_configs() {
            let phi = FiSch::new(random_table(&mut rng, 4));
            let ms: Vec<Rat> = (0..6).map(|n| fiexec_mass(&phi, n, &c)).collect();
            assert!(ms.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
