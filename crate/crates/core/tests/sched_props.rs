use num_traits::One;
use proptest::prelude::*;

use fox_core::dist::Rat;
use fox_core::harness::{sup, Probe};
use fox_core::lang::{parse_closed, Config, ExprRef, Val};
use fox_core::sched::{term_prob, RoundRobin, Scheduler, Seeded};

fn program(kind: u8, n: u64, k: u64) -> ExprRef {
    let src = match kind % 5 {
        0 => format!("rand {n} + {k}"),
        1 => format!("let x = ref 0 in (faa x (rand {n}) ||| faa x {k}); !x"),
        2 => format!("if nondet () = {k} then rand {n} else diverge ()"),
        3 => format!("let (a, b) = (rand {n} ||| rand {k}) in a + b"),
        _ => format!("let l = alloctape {n} in if rand l {n} < {k} then () else diverge ()"),
    };
    parse_closed(&src).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn sup_monotone_in_depth(kind in 0u8..5, n in 0u64..3, k in 0u64..3, d in 0usize..14) {
        let e = program(kind, n, k);
        let (a, b) = (sup(d, &e, 1), sup(d + 1, &e, 1));
        prop_assert!(a <= b);
        prop_assert!(b <= Rat::one());
    }

    #[test]
    fn sup_dominates_fixed_schedulers(kind in 0u8..5, n in 0u64..3, k in 0u64..3, d in 0usize..14, seed in any::<u64>()) {
        let e = program(kind, n, k);
        let rho = Config::new(e.clone());
        let s = sup(d, &e, 1);
        prop_assert!(term_prob(&RoundRobin, d, &RoundRobin.initial(), &rho) <= s);
        let sd = Seeded { seed };
        prop_assert!(term_prob(&sd, d, &sd.initial(), &rho) <= s);
    }

    #[test]
    fn sup_independent_of_workers(kind in 0u8..5, n in 0u64..3, k in 0u64..3, d in 0usize..14) {
        let e = program(kind, n, k);
        prop_assert_eq!(sup(d, &e, 1), sup(d, &e, 3));
    }

    #[test]
    fn value_probes_partition_termination(n in 0u64..4, m in 1u64..3, c in 0u64..3) {
        // single-threaded, so the scheduler has no choice to make
        let e = parse_closed(&format!("rand {n} * {m} + {c}")).unwrap();
        let total: Rat = (0..=(n * m + c) as i64)
            .map(|k| sup(20, &Probe::Value(Val::int(k)).apply(&e), 1))
            .sum();
        prop_assert!(total.is_one());
        prop_assert!(sup(20, &Probe::Seq.apply(&e), 1).is_one());
    }
}
