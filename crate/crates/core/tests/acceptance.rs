mod common;

use std::process::ExitCode;
use std::time::Instant;

use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fox_core::coupling::{error_amp_identity, lp_oracle_agreement, rule_premises, compose_random};
use fox_core::dist::{fmt_rat, rat, Dist, Rat};
use fox_core::fisch::validate_random;
use fox_core::harness::{
    algebraic_suite, corpus, counterexample_suite, equiv_report, loop_bracket, mixer_src, run_entry,
    saturation_depth, sup, value_probes, CorpusEntry, Probe, Residual, Side, Verdict, PROG_A,
    PROG_D,
};
use fox_core::lang::{decompose, fill, parse_closed, Val};
use fox_core::sched::sup_report;

/// Criteria that cannot be met as stated; they still run and print FAIL.
const UNATTAINABLE: &[usize] = &[1];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn entry(name: &str) -> CorpusEntry {
    corpus()
        .into_iter()
        .find(|e| e.name == name)
        .unwrap_or_else(|| panic!("corpus entry {name}"))
}

fn c1() -> Outcome {
    let t = Instant::now();
    let left = Side {
        src: mixer_src(),
        residual: Residual::Zero,
    };
    let right = Side {
        src: "rand 1".into(),
        residual: Residual::Zero,
    };
    let probes = value_probes(&[Val::int(0), Val::int(1)]);
    let r = equiv_report(("mixer", "rand 1"), &left, &right, 14, &probes, 1);
    let masses: Vec<String> = r
        .forward
        .probes
        .iter()
        .flat_map(|p| [p.left.clone(), p.right.clone()])
        .collect();
    let secs = t.elapsed().as_secs_f64();
    let sat = saturation_depth(&left.expr(), &probes, 40);
    outcome(
        masses.iter().all(|m| m == "1/2") && secs < 10.0,
        format!("depth 14 masses {masses:?}; masses first reach 1/2 at depth {sat}"),
    )
}

fn c2() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, m) in [(1u64, 1u64), (3, 1)] {
        let t = Instant::now();
        let e = entry(&format!("batch-{n}-{m}"));
        let r = run_entry(&e, e.depth, 1);
        let want = fmt_rat(&rat(1, ((n + 1) * (m + 1)) as i64));
        let exact = r
            .reports
            .iter()
            .flat_map(|rr| &rr.probes)
            .all(|p| p.left == want && p.right == want);
        let secs = t.elapsed().as_secs_f64();
        pass &= exact && r.verdict == Verdict::Pass && e.depth <= 24 && secs < 60.0;
        parts.push(format!("({n},{m}) depth {} all {want}: {exact} in {secs:.2}s", e.depth));
    }
    outcome(pass, parts.join("; "))
}

/// Two-sided bracket at every depth up to `max`, plus the exact right side
/// from `right_from` on.
fn bracket(e: &CorpusEntry, probes: &[Probe], limit: &Rat, right_from: usize, max: usize) -> (bool, String) {
    let (left, right) = (e.left.expr(), e.right.expr());
    let mut ok = true;
    let mut last = Vec::new();
    for p in probes {
        let (lp, rp) = (p.apply(&left), p.apply(&right));
        for d in 0..=max {
            let l = sup(d, &lp, 1);
            let (lo, hi) = loop_bracket(limit, &e.left.residual, d);
            ok &= lo <= l && l <= hi;
            if d >= right_from {
                ok &= sup(d, &rp, 1) == *limit;
            }
            if d == max {
                last.push(format!("{p} {}", fmt_rat(&l)));
            }
        }
    }
    (
        ok,
        format!("residual {}; at depth {max}: {}", e.left.residual, last.join(", ")),
    )
}

fn c3() -> Outcome {
    let e = entry("rejection");
    let (ok, d) = bracket(&e, &value_probes(&[Val::int(0)]), &rat(1, 2), 3, 40);
    outcome(ok, d)
}

fn c4() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["vn-coin-unit", "vn-coin-writer", "vn-coin-forking"] {
        let e = entry(name);
        let (ok, d) = bracket(&e, &value_probes(&[Val::Bool(true)]), &rat(1, 2), 40, 40);
        pass &= ok;
        parts.push(format!("{name}: {d}"));
    }
    outcome(pass, parts.join("; "))
}

fn c5() -> Outcome {
    let e = entry("sodium-8-3");
    let accept = Dist::<u64>::unif(7).filter(|x| *x >= 8 % 3).mass();
    let (ok, d) = bracket(&e, &value_probes(&[Val::int(0), Val::int(1), Val::int(2)]), &rat(1, 3), 40, 40);
    outcome(ok && accept == rat(3, 4), format!("min {}, accept mass {}; {d}", 8 % 3, fmt_rat(&accept)))
}

fn c6_7() -> (Outcome, Outcome) {
    let a = parse_closed(PROG_A).unwrap();
    let d = parse_closed(PROG_D).unwrap();
    let a_ok = (1..=30).all(|k| sup(k, &a, 1).is_one());
    let d_ok = (3..=30).all(|k| sup(k, &d, 1) == rat(1, 2));
    let ce = counterexample_suite(30);
    let entry_verdict = run_entry(&entry("progA-progD"), 10, 1).verdict;
    let sups = ce
        .sups
        .iter()
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join(" ");
    let six = outcome(
        a_ok && d_ok && ce.gap == "1/2" && ce.gap_verdict == Verdict::ExpectedFail
            && entry_verdict == Verdict::ExpectedFail,
        format!(
            "progA=1 for d in 1..=30: {a_ok}; progD=1/2 for d in 3..=30: {d_ok}; sups at 30 {sups}; gap {}; verdict {}",
            ce.gap, ce.gap_verdict
        ),
    );
    let seven = outcome(
        ce.no_optimal_ok,
        ce.no_optimal
            .iter()
            .map(|(k, d, v)| format!("k={k} d={d} {v}"))
            .collect::<Vec<_>>()
            .join("; "),
    );
    (six, seven)
}

fn c8() -> Outcome {
    let base = algebraic_suite(&rat(1, 3), &rat(1, 3), [0, 1, 2]);
    let assoc = algebraic_suite(&rat(1, 2), &rat(1, 3), [0, 1, 2]);
    let law = assoc
        .laws
        .iter()
        .find(|l| l.law == "prob-associativity")
        .expect("associativity law");
    let want = ["1/6", "1/6", "2/3"];
    let masses_ok = law.reports.iter().all(|r| {
        r.probes.len() == 3
            && r.probes.iter().zip(want).all(|(p, w)| p.left == w && p.right == w)
    });
    let failing: Vec<&str> = base
        .laws
        .iter()
        .filter(|l| l.verdict != Verdict::Pass)
        .map(|l| l.law.as_str())
        .collect();
    outcome(
        failing.is_empty() && law.verdict == Verdict::Pass && masses_ok,
        format!(
            "{} laws at p=1/3, failing {failing:?}; associativity at p=1/2 q=1/3 masses {:?} at depth {}",
            base.laws.len(),
            law.reports[0].probes.iter().map(|p| p.left.as_str()).collect::<Vec<_>>(),
            law.depth
        ),
    )
}

fn c9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (agree, n) = lp_oracle_agreement(&mut rng, 1000);
    let prem = rule_premises();
    let bad: Vec<&String> = prem.iter().filter(|(_, ok)| !ok).map(|(n, _)| n).collect();
    let mut amp_ok = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=20u64);
        let m = rng.gen_range(0..n);
        let den = rng.gen_range(1..=50i64);
        let eps = rat(rng.gen_range(0..=den), den);
        amp_ok += (error_amp_identity(n, m, &eps).ok() == Some(eps)) as usize;
    }
    outcome(
        agree == n && bad.is_empty() && amp_ok == 100,
        format!(
            "lp/oracle {agree}/{n}; premises {} failing {bad:?}; error amplification {amp_ok}/100",
            prem.len()
        ),
    )
}

fn c10() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let tally = validate_random(&mut rng, 200, 6);
    let secs = t.elapsed().as_secs_f64();
    outcome(
        tally.all_pass() && secs < 120.0,
        format!(
            "200 instances, depth <= 6: lift {:?} app {:?} cons {:?} to_sch {:?}",
            tally.lift, tally.app, tally.cons, tally.to_sch
        ),
    )
}

fn c11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (held, n) = compose_random(&mut rng, 200);
    outcome(held == n, format!("{held}/{n} conclusions hold"))
}

fn reports_json(workers: usize) -> String {
    let mut out = Vec::new();
    for name in ["mixer", "batch-1-1", "vn-coin-forking"] {
        let e = entry(name);
        out.push(serde_json::to_string(&run_entry(&e, e.depth, workers)).unwrap());
    }
    for (name, src) in [("progB", fox_core::harness::PROG_B), ("no-optimal", fox_core::harness::NO_OPTIMAL_LHS)] {
        let rho = fox_core::lang::Config::new(parse_closed(src).unwrap());
        let r = sup_report(name, 24, &rho, &[], workers, false);
        out.push(serde_json::to_string(&r).unwrap());
    }
    out.join("\n")
}

fn c12() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let laws = (0..500)
        .filter(|_| {
            let a = rng.gen_range(0..8);
            let m = common::small_dist(&mut rng);
            let (f, g) = (common::small_kernel(&mut rng), common::small_kernel(&mut rng));
            common::monad_laws(a, &m, &f, &g)
        })
        .count();
    let mut round = 0;
    let mut split = 0;
    for _ in 0..500 {
        let e = common::closed_term(&mut rng, 5);
        match decompose(&e) {
            Some((k, r)) => {
                split += 1;
                round += (fill(&k, r) == e) as usize;
            }
            None => round += e.is_value() as usize,
        }
    }
    let same = reports_json(1) == reports_json(4);
    outcome(
        laws == 500 && round == 500 && same,
        format!("monad laws {laws}/500; round trip {round}/500 ({split} non-values); workers 1 and 4 identical: {same}"),
    )
}

fn main() -> ExitCode {
    let total = Instant::now();
    let mut unexpected = Vec::new();
    let mut emit = |n: usize, title: &str, t: Instant, o: Outcome| {
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && UNATTAINABLE.contains(&n) {
            " [recorded as unattainable]"
        } else {
            ""
        };
        println!(
            "criterion {n:>2} {status} {title}: {} ({:.2}s){note}",
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.pass && !UNATTAINABLE.contains(&n) {
            unexpected.push(n);
        }
    };

    let t = Instant::now();
    emit(1, "mixer", t, c1());
    let t = Instant::now();
    emit(2, "batch sampling", t, c2());
    let t = Instant::now();
    emit(3, "rejection sampler", t, c3());
    let t = Instant::now();
    emit(4, "von Neumann coin", t, c4());
    let t = Instant::now();
    emit(5, "bounded sampling", t, c5());
    let t = Instant::now();
    let (six, seven) = c6_7();
    emit(6, "termination gap", t, six);
    emit(7, "no optimal scheduler", t, seven);
    let t = Instant::now();
    emit(8, "choice laws", t, c8());
    let t = Instant::now();
    emit(9, "coupling", t, c9());
    let t = Instant::now();
    emit(10, "scheduler lemmas", t, c10());
    let t = Instant::now();
    emit(11, "composition", t, c11());
    let t = Instant::now();
    emit(12, "infrastructure", t, c12());

    println!("total {:.2}s", total.elapsed().as_secs_f64());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
