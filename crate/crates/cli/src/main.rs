use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use fox_core::coupling::{answer_query, QueryJson};
use fox_core::dist::{fmt_decimal, fmt_rat, Dist};
use fox_core::harness::{refine_report, selftest, Probe, RefineInput, RefineReport, Residual, Verdict};
use fox_core::lang::{check, parse_program, typecheck, Config, ExprRef, TypeCtx, Val};
use fox_core::sched::{exec, sup_report, Maximal, RoundRobin, Scheduler, Seeded};

#[derive(Parser, Debug)]
#[command(name = "fox", version, about = "Run, search and compare concurrent probabilistic programs")]
struct Cli {
    /// Emit JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,

    /// Worker threads for scheduler search; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Value distribution of the main thread under one scheduler.
    Run(RunArgs),
    /// Same as `run` with JSON output.
    Dist(RunArgs),
    /// Supremum over schedulers of the termination probability.
    Sup {
        file: PathBuf,
        #[arg(long, env = "FOX_DEPTH_DEFAULT", default_value_t = 20)]
        depth: usize,
        /// Also report the supremum mass of these result values.
        #[arg(long, num_args = 1..)]
        probe: Vec<String>,
    },
    /// Compare two programs through probe contexts.
    Refine {
        left: PathBuf,
        right: PathBuf,
        #[arg(long, env = "FOX_DEPTH_DEFAULT", default_value_t = 20)]
        depth: usize,
        /// Probe values, or `identity`, `seq`, `interfere:K`.
        #[arg(long, num_args = 1..)]
        probe: Vec<String>,
    },
    /// Least error of an approximate coupling query.
    Couple { query: PathBuf },
    /// Run the built-in corpus and validations.
    Selftest,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    file: PathBuf,
    #[arg(long, env = "FOX_DEPTH_DEFAULT", default_value_t = 20)]
    depth: usize,
    /// `roundrobin`, `random:<seed>` or `maximal`.
    #[arg(long, default_value = "roundrobin")]
    scheduler: String,
}

/// Errors in user input, reported with exit code 2.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_err(msg: String) -> anyhow::Error {
    anyhow!(InputError(msg))
}

fn load(path: &Path) -> Result<ExprRef> {
    let src = fs::read_to_string(path)
        .map_err(|e| input_err(format!("{}: {e}", path.display())))?;
    let prog = parse_program(&src).map_err(|e| input_err(format!("{}: {e}", path.display())))?;
    let mut ctx = TypeCtx::new();
    for d in &prog.defs {
        let ty = match &d.ty {
            Some(t) => check(&ctx, &d.body, t).map(|_| t.clone()),
            None => typecheck(&ctx, &d.body),
        }
        .map_err(|e| input_err(format!("{}: def {}: {e}", path.display(), d.name)))?;
        ctx.insert(d.name.clone(), ty);
    }
    if let Some(x) = fox_core::lang::free_vars(&prog.main).into_iter().next() {
        return Err(input_err(format!("{}: unbound variable `{x}`", path.display())));
    }
    typecheck(&TypeCtx::new(), &prog.main)
        .map_err(|e| input_err(format!("{}: {e}", path.display())))?;
    Ok(prog.main)
}

fn parse_val(s: &str) -> Result<Val> {
    match s {
        "true" => Ok(Val::Bool(true)),
        "false" => Ok(Val::Bool(false)),
        "()" => Ok(Val::Unit),
        _ => s
            .parse::<i64>()
            .map(Val::int)
            .map_err(|_| input_err(format!("bad probe value `{s}`"))),
    }
}

fn parse_probe(s: &str) -> Result<Probe> {
    match s {
        "identity" => Ok(Probe::Identity),
        "seq" => Ok(Probe::Seq),
        _ => match s.strip_prefix("interfere:") {
            Some(k) => Ok(Probe::Interfere(parse_val(k)?)),
            None => Ok(Probe::Value(parse_val(s)?)),
        },
    }
}

fn sorted_json<T: serde::Serialize>(x: &T) -> Result<String> {
    // serde_json maps are ordered by key, so a round trip sorts every object
    let v: Value = serde_json::to_value(x)?;
    Ok(serde_json::to_string_pretty(&v)?)
}

fn accept_all(_: &Val) -> bool {
    true
}

fn run_with<S: Scheduler>(s: &S, depth: usize, rho: &Config) -> Dist<Val> {
    exec(s, depth, &s.initial(), rho)
}

fn run_dist(args: &RunArgs) -> Result<Dist<Val>> {
    let e = load(&args.file)?;
    let rho = Config::new(e);
    let name = args.scheduler.as_str();
    Ok(match name {
        "roundrobin" => run_with(&RoundRobin, args.depth, &rho),
        "maximal" => run_with(&Maximal::new(args.depth, &accept_all), args.depth, &rho),
        _ => match name.strip_prefix("random:") {
            Some(seed) => {
                let seed = seed
                    .parse::<u64>()
                    .map_err(|_| input_err(format!("bad seed in `{name}`")))?;
                run_with(&Seeded { seed }, args.depth, &rho)
            }
            None => bail!(input_err(format!(
                "unknown scheduler `{name}` (expected roundrobin, random:<seed> or maximal)"
            ))),
        },
    })
}

fn dist_json(args: &RunArgs, d: &Dist<Val>) -> Value {
    json!({
        "program": args.file.display().to_string(),
        "scheduler": args.scheduler,
        "depth": args.depth,
        "dist": d.to_json(),
        "mass": fmt_rat(&d.mass()),
    })
}

fn print_dist(args: &RunArgs, d: &Dist<Val>) {
    println!(
        "{} under {} at depth {}",
        args.file.display(),
        args.scheduler,
        args.depth
    );
    println!("{:<12} {:<14} approx", "value", "probability");
    for (v, p) in d.iter() {
        println!("{:<12} {:<14} {}", v.to_string(), fmt_rat(p), fmt_decimal(p, 6));
    }
    let m = d.mass();
    println!("mass {} ({})", fmt_rat(&m), fmt_decimal(&m, 6));
}

fn print_refine(r: &RefineReport) {
    println!("{} refines {} at depth {}", r.left, r.right, r.depth);
    println!(
        "{:<14} {:<12} {:<12} {:<12} verdict",
        "probe", "left", "right", "residual"
    );
    for p in &r.probes {
        println!(
            "{:<14} {:<12} {:<12} {:<12} {}",
            p.probe, p.left, p.right, p.residual, p.verdict
        );
    }
    println!("note: {}", r.note);
    println!("{}", r.verdict);
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.cmd {
        Cmd::Run(args) => {
            let d = run_dist(args)?;
            if cli.json {
                println!("{}", sorted_json(&dist_json(args, &d))?);
            } else {
                print_dist(args, &d);
            }
            Ok(true)
        }
        Cmd::Dist(args) => {
            let d = run_dist(args)?;
            println!("{}", sorted_json(&dist_json(args, &d))?);
            Ok(true)
        }
        Cmd::Sup { file, depth, probe } => {
            let e = load(file)?;
            let vals = probe.iter().map(|s| parse_val(s)).collect::<Result<Vec<_>>>()?;
            let rep = sup_report(
                &file.display().to_string(),
                *depth,
                &Config::new(e),
                &vals,
                cli.workers,
                false,
            );
            if cli.json {
                println!("{}", sorted_json(&rep)?);
            } else {
                let v = fox_core::dist::parse_rat(&rep.sup_term).context("internal rational")?;
                println!("{}", rep.sup_term);
                println!("approx {} at depth {} (a lower bound of the supremum)", fmt_decimal(&v, 6), depth);
                for p in &rep.probes {
                    println!("probe {} mass {}", p.value, p.mass);
                }
            }
            Ok(true)
        }
        Cmd::Refine {
            left,
            right,
            depth,
            probe,
        } => {
            let (le, re) = (load(left)?, load(right)?);
            let mut probes = probe
                .iter()
                .map(|s| parse_probe(s))
                .collect::<Result<BTreeSet<_>>>()?
                .into_iter()
                .collect::<Vec<_>>();
            if probes.is_empty() {
                probes.push(Probe::Identity);
            }
            let (ln, rn) = (left.display().to_string(), right.display().to_string());
            let rep = refine_report(&RefineInput {
                left_name: &ln,
                right_name: &rn,
                left: &le,
                right: &re,
                right_residual: &Residual::Zero,
                depth: *depth,
                probes: &probes,
                workers: cli.workers,
                expect_gap: false,
            });
            if cli.json {
                println!("{}", sorted_json(&rep)?);
            } else {
                print_refine(&rep);
            }
            Ok(rep.verdict != Verdict::Fail)
        }
        Cmd::Couple { query } => {
            let text = fs::read_to_string(query)
                .map_err(|e| input_err(format!("{}: {e}", query.display())))?;
            let q: QueryJson = serde_json::from_str(&text)
                .map_err(|e| input_err(format!("{}: {e}", query.display())))?;
            let q = q.to_query().map_err(|e| input_err(format!("{}: {e}", query.display())))?;
            let v = answer_query(&q);
            if cli.json {
                println!("{}", sorted_json(&v)?);
            } else {
                println!("min ε = {}", v.min_eps);
                println!("ε = {}", v.eps);
                println!("{}", if v.holds { "PASS" } else { "FAIL" });
            }
            Ok(v.holds)
        }
        Cmd::Selftest => {
            let rep = selftest(cli.workers);
            if cli.json {
                println!("{}", sorted_json(&rep)?);
            } else {
                for l in &rep.lines {
                    println!("{:<14} {:<28} {}", l.verdict.to_string(), l.name, l.detail);
                }
            }
            Ok(rep.ok())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InputError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
