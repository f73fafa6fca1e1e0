//! `mapfr`: generate layered instances, solve them, run benchmarks.
//!
//! Exit codes: 0 solved, 1 timeout, 2 infeasible, 3 usage or input error,
//! 4 a returned solution failed the requested validation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use mapfr_core::bench::{
    identity_instance, random_permutation_instance, render_svg, run_benchmark, summarize, write_csv, Connectivity, LayeredSpec,
    SolverKind,
};
use mapfr_core::cbsr::{solve_cbsr, CbsOptions};
use mapfr_core::model::{discretize, parse_instance, write_instance, write_solution, Instance, Solution};
use mapfr_core::smt_cbsr::{solve_smt_cbsr, SmtOptions};
use mapfr_core::validation::{reinterpret_unit_solution, sampled_overlap_check, validate_plans};
use mapfr_core::SolveStatus;

const EXIT_USAGE: u8 = 3;
const EXIT_INVALID: u8 = 4;

#[derive(Parser)]
#[command(name = "mapfr", version, about = "Makespan-optimal multi-agent path finding with continuous time")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a layered benchmark instance.
    Gen(GenArgs),
    /// Solve an instance file or a generated layered instance.
    Solve(SolveArgs),
    /// Run both solvers over seeded layered instances and write a CSV.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ConnArg {
    Adjacent,
    Window3,
}

impl From<ConnArg> for Connectivity {
    fn from(c: ConnArg) -> Self {
        match c {
            ConnArg::Adjacent => Connectivity::Adjacent,
            ConnArg::Window3 => Connectivity::Window3,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Cbsr,
    Smtcbsr,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Validation {
    /// Exact segment-distance check of every overlapping event pair.
    Def2,
    /// Body overlap sampled every millisecond.
    Sampled,
}

#[derive(Args)]
struct LayeredArgs {
    /// Layer sizes, e.g. `[3,1,3]`.
    #[arg(long)]
    spec: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "window3")]
    connectivity: ConnArg,
    /// Straight-across start/goal assignment instead of a random one.
    #[arg(long)]
    identity: bool,
}

impl LayeredArgs {
    fn instance(&self, spec: &str) -> Result<Instance, String> {
        let mut spec = LayeredSpec::parse(spec).map_err(|e| e.to_string())?;
        spec.connectivity = self.connectivity.into();
        let inst = if self.identity {
            identity_instance(&spec)
        } else {
            random_permutation_instance(&spec, self.seed)
        };
        inst.map_err(|e| e.to_string())
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    layered: LayeredArgs,
    /// Output file (default: standard output).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file; alternatively use `--spec`.
    instance: Option<PathBuf>,
    #[command(flatten)]
    layered: LayeredArgs,
    #[arg(long, value_enum, default_value = "smtcbsr")]
    solver: SolverArg,
    /// Seconds; 0 disables the limit.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    /// Write the formula before every SAT call to `<PREFIX>.<call>.cnf`
    /// (SMT-CBS-R only; default prefix `formula`).
    #[arg(long, value_name = "PREFIX", num_args = 0..=1, default_missing_value = "formula")]
    dump_cnf: Option<PathBuf>,
    /// Draw the instance and the solution.
    #[arg(long, value_name = "PATH")]
    svg: Option<PathBuf>,
    /// Re-check the returned solution.
    #[arg(long, value_enum)]
    validate: Vec<Validation>,
    /// Solve with every edge taking one time unit, then retime the plans
    /// with the true edge lengths.
    #[arg(long)]
    discretize: bool,
    /// Plan output file (default: standard output).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Layer sizes, e.g. `[2,2] [3,1,3]`.
    #[arg(required = true)]
    specs: Vec<String>,
    /// Seeds 0..N per graph.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long)]
    csv: PathBuf,
    /// Connectivity policies to run; both when omitted.
    #[arg(long, value_enum)]
    connectivity: Vec<ConnArg>,
    #[arg(long, value_enum)]
    solver: Vec<SolverArg>,
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
}

fn timeout(secs: f64) -> Result<Option<Duration>, String> {
    if !secs.is_finite() || secs < 0.0 {
        return Err(format!("invalid timeout {secs}"));
    }
    Ok((secs > 0.0).then(|| Duration::from_secs_f64(secs)))
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), String> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn usage(message: String) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_USAGE)
}

fn gen(args: GenArgs) -> ExitCode {
    let Some(spec) = &args.layered.spec else {
        return usage("gen needs --spec".into());
    };
    match args.layered.instance(spec).and_then(|i| emit(&write_instance(&i), args.output.as_deref())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => usage(e),
    }
}

fn load(args: &SolveArgs) -> Result<Instance, String> {
    match (&args.instance, &args.layered.spec) {
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_instance(&text).map_err(|e| format!("{}: {e}", path.display()))
        }
        (None, Some(spec)) => args.layered.instance(spec),
        _ => Err("give exactly one of an instance file or --spec".into()),
    }
}

fn solve(args: SolveArgs) -> ExitCode {
    let (instance, limit) = match load(&args).and_then(|i| Ok((i, timeout(args.timeout)?))) {
        Ok(x) => x,
        Err(e) => return usage(e),
    };
    let target = if args.discretize { discretize(&instance) } else { instance.clone() };
    let (status, solution) = match args.solver {
        SolverArg::Cbsr => {
            let r = solve_cbsr(&target, &CbsOptions { timeout: limit });
            eprintln!("cbsr: {} expanded={} generated={} runtime_s={:.6}", r.status, r.stats.expanded, r.stats.generated, r.stats.runtime_seconds);
            (r.status, r.solution)
        }
        SolverArg::Smtcbsr => {
            let r = solve_smt_cbsr(
                &target,
                &SmtOptions {
                    timeout: limit,
                    dump_cnf: args.dump_cnf.clone(),
                    ..SmtOptions::default()
                },
            );
            let s = &r.stats;
            eprintln!(
                "smtcbsr: {} sat_calls={} makespans={} vars={} clauses={} conflicts={} refinements={} runtime_s={:.6}",
                r.status,
                s.sat_calls,
                s.makespans.len(),
                s.num_vars,
                s.num_clauses,
                s.num_conflicts,
                s.refinements,
                s.runtime_seconds
            );
            (r.status, r.solution)
        }
    };
    let Some(mut solution) = solution else {
        eprintln!("{status}");
        return ExitCode::from(match status {
            SolveStatus::Timeout => 1,
            _ => 2,
        });
    };
    if args.discretize {
        eprintln!("unit-time makespan {}", solution.makespan());
        solution = reinterpret_unit_solution(&instance, &solution);
    }
    if let Err(e) = emit(&write_solution(&solution), args.output.as_deref()) {
        return usage(e);
    }
    if let Some(path) = &args.svg {
        if let Err(e) = render_svg(&instance, &solution, path) {
            return usage(format!("{}: {e}", path.display()));
        }
    }
    if !check(&instance, &solution, &args.validate) {
        return ExitCode::from(EXIT_INVALID);
    }
    ExitCode::SUCCESS
}

fn check(instance: &Instance, solution: &Solution, modes: &[Validation]) -> bool {
    let mut ok = true;
    for mode in modes {
        let found = match mode {
            Validation::Def2 => match validate_plans(instance, solution) {
                Ok(c) => c.len(),
                Err(e) => {
                    eprintln!("def2: malformed plans: {e}");
                    ok = false;
                    continue;
                }
            },
            Validation::Sampled => sampled_overlap_check(instance, solution, 1e-3).len(),
        };
        let name = if *mode == Validation::Def2 { "def2" } else { "sampled" };
        eprintln!("{name}: {found} collisions");
        ok &= found == 0;
    }
    ok
}

fn bench(args: BenchArgs) -> ExitCode {
    let limit = match timeout(args.timeout) {
        Ok(t) => t,
        Err(e) => return usage(e),
    };
    let conns: Vec<Connectivity> = if args.connectivity.is_empty() {
        vec![Connectivity::Adjacent, Connectivity::Window3]
    } else {
        args.connectivity.iter().map(|&c| c.into()).collect()
    };
    let solvers: Vec<SolverKind> = if args.solver.is_empty() {
        SolverKind::ALL.to_vec()
    } else {
        args.solver
            .iter()
            .map(|s| match s {
                SolverArg::Cbsr => SolverKind::Cbsr,
                SolverArg::Smtcbsr => SolverKind::SmtCbsr,
            })
            .collect()
    };
    let mut specs = Vec::new();
    for text in &args.specs {
        let base = match LayeredSpec::parse(text) {
            Ok(s) => s,
            Err(e) => return usage(e.to_string()),
        };
        for &c in &conns {
            specs.push(LayeredSpec {
                connectivity: c,
                ..base.clone()
            });
        }
    }
    let results = run_benchmark(&specs, args.seeds, &solvers, limit);
    let written = fs::File::create(&args.csv)
        .map_err(|e| e.to_string())
        .and_then(|f| write_csv(&results, f).map_err(|e| e.to_string()));
    if let Err(e) = written {
        return usage(format!("{}: {e}", args.csv.display()));
    }
    info!("wrote {} rows to {}", results.len(), args.csv.display());
    println!("{:<20} {:<8} {:>6} {:>12} {:>12} {:>12}", "graph", "solver", "solved", "runtime_s", "iterations", "makespan");
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    for s in summarize(&results) {
        println!(
            "{:<20} {:<8} {:>6} {:>12} {:>12} {:>12}",
            s.graph,
            s.solver.to_string(),
            format!("{}/{}", s.solved, s.runs),
            fmt(s.mean_runtime_s),
            fmt(s.mean_iterations),
            fmt(s.mean_makespan)
        );
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
    }
}
