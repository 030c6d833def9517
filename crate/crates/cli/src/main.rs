//! Command-line driver: analyze one program, compare the fencing
//! strategies, or dump intermediate artifacts.
//!
//! Exit codes: 0 success, 1 bad input or diagnostics, 2 a configured cap
//! was exceeded (partial results were still written), 3 coverage
//! verification failed.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};

use fencer_core::arch::Architecture;
use fencer_core::cycles::Caps;
use fencer_core::ilp::{build_ilp, CostModel};
use fencer_core::ir::FenceType;
use fencer_core::placement::{insert_fences, report, PositionPolicy};
use fencer_core::shared::Precision;
use fencer_core::solver::export_lp;
use fencer_core::strategies::{analyze, apply_strategy, Analysis, AnalysisOptions, Strategy};
use fencer_core::{oracle, parse_program, pretty_print};

#[derive(Parser)]
#[command(name = "fencer", version, about = "Infers memory fences restoring sequential consistency under weak memory models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a program and emit a fenced version plus a report.
    Analyze(AnalyzeArgs),
    /// Run every strategy and print a CSV comparison.
    Compare(CommonArgs),
    /// Write intermediate artifacts without fencing anything.
    Dump(DumpArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Input program in the textual IR.
    input: PathBuf,
    /// Target architecture: sc, tso, pso, rmo, power (arm is an alias).
    #[arg(long, default_value = "tso")]
    arch: String,
    /// Fence costs, e.g. f=3,lwf=2,dp=1,cf=1.
    #[arg(long, default_value = "f=3,lwf=2,dp=1,cf=1")]
    cost: String,
    /// Points-to precision: precise, index-insensitive, imprecise.
    #[arg(long = "points-to", default_value = "precise")]
    points_to: String,
    /// Cycle enumeration cap.
    #[arg(long = "max-cycles", default_value_t = 200_000)]
    max_cycles: usize,
    /// Per-component search time limit, in seconds.
    #[arg(long = "scc-timeout", default_value_t = 60)]
    scc_timeout: u64,
    /// Branch-and-bound node cap.
    #[arg(long = "solver-nodes", default_value_t = 10_000_000)]
    solver_nodes: u64,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Fencing strategy: m, p, v, e, h.
    #[arg(long, default_value = "m")]
    strategy: String,
    /// Where fences land on an edge: after-first or before-last.
    #[arg(long, default_value = "after-first")]
    position: String,
    /// Write the fenced program here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// builtin solves in-process; export-only just writes the ILP.
    #[arg(long, default_value = "builtin")]
    solver: String,
    /// Re-check the plan against the covering conditions and fail on an
    /// uncovered witness.
    #[arg(long)]
    verify: bool,
    /// Write the abstract event graph in DOT form.
    #[arg(long = "dump-aeg")]
    dump_aeg: Option<PathBuf>,
    /// Write one canonical cycle per line.
    #[arg(long = "dump-cycles")]
    dump_cycles: Option<PathBuf>,
    /// Write the covering program in LP format.
    #[arg(long = "dump-ilp")]
    dump_ilp: Option<PathBuf>,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Write the abstract event graph in DOT form.
    #[arg(long = "dump-aeg", alias = "aeg")]
    dump_aeg: Option<PathBuf>,
    /// Write one canonical cycle per line.
    #[arg(long = "dump-cycles", alias = "cycles")]
    dump_cycles: Option<PathBuf>,
    /// Write the covering program in LP format.
    #[arg(long = "dump-ilp", alias = "ilp")]
    dump_ilp: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Analyze(args) => run_analyze(args),
        Command::Compare(args) => run_compare(args),
        Command::Dump(args) => run_dump(args),
    };
    match code {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

struct Prepared {
    analysis: Analysis,
    cm: CostModel,
}

fn prepare(common: &CommonArgs) -> Result<Prepared, String> {
    let arch = Architecture::from_token(&common.arch)
        .ok_or_else(|| format!("unknown architecture `{}`", common.arch))?;
    let cm = CostModel::parse(&common.cost).map_err(|e| e.to_string())?;
    let precision = Precision::from_token(&common.points_to)
        .ok_or_else(|| format!("unknown points-to precision `{}`", common.points_to))?;
    let text = fs::read_to_string(&common.input)
        .map_err(|e| format!("cannot read {}: {e}", common.input.display()))?;
    let program = parse_program(&text).map_err(|e| e.to_string())?;
    let options = AnalysisOptions {
        precision,
        caps: Caps {
            max_cycles: common.max_cycles,
            scc_time_limit: Duration::from_secs(common.scc_timeout),
        },
        solver_node_cap: common.solver_nodes,
    };
    let analysis = analyze(&program, arch, options).map_err(|e| e.to_string())?;
    Ok(Prepared { analysis, cm })
}

fn write_dumps(
    a: &Analysis,
    cm: &CostModel,
    dump_aeg: &Option<PathBuf>,
    dump_cycles: &Option<PathBuf>,
    dump_ilp: &Option<PathBuf>,
) -> Result<(), String> {
    if let Some(path) = dump_aeg {
        fs::write(path, a.aeg.to_dot()).map_err(|e| e.to_string())?;
    }
    if let Some(path) = dump_cycles {
        let mut out = String::new();
        for c in &a.cycles.cycles {
            out.push_str(&format!("{} | {}\n", c.id(), c.describe(&a.aeg)));
        }
        fs::write(path, out).map_err(|e| e.to_string())?;
    }
    if let Some(path) = dump_ilp {
        let problem = build_ilp(&a.aeg, &a.cycles.cycles, a.arch, cm);
        fs::write(path, export_lp(&problem)).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn run_analyze(args: AnalyzeArgs) -> Result<ExitCode, String> {
    let strategy = Strategy::from_token(&args.strategy)
        .ok_or_else(|| format!("unknown strategy `{}`", args.strategy))?;
    let policy = PositionPolicy::from_token(&args.position)
        .ok_or_else(|| format!("unknown position policy `{}`", args.position))?;
    let prepared = prepare(&args.common)?;
    let a = &prepared.analysis;
    write_dumps(a, &prepared.cm, &args.dump_aeg, &args.dump_cycles, &args.dump_ilp)?;

    if args.solver == "export-only" {
        let problem = build_ilp(&a.aeg, &a.cycles.cycles, a.arch, &prepared.cm);
        print!("{}", export_lp(&problem));
        return Ok(ExitCode::SUCCESS);
    } else if args.solver != "builtin" {
        return Err(format!("unknown solver `{}`", args.solver));
    }

    let plan = apply_strategy(a, strategy, &prepared.cm);
    print!("{}", report(&plan, &a.aeg));

    if let Some(out) = &args.out {
        let fenced = insert_fences(&a.program, &plan, policy).map_err(|e| e.to_string())?;
        fs::write(out, pretty_print(&fenced)).map_err(|e| e.to_string())?;
    }

    if args.verify {
        let verdict = oracle::verify_coverage(&a.cycles.cycles, &plan, &a.aeg, a.arch);
        if !verdict.covered {
            let (cycle, delay) = verdict.witness.unwrap();
            eprintln!("verification failed: cycle {cycle}, delay {delay} uncovered");
            return Ok(ExitCode::from(3));
        }
        println!("verification: covered");
    }

    if plan.capped {
        eprintln!("warning: a configured cap was exceeded; results may be partial");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_compare(common: CommonArgs) -> Result<ExitCode, String> {
    let prepared = prepare(&common)?;
    let a = &prepared.analysis;
    println!("strategy,arch,f,lwf,cf,dp,cost,ms");
    for strategy in Strategy::ALL {
        let started = Instant::now();
        let plan = apply_strategy(a, strategy, &prepared.cm);
        let ms = started.elapsed().as_millis();
        let mark = if plan.capped { "!" } else { "" };
        println!(
            "{}{},{},{},{},{},{},{},{}",
            strategy.token(),
            mark,
            a.arch.token(),
            plan.count_of(FenceType::Full),
            plan.count_of(FenceType::Lightweight),
            plan.count_of(FenceType::Control),
            plan.count_of(FenceType::Dependency),
            plan.cost_display(),
            ms
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn run_dump(args: DumpArgs) -> Result<ExitCode, String> {
    let prepared = prepare(&args.common)?;
    write_dumps(
        &prepared.analysis,
        &prepared.cm,
        &args.dump_aeg,
        &args.dump_cycles,
        &args.dump_ilp,
    )?;
    if prepared.analysis.cycles.capped {
        eprintln!("warning: cycle enumeration hit a cap; dumps may be partial");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}
