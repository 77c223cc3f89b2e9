//! Command-line front end: solve OPB instances, check proofs, and sweep
//! benchmark directories.
//!
//! Exit codes for `solve`: 0 when optimality or infeasibility is proven,
//! 10 for a feasible solution without an optimality proof, 20 for unknown,
//! 1 for usage or parse errors. `check` exits 0 on acceptance and 1 on
//! rejection.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use pboihs::certify::{check_text, CheckVerdict};
use pboihs::driver::{ihs_solve, parse_bench_configs, render_stats, run_bench, RunConfig};
use pboihs::hs::{BackendConfig, BackendKind, HybridMode};
use pboihs::opb::{emit_result, parse_opb, SolveStatus};
use pboihs::sls::SlsConfig;

#[derive(Parser)]
#[command(
    name = "pboihs",
    version,
    about = "Exact pseudo-Boolean optimization with implicit hitting sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Sis,
    SisReified,
    Cg,
    Cb,
}

#[derive(Clone, Copy, ValueEnum)]
enum HybridArg {
    None,
    Optlb,
    Alllb,
    Forcelb,
}

#[derive(Clone, Copy, ValueEnum)]
enum SlsArg {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an OPB instance.
    Solve {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "cb")]
        backend: BackendArg,
        #[arg(long, value_enum, default_value = "none")]
        hybrid: HybridArg,
        #[arg(long, value_enum, default_value = "on")]
        sls: SlsArg,
        /// Write a checkable proof of the result to this path.
        #[arg(long)]
        proof: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Time limit in seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        /// Core-guided reformulation steps before core-boosted search
        /// switches to solution-improving search.
        #[arg(long, default_value_t = 100)]
        cb_budget: u64,
        /// Write run statistics (key=value lines) to this path.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Include wall-clock timings in the statistics output.
        #[arg(long)]
        timings: bool,
        /// Dump every hitting-set instance in OPB form into this directory.
        #[arg(long)]
        dump_hs: Option<PathBuf>,
        /// Do not seed the core set with objective-only input constraints.
        #[arg(long)]
        no_seeding: bool,
    },
    /// Check a proof against an instance.
    Check { instance: PathBuf, proof: PathBuf },
    /// Run every configuration against every .opb file in a directory.
    Bench {
        dir: PathBuf,
        /// Semicolon-separated configurations, e.g. "cb+sls;sis+optlb+proof".
        #[arg(long)]
        configs: String,
        /// Per-instance time limit in seconds.
        #[arg(long, default_value_t = 30.0)]
        time_limit: f64,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
    },
}

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

extern "C" fn handle_sigint(_: libc::c_int) {
    INTERRUPTED.store(true, Ordering::SeqCst);
}

fn install_sigint_handler() {
    unsafe {
        libc::signal(libc::SIGINT, handle_sigint as extern "C" fn(libc::c_int) as usize);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn solve_command(
    file: PathBuf,
    backend: BackendArg,
    hybrid: HybridArg,
    sls: SlsArg,
    proof: Option<PathBuf>,
    seed: u64,
    time_limit: Option<f64>,
    cb_budget: u64,
    stats: Option<PathBuf>,
    timings: bool,
    dump_hs: Option<PathBuf>,
    no_seeding: bool,
) -> anyhow::Result<ExitCode> {
    install_sigint_handler();
    // The C handler only sets a flag; a watcher mirrors it into the flag
    // the solver polls, so an interrupt winds the run down and the
    // incumbent and bounds still get reported below.
    let interrupt = Arc::new(AtomicBool::new(false));
    {
        let flag = interrupt.clone();
        std::thread::spawn(move || loop {
            if INTERRUPTED.load(Ordering::SeqCst) {
                flag.store(true, Ordering::SeqCst);
                break;
            }
            std::thread::sleep(Duration::from_millis(25));
        });
    }

    let bytes = std::fs::read(&file).with_context(|| format!("cannot read {}", file.display()))?;
    let text = String::from_utf8_lossy(&bytes);
    let instance = match parse_opb(&text) {
        Ok(instance) => instance,
        Err(diag) => {
            eprintln!("{}: {diag}", file.display());
            return Ok(ExitCode::from(1));
        }
    };
    let kind = match backend {
        BackendArg::Sis => BackendKind::Sis,
        BackendArg::SisReified => BackendKind::SisReified,
        BackendArg::Cg => BackendKind::Cg,
        BackendArg::Cb => BackendKind::Cb,
    };
    let hybrid = match hybrid {
        HybridArg::None => HybridMode::None,
        HybridArg::Optlb => HybridMode::OptLb,
        HybridArg::Alllb => HybridMode::AllLb,
        HybridArg::Forcelb => HybridMode::ForceLb,
    };
    let cfg = RunConfig {
        backend: BackendConfig {
            kind,
            hybrid,
            cb_core_guided_iteration_budget: cb_budget,
            ..Default::default()
        },
        sls: matches!(sls, SlsArg::On).then(|| SlsConfig { seed, ..Default::default() }),
        seeding: !no_seeding,
        time_limit: time_limit.map(Duration::from_secs_f64),
        seed,
        proof_path: proof,
        stats_path: stats,
        emit_timings: timings,
        dump_hs_dir: dump_hs,
        interrupt: Some(interrupt.clone()),
        ..Default::default()
    };

    let outcome = ihs_solve(&instance, &cfg, |cost| println!("o {cost}"))?;

    print!("{}", emit_result(outcome.status, outcome.cost, outcome.best.as_ref(), instance.num_vars));
    if matches!(outcome.status, SolveStatus::Satisfiable | SolveStatus::Unknown) {
        let lb = outcome.lower_bound.map_or("-inf".to_string(), |v| v.to_string());
        let ub = outcome.cost.map_or("+inf".to_string(), |v| v.to_string());
        println!("c bounds lb={lb} ub={ub}");
    }
    if timings && cfg.stats_path.is_none() {
        eprint!("{}", render_stats(&outcome.stats, &cfg));
    }
    Ok(match outcome.status {
        SolveStatus::Optimum | SolveStatus::Unsatisfiable => ExitCode::from(0),
        SolveStatus::Satisfiable => ExitCode::from(10),
        SolveStatus::Unknown => ExitCode::from(20),
    })
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Solve {
            file,
            backend,
            hybrid,
            sls,
            proof,
            seed,
            time_limit,
            cb_budget,
            stats,
            timings,
            dump_hs,
            no_seeding,
        } => solve_command(
            file, backend, hybrid, sls, proof, seed, time_limit, cb_budget, stats, timings,
            dump_hs, no_seeding,
        ),
        Command::Check { instance, proof } => {
            let instance_text = std::fs::read_to_string(&instance)
                .with_context(|| format!("cannot read {}", instance.display()))?;
            let parsed = match parse_opb(&instance_text) {
                Ok(parsed) => parsed,
                Err(diag) => {
                    eprintln!("{}: {diag}", instance.display());
                    return Ok(ExitCode::from(1));
                }
            };
            let proof_text = std::fs::read_to_string(&proof)
                .with_context(|| format!("cannot read {}", proof.display()))?;
            match check_text(&parsed, &proof_text) {
                Ok(CheckVerdict::Optimal(cost)) => {
                    println!("ACCEPTED optimal {cost}");
                    Ok(ExitCode::from(0))
                }
                Ok(CheckVerdict::Infeasible) => {
                    println!("ACCEPTED infeasible");
                    Ok(ExitCode::from(0))
                }
                Err(err) => {
                    println!("REJECTED {err}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Bench { dir, configs, time_limit, out } => {
            let configs = parse_bench_configs(&configs)
                .map_err(|e| anyhow::anyhow!("bad --configs: {e}"))?;
            let results = run_bench(&dir, &configs, Duration::from_secs_f64(time_limit))?;
            std::fs::write(&out, results.to_csv())
                .with_context(|| format!("cannot write {}", out.display()))?;
            print!("{}", results.summary());
            Ok(ExitCode::from(0))
        }
    }
}
