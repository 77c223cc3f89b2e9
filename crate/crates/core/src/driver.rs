//! # Solver Driver
//!
//! The main optimization loop: check feasibility, seed the core set with
//! input constraints over objective literals, then alternate between the
//! hitting-set component and weight-aware core extraction until the bounds
//! meet. Also home to the run configuration, run statistics and the
//! benchmark sweep.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::certify::{Conclusion, CpOp, Derivation, Logger};
use crate::hs::{BackendConfig, BackendKind, HsSolver, HsStatus, HybridMode};
use crate::opb::SolveStatus;
use crate::oracle::{extract_cores_bounded, Budget, ExtractOutcome, OracleResult, PbOracle};
use crate::pb::{Assignment, Bounds, ConstraintId, Instance, Int, PbConstraint};
use crate::sls::SlsConfig;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub backend: BackendConfig,
    /// SLS integration; `None` disables it entirely.
    pub sls: Option<SlsConfig>,
    /// Seed the core set with input constraints over objective literals.
    pub seeding: bool,
    pub time_limit: Option<Duration>,
    pub seed: u64,
    pub proof_path: Option<PathBuf>,
    pub stats_path: Option<PathBuf>,
    /// Force an optimal hitting-set call at least this often, which upholds
    /// the termination guarantee independent of the heuristic.
    pub force_opt_every: u64,
    /// Keep every extracted core in the run statistics (small runs only).
    pub collect_cores: bool,
    /// Record a snapshot after every core-guided reformulation.
    pub trace_reformulations: bool,
    /// Dump each hitting-set instance in OPB form into this directory.
    pub dump_hs_dir: Option<PathBuf>,
    /// Include wall-clock timings in rendered statistics. Off by default so
    /// statistics files are byte-identical across runs with a fixed seed.
    pub emit_timings: bool,
    /// External stop request; the run winds down at the next opportunity
    /// and reports its incumbent and bounds.
    pub interrupt: Option<Arc<AtomicBool>>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            backend: BackendConfig::default(),
            sls: Some(SlsConfig::default()),
            seeding: true,
            time_limit: None,
            seed: 0,
            proof_path: None,
            stats_path: None,
            force_opt_every: 1_000,
            collect_cores: false,
            trace_reformulations: false,
            dump_hs_dir: None,
            emit_timings: false,
            interrupt: None,
        }
    }
}

/// Wall times per component, informational only.
#[derive(Clone, Copy, Debug, Default)]
pub struct ComponentTimes {
    pub total: Duration,
    pub feasibility: Duration,
    pub hitting_set: Duration,
    pub extraction: Duration,
}

#[derive(Clone, Debug, Default)]
pub struct RunStats {
    pub iterations: u64,
    pub cores_extracted: u64,
    /// Decision-procedure invocations on the core-extraction oracle.
    pub oracle_calls: u64,
    pub hs_calls: u64,
    pub certified_minimize_calls: u64,
    pub inexact_minimize_calls: u64,
    pub sls_calls: u64,
    pub sls_improvements: u64,
    pub cg_reformulations: u64,
    pub discrepancies: u64,
    /// `(lower, upper)` after each iteration; lower never decreases and
    /// upper never increases.
    pub bounds_trajectory: Vec<(Option<Int>, Int)>,
    pub times: ComponentTimes,
    /// All members of the core set in insertion order, when collected.
    pub cores: Option<Vec<PbConstraint>>,
    pub reformulation_trace: Option<Vec<crate::hs::ReformulationState>>,
    pub proof_bytes: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub status: SolveStatus,
    /// Best full assignment found, complete over the instance variables.
    pub best: Option<Assignment>,
    pub cost: Option<Int>,
    pub lower_bound: Option<Int>,
    pub stats: RunStats,
}

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error(transparent)]
    Config(#[from] crate::hs::ConfigError),
    #[error("proof logging requires a proof-capable backend")]
    ProofWithoutCapableBackend,
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// Solves a PBO instance with the implicit-hitting-set loop.
///
/// `on_improvement` fires for every verified-feasible incumbent, including
/// the initial feasibility witness, with its exact cost.
pub fn ihs_solve(
    instance: &Instance,
    cfg: &RunConfig,
    mut on_improvement: impl FnMut(Int),
) -> Result<RunOutcome, DriverError> {
    let start = Instant::now();
    let deadline = cfg.time_limit.map(|limit| start + limit);

    // Proof logging needs a backend that can justify every bound update.
    if cfg.proof_path.is_some()
        && cfg.backend.kind == BackendKind::SlsOnly
        && cfg.backend.hybrid == HybridMode::None
    {
        return Err(DriverError::ProofWithoutCapableBackend);
    }

    // Input constraints get proof ids 1..=m in input order.
    let mut numbered = instance.clone();
    for (i, c) in numbered.constraints.iter_mut().enumerate() {
        c.set_id(ConstraintId(i as u64 + 1));
    }

    let mut logger = match &cfg.proof_path {
        Some(path) => {
            let file = std::fs::File::create(path)?;
            Logger::new(&numbered, Box::new(io::BufWriter::new(file)))?
        }
        None => Logger::disabled(numbered.num_vars),
    };

    let mut oracle = PbOracle::new(numbered.num_vars);
    for c in &numbered.constraints {
        oracle.add_constraint(c, Vec::new());
    }

    let mut stats = RunStats { cores: cfg.collect_cores.then(Vec::new), ..RunStats::default() };

    // Feasibility check on the bare formula.
    let feas_start = Instant::now();
    stats.oracle_calls += 1;
    let feasibility =
        oracle.solve_bounded(
        &[],
        &Budget { max_conflicts: None, deadline, interrupt: cfg.interrupt.clone() },
        &mut logger,
    );
    stats.times.feasibility = feas_start.elapsed();
    let mut incumbent = match feasibility {
        None => {
            stats.times.total = start.elapsed();
            finish_stats(&mut stats, cfg);
            return Ok(RunOutcome {
                status: SolveStatus::Unknown,
                best: None,
                cost: None,
                lower_bound: None,
                stats,
            });
        }
        Some(OracleResult::Unsat(_)) => {
            logger.log_conclusion(Conclusion::Infeasible);
            logger.flush();
            stats.times.total = start.elapsed();
            finish_stats(&mut stats, cfg);
            return Ok(RunOutcome {
                status: SolveStatus::Unsatisfiable,
                best: None,
                cost: None,
                lower_bound: None,
                stats,
            });
        }
        Some(OracleResult::Sat(model)) => model,
    };

    let objective = &numbered.objective;
    let mut bounds = Bounds::unbounded();
    let ub0 = objective.cost(&incumbent).expect("feasibility model is complete");
    bounds.improve_upper(ub0);
    verify_incumbent(&numbered, &incumbent);
    logger.log_solution(&incumbent, ub0, numbered.num_vars);
    on_improvement(ub0);

    let mut backend_cfg = cfg.backend.clone();
    backend_cfg.proof_logging = logger.enabled();
    let mut hs =
        HsSolver::new(objective.clone(), numbered.num_vars, backend_cfg, cfg.sls.clone())?;
    hs.set_deadline(deadline);
    hs.set_interrupt(cfg.interrupt.clone());
    if cfg.trace_reformulations {
        hs.reformulation_trace = Some(Vec::new());
    }
    hs.set_incumbent(incumbent.project(objective.vars()), ub0);

    // Seeding: every input constraint over objective literals joins the
    // core set, aliased in the proof through a trivial derivation.
    if cfg.seeding {
        for c in &numbered.constraints {
            if c.vars().all(|v| objective.contains_var(v)) {
                let mut seeded = c.clone();
                if let Some(input_id) = c.id() {
                    if let Some(alias) = logger.log_core(
                        c,
                        Derivation::CuttingPlanes(vec![CpOp::Push(input_id), CpOp::Multiply(1)]),
                    ) {
                        seeded.set_id(alias);
                    }
                }
                if let Some(collected) = stats.cores.as_mut() {
                    collected.push(seeded.clone());
                }
                hs.add_cores([seeded]);
            }
        }
    }

    // Proof id of the constraint establishing the current lower bound.
    let mut lb_proof: Option<ConstraintId> = None;
    let mut status = SolveStatus::Satisfiable;

    let interrupted =
        |cfg: &RunConfig| cfg.interrupt.as_ref().is_some_and(|f| f.load(Ordering::Relaxed));
    loop {
        stats.iterations += 1;
        if deadline.is_some_and(|d| Instant::now() >= d) || interrupted(cfg) {
            break;
        }
        let force_opt = cfg.force_opt_every > 0 && stats.iterations.is_multiple_of(cfg.force_opt_every);

        if let Some(dir) = &cfg.dump_hs_dir {
            dump_hs_instance(dir, stats.iterations, hs.kore(), objective)?;
        }

        let hs_start = Instant::now();
        stats.hs_calls += 1;
        let result = hs.solve_hs(
            bounds.lower(),
            bounds.upper().expect("upper bound set"),
            force_opt,
            &mut logger,
        );
        stats.times.hitting_set += hs_start.elapsed();

        let mut lb_changed = false;
        if result.status == HsStatus::Optimal {
            let new_lb = result.lower_bound_out.expect("optimal result carries its bound");
            if bounds.improve_lower(new_lb) {
                lb_changed = true;
            }
            // Track the certificate of the current bound even when the
            // bound value itself was already known.
            if result.lb_proof.is_some() && bounds.lower() == Some(new_lb) {
                lb_proof = result.lb_proof;
            }
        }
        if bounds.closed() {
            status = SolveStatus::Optimum;
            stats.bounds_trajectory.push((bounds.lower(), bounds.upper().unwrap()));
            break;
        }

        let extract_start = Instant::now();
        stats.oracle_calls += 1;
        let extraction = extract_cores_bounded(
            &mut oracle,
            &result.solution,
            objective,
            &Budget { max_conflicts: None, deadline, interrupt: cfg.interrupt.clone() },
            &mut logger,
        )
        .unwrap_or_else(|_| unreachable!("formula feasibility was established"));
        stats.times.extraction += extract_start.elapsed();

        match extraction {
            ExtractOutcome::OutOfBudget(new_cores) => {
                stats.cores_extracted += new_cores.len() as u64;
                hs.add_cores(new_cores.into_iter().map(|c| c.into_constraint()));
                stats.bounds_trajectory.push((bounds.lower(), bounds.upper().unwrap()));
                break;
            }
            ExtractOutcome::Done(out) => {
                let n = out.new_cores.len();
                stats.cores_extracted += n as u64;
                for core in &out.new_cores {
                    debug_assert!(core.is_over_objective_vars(objective));
                    if let Some(collected) = stats.cores.as_mut() {
                        collected.push(core.constraint().clone());
                    }
                }
                hs.add_cores(out.new_cores.into_iter().map(|c| c.into_constraint()));

                let witness_cost = objective.cost(&out.witness).expect("witness is complete");
                if bounds.upper().is_none_or(|ub| witness_cost < ub) {
                    verify_incumbent(&numbered, &out.witness);
                    bounds.improve_upper(witness_cost);
                    incumbent = out.witness;
                    logger.log_solution(&incumbent, witness_cost, numbered.num_vars);
                    on_improvement(witness_cost);
                    hs.set_incumbent(incumbent.project(objective.vars()), witness_cost);
                }
                hs.note_extraction(n, lb_changed);
                stats.bounds_trajectory.push((bounds.lower(), bounds.upper().unwrap()));
                if bounds.closed() {
                    status = SolveStatus::Optimum;
                    break;
                }
            }
        }
    }

    if status == SolveStatus::Optimum && logger.enabled() {
        // Hybrid modes may terminate on a bound whose certificate was
        // skipped (the upper bound dropped onto an uncertified lower
        // bound). One forced certified call closes that gap.
        if lb_proof.is_none() {
            stats.hs_calls += 1;
            let result = hs.solve_hs(
                bounds.lower(),
                bounds.upper().expect("upper bound set"),
                true,
                &mut logger,
            );
            debug_assert_eq!(result.status, HsStatus::Optimal);
            debug_assert_eq!(result.lower_bound_out, bounds.lower());
            lb_proof = result.lb_proof;
        }
        if let (Some(lb_id), Some(bound_id)) = (lb_proof, logger.last_solution_bound()) {
            // Lower bound plus the strict improvement bound of the best
            // logged solution add up to a contradiction.
            logger.log_cutting_planes(&[CpOp::Push(lb_id), CpOp::Push(bound_id), CpOp::Add]);
        }
        logger.log_conclusion(Conclusion::Optimal(bounds.upper().expect("bounds closed")));
    }
    logger.flush();

    // Merge component statistics.
    let hstats = hs.stats;
    stats.certified_minimize_calls = hstats.certified_minimize_calls;
    stats.inexact_minimize_calls = hstats.inexact_minimize_calls;
    stats.sls_calls = hstats.sls_calls;
    stats.sls_improvements = hstats.sls_improvements;
    stats.cg_reformulations = hstats.cg_reformulations;
    stats.discrepancies = hstats.discrepancies;
    stats.reformulation_trace = hs.reformulation_trace.take();
    stats.times.total = start.elapsed();
    if let Some(path) = &cfg.proof_path {
        stats.proof_bytes = std::fs::metadata(path).ok().map(|m| m.len());
    }
    if let Some(err) = logger.io_error() {
        return Err(DriverError::Io(io::Error::new(err.kind(), err.to_string())));
    }
    finish_stats(&mut stats, cfg);

    Ok(RunOutcome {
        status,
        best: Some(incumbent),
        cost: bounds.upper(),
        lower_bound: bounds.lower(),
        stats,
    })
}

/// Intermediate incumbents are re-verified before being reported.
fn verify_incumbent(instance: &Instance, model: &Assignment) {
    for c in &instance.constraints {
        assert!(
            c.evaluate(model).unwrap_or(false),
            "incumbent violates a constraint; refusing to report it"
        );
    }
}

fn finish_stats(stats: &mut RunStats, cfg: &RunConfig) {
    debug_assert!(stats
        .bounds_trajectory
        .windows(2)
        .all(|w| w[0].0.unwrap_or(Int::MIN) <= w[1].0.unwrap_or(Int::MIN) && w[0].1 >= w[1].1));
    if let Some(path) = &cfg.stats_path {
        let _ = std::fs::write(path, render_stats(stats, cfg));
    }
}

fn dump_hs_instance(
    dir: &Path,
    iteration: u64,
    kore: &[PbConstraint],
    objective: &crate::pb::Objective,
) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let num_vars = kore
        .iter()
        .map(|c| c.max_var())
        .chain(std::iter::once(objective.max_var()))
        .max()
        .unwrap_or(0);
    let instance = Instance::new(kore.to_vec(), objective.clone(), num_vars);
    std::fs::write(dir.join(format!("hs-{iteration:06}.opb")), crate::opb::write_opb(&instance))
}

/// Renders run statistics as line-oriented `key=value` text. Timings are
/// included only when the config asks for them, keeping the default output
/// byte-identical across runs with the same seed.
pub fn render_stats(stats: &RunStats, cfg: &RunConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "seed={}", cfg.seed);
    let _ = writeln!(out, "iterations={}", stats.iterations);
    let _ = writeln!(out, "cores_extracted={}", stats.cores_extracted);
    let _ = writeln!(out, "oracle_calls={}", stats.oracle_calls);
    let _ = writeln!(out, "hs_calls={}", stats.hs_calls);
    let _ = writeln!(out, "certified_minimize_calls={}", stats.certified_minimize_calls);
    let _ = writeln!(out, "inexact_minimize_calls={}", stats.inexact_minimize_calls);
    let _ = writeln!(out, "sls_calls={}", stats.sls_calls);
    let _ = writeln!(out, "sls_improvements={}", stats.sls_improvements);
    let _ = writeln!(out, "cg_reformulations={}", stats.cg_reformulations);
    let _ = writeln!(out, "discrepancies={}", stats.discrepancies);
    let mut trajectory = String::new();
    for (lb, ub) in &stats.bounds_trajectory {
        let lb = lb.map_or("-inf".to_string(), |v| v.to_string());
        let _ = write!(trajectory, "({lb},{ub})");
    }
    let _ = writeln!(out, "bounds_trajectory={trajectory}");
    if let Some(bytes) = stats.proof_bytes {
        let _ = writeln!(out, "proof_bytes={bytes}");
    }
    if cfg.emit_timings {
        let _ = writeln!(out, "time_total_s={:.6}", stats.times.total.as_secs_f64());
        let _ = writeln!(out, "time_feasibility_s={:.6}", stats.times.feasibility.as_secs_f64());
        let _ = writeln!(out, "time_hitting_set_s={:.6}", stats.times.hitting_set.as_secs_f64());
        let _ = writeln!(out, "time_extraction_s={:.6}", stats.times.extraction.as_secs_f64());
    }
    out
}

/// One row of a benchmark sweep.
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub instance: String,
    pub config: String,
    pub status: String,
    pub cost: Option<Int>,
    pub wall_time: Duration,
    pub peak_memory_kb: Option<u64>,
    pub iterations: u64,
    pub cores_extracted: u64,
    pub proof_bytes: Option<u64>,
}

#[derive(Clone, Debug, Default)]
pub struct BenchResults {
    pub rows: Vec<BenchRow>,
}

impl BenchResults {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "instance,config,status,cost,time_s,peak_mem_kb,iterations,cores,proof_bytes\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.3},{},{},{},{}",
                r.instance,
                r.config,
                r.status,
                r.cost.map_or(String::new(), |c| c.to_string()),
                r.wall_time.as_secs_f64(),
                r.peak_memory_kb.map_or(String::new(), |m| m.to_string()),
                r.iterations,
                r.cores_extracted,
                r.proof_bytes.map_or(String::new(), |b| b.to_string()),
            );
        }
        out
    }

    /// Plain-text summary: instances solved to a proven result per config.
    pub fn summary(&self) -> String {
        let mut order: Vec<&str> = Vec::new();
        let mut solved: std::collections::BTreeMap<&str, (usize, usize)> = Default::default();
        for r in &self.rows {
            if !order.contains(&r.config.as_str()) {
                order.push(&r.config);
            }
            let entry = solved.entry(&r.config).or_default();
            entry.1 += 1;
            if r.status == "OPTIMUM FOUND" || r.status == "UNSATISFIABLE" {
                entry.0 += 1;
            }
        }
        let mut out = String::new();
        for config in order {
            let (ok, total) = solved[config];
            let _ = writeln!(out, "{config}: solved {ok}/{total}");
        }
        out
    }
}

/// Resident-set estimate for this process in kilobytes, from procfs:
/// the high-water mark when the kernel reports one, the current RSS
/// otherwise.
fn peak_memory_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let mut rss = None;
    for line in status.lines() {
        let value = |rest: &str| rest.trim().trim_end_matches(" kB").trim().parse().ok();
        if let Some(rest) = line.strip_prefix("VmHWM:") {
            return value(rest);
        }
        if let Some(rest) = line.strip_prefix("VmRSS:") {
            rss = value(rest);
        }
    }
    rss
}

/// Runs every configuration against every `.opb` file in a directory.
/// Failures and timeouts become rows; the sweep itself never aborts.
pub fn run_bench(
    dir: &Path,
    configs: &[(String, RunConfig)],
    time_limit: Duration,
) -> io::Result<BenchResults> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "opb"))
        .collect();
    files.sort();

    let mut results = BenchResults::default();
    for file in &files {
        let name = file.file_name().unwrap_or_default().to_string_lossy().to_string();
        let text = std::fs::read_to_string(file)?;
        for (label, base_cfg) in configs {
            let mut cfg = base_cfg.clone();
            cfg.time_limit = Some(time_limit);
            let started = Instant::now();
            let run = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                let instance =
                    crate::opb::parse_opb(&text).map_err(|e| format!("parse error: {e}"))?;
                ihs_solve(&instance, &cfg, |_| {}).map_err(|e| format!("solver error: {e}"))
            }));
            let row = match run {
                Ok(Ok(outcome)) => BenchRow {
                    instance: name.clone(),
                    config: label.clone(),
                    status: outcome.status.as_str().to_string(),
                    cost: outcome.cost,
                    wall_time: started.elapsed(),
                    peak_memory_kb: peak_memory_kb(),
                    iterations: outcome.stats.iterations,
                    cores_extracted: outcome.stats.cores_extracted,
                    proof_bytes: outcome.stats.proof_bytes,
                },
                Ok(Err(message)) => BenchRow {
                    instance: name.clone(),
                    config: label.clone(),
                    status: message,
                    cost: None,
                    wall_time: started.elapsed(),
                    peak_memory_kb: peak_memory_kb(),
                    iterations: 0,
                    cores_extracted: 0,
                    proof_bytes: None,
                },
                Err(_) => BenchRow {
                    instance: name.clone(),
                    config: label.clone(),
                    status: "CRASH".to_string(),
                    cost: None,
                    wall_time: started.elapsed(),
                    peak_memory_kb: peak_memory_kb(),
                    iterations: 0,
                    cores_extracted: 0,
                    proof_bytes: None,
                },
            };
            results.rows.push(row);
        }
    }
    Ok(results)
}

/// Parses a benchmark configuration list: semicolon-separated tokens, each
/// a backend name optionally extended with `+sls`, `+proof`, `+optlb`,
/// `+alllb` or `+forcelb` (for example `cb+sls;sis+optlb+proof`).
pub fn parse_bench_configs(list: &str) -> Result<Vec<(String, RunConfig)>, String> {
    let mut out = Vec::new();
    for token in list.split(";").filter(|t| !t.trim().is_empty()) {
        let token = token.trim();
        let mut parts = token.split('+');
        let backend = parts.next().unwrap();
        let mut cfg = RunConfig { sls: None, ..RunConfig::default() };
        cfg.backend.kind = match backend {
            "sis" => BackendKind::Sis,
            "sis-reified" => BackendKind::SisReified,
            "cg" => BackendKind::Cg,
            "cb" => BackendKind::Cb,
            other => return Err(format!("unknown backend `{other}`")),
        };
        let mut wants_proof = false;
        for part in parts {
            match part {
                "sls" => cfg.sls = Some(SlsConfig::default()),
                "proof" => wants_proof = true,
                "optlb" => cfg.backend.hybrid = HybridMode::OptLb,
                "alllb" => cfg.backend.hybrid = HybridMode::AllLb,
                "forcelb" => cfg.backend.hybrid = HybridMode::ForceLb,
                other => return Err(format!("unknown config flag `{other}`")),
            }
        }
        if wants_proof {
            // Each run writes its proof to a scratch file to measure size.
            cfg.proof_path = Some(scratch_proof_path(token));
        }
        out.push((token.to_string(), cfg));
    }
    if out.is_empty() {
        return Err("no configurations given".to_string());
    }
    Ok(out)
}

fn scratch_proof_path(label: &str) -> PathBuf {
    let sanitized: String =
        label.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '-' }).collect();
    std::env::temp_dir().join(format!("pboihs-bench-{}-{sanitized}.proof", std::process::id()))
}
