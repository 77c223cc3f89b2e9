//! Differential soak harness: random instances across coefficient shapes,
//! round-tripped through the text format, solved under rotating backend and
//! hybrid configurations, with every result checked against enumeration and
//! every proof replayed. Heavier than the test suites; run manually.
use pboihs::certify::{check_text, CheckVerdict};
use pboihs::driver::{ihs_solve, RunConfig};
use pboihs::exhaustive::brute_force_optimum;
use pboihs::families::{random_instance, RandomShape};
use pboihs::hs::{BackendConfig, BackendKind, HybridMode};
use pboihs::opb::{parse_opb, write_opb};
use std::io::Write;

fn main() {
    let kinds = [BackendKind::Sis, BackendKind::SisReified, BackendKind::Cg, BackendKind::Cb];
    let hybrids = [HybridMode::None, HybridMode::OptLb, HybridMode::AllLb, HybridMode::ForceLb];
    let shapes = [
        RandomShape::default(),
        RandomShape { max_vars: 10, max_constraints: 12, max_coefficient: 1_000_000, max_weight: 1_000_000_000 },
        RandomShape { max_vars: 14, max_constraints: 18, max_coefficient: 3, max_weight: 2 },
    ];
    let mut failures = 0u64;
    let mut runs = 0u64;
    for (si, shape) in shapes.iter().enumerate() {
        for seed in 0..1200u64 {
            let instance = random_instance(seed * 7 + si as u64 * 1_000_000, shape);
            let brute = brute_force_optimum(&instance.constraints, &instance.objective).unwrap();
            // round-trip through the text format
            let reparsed = parse_opb(&write_opb(&instance)).expect("own output parses");
            let kind = kinds[(seed % 4) as usize];
            let hybrid = hybrids[((seed / 4) % 4) as usize];
            let path = std::env::temp_dir().join(format!("deep-{si}-{seed}.proof"));
            let cfg = RunConfig {
                backend: BackendConfig { kind, hybrid, ..Default::default() },
                sls: (seed % 3 != 2).then(Default::default),
                proof_path: Some(path.clone()),
                seed,
                ..Default::default()
            };
            let out = ihs_solve(&reparsed, &cfg, |_| {}).unwrap();
            let proof = std::fs::read_to_string(&path).unwrap();
            let verdict = check_text(&reparsed, &proof);
            runs += 1;
            let ok = match (&brute, &verdict) {
                (Some((c, _)), Ok(CheckVerdict::Optimal(pc))) => out.cost == Some(*c) && pc == c,
                (None, Ok(CheckVerdict::Infeasible)) => true,
                _ => false,
            };
            if !ok {
                failures += 1;
                println!(
                    "FAIL shape{si} seed={seed} {kind:?} {hybrid:?}: brute={:?} solver={:?} verdict={:?}",
                    brute.as_ref().map(|x| x.0), out.cost, verdict
                );
            }
            let _ = std::fs::remove_file(&path);
        }
        println!("shape {si} done");
        std::io::stdout().flush().unwrap();
    }
    println!("{runs} runs, {failures} failures");
}
