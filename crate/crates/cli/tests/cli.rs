//! End-to-end tests of the binary: output format, exit codes, proof
//! checking and the bench sweep.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pboihs")
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pboihs-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

#[test]
fn solve_prints_competition_output_and_exits_zero() {
    let dir = scratch_dir("solve");
    let inst = write(&dir, "a.opb", "min: +1 x1 +2 x2 ;\n+1 x1 +1 x2 >= 1 ;\n");
    let out = run(&[
        "solve",
        inst.to_str().unwrap(),
        "--backend",
        "sis",
        "--seed",
        "3",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("s OPTIMUM FOUND"), "{stdout}");
    assert!(stdout.lines().any(|l| l == "o 1"), "{stdout}");
    assert!(stdout.lines().any(|l| l.starts_with("v ") && l.contains("x1")), "{stdout}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unsatisfiable_instance_exits_zero_with_status_line() {
    let dir = scratch_dir("unsat");
    let inst = write(&dir, "u.opb", "+1 x1 >= 1 ;\n+1 ~x1 >= 1 ;\n");
    let out = run(&["solve", inst.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("s UNSATISFIABLE"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn parse_error_exits_one_with_diagnostic() {
    let dir = scratch_dir("parse");
    let inst = write(&dir, "bad.opb", "+1 x1 >= 1\n");
    let out = run(&["solve", inst.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn proof_emission_and_check_round_trip() {
    let dir = scratch_dir("proof");
    let inst = write(
        &dir,
        "p.opb",
        "min: +2 x1 +3 x2 +1 x3 ;\n+1 x1 +1 x2 >= 1 ;\n+1 x2 +1 x3 >= 1 ;\n",
    );
    let proof = dir.join("p.proof");
    let solve = run(&[
        "solve",
        inst.to_str().unwrap(),
        "--backend",
        "cb",
        "--hybrid",
        "optlb",
        "--proof",
        proof.to_str().unwrap(),
    ]);
    assert_eq!(solve.status.code(), Some(0));

    let check = run(&["check", inst.to_str().unwrap(), proof.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&check.stdout);
    assert_eq!(check.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("ACCEPTED optimal 3"), "{stdout}");

    // A corrupted proof is rejected with a step diagnostic and exit 1.
    let text = std::fs::read_to_string(&proof).unwrap();
    let broken = write(&dir, "broken.proof", &text.replace("conc optimal 3", "conc optimal 2"));
    let check = run(&["check", inst.to_str().unwrap(), broken.to_str().unwrap()]);
    assert_eq!(check.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&check.stdout).contains("REJECTED"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn stats_files_are_identical_for_equal_seeds() {
    let dir = scratch_dir("stats");
    let inst = write(
        &dir,
        "s.opb",
        "min: +2 x1 +3 x2 +1 x3 ;\n+1 x1 +1 x2 >= 1 ;\n+1 x2 +1 x3 >= 1 ;\n+1 x1 +1 x4 >= 1 ;\n",
    );
    let stats_a = dir.join("a.stats");
    let stats_b = dir.join("b.stats");
    for (stats, _) in [(&stats_a, 0), (&stats_b, 1)] {
        let out = run(&[
            "solve",
            inst.to_str().unwrap(),
            "--seed",
            "9",
            "--stats",
            stats.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let a = std::fs::read_to_string(&stats_a).unwrap();
    let b = std::fs::read_to_string(&stats_b).unwrap();
    assert_eq!(a, b, "fixed seed must give byte-identical statistics");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bench_writes_csv_and_summary() {
    let dir = scratch_dir("bench");
    for i in 0..2 {
        write(&dir, &format!("i{i}.opb"), "min: +1 x1 +1 x2 ;\n+1 x1 +1 x2 >= 1 ;\n");
    }
    let csv = dir.join("results.csv");
    let out = run(&[
        "bench",
        dir.to_str().unwrap(),
        "--configs",
        "sis;cb+sls",
        "--time-limit",
        "10",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("sis: solved 2/2"), "{stdout}");
    assert!(stdout.contains("cb+sls: solved 2/2"), "{stdout}");
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().count(), 5, "header plus four rows:\n{table}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn timeout_reports_unknown_or_satisfiable() {
    let dir = scratch_dir("timeout");
    // A feasible instance with a microscopic time limit: the run must not
    // claim optimality and the exit code signals the unproven state.
    let mut text = String::from("min:");
    for v in 1..=40 {
        text.push_str(&format!(" +{} x{v}", 1 + v % 7));
    }
    text.push_str(" ;\n");
    for v in 1..=39 {
        text.push_str(&format!("+1 x{v} +1 x{} >= 1 ;\n", v + 1));
    }
    let inst = write(&dir, "t.opb", &text);
    let out = run(&[
        "solve",
        inst.to_str().unwrap(),
        "--time-limit",
        "0.000001",
    ]);
    let code = out.status.code();
    assert!(code == Some(10) || code == Some(20), "{code:?}");
    std::fs::remove_dir_all(&dir).ok();
}
