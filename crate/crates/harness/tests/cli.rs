//! End-to-end checks of the command-line surface.

use std::path::PathBuf;
use std::process::{Command, Output};

fn dogsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dogsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn temp_path(name: &str) -> PathBuf {
    let mut path = std::env::temp_dir();
    path.push(format!("dogsim-test-{}-{name}", std::process::id()));
    path
}

#[test]
fn sample_bench_reports_empty_rate_near_theory() {
    let out = dogsim(&[
        "sample-bench",
        "--n",
        "3",
        "--alpha",
        "1",
        "--trials",
        "200000",
        "--protocol",
        "pms",
        "--seed",
        "7",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let none_line = stdout
        .lines()
        .find(|line| line.trim_start().starts_with("none"))
        .expect("none row present");
    let empirical: f64 = none_line
        .split_whitespace()
        .nth(2)
        .unwrap()
        .parse()
        .expect("numeric empirical rate");
    assert!((empirical - 0.367879).abs() < 0.01, "empty rate {empirical}");
    assert!(stdout.contains("theory"));
}

#[test]
fn dexp3_bench_passes_and_exits_zero() {
    let out = dogsim(&[
        "dexp3-bench",
        "--n",
        "8",
        "--trials",
        "40000",
        "--rounds",
        "3000",
        "--seed",
        "3",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.matches("PASS").count(), 3, "{stdout}");
}

#[test]
fn invalid_scenario_fails_with_line_diagnostic() {
    let path = temp_path("bad.cfg");
    std::fs::write(&path, "[objective]\nfamily = coverage-grid\nwat = 1\n").unwrap();
    let out = dogsim(&["dog-run", "--scenario", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains(":3"), "diagnostic should carry the line: {stderr}");
    assert!(stderr.contains("wat"), "{stderr}");
    std::fs::remove_file(&path).ok();
}

#[test]
fn dog_run_writes_reproducible_csv() {
    let scenario = temp_path("conv.cfg");
    std::fs::write(
        &scenario,
        "[objective]\nfamily = coverage-grid\nsensors = 10\ngrid = 4\nradius = 0.3\nseed = 4\n\n\
         [run]\nmode = dog\nk = 2\nrounds = 40\ntrials = 2\nseed = 50\n",
    )
    .unwrap();
    let csv_a = temp_path("a.csv");
    let csv_b = temp_path("b.csv");
    for (csv, _) in [(&csv_a, 0), (&csv_b, 1)] {
        let out = dogsim(&[
            "dog-run",
            "--scenario",
            scenario.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(&csv_a).unwrap();
    let b = std::fs::read(&csv_b).unwrap();
    assert_eq!(a, b, "identical scenario and seed must give identical bytes");
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("trial,round,avg_reward,greedy_ratio,messages_cum,activations_cum,regret_avg\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 40);
    for p in [scenario, csv_a, csv_b] {
        std::fs::remove_file(p).ok();
    }
}

#[test]
fn greedy_listing_is_deterministic() {
    let scenario = temp_path("tiny.cfg");
    std::fs::write(
        &scenario,
        "[objective]\nfamily = coverage-grid\nsensors = 8\ngrid = 3\nradius = 0.35\nseed = 2\n\n\
         [run]\nmode = dog\nk = 2\nrounds = 10\ntrials = 1\nseed = 1\n",
    )
    .unwrap();
    let out1 = dogsim(&["greedy", "--scenario", scenario.to_str().unwrap()]);
    let out2 = dogsim(&["greedy", "--scenario", scenario.to_str().unwrap()]);
    assert!(out1.status.success());
    assert_eq!(out1.stdout, out2.stdout);
    let stdout = String::from_utf8(out1.stdout).unwrap();
    assert!(stdout.contains("greedy selection"), "{stdout}");
    assert!(stdout.contains("brute-force optimum"), "{stdout}");
    std::fs::remove_file(scenario).ok();
}

#[test]
fn verify_subcommand_exits_zero() {
    let out = dogsim(&["verify", "--seed", "11"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("all checks passed"));
    assert!(!stdout.contains("FAILED"));
}

#[test]
fn seed_env_var_sets_the_default() {
    let out_a = Command::new(env!("CARGO_BIN_EXE_dogsim"))
        .args(["sample-bench", "--n", "3", "--trials", "1000", "--protocol", "pms"])
        .env("DOGSIM_SEED", "123")
        .output()
        .unwrap();
    let out_b = dogsim(&[
        "sample-bench",
        "--n",
        "3",
        "--trials",
        "1000",
        "--protocol",
        "pms",
        "--seed",
        "123",
    ]);
    assert_eq!(out_a.stdout, out_b.stdout);
}
