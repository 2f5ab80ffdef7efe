//! Acceptance suite: one pass/fail line per criterion.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use fou2_core::verify::{self, CheckOutcome, Tier};

const SEED: u64 = 2024;

fn simulate_once(dir: &Path, threads: usize) -> (Vec<u8>, Vec<u8>) {
    let config = dir.join("config.json");
    std::fs::write(
        &config,
        r#"{"schema_version": 1, "params": {"alpha": 0.8, "gamma": 0.9, "lambda": 0.7},
            "simulate": {"dt": 0.002, "n_steps": 500, "n_paths": 2000, "seed": 11}}"#,
    )
    .unwrap();
    let out = dir.join(format!("t{threads}"));
    let status = Command::new(env!("CARGO_BIN_EXE_fou2"))
        .args(["simulate", "--threads", &threads.to_string(), "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .expect("fou2 runs");
    assert!(status.success(), "fou2 simulate failed with {status}");
    let bin = std::fs::read(out.join("ensemble.bin")).unwrap();
    let summary = std::fs::read(out.join("summary.json")).unwrap();
    std::fs::remove_dir_all(&out).unwrap();
    (bin, summary)
}

fn check_determinism() -> CheckOutcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let reference = simulate_once(dir.path(), 1);
    let mut mismatches = 0;
    let mut runs = 0;
    for threads in [1, 4, 8, 4] {
        runs += 1;
        if simulate_once(dir.path(), threads) != reference {
            mismatches += 1;
        }
    }
    CheckOutcome {
        id: 10,
        name: "determinism (runs, threads)",
        measured: mismatches as f64,
        tolerance: 0.0,
        pass: mismatches == 0,
        detail: format!("{runs} reruns at 1/4/8/4 threads vs 1 thread, {} byte ensemble", reference.0.len()),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn main() {
    // Respect the harness filter argument so `cargo test <name>` skips this.
    if let Some(filter) = std::env::args().skip(1).find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }
    let mut all = match verify::run_all(Tier::Full, SEED) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("acceptance: evaluation error: {e}");
            std::process::exit(1);
        }
    };
    all.push(check_determinism());
    for c in &all {
        println!("{c}");
    }
    let failed = all.iter().filter(|c| !c.pass).count();
    println!("acceptance: {} passed, {failed} failed", all.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
