//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use support::*;

fn pipeline_determinism() -> Check {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/config.toml");
    let mut exports = Vec::new();
    for run in ["a", "b"] {
        let ws = tmp.path().join(run);
        let out = Command::new(env!("CARGO_BIN_EXE_lecmine"))
            .arg("run-all")
            .arg("--config")
            .arg(&config)
            .arg("--workspace")
            .arg(&ws)
            .env("RUST_LOG", "error")
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("run {run} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
        }
        let mut files = Vec::new();
        for name in ["corpus.jsonl", "train.jsonl", "test.jsonl"] {
            let bytes = fs::read(ws.join("export").join(name)).map_err(|e| format!("{name}: {e}"))?;
            files.push((name, bytes));
        }
        exports.push(files);
    }
    let pairs = exports[0][0].1.iter().filter(|&&b| b == b'\n').count();
    if pairs == 0 {
        return Err("the fixture produced an empty corpus".into());
    }
    for ((name, a), (_, b)) in exports[0].iter().zip(&exports[1]) {
        if a != b {
            return Err(format!("{name} differs between runs"));
        }
    }
    Ok(format!("two run-all passes give byte-identical corpus/train/test JSONL ({pairs} pairs)"))
}

fn corpus_operations() -> Check {
    let parts = [check_dedup()?, check_pivot_fixture()?, check_holdout()?];
    Ok(parts.join("; "))
}

fn ingest_segment_suite() -> Check {
    let parts = [check_strip_idempotence()?, check_partitions()?, check_guard_tables()?, check_classifier_oracle()?];
    Ok(parts.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 7] = [
        ("DP oracle equivalence", check_oracle_equivalence),
        ("Synthetic alignment recovery", check_planted_recovery),
        ("Coarse-to-fine fidelity", check_coarse_fidelity),
        ("Self-alignment", check_self_alignment),
        ("Pipeline determinism", pipeline_determinism),
        ("Dedup, pivot and holdout", corpus_operations),
        ("Ingest/segment suite", ingest_segment_suite),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name} [{took:.2}s]: {detail}"),
            Err(e) => {
                failed += 1;
                println!("FAIL  {name} [{took:.2}s]: {e}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
