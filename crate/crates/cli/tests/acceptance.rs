//! Acceptance run: every check suite plus the binary-level contract.
//! Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use circuitlab::verify::SUITES;

const BIN: &str = env!("CARGO_BIN_EXE_circuitlab");

fn sha_lines(dir: &Path) -> Vec<(String, String)> {
    let text = std::fs::read_to_string(dir.join("manifest.json")).expect("manifest written");
    let m: serde_json::Value = serde_json::from_str(&text).expect("manifest is JSON");
    m["outputs"]
        .as_array()
        .expect("outputs listed")
        .iter()
        .map(|o| (o["file"].as_str().unwrap().to_string(), o["sha256"].as_str().unwrap().to_string()))
        .collect()
}

/// Same scenario through the binary with 1 and 3 worker threads.
fn binary_determinism(tmp: &Path) -> Result<String, String> {
    let cfg = tmp.join("goodwin.json");
    std::fs::write(&cfg, r#"{"model": "goodwin", "parameters": {"figure": 3}, "run": {"paths": 48, "horizon": 10}}"#)
        .map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.join(format!("threads_{threads}"));
        let status = Command::new(BIN)
            .args(["run", cfg.to_str().unwrap(), "--seed", "7", "--out", out.to_str().unwrap()])
            .env("RAYON_NUM_THREADS", threads)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("run with {threads} threads exited with {status}"));
        }
        runs.push(out);
    }
    let (a, b) = (sha_lines(&runs[0]), sha_lines(&runs[1]));
    if a != b {
        return Err("manifest checksums differ".into());
    }
    for (file, _) in a.iter().filter(|(f, _)| f.ends_with(".csv")) {
        let x = std::fs::read(runs[0].join(file)).map_err(|e| e.to_string())?;
        let y = std::fs::read(runs[1].join(file)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{file} differs"));
        }
    }
    Ok(format!("{} files identical", a.len()))
}

fn unknown_key(tmp: &Path) -> Result<String, String> {
    let cfg = tmp.join("bad.json");
    std::fs::write(&cfg, r#"{"model": "keen", "parameters": {"params": {"nu_ff": 3.0}}}"#).map_err(|e| e.to_string())?;
    let out = Command::new(BIN).args(["run", cfg.to_str().unwrap()]).output().map_err(|e| e.to_string())?;
    let stderr = String::from_utf8_lossy(&out.stderr);
    match out.status.code() {
        Some(2) if stderr.contains("parameters.params.nu_ff") => Ok("exit 2, key named".into()),
        code => Err(format!("exit {code:?}, stderr {stderr}")),
    }
}

fn main() {
    let mut failed = 0;
    for suite in SUITES {
        let r = suite.run();
        let status = if r.pass() { "PASS" } else { "FAIL" };
        println!(
            "{status} criterion {:>2} {:<20} {:>3} checks, {} failed, {:.2} s (budget {:.0} s)",
            r.criterion,
            r.suite,
            r.checks.len(),
            r.failures(),
            r.seconds,
            r.budget_seconds
        );
        if !r.pass() {
            failed += 1;
            print!("{}", r.table());
        }
    }

    let tmp = tempfile::tempdir().expect("temp dir");
    let checks: [(&str, fn(&Path) -> Result<String, String>); 2] =
        [("binary determinism across thread counts", binary_determinism), ("unknown config key rejected", unknown_key)];
    for (name, f) in checks {
        let t = Instant::now();
        match f(tmp.path()) {
            Ok(msg) => println!("PASS {name}: {msg} ({:.2} s)", t.elapsed().as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
