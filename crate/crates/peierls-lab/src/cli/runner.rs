//! Runs selected suites and writes one versioned JSON envelope per suite.

use super::config::{ConfigError, ExperimentConfig};
use super::suites::{run_suite, SuiteOutcome, SUITES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub suites: Vec<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Per-suite generator: master seed with the registry index as stream.
pub fn suite_rng(master: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    let index = SUITES.iter().position(|(n, _)| *n == name).unwrap_or(SUITES.len());
    rng.set_stream(index as u64);
    rng
}

#[derive(Debug)]
pub struct SuiteRecord {
    pub name: String,
    pub status: &'static str,
    pub failures: Vec<String>,
    pub seconds: f64,
    pub envelope: Value,
}

/// Run one suite and build its envelope.
pub fn execute(name: &str, cfg: &ExperimentConfig) -> (SuiteRecord, Vec<(String, String)>) {
    let mut rng = suite_rng(cfg.seed, name);
    let start = Instant::now();
    let result = run_suite(name, cfg, &mut rng);
    let seconds = start.elapsed().as_secs_f64();
    let (status, outcome) = match result {
        Ok(o) if o.passed() => ("pass", o),
        Ok(o) => ("fail", o),
        Err(e) => {
            let o = SuiteOutcome { failures: vec![format!("{name}.error: {e}")], ..Default::default() };
            ("error", o)
        }
    };
    let envelope = json!({
        "schema_version": SCHEMA_VERSION,
        "suite": name,
        "status": status,
        "checks": outcome.checks,
        "residuals": outcome.residuals,
        "details": outcome.details,
        "failures": outcome.failures,
        "timings": {"seconds": seconds},
        "config": cfg,
        "seed": {"master": cfg.seed, "stream": SUITES.iter().position(|(n, _)| *n == name)},
    });
    let record = SuiteRecord { name: name.to_string(), status, failures: outcome.failures.clone(), seconds, envelope };
    (record, outcome.csv)
}

fn write_outputs(dir: &Path, rec: &SuiteRecord, csv: &[(String, String)], want_csv: bool) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(&rec.envelope).expect("envelope serializes");
    std::fs::write(dir.join(format!("{}.json", rec.name)), text + "\n")?;
    if want_csv {
        for (file, body) in csv {
            std::fs::write(dir.join(file), body)?;
        }
    }
    Ok(())
}

/// Load, validate, run and report. Returns the process exit code: 0 all pass, 1 a suite
/// failed, 2 configuration or usage error (nothing written).
pub fn run(opts: &RunOptions) -> i32 {
    let mut cfg = match ExperimentConfig::load(&opts.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {}: {e}", opts.config.display());
            return 2;
        }
    };
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    let selected: Vec<String> = if !opts.suites.is_empty() {
        opts.suites.clone()
    } else if !cfg.suites.is_empty() {
        cfg.suites.clone()
    } else {
        SUITES.iter().map(|(n, _)| n.to_string()).collect()
    };
    if let Some(bad) = selected.iter().find(|s| !SUITES.iter().any(|(n, _)| n == s)) {
        eprintln!("config error: {}", ConfigError::Invalid(format!("unknown suite '{bad}'")));
        return 2;
    }
    let dir = opts.out.clone().or_else(|| cfg.output.dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| "results".into());
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("cannot create {}: {e}", dir.display());
        return 2;
    }
    let mut failed = false;
    for name in &selected {
        let (rec, csv) = execute(name, &cfg);
        if let Err(e) = write_outputs(&dir, &rec, &csv, cfg.output.csv) {
            eprintln!("cannot write results for {name}: {e}");
            return 2;
        }
        println!("{:<24} {:<5} {:>8.2}s", rec.name, rec.status, rec.seconds);
        for f in &rec.failures {
            eprintln!("  FAILED {f}");
        }
        failed |= rec.status != "pass";
    }
    i32::from(failed)
}

pub fn list() -> String {
    SUITES.iter().map(|(n, d)| format!("{n:<24} {d}\n")).collect()
}
