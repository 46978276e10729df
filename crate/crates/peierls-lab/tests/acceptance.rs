//! Acceptance criteria, one line each. Every criterion runs its registered suite(s) with the
//! default configuration and the per-suite seed streams used by the CLI.

use peierls_lab::cli::runner::suite_rng;
use peierls_lab::cli::{run_suite, ExperimentConfig};
use std::time::Instant;

const CRITERIA: &[(u32, &str, &[&str])] = &[
    (1, "green's function fidelity (observed order >= 1.9)", &["greens-dalembert"]),
    (2, "exact discrete causality on 50 random sources", &["support-cones"]),
    (3, "adjointness: C*h^2 discrepancy and exact pairing", &["adjointness"]),
    (4, "resolvent formulas for mass and epsilon families", &["resolvent"]),
    (5, "master identity, free field and epsilon = 0.1", &["master-identity"]),
    (6, "jacobi identity and exact degenerate case", &["jacobi-free-field", "jacobi-epsilon"]),
    (7, "leibniz rule and exp derivation", &["leibniz"]),
    (8, "locality/additivity classifiers, zero misclassifications", &["additivity-locality"]),
    (9, "cone combinatorics and exhaustion", &["cone-counts"]),
    (10, "hyperbolicity domains and symbol-limit probe", &["hyperbolicity-domains"]),
    (11, "bump functional and partition of unity", &["bump-partition"]),
    (12, "support algebra and cutoff-domain case split", &["support-algebra"]),
];

#[test]
fn acceptance_criteria() {
    let cfg = ExperimentConfig::default();
    let mut failed = Vec::new();
    for (id, title, suites) in CRITERIA {
        let start = Instant::now();
        let mut problems = Vec::new();
        for s in *suites {
            let mut rng = suite_rng(cfg.seed, s);
            match run_suite(s, &cfg, &mut rng) {
                Ok(o) => problems.extend(o.failures.iter().map(|f| format!("{s}: {f}"))),
                Err(e) => problems.push(format!("{s}: error {e}")),
            }
        }
        let status = if problems.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {status} {title} ({:.2}s)", start.elapsed().as_secs_f64());
        for p in &problems {
            println!("    {p}");
        }
        if !problems.is_empty() {
            failed.push(*id);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
