//! Acceptance battery: every release-gating check, one test per criterion,
//! printing one pass/fail line per criterion (visible with `--nocapture`).
//!
//! Monte Carlo checks run at 10^5 samples with fixed seeds and thresholds at
//! roughly the 99.9th percentile of the null, so the battery is deterministic
//! and reliable. Exact identities are checked at the tolerances carried by
//! their closed forms.

use gwprune::verify::{run_suite, SuiteOptions, DEFAULT_SEED};

fn options() -> SuiteOptions {
    SuiteOptions {
        seed: DEFAULT_SEED,
        threads: std::thread::available_parallelism()
            .map(|n| n.get().min(4))
            .unwrap_or(1),
        dist: None,
    }
}

fn check(criterion: &str, suite: &str) {
    let reports = run_suite(suite, &options()).expect("suite runs");
    let mut all_pass = true;
    for r in &reports {
        println!(
            "    {} {}: statistic {:.6e} vs threshold {:.6e}{}",
            if r.pass { "ok  " } else { "FAIL" },
            r.name,
            r.statistic,
            r.threshold,
            if r.notes.is_empty() {
                String::new()
            } else {
                format!(" ({})", r.notes)
            },
        );
        all_pass &= r.pass;
    }
    println!(
        "[{}] {criterion}: suite `{suite}`",
        if all_pass { "PASS" } else { "FAIL" }
    );
    assert!(all_pass, "{criterion} failed; see report lines above");
}

#[test]
fn criterion_01_binary_closed_forms() {
    check("criterion 1", "binary-closed-forms");
}

#[test]
fn criterion_02_geometric_closed_forms() {
    check("criterion 2", "geometric-closed-forms");
}

#[test]
fn criterion_03_conjugate_duality() {
    check("criterion 3", "duality");
}

#[test]
fn criterion_04_pruning_matches_distribution() {
    check("criterion 4", "pruning");
}

#[test]
fn criterion_05_kernel_consistency() {
    check("criterion 5", "kernel");
}

#[test]
fn criterion_06_martingale() {
    check("criterion 6", "martingale");
}

#[test]
fn criterion_07_kesten_and_gstar() {
    check("criterion 7", "kesten");
}

#[test]
fn criterion_08_ascension_time() {
    check("criterion 8", "ascension-time");
}

#[test]
fn criterion_09_pre_ascension_tree() {
    check("criterion 9", "pre-ascension");
}

#[test]
fn criterion_10_representation() {
    check("criterion 10", "representation");
}

#[test]
fn criterion_11_leaf_conditioning() {
    check("criterion 11", "leaf-conditioning");
}

#[test]
fn criterion_12_oracle_self_checks() {
    check("criterion 12", "oracle");
}
