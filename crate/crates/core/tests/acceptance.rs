//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! and enforcing its time budget. Run with `cargo test --test acceptance`
//! (add `-- --nocapture` to see the lines).

use relmc_core::verify::{
    criterion_algebra, criterion_expansion, criterion_hopf, criterion_multicategory,
    criterion_ord_fidelity, criterion_tree_combinatorics,
};
use std::time::{Duration, Instant};

const SEED: u64 = 7;

fn run(name: &str, budget: Duration, body: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    match &outcome {
        Ok(detail) => println!("PASS {name} ({elapsed:.2?}): {detail}"),
        Err(detail) => println!("FAIL {name} ({elapsed:.2?}): {detail}"),
    }
    assert!(outcome.is_ok(), "{name}: {}", outcome.unwrap_err());
    assert!(
        elapsed <= budget,
        "{name} exceeded its budget: {elapsed:.2?} > {budget:.2?}"
    );
}

#[test]
fn criterion_1_tree_combinatorics() {
    run("tree-combinatorics", Duration::from_secs(1), || {
        criterion_tree_combinatorics(SEED)
    });
}

#[test]
fn criterion_2_hopf_suite() {
    run("hopf-suite", Duration::from_secs(5), criterion_hopf);
}

#[test]
fn criterion_3_expansion_suite() {
    run("expansion-suite", Duration::from_secs(5), || {
        criterion_expansion(SEED)
    });
}

#[test]
fn criterion_4_multicategory_laws() {
    run("multicategory-laws", Duration::from_secs(30), || {
        criterion_multicategory(SEED)
    });
}

#[test]
fn criterion_5_algebra_suite() {
    run("algebra-suite", Duration::from_secs(60), criterion_algebra);
}

#[test]
fn criterion_6_ord_pullback_fidelity() {
    run("ord-pullback-fidelity", Duration::from_secs(5), || {
        criterion_ord_fidelity()
    });
}
