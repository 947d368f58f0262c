//! Acceptance run: each criterion at full size, then the full self-check with
//! its overall time limit. Prints one line per criterion.

use std::time::Instant;

use hessval::mc::DEFAULT_SEED;
use hessval::selfcheck::{run_criterion, run_suite, Check, Suite, CRITERIA};

fn report(c: &Check) -> bool {
    let in_budget = c.budget.is_none_or(|b| c.seconds < b);
    let ok = c.passed && in_budget;
    let budget = c.budget.map(|b| format!(" (budget {b:.0} s)")).unwrap_or_default();
    println!(
        "criterion {}: {} [{}] residual {:.3e} tol {:.1e}, {:.2} s{}{}",
        c.criterion,
        if ok { "PASS" } else { "FAIL" },
        c.name,
        c.residual,
        c.tolerance,
        c.seconds,
        budget,
        if c.detail.is_empty() { String::new() } else { format!(" worst: {}", c.detail) },
    );
    ok
}

#[test]
fn acceptance_criteria() {
    let mut failed = Vec::new();
    for (k, _) in CRITERIA {
        let c = run_criterion(k, Suite::Full, DEFAULT_SEED);
        if !report(&c) {
            failed.push(k);
        }
    }
    let start = Instant::now();
    let all = run_suite(Suite::Full, DEFAULT_SEED);
    let secs = start.elapsed().as_secs_f64();
    let suite_ok = all.iter().all(|c| c.passed) && secs < 600.0;
    println!(
        "full selfcheck: {} ({} of {} checks passed, {:.1} s of 600 s)",
        if suite_ok { "PASS" } else { "FAIL" },
        all.iter().filter(|c| c.passed).count(),
        all.len(),
        secs
    );
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
    assert!(suite_ok);
}
