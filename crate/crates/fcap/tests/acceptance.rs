//! Acceptance criteria at desk resolution. Prints one PASS/FAIL line per
//! criterion, then fails if any criterion failed.

use std::time::Instant;

use fcap::analysis::suite::{Suite, Tier, CRITERIA};
use fcap::analysis::Verdict;

/// Wall-clock budgets in seconds, single-threaded. Solves shared between
/// criteria are charged to the first criterion that needs them.
const BUDGETS: [f64; 10] = [
    300.0, 300.0, 600.0, 600.0, 1200.0, 1200.0, 600.0, 300.0, 120.0, 30.0,
];

#[test]
fn acceptance_criteria() {
    let mut suite = Suite::new(Tier::Desk, 0, Some(1));
    let mut failed = Vec::new();
    for (k, name) in CRITERIA.iter().enumerate() {
        let start = Instant::now();
        let outcome = suite.criterion(k + 1);
        let secs = start.elapsed().as_secs_f64();
        let over_budget = secs > BUDGETS[k];
        let line = match &outcome {
            Ok(rep) if rep.verdict == Verdict::Consistent && !over_budget => {
                format!("PASS {}", rep.measured["summary"])
            }
            Ok(rep) if over_budget => format!(
                "FAIL over budget ({:.0} s) {}",
                BUDGETS[k], rep.measured["summary"]
            ),
            Ok(rep) => format!("FAIL {}", rep.measured["summary"]),
            Err(e) => format!("FAIL error: {e}"),
        };
        println!("criterion {:2} {name}: {line} [{secs:.1} s]", k + 1);
        if !line.starts_with("PASS") {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
