//! Acceptance suite at desk scale: one line per criterion, then the individual checks.
//!
//! Exits nonzero when a check fails, except for the deviations listed in
//! `KNOWN_DEVIATIONS`, which are still printed as FAIL.

use std::process::ExitCode;
use std::time::Instant;

use lagrange_core::grid::SpectralGrid;
use lagrange_core::validation::{run_suite, Status, SuiteConfig};

/// Checks that fail at desk scale for reasons analysed outside the test suite.
const KNOWN_DEVIATIONS: &[(usize, &str)] = &[(11, "analyticity_decay")];

fn main() -> ExitCode {
    let cfg = SuiteConfig::desk();
    let grid = SpectralGrid::new(cfg.grid).expect("desk grid");
    let start = Instant::now();
    let mut unexpected = Vec::new();
    let mut known = Vec::new();
    let criteria = run_suite(&grid, &cfg, |c| {
        println!("{}", c.line());
        for check in &c.checks {
            println!("      {check}");
        }
    });
    for c in &criteria {
        for check in &c.checks {
            if check.status != Status::Pass {
                let tag = format!("{}:{}", c.id, check.key);
                if KNOWN_DEVIATIONS.contains(&(c.id, check.key.as_str())) {
                    known.push(tag);
                } else {
                    unexpected.push(tag);
                }
            }
        }
    }
    let passed = criteria.iter().filter(|c| c.passed()).count();
    println!(
        "acceptance: {passed}/{} criteria passed in {:.1}s",
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if !known.is_empty() {
        println!("known deviations: {}", known.join(", "));
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {}", unexpected.join(", "));
        ExitCode::FAILURE
    }
}
