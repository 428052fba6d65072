//! All acceptance criteria with their pinned tolerances. Prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::process::ExitCode;

use uds::harness::acceptance::run_acceptance_with;
use uds::harness::AcceptanceOptions;

fn main() -> ExitCode {
    // `cargo test -- --list` and name filters come from the libtest
    // protocol; this target has a single implicit test.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let report = run_acceptance_with(&AcceptanceOptions::default(), |r| println!("{}", r.line()));
    let passed = report.results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria passed", report.results.len());
    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
