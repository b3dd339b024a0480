//! The acceptance criteria at full size, one line per criterion.
//!
//! Runs without the libtest harness so the table prints as the checks finish.

use std::process::ExitCode;

use krylov_cd::runner::verify::{format_line, run_check, Faults, Suite};

const CRITERIA: std::ops::RangeInclusive<usize> = 1..=11;

fn main() -> ExitCode {
    let mut failed = 0;
    for id in CRITERIA {
        let result = run_check(id, Suite::Full, &Faults::default(), 1);
        println!("{}", format_line(&result));
        if !result.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} criteria, {failed} failed", CRITERIA.count());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
