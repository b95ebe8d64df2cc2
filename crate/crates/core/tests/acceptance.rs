//! Runs every acceptance criterion and prints one PASS/FAIL line each.
//!
//! Exits nonzero when a criterion fails, except for known gaps, which still
//! print FAIL along with the reason.

use std::process::ExitCode;

use ogd_poison::verify::{
    check_forced_error, check_gaussian_trend, check_intermediate_cases, check_mistake_bound,
    check_properties, check_rate_bound, check_regime_consistency, known_gap, CheckResult,
};

type Check = (&'static str, fn() -> CheckResult);

fn main() -> ExitCode {
    let checks: Vec<Check> = vec![
        ("1", check_intermediate_cases),
        ("2", || check_rate_bound(100)),
        ("3", || check_mistake_bound(1000)),
        ("4", || check_forced_error(20)),
        ("5", check_regime_consistency),
        ("6", check_gaussian_trend),
        ("7", check_properties),
    ];
    let mut unexpected = 0;
    for (id, check) in checks {
        let r = check();
        println!("[{id}] {}", r.line());
        match (r.passed, known_gap(&r.name)) {
            (false, Some(why)) => println!("[{id}] known gap: {why}"),
            (false, None) => unexpected += 1,
            (true, Some(_)) => println!("[{id}] note: listed as a known gap but passed"),
            (true, None) => {}
        }
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
