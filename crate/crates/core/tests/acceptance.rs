//! One PASS/FAIL line per acceptance criterion, then the module groups.
//! Runs the full oracle suite once; exits nonzero when anything fails.

use std::process::ExitCode;

use mpjc::harness::validate;

fn main() -> ExitCode {
    let report = match validate::run(&[], None) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("validation suite failed to start: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!();
    for k in 1..=10 {
        let Some(g) = report.criterion(k) else {
            println!("FAIL criterion {k}: missing from the report");
            continue;
        };
        let failed: Vec<_> = g.checks.iter().filter(|c| !c.passed).collect();
        println!("{} {} [{}/{} checks, {:.1} s]", verdict(g.passed), g.name, g.checks.len() - failed.len(), g.checks.len(), g.seconds);
        if let Some(e) = &g.error {
            println!("     error: {e}");
        }
        for c in failed {
            println!("     {}: measured {:.3e}, bound {:.1e} {}", c.name, c.measured, c.bound, c.detail);
        }
    }
    for g in report.groups.iter().filter(|g| g.criterion.is_none()) {
        let failed = g.checks.iter().filter(|c| !c.passed).count();
        println!("{} module {} [{}/{} checks]", verdict(g.passed), g.name, g.checks.len() - failed, g.checks.len());
        for c in g.checks.iter().filter(|c| !c.passed) {
            println!("     {}: measured {:.3e}, bound {:.1e}", c.name, c.measured, c.bound);
        }
    }
    println!("\n{} of {} checks failed, {:.1} s\n", report.n_failed, report.n_checks, report.seconds);
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
