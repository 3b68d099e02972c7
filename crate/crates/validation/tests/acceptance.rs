//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fail.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use nvcavity_validation::{criteria, determinism};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.len() == 5 && args[1] == determinism::CHILD_ARG {
        return determinism::run_child(&args[2], Path::new(&args[3]), Path::new(&args[4]));
    }

    let all = criteria();
    let mut failed = Vec::new();
    for c in &all {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_time = c.limit.is_none_or(|l| elapsed <= l);
        let pass = outcome.pass && in_time;
        let limit = c.limit.map(|l| format!(" (limit {} s)", l.as_secs())).unwrap_or_default();
        println!(
            "{} criterion {:>2} {}: {} [{:.2} s{limit}]",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            outcome.detail,
            elapsed.as_secs_f64()
        );
        if !in_time {
            println!("       over the runtime limit");
        }
        for n in &outcome.notes {
            println!("       {n}");
        }
        if !pass {
            failed.push(c.id);
        }
    }
    println!("{} of {} criteria passed", all.len() - failed.len(), all.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
