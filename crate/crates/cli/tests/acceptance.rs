//! Runs the full acceptance suite and prints one line per criterion.
//! Artifacts go to a temporary directory; the process fails if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use subdiff_cli::{scan_pool, verify};

fn main() -> ExitCode {
    let start = Instant::now();
    let dir = tempfile::tempdir().expect("temporary artifact directory");
    let pool = scan_pool().expect("thread pool");
    let report = verify::run_suite(dir.path(), &pool).expect("suite artifacts written");
    println!();
    println!("running {} acceptance criteria", report.outcomes.len());
    for o in &report.outcomes {
        println!("{}", o.line());
        for rec in o.failure_records() {
            println!("    {rec}");
        }
    }
    let failed = report.outcomes.iter().filter(|o| !o.passed()).count();
    println!(
        "acceptance: {} passed; {failed} failed; finished in {:.1}s",
        report.outcomes.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
