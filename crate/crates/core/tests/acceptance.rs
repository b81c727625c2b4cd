//! Runs the ten acceptance criteria at the default configuration and prints one
//! line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use padyn_core::padic::Config;
use padyn_core::verify::{run, CRITERIA};

fn main() -> ExitCode {
    let config = Config::default();
    let mut failed = 0;
    for (id, name) in CRITERIA {
        let start = Instant::now();
        let secs = || start.elapsed().as_secs_f64();
        match run(id, &config) {
            Ok(r) if r.passed => {
                println!(
                    "criterion {id:>2} PASS  {name} ({} checks, {:.1}s)",
                    r.checks,
                    secs()
                )
            }
            Ok(r) => {
                failed += 1;
                println!(
                    "criterion {id:>2} FAIL  {name} ({:.1}s): {}",
                    secs(),
                    r.detail
                );
            }
            Err(e) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name} ({:.1}s): {e}", secs());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
