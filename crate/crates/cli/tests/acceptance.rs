//! Runs every acceptance criterion in order and prints one PASS/FAIL line each.

use std::process::ExitCode;
use std::time::Instant;

use mwip_cli::acceptance::criteria;

fn main() -> ExitCode {
    // `cargo test -- --list` and friends pass arguments; nothing to list here.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    // Bare numbers select criteria, e.g. `cargo test --test acceptance -- 4 8`.
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let start = Instant::now();
    let mut failed = 0;
    let all: Vec<_> = criteria().into_iter().filter(|c| only.is_empty() || only.contains(&c.id)).collect();
    for c in &all {
        let o = c.run();
        println!("{}", o.line());
        if !o.pass {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1} s",
        all.len() - failed,
        all.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
