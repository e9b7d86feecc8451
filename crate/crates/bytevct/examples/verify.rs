//! The randomized differential suites, run as a library call.
//!
//! cargo run --example verify -- 0.2

use bytevct::verify::{run_suite, Suite, VerifyConfig};

fn main() {
    let scale = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let cfg = VerifyConfig { scale, seed: 1, jobs: 2, ..Default::default() };
    let mut ok = true;
    for suite in Suite::ALL {
        let r = run_suite(suite, &cfg);
        println!("{:<10} {:>5} cases {:>3} failures {:.2}s", r.suite, r.cases, r.failures, r.seconds);
        if let Some(f) = &r.first_failure {
            println!("  {f}");
        }
        ok &= r.passed();
    }
    std::process::exit(if ok { 0 } else { 1 });
}
