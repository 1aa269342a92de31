//! One pass/fail line per acceptance criterion, starting from the presets.

use thzsim::config::Config;
use thzsim_cli::checks::{run_all, CheckOptions};

#[test]
fn acceptance() {
    let opts = CheckOptions::new(Config::default(), 2024, 1);
    let lines = run_all(&opts, |l| println!("{l}")).expect("checks run");
    let failed: Vec<String> = lines.iter().filter(|l| !l.pass).map(|l| l.to_string()).collect();
    println!("{} of {} checks passed", lines.len() - failed.len(), lines.len());
    assert!(failed.is_empty(), "failed:\n{}", failed.join("\n"));
}
