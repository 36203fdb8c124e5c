//! Runs every acceptance criterion and prints one line per criterion.

use expmap_core::verify::{run_criterion, VerifyReport, CRITERIA};
use expmap_core::Config;

#[test]
fn acceptance() {
    let cfg = Config::default();
    let reports: Vec<_> = (1..=CRITERIA).map(|id| run_criterion(id, &cfg)).collect();
    for r in &reports {
        println!("{}", VerifyReport::line(r));
    }
    let failed: Vec<usize> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
