//! Acceptance criteria 1–9, exact arithmetic throughout. One line per
//! criterion goes to stderr whether or not the test harness captures.

use std::io::Write;
use std::time::Instant;

use dyntwist::suite::{run_criterion, Verdict};

const SEED: u64 = 20240611;

#[test]
fn acceptance_criteria() {
    let results: Vec<(Verdict, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = (1..=9u8)
            .map(|id| {
                s.spawn(move || {
                    let t = Instant::now();
                    let v = run_criterion(id, SEED);
                    (v, t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion thread panicked")).collect()
    });
    let mut err = std::io::stderr().lock();
    for (v, secs) in &results {
        writeln!(err, "{v} ({secs:.1} s)").unwrap();
    }
    let failed: Vec<u8> = results.iter().filter(|(v, _)| !v.passed).map(|(v, _)| v.criterion).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
