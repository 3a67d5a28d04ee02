//! A short ingest throughput measurement on a simulated corpus.

use clusterview::bench::{bench_ingest, ThroughputOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let report = bench_ingest(&ThroughputOptions {
        samples: 200_000,
        runs: 3,
        ..Default::default()
    })?;
    for r in &report.runs {
        println!(
            "{:>8} samples in {:.3} s: {:>10.0}/s",
            r.samples, r.secs, r.samples_per_sec
        );
    }
    println!(
        "median {:.0}/s, max deviation {:.1}%",
        report.samples_per_sec, report.max_deviation_pct
    );
    Ok(())
}
