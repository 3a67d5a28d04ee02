//! Simulate the metadata-storm investigation and run the open-rate query
//! that singles out the offending job.

use clusterview::sim::{storm_investigation, storm_query_now, Simulator, STORM_QUERY, STORM_TICKS};
use clusterview::tsq::{run_query, Store};
use clusterview::wire::parse_batch;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (cfg, scenarios) = storm_investigation(1);
    let mut sim = Simulator::new(cfg)?;
    for s in scenarios {
        sim.inject(s)?;
    }
    let mut store = Store::new();
    for _ in 0..STORM_TICKS {
        store.insert_all(&parse_batch(&sim.step().telemetry, 0).samples);
    }
    println!("{STORM_QUERY}\n");
    let started = std::time::Instant::now();
    let rs = run_query(&store, STORM_QUERY, storm_query_now())?;
    print!("{}", rs.to_table());
    println!("\n{} rows in {:?}", rs.rows.len(), started.elapsed());
    Ok(())
}
