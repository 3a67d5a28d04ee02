//! Drive the simulator with a small scripted fault and show what the
//! telemetry looks like on the affected node.

use clusterview::sim::{Scenario, ScenarioKind, SimConfig, Simulator, TopologySpec};
use clusterview::wire::parse_batch;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut sim = Simulator::new(SimConfig {
        topology: TopologySpec::uniform(2, 4, "xeon-p8260", 3),
        ..Default::default()
    })?;
    sim.inject(Scenario::new(ScenarioKind::Overheat, ["n002"]).starting(3).stopping(6))?;
    sim.inject(Scenario::new(ScenarioKind::NodeDown, ["n007"]).starting(4).stopping(5))?;

    for _ in 0..8 {
        let t = sim.step();
        let samples = parse_batch(&t.telemetry, 0).samples;
        let temp = samples
            .iter()
            .find(|s| s.measurement == "env" && s.host() == Some("n002"))
            .and_then(|s| s.fields.get("temp_c")?.as_f64());
        let n007 = samples.iter().any(|s| s.host() == Some("n007"));
        println!(
            "tick {:>2}: {:>3} lines, {:>4} points, {} job events, n002 temp {:>6.2?}, n007 reporting {}",
            t.tick,
            t.stats.lines,
            t.stats.field_points,
            t.job_events.len(),
            temp,
            n007
        );
    }
    println!("totals {:?}", sim.totals());
    Ok(())
}
