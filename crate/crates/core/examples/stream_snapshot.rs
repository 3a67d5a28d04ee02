//! Serve on a loopback port, push simulated ticks, and rebuild the cluster
//! state from the NDJSON stream alone.

use std::sync::Arc;

use clusterview::client::Client;
use clusterview::service::{spawn_server, EventPayload, Service, ServiceConfig};
use clusterview::sim::{Scenario, ScenarioKind, SimConfig, Simulator, TopologySpec};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let topology = TopologySpec::uniform(1, 6, "xeon-p8260", 5);
    let svc = Arc::new(Service::new(ServiceConfig {
        topology: topology.clone(),
        cadence_ms: 3_600_000,
        ..Default::default()
    })?);
    let server = spawn_server(svc.clone(), "127.0.0.1:0", None).await?;
    let client = Client::new(server.url());
    println!("serving on {}", server.url());

    let mut stream = client.stream().await?;
    let first = stream.next_event().await?.ok_or("stream closed")?;
    let EventPayload::Snapshot(base) = &first.payload else {
        return Err("expected a snapshot first".into());
    };
    let mut state = (**base).clone();

    let mut sim = Simulator::new(SimConfig {
        topology,
        ..Default::default()
    })?;
    sim.inject(Scenario::new(ScenarioKind::DiskFill, ["n004"]).starting(2))?;
    let mut last_seq = state.seq;
    for _ in 0..4 {
        let t = sim.step();
        client.push_tick(&t).await?;
        last_seq = svc.evaluation_tick(t.timestamp).0.seq;
    }
    while state.seq < last_seq {
        let ev = stream.next_event().await?.ok_or("stream closed")?;
        println!("seq {:>2} {}", ev.seq, ev.kind());
        state.apply(&ev)?;
    }
    let served = client.snapshot().await?;
    println!(
        "replayed state matches GET /snapshot: {}",
        state.canonical_json() == served.canonical_json()
    );
    println!("n004 alerts: {:?}", state.node("n004").map(|n| n.alert_kinds()));
    drop(stream);
    server.stop().await;
    Ok(())
}
