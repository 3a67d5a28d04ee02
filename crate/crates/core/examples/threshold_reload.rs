//! Change thresholds on a running service and watch a node's state follow.

use clusterview::service::{Service, ServiceConfig};
use clusterview::sim::TopologySpec;

const T0: i64 = 1_623_337_200_000_000_000;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let svc = Service::new(ServiceConfig {
        topology: TopologySpec::uniform(1, 2, "xeon-p8260", 1),
        ..Default::default()
    })?;
    svc.apply_ingest(
        &format!("env,host=n001 temp_c=72,power_w=300 {T0}\nenv,host=n002 temp_c=55,power_w=300 {T0}\n"),
        T0,
    );

    let show = |label: &str, now: i64| {
        let (snap, _) = svc.evaluation_tick(now);
        let states: Vec<_> = snap.nodes.iter().map(|n| (n.node_id.clone(), n.state)).collect();
        println!("{label:<28} {states:?}");
    };
    show("defaults", T0);

    svc.reload_thresholds(r#"{"temp_warn_c": 80, "temp_crit_c": 95}"#)?;
    show("warn at 80 C", T0 + 1);

    svc.reload_thresholds(r#"{"temp_warn_c": 50, "temp_crit_c": 70}"#)?;
    show("warn at 50 C, crit at 70 C", T0 + 2);

    if let Err(e) = svc.reload_thresholds(r#"{"temp_warn_c": 50, "temp_crit_c": 40}"#) {
        println!("rejected: {e}");
    }
    show("after a rejected reload", T0 + 3);
    Ok(())
}
