//! Evaluate a node's latest values against the default thresholds, then
//! against a tightened profile override.

use std::collections::BTreeMap;

use clusterview::alert::{cluster_rollup, evaluate_node, load_thresholds, JobActivity, NodeTelemetry, Thresholds};
use clusterview::wire::FieldValue;

const NOW: i64 = 1_623_337_200_000_000_000;

fn node(id: &str, temp: f64, mem_free: f64) -> NodeTelemetry {
    NodeTelemetry {
        node_id: id.into(),
        profile: "xeon-p8260".into(),
        cores: 48,
        gpus: 0,
        last_seen: Some(NOW - 2_000_000_000),
        values: BTreeMap::from([
            ("load1".into(), FieldValue::Float(20.0)),
            ("mem_free_pct".into(), FieldValue::Float(mem_free)),
            ("disk_free_pct".into(), FieldValue::Float(60.0)),
            ("temp_c".into(), FieldValue::Float(temp)),
            ("power_w".into(), FieldValue::Float(420.0)),
            ("stack_version".into(), FieldValue::String("2021.1".into())),
            ("mounts".into(), FieldValue::String("/home,/scratch".into())),
        ]),
        hw_events: BTreeMap::new(),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let nodes = [
        node("n001", 52.0, 40.0),
        node("n002", 74.0, 40.0),
        node("n003", 88.0, 4.0),
    ];
    let storm = [JobActivity {
        job_id: "23159087".into(),
        user: "alice".into(),
        open_rate_10m: Some(893_817.0),
    }];
    let report = |th: &Thresholds| {
        let statuses: Vec<_> = nodes
            .iter()
            .enumerate()
            .map(|(i, t)| evaluate_node(t, if i == 0 { &storm[..] } else { &[] }, th, NOW))
            .collect();
        for s in &statuses {
            let alerts: Vec<String> = s
                .alerts
                .iter()
                .map(|a| format!("{:?}/{:?}: {}", a.kind, a.severity, a.message))
                .collect();
            println!("  {} {:?} {alerts:?}", s.node_id, s.state);
        }
        println!("  rollup {:?}", cluster_rollup(&statuses).states);
    };

    println!("defaults");
    report(&Thresholds::default());

    let strict = load_thresholds(r#"{"profiles": {"xeon-p8260": {"temp_warn_c": 50}}}"#)?;
    println!("\nxeon temperature warning at 50 C");
    report(&strict);

    match load_thresholds(r#"{"temp_warn_c": 90, "temp_crit_c": 80}"#) {
        Ok(_) => unreachable!(),
        Err(e) => println!("\nrejected document: {e}"),
    }
    Ok(())
}
