use std::sync::Arc;
use std::time::Duration;

use clusterview::alert::{AlertKind, Severity};
use clusterview::client::{Client, ClientError};
use clusterview::service::{spawn_server, EventPayload, ServerHandle, Service, ServiceConfig};
use clusterview::sim::{
    storm_investigation, storm_query_now, Scenario, ScenarioKind, SimConfig, Simulator, TopologySpec, STORM_QUERY,
    STORM_TICKS,
};
use clusterview::tsq::run_query;
use serde_json::Value;

const T0: i64 = 1_623_337_200_000_000_000;

fn small_config() -> ServiceConfig {
    ServiceConfig {
        topology: TopologySpec::uniform(1, 4, "xeon-p8260", 1),
        // Tests drive evaluation directly.
        cadence_ms: 3_600_000,
        heartbeat_s: 1,
        ..Default::default()
    }
}

async fn start(cfg: ServiceConfig) -> (ServerHandle, Client) {
    let server = spawn_server(Arc::new(Service::new(cfg).unwrap()), "127.0.0.1:0", None)
        .await
        .unwrap();
    let client = Client::new(server.url());
    (server, client)
}

async fn raw_post(url: &str, body: &str) -> (u16, Value) {
    let resp = reqwest::Client::new()
        .post(url)
        .body(body.to_owned())
        .send()
        .await
        .unwrap();
    let status = resp.status().as_u16();
    (status, serde_json::from_str(&resp.text().await.unwrap()).unwrap())
}

#[tokio::test]
async fn cold_start_reports_every_node_offline() {
    let (server, client) = start(small_config()).await;
    let snap = client.snapshot().await.unwrap();
    assert_eq!(snap.nodes.len(), 4);
    assert!(snap
        .nodes
        .iter()
        .all(|n| n.state == Severity::Offline && n.has_alert(AlertKind::Offline)));
    assert_eq!(snap.rollup.states.get(&Severity::Offline), Some(&4));
    let h = client.healthz().await.unwrap();
    assert_eq!(h["status"], "ok");
    assert_eq!(h["nodes"], 4);
    let topo: Value = serde_json::from_str(
        &reqwest::get(format!("{}/topology", server.url()))
            .await
            .unwrap()
            .text()
            .await
            .unwrap(),
    )
    .unwrap();
    assert_eq!(topo["racks"][0]["nodes"].as_array().unwrap().len(), 4);
    server.stop().await;
}

#[tokio::test]
async fn ingest_counts_and_rejections() {
    let (server, client) = start(small_config()).await;
    let r = client
        .ingest(format!(
            "cpu,host=n001 load1=1.5 {T0}\nmem,host=n001 mem_free_pct=40 {T0}\nenv,host=n001 temp_c=40,power_w=300 {T0}\n"
        ))
        .await
        .unwrap();
    assert_eq!((r.accepted, r.rejected), (3, 0));

    let r = client
        .ingest(format!(
            "cpu,host=n002 load1=1 {T0}\ncpu,host=n002 load1= {T0}\ndisk,host=n002 disk_free_pct=50 {T0}\n"
        ))
        .await
        .unwrap();
    assert_eq!((r.accepted, r.rejected), (2, 1));
    assert_eq!(r.first_errors[0].line, 2);

    let (status, body) = raw_post(&format!("{}/ingest", server.url()), "garbage\nmore garbage\n").await;
    assert_eq!(status, 400);
    assert_eq!(body["rejected"], 2);
    assert_eq!(body["accepted"], 0);

    let h = client.healthz().await.unwrap();
    assert_eq!(h["accepted"], 5);
    assert_eq!(h["rejected"], 3);
    server.stop().await;
}

#[tokio::test]
async fn job_events_show_up_in_snapshot() {
    let (server, client) = start(small_config()).await;
    let (status, _) = raw_post(&format!("{}/jobs", server.url()), "{not json}\n").await;
    assert_eq!(status, 400);
    let (status, body) = raw_post(
        &format!("{}/jobs", server.url()),
        &format!(r#"{{"job_id":"42","user":"alice","nodes":["n001","n003"],"event":"start","ts_ns":{T0}}}"#),
    )
    .await;
    assert_eq!(status, 200, "{body}");
    server.service.evaluation_tick(T0);
    let snap = client.snapshot().await.unwrap();
    assert_eq!(snap.jobs.len(), 1);
    assert_eq!(snap.jobs[0].event.user, "alice");
    assert_eq!(snap.node("n003").unwrap().jobs[0].job_id, "42");
    assert!(snap.node("n002").unwrap().jobs.is_empty());
    server.stop().await;
}

#[tokio::test]
async fn storm_query_over_http_matches_offline_evaluation() {
    let (cfg, scenarios) = storm_investigation(1);
    let (server, client) = start(ServiceConfig {
        topology: cfg.topology.clone(),
        ..small_config()
    })
    .await;
    let mut sim = Simulator::new(cfg).unwrap();
    for s in scenarios {
        sim.inject(s).unwrap();
    }
    let mut all = String::new();
    for _ in 0..STORM_TICKS {
        let t = sim.step();
        all.push_str(&t.telemetry);
        client.push_tick(&t).await.unwrap();
    }
    let now = storm_query_now();
    let http = client.query(STORM_QUERY, Some(now)).await.unwrap();

    let mut store = clusterview::tsq::Store::new();
    store.insert_all(&clusterview::wire::parse_batch(&all, 0).samples);
    let offline = run_query(&store, STORM_QUERY, now).unwrap();
    assert_eq!(http["rows"], Value::Array(offline.to_json_rows()));
    assert_eq!(http["rows"].as_array().unwrap().len(), 6);
    assert!(http["table"].as_str().unwrap().contains("893817"));

    // JSON body form, with an RFC 3339 `now`.
    let body = serde_json::json!({"q": STORM_QUERY, "now": "2021-06-10T15:45:00Z"}).to_string();
    let (status, v) = raw_post(&format!("{}/query", server.url()), &body).await;
    assert_eq!(status, 200);
    assert_eq!(v["rows"], http["rows"]);
    server.stop().await;
}

#[tokio::test]
async fn bad_queries_are_400_with_position() {
    let (server, client) = start(small_config()).await;
    let err = client.query("SELECT MEAN(\"x\" FROM \"m\"", Some(0)).await.unwrap_err();
    let ClientError::Status { status, body } = err else {
        panic!("{err:?}")
    };
    assert_eq!(status, 400);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert!(v["position"].is_u64());
    assert!(v["error"].is_string());
    let (status, _) = raw_post(
        &format!("{}/query?now=yesterday", server.url()),
        "SELECT MEAN(\"x\") FROM \"m\"",
    )
    .await;
    assert_eq!(status, 400);
    server.stop().await;
}

#[tokio::test]
async fn reload_validates_and_applies() {
    let dir = std::env::temp_dir().join(format!("clusterview-reload-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("config.json");
    std::fs::write(&path, r#"{"thresholds": {"temp_warn_c": 75}}"#).unwrap();
    let svc = Arc::new(Service::new(small_config()).unwrap());
    let server = spawn_server(svc.clone(), "127.0.0.1:0", Some(path.clone()))
        .await
        .unwrap();
    let client = Client::new(server.url());

    let err = client
        .reload(r#"{"temp_warn_c": 90, "temp_crit_c": 80}"#)
        .await
        .unwrap_err();
    let ClientError::Status { status, body } = err else {
        panic!()
    };
    assert_eq!(status, 400);
    assert!(body.contains("violations"));
    assert_eq!(
        svc.thresholds().temp_warn_c,
        70.0,
        "rejected reload leaves thresholds alone"
    );

    // A node at 72 C: warm under defaults, fine after raising the limit.
    let line = format!("env,host=n001 temp_c=72,power_w=300 {T0}\n");
    client.ingest(line).await.unwrap();
    svc.evaluation_tick(T0);
    assert!(client
        .snapshot()
        .await
        .unwrap()
        .node("n001")
        .unwrap()
        .has_alert(AlertKind::Temperature));

    let v = client.reload("").await.unwrap();
    assert_eq!(v["thresholds"]["temp_warn_c"], 75.0);
    svc.evaluation_tick(T0 + 1);
    assert!(!client
        .snapshot()
        .await
        .unwrap()
        .node("n001")
        .unwrap()
        .has_alert(AlertKind::Temperature));

    client.reload(r#"{"temp_warn_c": 60}"#).await.unwrap();
    svc.evaluation_tick(T0 + 2);
    assert!(client
        .snapshot()
        .await
        .unwrap()
        .node("n001")
        .unwrap()
        .has_alert(AlertKind::Temperature));
    server.stop().await;
    std::fs::remove_dir_all(dir).ok();
}

#[tokio::test]
async fn stream_opens_with_snapshot_then_deltas_and_heartbeats() {
    let (server, client) = start(small_config()).await;
    let mut stream = client.stream().await.unwrap();
    let first = stream.next_event().await.unwrap().unwrap();
    assert_eq!(first.kind(), "snapshot");
    let EventPayload::Snapshot(base) = &first.payload else {
        unreachable!()
    };

    let mut sim = Simulator::new(SimConfig {
        topology: small_config().topology,
        ..Default::default()
    })
    .unwrap();
    sim.inject(Scenario::new(ScenarioKind::Overheat, ["n002"]).starting(1))
        .unwrap();
    let mut last = None;
    for _ in 0..3 {
        let t = sim.step();
        client.push_tick(&t).await.unwrap();
        last = Some(server.service.evaluation_tick(t.timestamp).0);
    }
    let last = last.unwrap();

    let mut state = (**base).clone();
    let mut kinds = Vec::new();
    let mut saw_heartbeat = false;
    while !(saw_heartbeat && state.seq == last.seq) {
        let ev = tokio::time::timeout(Duration::from_secs(5), stream.next_event())
            .await
            .expect("stream makes progress")
            .unwrap()
            .unwrap();
        saw_heartbeat |= ev.kind() == "heartbeat";
        kinds.push(ev.kind());
        state.apply(&ev).unwrap();
    }
    assert_eq!(state.canonical_json(), last.canonical_json());
    assert!(kinds.contains(&"node_status"));
    assert!(kinds.contains(&"tick"));
    assert!(state.node("n002").unwrap().has_alert(AlertKind::Temperature));

    let resp = reqwest::get(format!("{}/stream", server.url())).await.unwrap();
    assert_eq!(resp.headers()["content-type"], "application/x-ndjson");
    drop(resp);
    drop(stream);
    server.stop().await;
}
