use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use clusterview::bench::{bench_ingest, bench_latency, LatencyOptions, ThroughputOptions};
use clusterview::client::Client;
use clusterview::service::{now_ns, parse_time_arg, spawn_server, Service, ServiceConfig};
use clusterview::sim::{load_scenarios, SimConfig, Simulator, TopologySpec, DEFAULT_START_NS};
use clusterview::tsq::{run_query, Store};
use clusterview::wire::parse_batch;

#[derive(Parser)]
#[command(
    name = "clusterview",
    version,
    about = "Cluster telemetry ingestion, alerting and streaming"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the state service.
    Serve(ServeArgs),
    /// Run the cluster simulator against a service or stdout.
    Sim(SimArgs),
    /// Run a query against a line-protocol file.
    Query(QueryArgs),
    /// Measure ingest throughput and end-to-end alert latency.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ServeArgs {
    /// JSON config (listen address, thresholds, topology).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's listen address.
    #[arg(long)]
    listen: Option<String>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 2)]
    racks: u32,
    #[arg(long, default_value_t = 48)]
    nodes_per_rack: u32,
    #[arg(long, default_value = "xeon-p8260")]
    profile: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Ticks per wall-clock second when pushing to a service.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    /// Scenario JSON (one object or an array).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Service base URL, or "stdout".
    #[arg(long, default_value = "stdout")]
    target: String,
    /// Stop after this many ticks (default: forever for a URL, 120 for stdout).
    #[arg(long)]
    ticks: Option<u64>,
    /// First simulated timestamp when writing to stdout (ns or RFC 3339).
    #[arg(long)]
    start: Option<String>,
    /// Also write job events (JSON lines) to this file in stdout mode.
    #[arg(long)]
    jobs_out: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    /// Line-protocol file to load.
    #[arg(long)]
    file: PathBuf,
    /// Evaluation time (ns or RFC 3339); defaults to the newest point.
    #[arg(long)]
    now: Option<String>,
    /// Print JSON rows instead of a table.
    #[arg(long)]
    json: bool,
    query: String,
}

#[derive(Args)]
struct BenchArgs {
    /// Samples per throughput run; accepts forms like 1e6.
    #[arg(long, default_value = "1e6")]
    samples: String,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long)]
    skip_latency: bool,
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().cmd {
        Cmd::Serve(a) => serve(a).await,
        Cmd::Sim(a) => sim(a).await,
        Cmd::Query(a) => query(a),
        Cmd::Bench(a) => bench(a).await,
    }
}

async fn serve(a: ServeArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ServiceConfig::parse(&text)?
        }
        None => ServiceConfig::default(),
    };
    if let Some(l) = a.listen {
        cfg.listen = l;
    }
    let listen = cfg.listen.clone();
    let svc = Arc::new(Service::new(cfg)?);
    let server = spawn_server(svc, &listen, a.config.clone()).await?;
    println!("listening on {}", server.url());
    tokio::signal::ctrl_c().await.context("waiting for ctrl-c")?;
    server.stop().await;
    Ok(())
}

async fn sim(a: SimArgs) -> Result<()> {
    let mut cfg = SimConfig {
        topology: TopologySpec::uniform(a.racks, a.nodes_per_rack, &a.profile, a.seed),
        ..Default::default()
    };
    if let Some(s) = &a.start {
        cfg.start_ns = parse_time_arg(s).with_context(|| format!("bad --start {s:?}"))?;
    } else {
        cfg.start_ns = DEFAULT_START_NS;
    }
    let mut sim = Simulator::new(cfg)?;
    if let Some(p) = &a.scenario {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        for s in load_scenarios(&text)? {
            sim.inject(s)?;
        }
    }

    if a.target == "stdout" {
        let out = std::io::stdout();
        let mut out = std::io::BufWriter::new(out.lock());
        let mut jobs = match &a.jobs_out {
            Some(p) => Some(std::io::BufWriter::new(std::fs::File::create(p)?)),
            None => None,
        };
        for _ in 0..a.ticks.unwrap_or(120) {
            let t = sim.step();
            out.write_all(t.telemetry.as_bytes())?;
            if let Some(j) = &mut jobs {
                for e in &t.job_events {
                    writeln!(j, "{}", e.to_json_line())?;
                }
            }
        }
        out.flush()?;
        return Ok(());
    }

    if !(a.rate > 0.0 && a.rate.is_finite()) {
        bail!("--rate must be > 0");
    }
    let client = Client::new(a.target.clone());
    let mut iv = tokio::time::interval(Duration::from_secs_f64(1.0 / a.rate));
    let mut sent = 0u64;
    while a.ticks.is_none_or(|n| sent < n) {
        iv.tick().await;
        let t = sim.step_at(now_ns());
        match client.push_tick(&t).await {
            Ok(r) if r.rejected > 0 => tracing::warn!("tick {}: {} lines rejected", t.tick, r.rejected),
            Ok(_) => {}
            Err(e) => tracing::warn!("tick {}: {e}", t.tick),
        }
        sent += 1;
    }
    Ok(())
}

fn query(a: QueryArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.file).with_context(|| format!("reading {}", a.file.display()))?;
    let parsed = parse_batch(&text, 0);
    if !parsed.errors.is_empty() {
        eprintln!("skipped {} unparseable lines", parsed.errors.len());
    }
    let now = match &a.now {
        Some(s) => parse_time_arg(s).with_context(|| format!("bad --now {s:?}"))?,
        None => parsed.samples.iter().map(|s| s.timestamp).max().unwrap_or(0),
    };
    let mut store = Store::new();
    store.insert_all(&parsed.samples);
    let rs = run_query(&store, &a.query, now)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&rs.to_json_rows())?);
    } else {
        print!("{}", rs.to_table());
    }
    Ok(())
}

fn parse_count(s: &str) -> Result<u64> {
    let v: f64 = s.parse().with_context(|| format!("bad sample count {s:?}"))?;
    if !(v >= 1.0 && v.is_finite()) {
        bail!("sample count must be >= 1");
    }
    Ok(v as u64)
}

async fn bench(a: BenchArgs) -> Result<()> {
    let opts = ThroughputOptions {
        samples: parse_count(&a.samples)?,
        runs: a.runs,
        ..Default::default()
    };
    let throughput = tokio::task::spawn_blocking(move || bench_ingest(&opts)).await??;
    let latency = if a.skip_latency {
        None
    } else {
        Some(
            bench_latency(&LatencyOptions {
                trials: a.trials,
                ..Default::default()
            })
            .await?,
        )
    };
    let report = serde_json::json!({
        "samples_per_sec": throughput.samples_per_sec,
        "throughput": throughput,
        "latency": latency,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
