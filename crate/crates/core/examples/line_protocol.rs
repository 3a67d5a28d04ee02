//! Parse a batch of line protocol, report bad lines, and write samples back.

use clusterview::wire::{parse_batch, to_batch, MetricSample};

fn main() {
    let batch = "\
cpu,host=n001,rack=r01 load1=12.5,procs=311i 1623337200000000000
env,host=n001 temp_c=48.25,power_w=410 1623337200000000000
sys,host=n001 stack_version=\"2021.1\",mounts=\"/home,/scratch\"
cpu,host=n002 load1= 1623337200000000000
lustre,host=n002,jobid=23159087 jobstats_open=1.2e6 1623337200000000000
";
    // Lines without a timestamp take the receipt time.
    let parsed = parse_batch(batch, 1_623_337_201_000_000_000);
    for s in &parsed.samples {
        println!(
            "{:>10} {:?} -> {} field(s) at {}",
            s.measurement,
            s.host(),
            s.fields.len(),
            s.timestamp
        );
    }
    for (line, err) in &parsed.errors {
        println!("line {line} rejected: {err}");
    }

    let built = MetricSample::new("gpu", 1_623_337_260_000_000_000)
        .tag("host", "n104")
        .tag("gpu", "0")
        .field("gpu_util", 98.0)
        .field("throttled", true);
    print!("\nround trip:\n{}", to_batch(parsed.samples.iter().chain([&built])));
}
