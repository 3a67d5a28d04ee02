//! Job-to-node incidence and node-to-metric readings combined with sparse
//! associative-array algebra.

use clusterview::assoc::{AssocArray, KeySelector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let jobs = AssocArray::from_triples([("job-a", "n001", 1.0), ("job-a", "n002", 1.0), ("job-b", "n003", 1.0)])?;
    let load = AssocArray::from_triples([
        ("n001", "load1", 40.0),
        ("n002", "load1", 12.0),
        ("n003", "load1", 3.5),
        ("n003", "gpu_util", 97.0),
    ])?;

    // Total load per job.
    let per_job = jobs.matmul(&load);
    print!("per-job totals\n{}", per_job.to_csv_string());

    // Which jobs touch each node.
    print!("\nnode -> job\n{}", jobs.transpose().to_csv_string());

    // A second sample adds to the first; equal and opposite values vanish.
    let delta = AssocArray::from_triples([("n003", "gpu_util", -97.0), ("n001", "load1", 2.0)])?;
    let summed = load.add(&delta);
    println!(
        "\nafter adding delta: {} entries, gpu_util on n003 = {:?}",
        summed.len(),
        summed.get("n003", "gpu_util")
    );

    let first_two = summed.select(&KeySelector::range("n001", "n002")?, &KeySelector::All)?;
    print!("\nrows n001..n002\n{}", first_two.to_csv_string());
    Ok(())
}
