//! Generates a small dataset, splits it 80/20, writes the CSV and JSON
//! sidecar, and reloads it.
//!
//! ```bash
//! cargo run -p mmwave-senn --example generate_dataset -- 5000 out.csv
//! ```

use std::path::PathBuf;

use mmwave_senn::dataset::{self, Dataset};
use mmwave_senn::{EnvConfig, Result, SamplingRanges};

pub fn run(n: usize, path: PathBuf) -> Result<()> {
    let ranges = SamplingRanges::default();
    let data = dataset::generate(n, 7, &ranges, &EnvConfig::default())?;
    let data = dataset::split(data, 0.8, 7)?;
    let sum = data.save(&path)?;
    println!("wrote {} rows to {} (sha256 {sum})", data.len(), path.display());

    let stats = data.norm_stats()?;
    println!("train-split input statistics:");
    for (j, name) in mmwave_senn::Performance::FIELD_NAMES.iter().enumerate() {
        println!("  {name:<8} mean {:>10.4}  std {:>10.4}", stats.mean[j], stats.std[j]);
    }

    let back = Dataset::load(&path)?;
    assert_eq!(back, data, "reloaded dataset differs");
    println!(
        "reloaded: {} train / {} test rows",
        back.train_indices()?.len(),
        back.test_indices()?.len()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(5_000);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("senn_example.csv"));
    run(n, path)
}
