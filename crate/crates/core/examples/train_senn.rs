//! Trains a small shared-encoder model, prints the epoch log, and writes a
//! checkpoint that the `senn synthesize` command can read.
//!
//! ```bash
//! cargo run --release -p mmwave-senn --example train_senn -- 20000 10
//! ```

use mmwave_senn::checkpoint::{Checkpoint, ModelKind};
use mmwave_senn::optim::{self, LOG_HEADER};
use mmwave_senn::{dataset, EnvConfig, Result, SamplingRanges, SennConfig, TrainConfig};

pub fn run(n: usize, train_cfg: &TrainConfig, model: SennConfig) -> Result<Checkpoint> {
    let data = dataset::generate(n, 1, &SamplingRanges::default(), &EnvConfig::default())?;
    let data = dataset::split(data, 0.8, 2)?;
    let outcome = optim::train(&data, &model, train_cfg)?;
    println!("{LOG_HEADER}");
    for e in &outcome.log {
        println!("{}", e.csv_line());
    }
    let ckpt = Checkpoint::network(ModelKind::Senn, outcome.model, Some(train_cfg.clone()));
    let path = std::env::temp_dir().join("senn_example.ckpt");
    ckpt.save(&path)?;
    println!("checkpoint: {}", path.display());
    Ok(ckpt)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let epochs = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    run(n, &TrainConfig { epochs, ..TrainConfig::desk() }, SennConfig::desk()).map(|_| ())
}
