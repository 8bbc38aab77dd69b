//! Compares the shared-encoder network with the naive (λ = 0) network and
//! least squares on one synthetic dataset, under both training losses.
//!
//! ```bash
//! cargo run --release -p mmwave-senn --example compare_baselines -- 100000 20
//! ```

use mmwave_senn::baselines::{fit_linear, train_naive};
use mmwave_senn::optim::{self, Metrics};
use mmwave_senn::{dataset, EnvConfig, LossKind, Result, SamplingRanges, SennConfig, TrainConfig};

pub struct Row {
    pub model: &'static str,
    pub loss: Option<LossKind>,
    pub metrics: Metrics,
}

pub fn run(n: usize, train_cfg: &TrainConfig, model: SennConfig) -> Result<Vec<Row>> {
    let data = dataset::generate(n, 1, &SamplingRanges::default(), &EnvConfig::default())?;
    let data = dataset::split(data, 0.8, 2)?;

    let mut rows = Vec::new();
    let linear = fit_linear(&data)?;
    let test = data.test_indices()?;
    let pred = linear.predict(&data.normalized_inputs(&test)?)?;
    rows.push(Row {
        model: "Linear Regression",
        loss: None,
        metrics: Metrics::of(&pred, &data.geometry_targets(&test))?,
    });
    for loss in [LossKind::Smse, LossKind::Sdmse] {
        let mut cfg = train_cfg.clone();
        cfg.risk.loss_kind = loss;
        let naive = train_naive(&data, &model, &cfg)?;
        rows.push(Row {
            model: "naive-NN",
            loss: Some(loss),
            metrics: optim::evaluate_test(&naive.model, &data)?,
        });
        let senn = optim::train(&data, &model, &cfg)?;
        rows.push(Row {
            model: "SE-NN",
            loss: Some(loss),
            metrics: optim::evaluate_test(&senn.model, &data)?,
        });
    }

    println!("{:<18} {:<6} {:>14} {:>10} {:>10}", "model", "loss", "SMSE", "SDMSE", "R2");
    for r in &rows {
        let loss = r.loss.map_or("-".into(), |l| l.to_string());
        println!(
            "{:<18} {:<6} {:>14.6e} {:>10.5} {:>10.5}",
            r.model, loss, r.metrics.smse, r.metrics.sdmse, r.metrics.r2
        );
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let epochs = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    run(n, &TrainConfig { epochs, ..TrainConfig::desk() }, SennConfig::desk()).map(|_| ())
}
