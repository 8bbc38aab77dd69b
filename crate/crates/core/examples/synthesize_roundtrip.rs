//! Direct synthesis round trip: train a model, feed it target impedances,
//! and check the predicted geometries with the surrogate.
//!
//! ```bash
//! cargo run --release -p mmwave-senn --example synthesize_roundtrip -- 20000 10
//! ```

use mmwave_senn::cli::{format_geometry, synthesize};
use mmwave_senn::optim;
use mmwave_senn::{dataset, EnvConfig, Performance, Result, SamplingRanges, SennConfig, TrainConfig};

/// Example targets; the capacitors are fixed at 200 fF.
pub const TARGETS: [(f64, f64); 4] = [(32.110, -3.995), (38.620, -2.643), (24.209, 8.792), (42.794, -16.231)];

pub fn run(n: usize, train_cfg: &TrainConfig, model: SennConfig) -> Result<()> {
    let env = EnvConfig::default();
    let data = dataset::generate(n, 1, &SamplingRanges::default(), &env)?;
    let data = dataset::split(data, 0.8, 2)?;
    let trained = optim::train(&data, &model, train_cfg)?.model;

    let mut stderr = std::io::stderr();
    for (i, (re, im)) in TARGETS.iter().enumerate() {
        let target = Performance {
            re_z: *re,
            im_z: *im,
            c1: 200.0,
            c2: 200.0,
        };
        let s = synthesize(&trained, &target, &env, &mut stderr)?;
        println!("example {}", i + 1);
        print!("{}", format_geometry(&s.geometry));
        println!(
            "  targeted    {:>8.3} {:>+9.3}j Ohm\n  synthesized {:>8.3} {:>+9.3}j Ohm\n",
            re, im, s.achieved.re_z, s.achieved.im_z
        );
    }

    let test = data.test_indices()?;
    let targets: Vec<Performance> = test.iter().take(200).map(|&i| data.triples[i].performance).collect();
    let mut rel_re = Vec::new();
    for t in &targets {
        let s = synthesize(&trained, t, &env, &mut std::io::sink())?;
        rel_re.push(((s.achieved.re_z - t.re_z) / t.re_z).abs());
    }
    rel_re.sort_by(f64::total_cmp);
    println!(
        "median |ΔRe(Z)|/Re(Z) over {} held-out targets: {:.2}%",
        rel_re.len(),
        100.0 * rel_re[rel_re.len() / 2]
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let epochs = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    run(n, &TrainConfig { epochs, ..TrainConfig::desk() }, SennConfig::desk())
}
