//! Compares backpropagated gradients of the combined risk with central finite
//! differences on a small random model.
//!
//! ```bash
//! cargo run -p mmwave-senn --example gradient_check
//! ```

use mmwave_senn::loss::combined_risk;
use mmwave_senn::nn::{init_model, SennModel};
use mmwave_senn::{LossKind, Matrix, Result, RiskConfig, SennConfig};

fn risk(model: &SennModel, x: &Matrix, z: &Matrix, y: &Matrix, cfg: &RiskConfig) -> Result<f64> {
    let out = model.forward(x)?;
    Ok(combined_risk(&out.z_hat, z, &out.y_hat, y, cfg)?.value)
}

/// Returns the largest relative gradient error found.
pub fn run() -> Result<f64> {
    let config = SennConfig {
        encoder: vec![6, 5],
        circuit_head: vec![],
        physical_head: vec![4],
    };
    let mut model = init_model(&config, 11)?;
    let x = Matrix::from_fn(8, 4, |i, j| ((i * 5 + j * 3) % 7) as f64 / 3.5 - 1.0);
    let z = Matrix::from_fn(8, 6, |i, j| 1.0 + ((i + 2 * j) % 5) as f64);
    let y = Matrix::from_fn(8, 6, |i, j| 2.0 + ((3 * i + j) % 4) as f64);
    let step = 1e-5;

    let mut worst: f64 = 0.0;
    for loss_kind in [LossKind::Smse, LossKind::Sdmse] {
        let cfg = RiskConfig { loss_kind, lambda: 0.5 };
        let out = model.forward(&x)?;
        let r = combined_risk(&out.z_hat, &z, &out.y_hat, &y, &cfg)?;
        let grads = model.backward(&out.cache, &r.d_z_hat, &r.d_y_hat)?;
        let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();

        for (t, g_t) in analytic.iter().enumerate() {
            for (i, &g) in g_t.iter().enumerate() {
                let orig = model.tensors()[t][i];
                model.tensors_mut()[t][i] = orig + step;
                let plus = risk(&model, &x, &z, &y, &cfg)?;
                model.tensors_mut()[t][i] = orig - step;
                let minus = risk(&model, &x, &z, &y, &cfg)?;
                model.tensors_mut()[t][i] = orig;
                let fd = (plus - minus) / (2.0 * step);
                let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        println!("{loss_kind}: checked {} tensors", analytic.len());
    }
    println!("max relative error vs central differences: {worst:.3e}");
    Ok(worst)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run().map(|_| ())
}
