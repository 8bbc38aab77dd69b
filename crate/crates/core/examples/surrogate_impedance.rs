//! Evaluates the analytic transformer surrogate on a few reference geometries:
//! geometry → (L1, L2, k, Q1, Q2, Cp) → Z_in at 30 GHz into 50 Ω.
//!
//! ```bash
//! cargo run -p mmwave-senn --example surrogate_impedance
//! ```

use mmwave_senn::circuit::{geometry_to_circuit, input_impedance};
use mmwave_senn::{EnvConfig, Geometry, Result};

/// Four geometries of the size the synthesis model produces. The last one
/// has an unusually wide secondary trace.
pub fn reference_geometries() -> Vec<(&'static str, Geometry)> {
    let g = |v: [f64; 6]| Geometry::from_array(v);
    vec![
        ("I", g([15.10, 11.73, 41.00, 47.99, 67.53, 14.70])),
        ("II", g([10.09, 13.13, 42.97, 44.97, 57.84, 34.44])),
        ("III", g([14.86, 11.98, 44.79, 51.61, 58.32, 24.49])),
        ("IV", g([15.06, 48.46, 48.46, 58.83, 59.94, 15.29])),
    ]
}

pub fn run() -> Result<()> {
    let env = EnvConfig::default();
    let (c1, c2) = (200.0, 200.0);
    println!("f = {:.1} GHz, R_L = {} Ohm, C1 = C2 = {c1} fF\n", env.freq / 1e9, env.r_load);
    println!(
        "{:<4} {:>8} {:>8} {:>7} {:>7} {:>7} {:>7} {:>10} {:>10}",
        "", "L1 pH", "L2 pH", "k", "Q1", "Q2", "Cp fF", "Re Z", "Im Z"
    );
    for (name, g) in reference_geometries() {
        let c = geometry_to_circuit(&g, &env)?;
        let z = input_impedance(&c, c1, c2, &env);
        println!(
            "{name:<4} {:>8.2} {:>8.2} {:>7.4} {:>7.3} {:>7.3} {:>7.3} {:>10.3} {:>10.3}",
            c.l1, c.l2, c.k, c.q1, c.q2, c.cp, z.re, z.im
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
