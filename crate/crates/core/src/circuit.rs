//! Analytic surrogate for the EM simulator.
//!
//! Two stages: transformer geometry to lumped circuit parameters, and circuit
//! parameters plus loading capacitors to the complex input impedance seen at the
//! primary. The transformer is a pair of lossy coupled inductors described by
//! its Z-parameters; `C1` and the parasitic `Cp` shunt the primary input, `C2`
//! shunts the resistive load.

use std::f64::consts::{E, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vacuum permeability in H/m.
pub const MU0: f64 = 4.0e-7 * PI;
/// Feed-line inductance per unit length, pH/µm.
pub const FEED_INDUCTANCE_PER_UM: f64 = 0.4;
/// Sheet resistance of the coil metal, Ω/sq.
pub const SHEET_RESISTANCE: f64 = 0.07;
/// Depth of the inductance reduction caused by a nearby ground plane.
pub const GROUND_FACTOR_DEPTH: f64 = 0.3;
/// Decay length of the ground-proximity effect, µm.
pub const GROUND_DECAY_UM: f64 = 40.0;
/// Coupling coefficient reached by concentric coils of equal radius.
pub const MAX_COUPLING: f64 = 0.75;
/// Parasitic capacitance per µm of `radius * width / x_gnd`, fF/µm.
pub const PARASITIC_CAP_PER_UM: f64 = 0.3;

const UM: f64 = 1e-6;
const PH: f64 = 1e-12;
const FF: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("loop inductance undefined for radius {radius} µm, width {width} µm: 8r/w = {ratio} must exceed e^2")]
    LogDomain { radius: f64, width: f64, ratio: f64 },
    #[error("invalid operating point: {0}")]
    InvalidOperatingPoint(String),
}

/// Physical transformer parameters, all in µm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Trace width of coil A.
    pub w_oa: f64,
    /// Trace width of coil B.
    pub w_ob: f64,
    /// Inner coil radius.
    pub r0: f64,
    /// Outer coil radius.
    pub r1: f64,
    /// Spacing to the ground plane.
    pub x_gnd: f64,
    /// Input/output feed length.
    pub l_f: f64,
}

impl Geometry {
    pub const FIELD_NAMES: [&'static str; 6] = ["w_oa", "w_ob", "r0", "r1", "x_gnd", "l_f"];

    pub fn to_array(&self) -> [f64; 6] {
        [self.w_oa, self.w_ob, self.r0, self.r1, self.x_gnd, self.l_f]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            w_oa: v[0],
            w_ob: v[1],
            r0: v[2],
            r1: v[3],
            x_gnd: v[4],
            l_f: v[5],
        }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        for (name, v) in Self::FIELD_NAMES.iter().zip(self.to_array()) {
            if !(v.is_finite() && v > 0.0) {
                return Err(CircuitError::InvalidGeometry(format!(
                    "{name} = {v} must be finite and strictly positive"
                )));
            }
        }
        Ok(())
    }
}

/// Lumped transformer model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// Primary inductance, pH.
    pub l1: f64,
    /// Secondary inductance, pH.
    pub l2: f64,
    /// Magnetic coupling coefficient.
    pub k: f64,
    /// Primary quality factor.
    pub q1: f64,
    /// Secondary quality factor.
    pub q2: f64,
    /// Parasitic shunt capacitance at the primary, fF.
    pub cp: f64,
}

impl CircuitParams {
    pub const FIELD_NAMES: [&'static str; 6] = ["l1", "l2", "k", "q1", "q2", "cp"];

    pub fn to_array(&self) -> [f64; 6] {
        [self.l1, self.l2, self.k, self.q1, self.q2, self.cp]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            l1: v[0],
            l2: v[1],
            k: v[2],
            q1: v[3],
            q2: v[4],
            cp: v[5],
        }
    }
}

/// The synthesis model's input: target impedance and loading capacitors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    /// Re(Z_opt), Ω.
    pub re_z: f64,
    /// Im(Z_opt), Ω.
    pub im_z: f64,
    /// Input loading capacitor, fF.
    pub c1: f64,
    /// Output loading capacitor, fF.
    pub c2: f64,
}

impl Performance {
    pub const FIELD_NAMES: [&'static str; 4] = ["re_zopt", "im_zopt", "c1", "c2"];

    pub fn to_array(&self) -> [f64; 4] {
        [self.re_z, self.im_z, self.c1, self.c2]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self {
            re_z: v[0],
            im_z: v[1],
            c1: v[2],
            c2: v[3],
        }
    }

    pub fn impedance(&self) -> Complex64 {
        Complex64::new(self.re_z, self.im_z)
    }
}

/// Operating environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Operating frequency, Hz.
    pub freq: f64,
    /// Load resistance, Ω.
    pub r_load: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            freq: 30.0e9,
            r_load: 50.0,
        }
    }
}

impl EnvConfig {
    pub fn omega(&self) -> f64 {
        2.0 * PI * self.freq
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        if !(self.freq.is_finite() && self.freq > 0.0) {
            return Err(CircuitError::InvalidOperatingPoint(format!(
                "frequency {} Hz must be positive",
                self.freq
            )));
        }
        if !(self.r_load.is_finite() && self.r_load > 0.0) {
            return Err(CircuitError::InvalidOperatingPoint(format!(
                "load resistance {} Ω must be positive",
                self.r_load
            )));
        }
        Ok(())
    }
}

/// Inductance of a single circular loop plus its feed, in pH.
///
/// `L = µ0 r (ln(8r/w) − 2) + 0.4 pH/µm · feed_len`.
pub fn loop_inductance(radius: f64, width: f64, feed_len: f64) -> Result<f64, CircuitError> {
    if !(width > 0.0 && radius > width / 2.0) {
        return Err(CircuitError::InvalidGeometry(format!(
            "loop needs radius > width/2 > 0, got radius {radius} µm, width {width} µm"
        )));
    }
    if !(feed_len >= 0.0) {
        return Err(CircuitError::InvalidGeometry(format!(
            "feed length {feed_len} µm must be non-negative"
        )));
    }
    let ratio = 8.0 * radius / width;
    if ratio <= E * E {
        return Err(CircuitError::LogDomain {
            radius,
            width,
            ratio,
        });
    }
    let loop_h = MU0 * radius * UM * (ratio.ln() - 2.0);
    Ok(loop_h / PH + FEED_INDUCTANCE_PER_UM * feed_len)
}

/// Inductance reduction factor from the ground plane, in (0.7, 1).
pub fn ground_factor(x_gnd: f64) -> f64 {
    1.0 - GROUND_FACTOR_DEPTH * (-x_gnd / GROUND_DECAY_UM).exp()
}

/// Coupling between the two coils: `0.75 · (2 min(r0, r1) / (r0 + r1))³`.
pub fn coupling(r0: f64, r1: f64) -> f64 {
    let overlap = 2.0 * r0.min(r1) / (r0 + r1);
    MAX_COUPLING * overlap.powi(3)
}

/// Series resistance of one coil, Ω: sheet resistance times squares `2πr / w`.
pub fn series_resistance(radius: f64, width: f64) -> f64 {
    SHEET_RESISTANCE * (2.0 * PI * radius / width)
}

pub fn geometry_to_circuit(g: &Geometry, env: &EnvConfig) -> Result<CircuitParams, CircuitError> {
    g.validate()?;
    env.validate()?;
    let m = ground_factor(g.x_gnd);
    let l1 = loop_inductance(g.r0, g.w_oa, g.l_f)? * m;
    let l2 = loop_inductance(g.r1, g.w_ob, g.l_f)? * m;
    let omega = env.omega();
    let q1 = omega * l1 * PH / series_resistance(g.r0, g.w_oa);
    let q2 = omega * l2 * PH / series_resistance(g.r1, g.w_ob);
    let cp = PARASITIC_CAP_PER_UM * (g.r0 * g.w_oa + g.r1 * g.w_ob) / g.x_gnd;
    Ok(CircuitParams {
        l1,
        l2,
        k: coupling(g.r0, g.r1),
        q1,
        q2,
        cp,
    })
}

fn parallel(a: Complex64, b: Complex64) -> Complex64 {
    a * b / (a + b)
}

/// Input impedance at the primary, in Ω.
///
/// `c1`, `c2` in fF. `k = 0` is accepted and decouples the secondary entirely.
pub fn input_impedance(c: &CircuitParams, c1: f64, c2: f64, env: &EnvConfig) -> Complex64 {
    let omega = env.omega();
    let l1 = c.l1 * PH;
    let l2 = c.l2 * PH;
    let r1 = omega * l1 / c.q1;
    let r2 = omega * l2 / c.q2;
    let mutual = c.k * (l1 * l2).sqrt();
    let j = Complex64::i();

    let z_c2 = 1.0 / (j * omega * c2 * FF);
    let z_load = parallel(Complex64::new(env.r_load, 0.0), z_c2);
    let z_secondary = r2 + j * omega * l2 + z_load;
    let reflected = (omega * mutual).powi(2) / z_secondary;
    let z_primary = r1 + j * omega * l1 + reflected;
    let z_shunt = 1.0 / (j * omega * (c1 + c.cp) * FF);
    parallel(z_primary, z_shunt)
}

pub fn performance_from_geometry(
    g: &Geometry,
    c1: f64,
    c2: f64,
    env: &EnvConfig,
) -> Result<Performance, CircuitError> {
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(CircuitError::InvalidOperatingPoint(format!(
            "loading capacitors must be positive, got c1 = {c1} fF, c2 = {c2} fF"
        )));
    }
    let circuit = geometry_to_circuit(g, env)?;
    let z = input_impedance(&circuit, c1, c2, env);
    Ok(Performance {
        re_z: z.re,
        im_z: z.im,
        c1,
        c2,
    })
}
