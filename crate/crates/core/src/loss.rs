//! Relative-error training losses, the combined two-head risk, and R².

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::TARGET_FLOOR;
use crate::error::ShapeError;
use crate::matrix::{ensure_same_shape, Matrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("target[{row}][{col}] = {value} is below the magnitude floor {TARGET_FLOOR}")]
    TargetBelowFloor { row: usize, col: usize, value: f64 },
    #[error("empty prediction matrix")]
    Empty,
    #[error("r² needs at least two rows, got {0}")]
    TooFewRows(usize),
    #[error("r² is undefined: every target column is constant")]
    ConstantTargets,
    #[error("lambda {0} must be finite and non-negative")]
    InvalidLambda(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Smse,
    Sdmse,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::Smse => "smse",
            LossKind::Sdmse => "sdmse",
        })
    }
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "smse" => Ok(LossKind::Smse),
            "sdmse" => Ok(LossKind::Sdmse),
            other => Err(format!("unknown loss {other:?}, expected smse or sdmse")),
        }
    }
}

/// `L = Φ(ŷ, y) + λ Φ(ẑ, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub loss_kind: LossKind,
    pub lambda: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            loss_kind: LossKind::Smse,
            lambda: 0.5,
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(LossError::InvalidLambda(self.lambda));
        }
        Ok(())
    }
}

/// Relative residuals `(v − v̂) / v`, after checking shapes and the floor.
fn relative_residuals(pred: &Matrix, target: &Matrix) -> Result<Matrix, LossError> {
    ensure_same_shape(pred, target)?;
    if target.as_slice().is_empty() {
        return Err(LossError::Empty);
    }
    let k = target.cols();
    let data = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .enumerate()
        .map(|(idx, (&p, &t))| {
            if !(t.abs() >= TARGET_FLOOR) {
                return Err(LossError::TargetBelowFloor {
                    row: idx / k,
                    col: idx % k,
                    value: t,
                });
            }
            Ok((t - p) / t)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Matrix::from_vec(target.rows(), k, data)?)
}

/// Scaled mean squared error: `(1 / nk) · sqrt(Σᵢⱼ ((vᵢⱼ − v̂ᵢⱼ) / vᵢⱼ)²)`.
///
/// The `1/nk` factor sits outside the square root, so the value shrinks like
/// `1/sqrt(n)` for a fixed per-entry error; only compare equal-size sets.
pub fn smse(pred: &Matrix, target: &Matrix) -> Result<f64, LossError> {
    Ok(smse_with_grad(pred, target, false)?.0)
}

/// Scaled dimensional mean squared error:
/// `(1/k) Σⱼ sqrt((1/n) Σᵢ ((vᵢⱼ − v̂ᵢⱼ) / vᵢⱼ)²)`.
pub fn sdmse(pred: &Matrix, target: &Matrix) -> Result<f64, LossError> {
    Ok(sdmse_with_grad(pred, target, false)?.0)
}

fn smse_with_grad(pred: &Matrix, target: &Matrix, want_grad: bool) -> Result<(f64, Option<Matrix>), LossError> {
    let r = relative_residuals(pred, target)?;
    let count = r.as_slice().len() as f64;
    let norm = r.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
    let value = norm / count;
    let grad = want_grad.then(|| {
        let mut g = Matrix::zeros(r.rows(), r.cols());
        // at a perfect fit the root is not differentiable; take the zero subgradient
        if norm > 0.0 {
            for ((g, &res), &t) in g.as_mut_slice().iter_mut().zip(r.as_slice()).zip(target.as_slice()) {
                *g = -res / (t * count * norm);
            }
        }
        g
    });
    Ok((value, grad))
}

fn sdmse_with_grad(pred: &Matrix, target: &Matrix, want_grad: bool) -> Result<(f64, Option<Matrix>), LossError> {
    let r = relative_residuals(pred, target)?;
    let (n, k) = r.shape();
    let mut col_sq = vec![0.0; k];
    for row in r.row_iter() {
        for (s, v) in col_sq.iter_mut().zip(row) {
            *s += v * v;
        }
    }
    let col_rms: Vec<f64> = col_sq.iter().map(|s| (s / n as f64).sqrt()).collect();
    let value = col_rms.iter().sum::<f64>() / k as f64;
    let grad = want_grad.then(|| {
        let mut g = Matrix::zeros(n, k);
        for i in 0..n {
            for j in 0..k {
                if col_rms[j] > 0.0 {
                    let t = target.get(i, j);
                    g.set(i, j, -r.get(i, j) / (t * (k * n) as f64 * col_rms[j]));
                }
            }
        }
        g
    });
    Ok((value, grad))
}

/// `Φ` selected by `kind`, with its gradient with respect to `pred`.
pub fn loss_with_grad(kind: LossKind, pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix), LossError> {
    let (v, g) = match kind {
        LossKind::Smse => smse_with_grad(pred, target, true)?,
        LossKind::Sdmse => sdmse_with_grad(pred, target, true)?,
    };
    Ok((v, g.expect("gradient requested")))
}

pub fn loss(kind: LossKind, pred: &Matrix, target: &Matrix) -> Result<f64, LossError> {
    match kind {
        LossKind::Smse => smse(pred, target),
        LossKind::Sdmse => sdmse(pred, target),
    }
}

/// Value and head-output gradients of the combined risk.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskOutput {
    pub value: f64,
    pub physical_loss: f64,
    pub circuit_loss: f64,
    pub d_z_hat: Matrix,
    pub d_y_hat: Matrix,
}

/// `Φ(ŷ, y) + λ Φ(ẑ, z)` and its exact gradients. With `λ = 0` the circuit
/// term is skipped entirely and its gradient is identically zero.
pub fn combined_risk(
    z_hat: &Matrix,
    z: &Matrix,
    y_hat: &Matrix,
    y: &Matrix,
    cfg: &RiskConfig,
) -> Result<RiskOutput, LossError> {
    cfg.validate()?;
    let (physical_loss, d_y_hat) = loss_with_grad(cfg.loss_kind, y_hat, y)?;
    if cfg.lambda == 0.0 {
        ensure_same_shape(z_hat, z)?;
        return Ok(RiskOutput {
            value: physical_loss,
            physical_loss,
            circuit_loss: 0.0,
            d_z_hat: Matrix::zeros(z_hat.rows(), z_hat.cols()),
            d_y_hat,
        });
    }
    let (circuit_loss, mut d_z_hat) = loss_with_grad(cfg.loss_kind, z_hat, z)?;
    d_z_hat.as_mut_slice().iter_mut().for_each(|g| *g *= cfg.lambda);
    Ok(RiskOutput {
        value: physical_loss + cfg.lambda * circuit_loss,
        physical_loss,
        circuit_loss,
        d_z_hat,
        d_y_hat,
    })
}

/// Coefficient of determination pooled over all coordinates:
/// `1 − ΣΣ(v − v̂)² / ΣΣ(v − v̄ⱼ)²`.
pub fn r_squared(pred: &Matrix, target: &Matrix) -> Result<f64, LossError> {
    ensure_same_shape(pred, target)?;
    let (n, k) = target.shape();
    if n < 2 {
        return Err(LossError::TooFewRows(n));
    }
    let means: Vec<f64> = target.column_sums().into_iter().map(|s| s / n as f64).collect();
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..n {
        for j in 0..k {
            let t = target.get(i, j);
            ss_res += (t - pred.get(i, j)).powi(2);
            ss_tot += (t - means[j]).powi(2);
        }
    }
    if ss_tot == 0.0 {
        return Err(LossError::ConstantTargets);
    }
    Ok(1.0 - ss_res / ss_tot)
}
