//! Reference models: ordinary least squares and the naive network (the same
//! two-head network trained with `λ = 0`).

use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, NormStats};
use crate::error::ShapeError;
use crate::matrix::{gemm, Matrix, Op};
use crate::nn::SennConfig;
use crate::optim::{train, OptimError, TrainConfig, TrainOutcome};

/// Diagonal jitter added to the normal equations.
pub const RIDGE_JITTER: f64 = 1e-9;
pub const MIN_ROWS: usize = 5;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("linear fit needs at least {MIN_ROWS} rows, got {0}")]
    TooFewRows(usize),
    #[error("normal equations are singular (pivot {pivot} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// `y = W x + b` on normalised inputs, predicting the six geometry fields.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// `6 × 4`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub input_stats: NormStats,
}

impl LinearModel {
    pub fn predict(&self, x: &Matrix) -> Result<Matrix, ShapeError> {
        let mut out = Matrix::zeros(x.rows(), self.weights.rows());
        for i in 0..x.rows() {
            out.row_mut(i).copy_from_slice(&self.bias);
        }
        gemm(1.0, x, Op::N, &self.weights, Op::T, 1.0, &mut out)?;
        Ok(out)
    }
}

/// Least-squares coefficients of `y ≈ W x + b`, returned as (`W`: `k × d`, `b`).
///
/// Solves `(AᵀA + jitter·I) β = Aᵀy` for the design `A = [x | 1]` by Cholesky.
pub fn least_squares(x: &Matrix, y: &Matrix) -> Result<(Matrix, Vec<f64>), BaselineError> {
    let (n, d) = x.shape();
    if y.rows() != n {
        return Err(ShapeError::new(format!("{n} input rows, {} target rows", y.rows())).into());
    }
    if n < MIN_ROWS {
        return Err(BaselineError::TooFewRows(n));
    }
    let p = d + 1;
    let k = y.cols();
    let mut design = Matrix::zeros(n, p);
    for i in 0..n {
        let row = design.row_mut(i);
        row[..d].copy_from_slice(x.row(i));
        row[d] = 1.0;
    }
    let mut gram = Matrix::zeros(p, p);
    gemm(1.0, &design, Op::T, &design, Op::N, 0.0, &mut gram)?;
    for j in 0..p {
        gram.set(j, j, gram.get(j, j) + RIDGE_JITTER);
    }
    let mut rhs = Matrix::zeros(p, k);
    gemm(1.0, &design, Op::T, y, Op::N, 0.0, &mut rhs)?;

    let chol = cholesky(&gram)?;
    let beta = cholesky_solve(&chol, &rhs);
    let weights = Matrix::from_fn(k, d, |out, inp| beta.get(inp, out));
    let bias = (0..k).map(|out| beta.get(d, out)).collect();
    Ok((weights, bias))
}

/// Lower-triangular `L` with `L Lᵀ = a`.
fn cholesky(a: &Matrix) -> Result<Matrix, BaselineError> {
    let p = a.rows();
    let mut l = Matrix::zeros(p, p);
    for j in 0..p {
        let mut diag = a.get(j, j);
        for q in 0..j {
            diag -= l.get(j, q).powi(2);
        }
        if !(diag > 0.0 && diag.is_finite()) {
            return Err(BaselineError::Singular { column: j, pivot: diag });
        }
        let ljj = diag.sqrt();
        l.set(j, j, ljj);
        for i in j + 1..p {
            let mut s = a.get(i, j);
            for q in 0..j {
                s -= l.get(i, q) * l.get(j, q);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &Matrix, b: &Matrix) -> Matrix {
    let p = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..p {
            let mut s = x.get(i, c);
            for q in 0..i {
                s -= l.get(i, q) * x.get(q, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
        for i in (0..p).rev() {
            let mut s = x.get(i, c);
            for q in i + 1..p {
                s -= l.get(q, i) * x.get(q, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
    }
    x
}

/// Fits the linear baseline on the dataset's train split.
pub fn fit_linear(data: &Dataset) -> Result<LinearModel, BaselineError> {
    let rows = data.train_indices()?;
    let x = data.normalized_inputs(&rows)?;
    let y = data.geometry_targets(&rows);
    let (weights, bias) = least_squares(&x, &y)?;
    Ok(LinearModel {
        weights,
        bias,
        input_stats: *data.norm_stats()?,
    })
}

/// Trains the naive network: the shared-encoder trainer with `λ = 0`, so the
/// circuit head never receives a learning signal.
pub fn train_naive(
    data: &Dataset,
    model_config: &SennConfig,
    train_config: &TrainConfig,
) -> Result<TrainOutcome, OptimError> {
    let mut cfg = train_config.clone();
    cfg.risk.lambda = 0.0;
    train(data, model_config, &cfg)
}
