//! Direct synthesis of transformer-based mm-wave impedance matching networks.
//!
//! A shared-encoder network maps a target input impedance and the two loading
//! capacitors straight to the transformer geometry. An analytic coupled-inductor
//! surrogate stands in for the EM solver, both to generate training data and to
//! verify synthesized geometries.
//!
//! - [`circuit`]: geometry → circuit parameters → input impedance
//! - [`dataset`]: deterministic triple generation, CSV/JSON persistence, splits
//! - [`nn`]: dense layers, the two-head model, exact backpropagation
//! - [`loss`]: SMSE, SDMSE, the combined risk and R²
//! - [`optim`]: Adam, the learning-rate schedule and the training loop
//! - [`baselines`]: least squares and the naive (λ = 0) network
//! - [`checkpoint`]: the `SENN1` model file
//! - [`cli`]: the `senn` command line

pub mod baselines;
pub mod checkpoint;
pub mod circuit;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod loss;
pub mod matrix;
pub mod nn;
pub mod optim;

pub use circuit::{CircuitParams, EnvConfig, Geometry, Performance};
pub use dataset::{Dataset, NormStats, SamplingRanges};
pub use error::{Error, Result};
pub use loss::{LossKind, RiskConfig};
pub use matrix::Matrix;
pub use nn::{SennConfig, SennModel};
pub use optim::TrainConfig;
