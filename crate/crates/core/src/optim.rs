//! Adam with bias correction and multiplicative weight decay, the step-decay
//! learning-rate schedule, and the mini-batch training loop.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::loss::{combined_risk, r_squared, sdmse, smse, LossError, RiskConfig};
use crate::matrix::Matrix;
use crate::nn::{init_model, GradientSet, NnError, SennConfig, SennModel};

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("gradient tensor {tensor}, entry {index} is not finite ({value})")]
    NonFiniteGradient { tensor: usize, index: usize, value: f64 },
    #[error("{0} gradient tensors for {1} parameter tensors")]
    TensorCount(usize, usize),
    #[error("tensor {tensor}: gradient has {got} entries, parameter has {want}")]
    TensorShape { tensor: usize, got: usize, want: usize },
    #[error("invalid optimiser setting: {0}")]
    InvalidConfig(String),
    #[error("non-finite training loss {value} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, value: f64 },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("writing training log: {0}")]
    Log(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Multiplicative weight decay `τ`; parameters are scaled by `1 − ητ`.
    pub tau: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            tau: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        let ok = (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.tau >= 0.0
            && self.tau.is_finite();
        if !ok {
            return Err(OptimError::InvalidConfig(format!("{self:?}")));
        }
        Ok(())
    }
}

/// First/second moment accumulators and the completed-step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    /// Zero moments shaped like `sizes`.
    pub fn new(config: AdamConfig, sizes: impl IntoIterator<Item = usize>) -> Self {
        let (m, v) = sizes.into_iter().map(|n| (vec![0.0; n], vec![0.0; n])).unzip();
        Self { config, m, v, t: 0 }
    }

    pub fn for_model(config: AdamConfig, model: &SennModel) -> Self {
        Self::new(config, model.tensors().iter().map(|t| t.len()))
    }
}

/// One Adam update over parallel lists of parameter and gradient tensors:
///
/// ```text
/// t ← t + 1
/// m ← β1 m + (1 − β1) g
/// v ← β2 v + (1 − β2) g ⊙ g
/// m̂ = m / (1 − β1ᵗ),  v̂ = v / (1 − β2ᵗ)
/// θ ← (1 − η τ) θ − η m̂ ⊙ (sqrt(v̂) + ε)⁻¹
/// ```
///
/// Gradients are checked before anything is modified.
pub fn adam_update(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    eta: f64,
) -> Result<(), OptimError> {
    state.config.validate()?;
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(OptimError::TensorCount(grads.len(), params.len()));
    }
    for (tensor, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || state.m[tensor].len() != p.len() {
            return Err(OptimError::TensorShape {
                tensor,
                got: g.len(),
                want: p.len(),
            });
        }
        if let Some((index, &value)) = g.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(OptimError::NonFiniteGradient { tensor, index, value });
        }
    }

    let AdamConfig { beta1, beta2, eps, tau } = state.config;
    state.t += 1;
    let t = i32::try_from(state.t).unwrap_or(i32::MAX);
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    let decay = 1.0 - eta * tau;
    for (tensor, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.m[tensor];
        let v = &mut state.v[tensor];
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] = decay * p[i] - eta * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// [`adam_update`] applied to every tensor of a model.
pub fn adam_step(
    model: &mut SennModel,
    grads: &GradientSet,
    state: &mut AdamState,
    eta: f64,
) -> Result<(), OptimError> {
    let g = grads.tensors();
    let mut p = model.tensors_mut();
    adam_update(&mut p, &g, state, eta)
}

/// `η_t = lr0 · factor^⌊epoch / every⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr0: f64,
    pub decay_every: usize,
    pub factor: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            lr0: 1e-3,
            decay_every: 50,
            factor: 0.5,
        }
    }
}

impl LrSchedule {
    pub fn eta(&self, epoch: usize) -> f64 {
        let drops = (epoch / self.decay_every.max(1)) as i32;
        self.lr0 * self.factor.powi(drops)
    }
}

/// Learning rate for `epoch` under the default halve-every-50 schedule.
pub fn lr_schedule(epoch: usize) -> f64 {
    LrSchedule::default().eta(epoch)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    pub adam: AdamConfig,
    pub risk: RiskConfig,
    /// Seeds weight initialisation.
    pub init_seed: u64,
    /// Seeds the per-epoch shuffles.
    pub shuffle_seed: u64,
}

impl TrainConfig {
    /// 500 epochs, batches of 1024.
    pub fn full() -> Self {
        Self {
            epochs: 500,
            batch_size: 1024,
            schedule: LrSchedule::default(),
            adam: AdamConfig::default(),
            risk: RiskConfig::default(),
            init_seed: 0,
            shuffle_seed: 1,
        }
    }

    /// Desk-scale run: 20 epochs, batches of 256.
    pub fn desk() -> Self {
        Self {
            epochs: 20,
            batch_size: 256,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(OptimError::InvalidConfig("epochs and batch size must be positive".into()));
        }
        if !(self.schedule.lr0 > 0.0 && self.schedule.lr0.is_finite()) {
            return Err(OptimError::InvalidConfig(format!("lr0 = {}", self.schedule.lr0)));
        }
        self.adam.validate()?;
        self.risk.validate()?;
        Ok(())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub eta: f64,
    pub train_loss: f64,
    pub test_smse: f64,
    pub test_sdmse: f64,
    pub test_r2: f64,
}

pub const LOG_HEADER: &str = "epoch,eta,train_loss,test_smse,test_sdmse,test_r2";

impl EpochLog {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.epoch, self.eta, self.train_loss, self.test_smse, self.test_sdmse, self.test_r2
        )
    }
}

/// Test-split metrics of physical-parameter predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub smse: f64,
    pub sdmse: f64,
    pub r2: f64,
}

impl Metrics {
    pub fn of(pred: &Matrix, target: &Matrix) -> Result<Self, LossError> {
        Ok(Self {
            smse: smse(pred, target)?,
            sdmse: sdmse(pred, target)?,
            r2: r_squared(pred, target)?,
        })
    }
}

const EVAL_CHUNK: usize = 4096;

/// Physical-head predictions for the given dataset rows, evaluated in chunks.
pub fn predict_rows(model: &SennModel, data: &Dataset, rows: &[usize]) -> Result<Matrix, OptimError> {
    let mut out = Vec::with_capacity(rows.len() * 6);
    for chunk in rows.chunks(EVAL_CHUNK) {
        let x = data.normalized_inputs(chunk)?;
        out.extend_from_slice(model.predict_physical(&x)?.as_slice());
    }
    Ok(Matrix::from_vec(rows.len(), 6, out).map_err(NnError::from)?)
}

/// SMSE, SDMSE and R² of `model` on the dataset's test split.
pub fn evaluate_test(model: &SennModel, data: &Dataset) -> Result<Metrics, OptimError> {
    let rows = data.test_indices()?;
    let pred = predict_rows(model, data, &rows)?;
    Ok(Metrics::of(&pred, &data.geometry_targets(&rows))?)
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SennModel,
    pub log: Vec<EpochLog>,
}

fn epoch_rng(shuffle_seed: u64, epoch: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(shuffle_seed);
    rng.set_stream(epoch as u64);
    rng
}

/// Trains a fresh model initialised from `train_config.init_seed`.
pub fn train(
    data: &Dataset,
    model_config: &SennConfig,
    train_config: &TrainConfig,
) -> Result<TrainOutcome, OptimError> {
    train_with_log(data, model_config, train_config, None)
}

/// [`train`], appending one CSV line per epoch to `log_sink` when given.
pub fn train_with_log(
    data: &Dataset,
    model_config: &SennConfig,
    train_config: &TrainConfig,
    log_sink: Option<&mut dyn Write>,
) -> Result<TrainOutcome, OptimError> {
    let mut model = init_model(model_config, train_config.init_seed)?;
    model.set_input_stats(Some(*data.norm_stats()?));
    train_model(&mut model, data, train_config, log_sink).map(|log| TrainOutcome { model, log })
}

/// Runs the training loop on an existing model.
pub fn train_model(
    model: &mut SennModel,
    data: &Dataset,
    cfg: &TrainConfig,
    mut log_sink: Option<&mut dyn Write>,
) -> Result<Vec<EpochLog>, OptimError> {
    cfg.validate()?;
    data.validate_targets()?;
    let train_rows = data.train_indices()?;
    if train_rows.is_empty() {
        return Err(DatasetError::MissingSplit.into());
    }
    if model.input_stats().is_none() {
        model.set_input_stats(Some(*data.norm_stats()?));
    }

    // Inputs and targets are gathered once; batches index into them.
    let x_all = data.normalized_inputs(&train_rows)?;
    let z_all = data.circuit_targets(&train_rows);
    let y_all = data.geometry_targets(&train_rows);

    let mut state = AdamState::for_model(cfg.adam, model);
    let mut log = Vec::with_capacity(cfg.epochs);
    if let Some(sink) = log_sink.as_deref_mut() {
        writeln!(sink, "{LOG_HEADER}")?;
    }
    let mut order: Vec<usize> = (0..train_rows.len()).collect();
    for epoch in 0..cfg.epochs {
        let eta = cfg.schedule.eta(epoch);
        order.sort_unstable();
        order.shuffle(&mut epoch_rng(cfg.shuffle_seed, epoch));
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = x_all.select_rows(idx);
            let z = z_all.select_rows(idx);
            let y = y_all.select_rows(idx);
            let out = model.forward(&x)?;
            let risk = combined_risk(&out.z_hat, &z, &out.y_hat, &y, &cfg.risk)?;
            if !risk.value.is_finite() {
                return Err(OptimError::NonFiniteLoss {
                    epoch,
                    batch,
                    value: risk.value,
                });
            }
            let grads = model.backward(&out.cache, &risk.d_z_hat, &risk.d_y_hat)?;
            adam_step(model, &grads, &mut state, eta)?;
            loss_sum += risk.value;
            batches += 1;
        }
        let metrics = evaluate_test(model, data)?;
        let entry = EpochLog {
            epoch,
            eta,
            train_loss: loss_sum / batches as f64,
            test_smse: metrics.smse,
            test_sdmse: metrics.sdmse,
            test_r2: metrics.r2,
        };
        if let Some(sink) = log_sink.as_deref_mut() {
            writeln!(sink, "{}", entry.csv_line())?;
            sink.flush()?;
        }
        log.push(entry);
    }
    Ok(log)
}
