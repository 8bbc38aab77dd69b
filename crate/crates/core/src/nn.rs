//! Dense feed-forward engine and the shared-encoder (SE-NN) model.
//!
//! The model has one shared encoder and two heads: the circuit head predicts
//! the six circuit parameters, the physical head the six geometry fields.
//! Gradients are exact reverse mode; the encoder receives the sum of the
//! signals flowing back from both heads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Geometry, Performance};
use crate::dataset::NormStats;
use crate::error::ShapeError;
use crate::matrix::{gemm, Matrix, Op};

pub const INPUT_DIM: usize = 4;
pub const CIRCUIT_DIM: usize = 6;
pub const PHYSICAL_DIM: usize = 6;

#[derive(Debug, Error)]
pub enum NnError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("forward cache is stale: recorded for model version {cached}, model is at {current}")]
    StaleCache { cached: u64, current: u64 },
    #[error("model has no input normalisation statistics")]
    MissingInputStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// `y = act(x Wᵀ + b)` for a batch `x` of shape `b × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out × in`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weights: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    fn check(&self) -> Result<(), NnError> {
        if self.bias.len() != self.out_dim() {
            return Err(ShapeError::new(format!(
                "bias of length {} for a layer with {} outputs",
                self.bias.len(),
                self.out_dim()
            ))
            .into());
        }
        Ok(())
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix, NnError> {
        let mut out = Matrix::zeros(input.rows(), self.out_dim());
        for i in 0..input.rows() {
            out.row_mut(i).copy_from_slice(&self.bias);
        }
        gemm(1.0, input, Op::N, &self.weights, Op::T, 1.0, &mut out)?;
        if self.activation == Activation::Relu {
            for v in out.as_mut_slice() {
                // max(v, 0) would keep -0.0 and NaN; this maps both to 0
                if !(*v > 0.0) {
                    *v = 0.0;
                }
            }
        }
        Ok(out)
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }
}

/// Layer widths of a model. Each head lists its hidden widths; the 6-wide
/// identity output layer is appended automatically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SennConfig {
    pub encoder: Vec<usize>,
    pub circuit_head: Vec<usize>,
    pub physical_head: Vec<usize>,
}

impl SennConfig {
    /// Encoder 3×256, circuit head = output layer only, physical head
    /// 2×256 + output.
    pub fn desk() -> Self {
        Self {
            encoder: vec![256; 3],
            circuit_head: vec![],
            physical_head: vec![256; 2],
        }
    }

    /// Encoder 7×2048; the circuit head adds one layer (8 in total) and the
    /// physical head four (11 in total).
    pub fn full() -> Self {
        Self {
            encoder: vec![2048; 7],
            circuit_head: vec![],
            physical_head: vec![2048; 3],
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.encoder.is_empty() {
            return Err(NnError::InvalidArchitecture(
                "the shared encoder needs at least one layer".into(),
            ));
        }
        let all = self.encoder.iter().chain(&self.circuit_head).chain(&self.physical_head);
        if all.copied().any(|w| w == 0) {
            return Err(NnError::InvalidArchitecture("zero-width layer".into()));
        }
        Ok(())
    }

    pub fn encoder_out(&self) -> usize {
        *self.encoder.last().unwrap_or(&INPUT_DIM)
    }
}

/// One of the three layer stacks of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Encoder,
    CircuitHead,
    PhysicalHead,
}

impl Section {
    pub const ALL: [Section; 3] = [Section::Encoder, Section::CircuitHead, Section::PhysicalHead];
}

#[derive(Debug, Clone, PartialEq)]
pub struct SennModel {
    encoder: Vec<DenseLayer>,
    circuit_head: Vec<DenseLayer>,
    physical_head: Vec<DenseLayer>,
    input_stats: Option<NormStats>,
    // bumped on every mutable access so stale forward caches are detectable
    version: u64,
}

impl SennModel {
    /// Assembles a model from explicit layers, checking the two-head topology.
    pub fn from_layers(
        encoder: Vec<DenseLayer>,
        circuit_head: Vec<DenseLayer>,
        physical_head: Vec<DenseLayer>,
        input_stats: Option<NormStats>,
    ) -> Result<Self, NnError> {
        let model = Self {
            encoder,
            circuit_head,
            physical_head,
            input_stats,
            version: 0,
        };
        model.check_topology()?;
        Ok(model)
    }

    fn check_topology(&self) -> Result<(), NnError> {
        let arch = |msg: String| Err(NnError::InvalidArchitecture(msg));
        if self.encoder.is_empty() {
            return arch("the shared encoder needs at least one layer".into());
        }
        let mut width = INPUT_DIM;
        for (i, layer) in self.encoder.iter().enumerate() {
            layer.check()?;
            if layer.in_dim() != width {
                return arch(format!("encoder layer {i} takes {} inputs, expected {width}", layer.in_dim()));
            }
            width = layer.out_dim();
        }
        let encoder_out = width;
        for (name, head, out) in [
            ("circuit", &self.circuit_head, CIRCUIT_DIM),
            ("physical", &self.physical_head, PHYSICAL_DIM),
        ] {
            let mut width = encoder_out;
            for (i, layer) in head.iter().enumerate() {
                layer.check()?;
                if layer.in_dim() != width {
                    return arch(format!(
                        "{name} head layer {i} takes {} inputs, expected {width}",
                        layer.in_dim()
                    ));
                }
                width = layer.out_dim();
            }
            match head.last() {
                None => return arch(format!("{name} head is empty")),
                Some(last) if last.out_dim() != out => {
                    return arch(format!("{name} head outputs {} values, expected {out}", last.out_dim()))
                }
                Some(last) if last.activation != Activation::Identity => {
                    return arch(format!("{name} head must end in an identity layer"))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn section(&self, s: Section) -> &[DenseLayer] {
        match s {
            Section::Encoder => &self.encoder,
            Section::CircuitHead => &self.circuit_head,
            Section::PhysicalHead => &self.physical_head,
        }
    }

    /// Mutable access to one section's layers. Invalidates outstanding caches.
    pub fn section_mut(&mut self, s: Section) -> &mut [DenseLayer] {
        self.version += 1;
        match s {
            Section::Encoder => &mut self.encoder,
            Section::CircuitHead => &mut self.circuit_head,
            Section::PhysicalHead => &mut self.physical_head,
        }
    }

    pub fn encoder(&self) -> &[DenseLayer] {
        &self.encoder
    }

    pub fn circuit_head(&self) -> &[DenseLayer] {
        &self.circuit_head
    }

    pub fn physical_head(&self) -> &[DenseLayer] {
        &self.physical_head
    }

    pub fn input_stats(&self) -> Option<&NormStats> {
        self.input_stats.as_ref()
    }

    pub fn set_input_stats(&mut self, stats: Option<NormStats>) {
        self.input_stats = stats;
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Layers in declaration order: encoder, circuit head, physical head.
    pub fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.encoder.iter().chain(&self.circuit_head).chain(&self.physical_head)
    }

    /// Every parameter tensor in declaration order (per layer: weights, bias).
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    /// Mutable view of [`tensors`](Self::tensors). Invalidates outstanding caches.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        self.encoder
            .iter_mut()
            .chain(&mut self.circuit_head)
            .chain(&mut self.physical_head)
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().map(DenseLayer::parameter_count).sum()
    }

    pub fn config(&self) -> SennConfig {
        let hidden = |head: &[DenseLayer]| head[..head.len() - 1].iter().map(|l| l.out_dim()).collect();
        SennConfig {
            encoder: self.encoder.iter().map(|l| l.out_dim()).collect(),
            circuit_head: hidden(&self.circuit_head),
            physical_head: hidden(&self.physical_head),
        }
    }

    fn check_input(&self, x: &Matrix) -> Result<(), NnError> {
        if x.cols() != INPUT_DIM {
            return Err(ShapeError::new(format!(
                "input batch has {} columns, expected {INPUT_DIM}",
                x.cols()
            ))
            .into());
        }
        Ok(())
    }

    /// Runs both heads on a normalised `b × 4` batch.
    pub fn forward(&self, x: &Matrix) -> Result<ForwardOutput, NnError> {
        self.check_input(x)?;
        let encoder = run_section(&self.encoder, x.clone())?;
        let features = encoder.last().expect("section output");
        let circuit = run_section(&self.circuit_head, features.clone())?;
        let physical = run_section(&self.physical_head, features.clone())?;
        let z_hat = circuit.last().expect("section output").clone();
        let y_hat = physical.last().expect("section output").clone();
        Ok(ForwardOutput {
            z_hat,
            y_hat,
            cache: ForwardCache {
                version: self.version,
                encoder,
                circuit,
                physical,
            },
        })
    }

    /// Encoder and physical head only, on a normalised batch.
    pub fn predict_physical(&self, x: &Matrix) -> Result<Matrix, NnError> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in self.encoder.iter().chain(&self.physical_head) {
            h = layer.forward(&h)?;
        }
        Ok(h)
    }

    /// Geometry for one performance target, in natural units.
    pub fn predict_geometry(&self, x: &Performance) -> Result<Geometry, NnError> {
        Ok(self.predict_geometries(std::slice::from_ref(x))?[0])
    }

    pub fn predict_geometries(&self, xs: &[Performance]) -> Result<Vec<Geometry>, NnError> {
        let stats = self.input_stats.as_ref().ok_or(NnError::MissingInputStats)?;
        let y = self.predict_physical(&stats.normalize_batch(xs))?;
        Ok(y.row_iter()
            .map(|r| Geometry::from_array(r.try_into().expect("physical head is 6 wide")))
            .collect())
    }

    /// Exact reverse-mode gradients of a scalar loss whose partials with
    /// respect to the two head outputs are `d_z_hat` and `d_y_hat`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_z_hat: &Matrix,
        d_y_hat: &Matrix,
    ) -> Result<GradientSet, NnError> {
        if cache.version != self.version {
            return Err(NnError::StaleCache {
                cached: cache.version,
                current: self.version,
            });
        }
        let shape_ok = cache.encoder.len() == self.encoder.len() + 1
            && cache.circuit.len() == self.circuit_head.len() + 1
            && cache.physical.len() == self.physical_head.len() + 1;
        if !shape_ok {
            return Err(ShapeError::new("forward cache does not match the model's depth").into());
        }
        let batch = cache.encoder[0].rows();
        for (name, g, out) in [("z_hat", d_z_hat, CIRCUIT_DIM), ("y_hat", d_y_hat, PHYSICAL_DIM)] {
            if g.shape() != (batch, out) {
                return Err(ShapeError::new(format!(
                    "d{name} is {:?}, expected ({batch}, {out})",
                    g.shape()
                ))
                .into());
            }
        }

        let (circuit, d_feat_c) = backprop_section(&self.circuit_head, &cache.circuit, d_z_hat, true)?;
        let (physical, d_feat_p) = backprop_section(&self.physical_head, &cache.physical, d_y_hat, true)?;
        let mut d_features = d_feat_c.expect("input gradient requested");
        d_features.add_assign(&d_feat_p.expect("input gradient requested"))?;
        let (encoder, _) = backprop_section(&self.encoder, &cache.encoder, &d_features, false)?;
        Ok(GradientSet {
            encoder,
            circuit_head: circuit,
            physical_head: physical,
        })
    }
}

/// Activations saved by [`SennModel::forward`]: for each section, its input
/// followed by every layer's output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    encoder: Vec<Matrix>,
    circuit: Vec<Matrix>,
    physical: Vec<Matrix>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.encoder[0].rows()
    }

    /// Outputs of every layer in a section, after activation. The section
    /// input is not included.
    pub fn section_activations(&self, s: Section) -> &[Matrix] {
        match s {
            Section::Encoder => &self.encoder[1..],
            Section::CircuitHead => &self.circuit[1..],
            Section::PhysicalHead => &self.physical[1..],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub z_hat: Matrix,
    pub y_hat: Matrix,
    pub cache: ForwardCache,
}

fn run_section(layers: &[DenseLayer], input: Matrix) -> Result<Vec<Matrix>, NnError> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(input);
    for layer in layers {
        let next = layer.forward(acts.last().expect("nonempty"))?;
        acts.push(next);
    }
    Ok(acts)
}

fn backprop_section(
    layers: &[DenseLayer],
    acts: &[Matrix],
    d_out: &Matrix,
    want_input_grad: bool,
) -> Result<(Vec<LayerGrad>, Option<Matrix>), NnError> {
    let mut grads: Vec<LayerGrad> = layers
        .iter()
        .map(|l| LayerGrad::zeros(l.in_dim(), l.out_dim()))
        .collect();
    let batch = acts[0].rows();
    if d_out.as_slice().iter().all(|&v| v == 0.0) {
        // nothing flows back through this section
        let d_in = want_input_grad.then(|| Matrix::zeros(batch, acts[0].cols()));
        return Ok((grads, d_in));
    }
    let mut delta = d_out.clone();
    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        if layer.activation == Activation::Relu {
            for (d, a) in delta.as_mut_slice().iter_mut().zip(acts[l + 1].as_slice()) {
                if !(*a > 0.0) {
                    *d = 0.0;
                }
            }
        }
        gemm(1.0, &delta, Op::T, &acts[l], Op::N, 0.0, &mut grads[l].weights)?;
        grads[l].bias = delta.column_sums();
        if l > 0 || want_input_grad {
            let mut d_in = Matrix::zeros(batch, layer.in_dim());
            gemm(1.0, &delta, Op::N, &layer.weights, Op::N, 0.0, &mut d_in)?;
            delta = d_in;
        }
    }
    Ok((grads, want_input_grad.then_some(delta)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LayerGrad {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weights: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }
}

/// One gradient tensor per model tensor, same shapes and order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub encoder: Vec<LayerGrad>,
    pub circuit_head: Vec<LayerGrad>,
    pub physical_head: Vec<LayerGrad>,
}

impl GradientSet {
    pub fn zeros_like(model: &SennModel) -> Self {
        let z = |ls: &[DenseLayer]| ls.iter().map(|l| LayerGrad::zeros(l.in_dim(), l.out_dim())).collect();
        Self {
            encoder: z(&model.encoder),
            circuit_head: z(&model.circuit_head),
            physical_head: z(&model.physical_head),
        }
    }

    pub fn section(&self, s: Section) -> &[LayerGrad] {
        match s {
            Section::Encoder => &self.encoder,
            Section::CircuitHead => &self.circuit_head,
            Section::PhysicalHead => &self.physical_head,
        }
    }

    /// Tensors in the same order as [`SennModel::tensors`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.encoder
            .iter()
            .chain(&self.circuit_head)
            .chain(&self.physical_head)
            .flat_map(|g| [g.weights.as_slice(), g.bias.as_slice()])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0))
    }
}

/// He-normal weights `N(0, 2 / in_dim)`, zero biases, drawn in declaration order.
pub fn init_model(config: &SennConfig, seed: u64) -> Result<SennModel, NnError> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut stack = |input: usize, hidden: &[usize], output: Option<usize>| {
        let mut layers = Vec::new();
        let mut width = input;
        let widths = hidden
            .iter()
            .map(|&w| (w, Activation::Relu))
            .chain(output.map(|w| (w, Activation::Identity)));
        for (out, activation) in widths {
            let normal = Normal::new(0.0, (2.0 / width as f64).sqrt()).expect("positive std");
            let weights = Matrix::from_fn(out, width, |_, _| normal.sample(&mut rng));
            layers.push(DenseLayer {
                weights,
                bias: vec![0.0; out],
                activation,
            });
            width = out;
        }
        layers
    };
    let encoder = stack(INPUT_DIM, &config.encoder, None);
    let circuit_head = stack(config.encoder_out(), &config.circuit_head, Some(CIRCUIT_DIM));
    let physical_head = stack(config.encoder_out(), &config.physical_head, Some(PHYSICAL_DIM));
    SennModel::from_layers(encoder, circuit_head, physical_head, None)
}
