//! Binary checkpoint container.
//!
//! Layout: the magic bytes `SENN1`, a newline, one line of compact JSON
//! describing the layers, normalisation statistics and training settings, a
//! newline, then every tensor as little-endian `f64` in declaration order
//! (per layer: weights row-major, then bias).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::LinearModel;
use crate::dataset::NormStats;
use crate::matrix::Matrix;
use crate::nn::{Activation, DenseLayer, NnError, SennConfig, SennModel};
use crate::optim::TrainConfig;

pub const MAGIC: &[u8; 5] = b"SENN1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: missing SENN1 magic")]
    BadMagic,
    #[error("malformed checkpoint header: {0}")]
    Header(String),
    #[error("checkpoint payload has {got} bytes, header describes {want}")]
    PayloadLength { got: usize, want: usize },
    #[error("checkpoint does not match the expected architecture: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Which model family a checkpoint holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Shared encoder trained with `λ > 0`.
    Senn,
    /// Same network trained with `λ = 0`.
    Naive,
    Linear,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Senn => "SE-NN",
            ModelKind::Naive => "naive-NN",
            ModelKind::Linear => "Linear Regression",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct LayerSpec {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    model_kind: ModelKind,
    encoder: Vec<LayerSpec>,
    circuit_head: Vec<LayerSpec>,
    physical_head: Vec<LayerSpec>,
    input_stats: Option<NormStats>,
    config: Option<SennConfig>,
    training: Option<TrainConfig>,
    value_count: usize,
}

/// A trained model of either family.
#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Network(SennModel),
    Linear(LinearModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub model: SavedModel,
    /// Echo of the training configuration, seeds included.
    pub training: Option<TrainConfig>,
}

fn specs(layers: &[DenseLayer]) -> Vec<LayerSpec> {
    layers
        .iter()
        .map(|l| LayerSpec {
            in_dim: l.in_dim(),
            out_dim: l.out_dim(),
            activation: l.activation,
        })
        .collect()
}

fn value_count(specs: &[LayerSpec]) -> usize {
    specs.iter().map(|s| s.in_dim * s.out_dim + s.out_dim).sum()
}

impl Checkpoint {
    pub fn network(kind: ModelKind, model: SennModel, training: Option<TrainConfig>) -> Self {
        Self {
            kind,
            model: SavedModel::Network(model),
            training,
        }
    }

    pub fn linear(model: LinearModel) -> Self {
        Self {
            kind: ModelKind::Linear,
            model: SavedModel::Linear(model),
            training: None,
        }
    }

    pub fn as_network(&self) -> Option<&SennModel> {
        match &self.model {
            SavedModel::Network(m) => Some(m),
            SavedModel::Linear(_) => None,
        }
    }

    pub fn input_stats(&self) -> Option<&NormStats> {
        match &self.model {
            SavedModel::Network(m) => m.input_stats(),
            SavedModel::Linear(l) => Some(&l.input_stats),
        }
    }

    /// Physical-parameter predictions for a normalised `n × 4` batch.
    pub fn predict_physical(&self, x: &Matrix) -> Result<Matrix, NnError> {
        match &self.model {
            SavedModel::Network(m) => m.predict_physical(x),
            SavedModel::Linear(l) => l.predict(x).map_err(NnError::from),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (header, tensors): (Header, Vec<&[f64]>) = match &self.model {
            SavedModel::Network(m) => {
                let encoder = specs(m.encoder());
                let circuit_head = specs(m.circuit_head());
                let physical_head = specs(m.physical_head());
                let values = value_count(&encoder) + value_count(&circuit_head) + value_count(&physical_head);
                (
                    Header {
                        model_kind: self.kind,
                        encoder,
                        circuit_head,
                        physical_head,
                        input_stats: m.input_stats().copied(),
                        config: Some(m.config()),
                        training: self.training.clone(),
                        value_count: values,
                    },
                    m.tensors(),
                )
            }
            SavedModel::Linear(l) => {
                let layer = [LayerSpec {
                    in_dim: l.weights.cols(),
                    out_dim: l.weights.rows(),
                    activation: Activation::Identity,
                }];
                (
                    Header {
                        model_kind: ModelKind::Linear,
                        encoder: vec![],
                        circuit_head: vec![],
                        physical_head: layer.to_vec(),
                        input_stats: Some(l.input_stats),
                        config: None,
                        training: None,
                        value_count: value_count(&layer),
                    },
                    vec![l.weights.as_slice(), l.bias.as_slice()],
                )
            }
        };
        let json = serde_json::to_string(&header).expect("header is serialisable");
        let mut out = Vec::with_capacity(MAGIC.len() + json.len() + 2 + header.value_count * 8);
        out.extend_from_slice(MAGIC);
        out.push(b'\n');
        out.extend_from_slice(json.as_bytes());
        out.push(b'\n');
        for t in tensors {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let rest = bytes
            .strip_prefix(MAGIC.as_slice())
            .and_then(|r| r.strip_prefix(b"\n"))
            .ok_or(CheckpointError::BadMagic)?;
        let newline = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| CheckpointError::Header("unterminated header".into()))?;
        let header: Header = serde_json::from_slice(&rest[..newline])
            .map_err(|e| CheckpointError::Header(e.to_string()))?;
        let payload = &rest[newline + 1..];

        let sections = [&header.encoder, &header.circuit_head, &header.physical_head];
        let want_values: usize = sections.iter().map(|s| value_count(s)).sum();
        if want_values != header.value_count {
            return Err(CheckpointError::Header(format!(
                "layer list describes {want_values} values, header declares {}",
                header.value_count
            )));
        }
        if payload.len() != want_values * 8 {
            return Err(CheckpointError::PayloadLength {
                got: payload.len(),
                want: want_values * 8,
            });
        }
        let mut values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let mut build = |specs: &[LayerSpec]| -> Vec<DenseLayer> {
            specs
                .iter()
                .map(|s| {
                    let w: Vec<f64> = values.by_ref().take(s.in_dim * s.out_dim).collect();
                    let bias: Vec<f64> = values.by_ref().take(s.out_dim).collect();
                    DenseLayer {
                        weights: Matrix::from_vec(s.out_dim, s.in_dim, w).expect("length checked above"),
                        bias,
                        activation: s.activation,
                    }
                })
                .collect()
        };
        let encoder = build(&header.encoder);
        let circuit_head = build(&header.circuit_head);
        let mut physical_head = build(&header.physical_head);

        let model = match header.model_kind {
            ModelKind::Linear => {
                if !encoder.is_empty() || !circuit_head.is_empty() || physical_head.len() != 1 {
                    return Err(CheckpointError::Mismatch("linear checkpoint must hold exactly one layer".into()));
                }
                let layer = physical_head.pop().expect("one layer");
                if layer.in_dim() != 4 || layer.out_dim() != 6 || layer.activation != Activation::Identity {
                    return Err(CheckpointError::Mismatch(format!(
                        "linear layer is {}→{}, expected 4→6 identity",
                        layer.in_dim(),
                        layer.out_dim()
                    )));
                }
                let input_stats = header
                    .input_stats
                    .ok_or_else(|| CheckpointError::Header("linear checkpoint without input stats".into()))?;
                SavedModel::Linear(LinearModel {
                    weights: layer.weights,
                    bias: layer.bias,
                    input_stats,
                })
            }
            ModelKind::Senn | ModelKind::Naive => {
                let model = SennModel::from_layers(encoder, circuit_head, physical_head, header.input_stats)
                    .map_err(|e| CheckpointError::Mismatch(e.to_string()))?;
                if let Some(cfg) = &header.config {
                    if *cfg != model.config() {
                        return Err(CheckpointError::Mismatch(format!(
                            "config echo {cfg:?} disagrees with layer list {:?}",
                            model.config()
                        )));
                    }
                }
                SavedModel::Network(model)
            }
        };
        Ok(Self {
            kind: header.model_kind,
            model,
            training: header.training,
        })
    }

    /// Like [`from_bytes`](Self::from_bytes), additionally requiring a network
    /// with exactly the given layer widths.
    pub fn from_bytes_expecting(bytes: &[u8], expected: &SennConfig) -> Result<Self, CheckpointError> {
        let ckpt = Self::from_bytes(bytes)?;
        match ckpt.as_network() {
            Some(m) if m.config() == *expected => Ok(ckpt),
            Some(m) => Err(CheckpointError::Mismatch(format!(
                "expected {expected:?}, found {:?}",
                m.config()
            ))),
            None => Err(CheckpointError::Mismatch("expected a network, found a linear model".into())),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.to_bytes()).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_model;

    fn small() -> SennConfig {
        SennConfig {
            encoder: vec![8, 8],
            circuit_head: vec![5],
            physical_head: vec![7, 3],
        }
    }

    fn stats() -> NormStats {
        NormStats {
            mean: [20.0, 0.0, 225.0, 225.0],
            std: [10.0, 15.0, 100.0, 100.0],
        }
    }

    #[test]
    fn network_round_trip_is_exact() {
        let mut m = init_model(&small(), 3).unwrap();
        m.set_input_stats(Some(stats()));
        let ckpt = Checkpoint::network(ModelKind::Senn, m.clone(), Some(TrainConfig::desk()));
        let bytes = ckpt.to_bytes();
        assert!(bytes.starts_with(b"SENN1\n"));
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.kind, ModelKind::Senn);
        assert_eq!(back.training, Some(TrainConfig::desk()));
        let net = back.as_network().unwrap();
        assert_eq!(net.tensors(), m.tensors());
        assert_eq!(net.input_stats(), Some(&stats()));
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let m = init_model(&small(), 3).unwrap();
        let bytes = Checkpoint::network(ModelKind::Naive, m, None).to_bytes();
        assert!(matches!(Checkpoint::from_bytes(b"SENN2\n{}\n"), Err(CheckpointError::BadMagic)));
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 8]),
            Err(CheckpointError::PayloadLength { .. })
        ));
        let text = String::from_utf8_lossy(&bytes[6..bytes.iter().skip(6).position(|&b| b == b'\n').unwrap() + 6])
            .into_owned();
        let tampered = text.replacen("\"out_dim\":8", "\"out_dim\":9", 1);
        let mut bad = b"SENN1\n".to_vec();
        bad.extend_from_slice(tampered.as_bytes());
        bad.push(b'\n');
        assert!(Checkpoint::from_bytes(&bad).is_err());
    }

    #[test]
    fn expected_architecture_is_enforced() {
        let m = init_model(&small(), 3).unwrap();
        let bytes = Checkpoint::network(ModelKind::Senn, m, None).to_bytes();
        assert!(Checkpoint::from_bytes_expecting(&bytes, &small()).is_ok());
        assert!(matches!(
            Checkpoint::from_bytes_expecting(&bytes, &SennConfig::desk()),
            Err(CheckpointError::Mismatch(_))
        ));
    }
}
