use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use super::activation::{Activation, ActivationKind};
use super::hamiltonian::{NeuralHamiltonian, Readout};
use super::layer::LinearLayer;
use super::network::{Layer, LayeredNet};
use crate::error::{HnnError, Result};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    CircularConv1d,
}

/// One layer as stored on disk. `dims` is `[out, in]` for dense layers and
/// `[grid, out_channels, in_channels, kernel_size]` for convolutions;
/// weights are row-major over those axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerDoc {
    pub kind: LayerKind,
    pub dims: Vec<usize>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: ActivationKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkDoc {
    pub schema_version: u32,
    pub input_dim: usize,
    pub layers: Vec<LayerDoc>,
    /// `None` for vector-output networks.
    pub readout: Option<Readout>,
    pub seed: u64,
}

pub fn layers_to_docs(net: &LayeredNet) -> Vec<LayerDoc> {
    net.layers()
        .iter()
        .map(|l| match &l.linear {
            LinearLayer::Dense { weights, bias } => LayerDoc {
                kind: LayerKind::Dense,
                dims: vec![weights.nrows(), weights.ncols()],
                weights: weights.iter().copied().collect(),
                bias: bias.to_vec(),
                activation: l.activation.kind,
            },
            LinearLayer::CircularConv1d {
                grid,
                weights,
                bias,
            } => {
                let (o, i, k) = weights.dim();
                LayerDoc {
                    kind: LayerKind::CircularConv1d,
                    dims: vec![*grid, o, i, k],
                    weights: weights.iter().copied().collect(),
                    bias: bias.to_vec(),
                    activation: l.activation.kind,
                }
            }
        })
        .collect()
}

pub fn layers_from_docs(docs: &[LayerDoc]) -> Result<LayeredNet> {
    let mut layers = Vec::with_capacity(docs.len());
    for (idx, d) in docs.iter().enumerate() {
        let bad = |msg: &str| HnnError::Format(format!("layer {idx}: {msg}"));
        let linear = match d.kind {
            LayerKind::Dense => {
                let [o, i] = d.dims[..] else {
                    return Err(bad("dense layer needs dims [out, in]"));
                };
                let w = Array2::from_shape_vec((o, i), d.weights.clone())
                    .map_err(|_| bad("weight count does not match dims"))?;
                LinearLayer::dense(w, Array1::from(d.bias.clone()))?
            }
            LayerKind::CircularConv1d => {
                let [g, o, i, k] = d.dims[..] else {
                    return Err(bad("conv layer needs dims [grid, out, in, kernel]"));
                };
                let w = Array3::from_shape_vec((o, i, k), d.weights.clone())
                    .map_err(|_| bad("weight count does not match dims"))?;
                LinearLayer::circular_conv(g, w, Array1::from(d.bias.clone()))?
            }
        };
        layers.push(Layer {
            linear,
            activation: Activation::from_kind(d.activation),
        });
    }
    LayeredNet::new(layers)
}

impl NeuralHamiltonian {
    pub fn to_doc(&self) -> NetworkDoc {
        NetworkDoc {
            schema_version: MODEL_SCHEMA_VERSION,
            input_dim: self.input_dim(),
            layers: layers_to_docs(self.net()),
            readout: Some(self.readout()),
            seed: self.seed(),
        }
    }

    pub fn from_doc(doc: &NetworkDoc) -> Result<Self> {
        check_version(doc)?;
        let net = layers_from_docs(&doc.layers)?;
        if net.in_dim() != doc.input_dim {
            return Err(HnnError::Format(format!(
                "input_dim {} does not match first layer ({})",
                doc.input_dim,
                net.in_dim()
            )));
        }
        let readout = doc
            .readout
            .ok_or_else(|| HnnError::Format("scalar model needs a readout".into()))?;
        NeuralHamiltonian::new(net, readout, doc.seed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_doc(&serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn vector_net_doc(net: &LayeredNet, seed: u64) -> NetworkDoc {
    NetworkDoc {
        schema_version: MODEL_SCHEMA_VERSION,
        input_dim: net.in_dim(),
        layers: layers_to_docs(net),
        readout: None,
        seed,
    }
}

pub fn vector_net_from_doc(doc: &NetworkDoc) -> Result<LayeredNet> {
    check_version(doc)?;
    layers_from_docs(&doc.layers)
}

fn check_version(doc: &NetworkDoc) -> Result<()> {
    if doc.schema_version != MODEL_SCHEMA_VERSION {
        return Err(HnnError::Format(format!(
            "unsupported schema_version {} (expected {MODEL_SCHEMA_VERSION})",
            doc.schema_version
        )));
    }
    Ok(())
}
