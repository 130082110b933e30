use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::TransformedPair;
use crate::dynamics::{hnn_vector_field, transformed_vector_field, CoordinateMap, StructureDoc, StructureMatrix};
use crate::error::{HnnError, Result};
use crate::nn::model_io::{vector_net_doc, vector_net_from_doc};
use crate::nn::{LayeredNet, NetworkDoc, NeuralHamiltonian, MODEL_SCHEMA_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `du/dt = S ∇H_NN(u)` in the data coordinates.
    NaiveHnn,
    /// `dx/dt = J⁻¹ S J⁻ᵀ ∇H_NN(x)` with a learned map `u = u_NN(x)`.
    Transformed,
    /// `du/dt = f_NN(u)`.
    NeuralOde,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "naive_hnn" | "hnn" => Ok(ModelKind::NaiveHnn),
            "transformed" | "coordinate_transform" => Ok(ModelKind::Transformed),
            "neural_ode" => Ok(ModelKind::NeuralOde),
            other => Err(HnnError::InvalidArgument(format!(
                "unknown model '{other}' (expected naive_hnn, transformed or neural_ode)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::NaiveHnn => "naive_hnn",
            ModelKind::Transformed => "transformed",
            ModelKind::NeuralOde => "neural_ode",
        }
    }
}

/// A learned vector field ready to simulate.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel {
    NaiveHnn {
        hamiltonian: NeuralHamiltonian,
        structure: StructureMatrix,
    },
    Transformed {
        pair: TransformedPair,
        structure: StructureMatrix,
    },
    NeuralOde {
        net: LayeredNet,
        seed: u64,
    },
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::NaiveHnn { .. } => ModelKind::NaiveHnn,
            TrainedModel::Transformed { .. } => ModelKind::Transformed,
            TrainedModel::NeuralOde { .. } => ModelKind::NeuralOde,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedModel::NaiveHnn { hamiltonian, .. } => hamiltonian.input_dim(),
            TrainedModel::Transformed { pair, .. } => pair.hamiltonian.input_dim(),
            TrainedModel::NeuralOde { net, .. } => net.in_dim(),
        }
    }

    pub fn hamiltonian(&self) -> Option<&NeuralHamiltonian> {
        match self {
            TrainedModel::NaiveHnn { hamiltonian, .. } => Some(hamiltonian),
            TrainedModel::Transformed { pair, .. } => Some(&pair.hamiltonian),
            TrainedModel::NeuralOde { .. } => None,
        }
    }

    pub fn hamiltonian_mut(&mut self) -> Option<&mut NeuralHamiltonian> {
        match self {
            TrainedModel::NaiveHnn { hamiltonian, .. } => Some(hamiltonian),
            TrainedModel::Transformed { pair, .. } => Some(&mut pair.hamiltonian),
            TrainedModel::NeuralOde { .. } => None,
        }
    }

    pub fn vector_field(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            TrainedModel::NaiveHnn { hamiltonian, structure } => hnn_vector_field(hamiltonian, structure, x),
            TrainedModel::Transformed { pair, structure } => {
                transformed_vector_field(&pair.hamiltonian, &pair.cmap, structure, x)
            }
            TrainedModel::NeuralOde { net, .. } => {
                let row = ndarray::ArrayView2::from_shape((1, x.len()), x).expect("row view");
                net.check_batch(&row)?;
                Ok(net.forward(row).row(0).to_vec())
            }
        }
    }

    pub fn to_doc(&self, config: Option<serde_json::Value>) -> ModelDoc {
        let mut doc = ModelDoc {
            schema_version: MODEL_SCHEMA_VERSION,
            model: self.kind(),
            hamiltonian: None,
            cmap: None,
            cmap_frozen: false,
            vector_net: None,
            structure: None,
            config,
        };
        match self {
            TrainedModel::NaiveHnn { hamiltonian, structure } => {
                doc.hamiltonian = Some(hamiltonian.to_doc());
                doc.structure = Some(structure.to_doc());
            }
            TrainedModel::Transformed { pair, structure } => {
                doc.hamiltonian = Some(pair.hamiltonian.to_doc());
                doc.cmap = Some(vector_net_doc(&pair.cmap.net, pair.cmap.seed));
                doc.cmap_frozen = pair.cmap.frozen;
                doc.structure = Some(structure.to_doc());
            }
            TrainedModel::NeuralOde { net, seed } => {
                doc.vector_net = Some(vector_net_doc(net, *seed));
            }
        }
        doc
    }

    pub fn from_doc(doc: &ModelDoc) -> Result<Self> {
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(HnnError::Format(format!(
                "unsupported schema_version {}",
                doc.schema_version
            )));
        }
        let missing = |what: &str| HnnError::Format(format!("{} model file lacks '{what}'", doc.model.as_str()));
        let structure = || -> Result<StructureMatrix> {
            StructureMatrix::from_doc(doc.structure.as_ref().ok_or_else(|| missing("structure"))?)
        };
        let hamiltonian =
            || -> Result<NeuralHamiltonian> { NeuralHamiltonian::from_doc(doc.hamiltonian.as_ref().ok_or_else(|| missing("hamiltonian"))?) };
        Ok(match doc.model {
            ModelKind::NaiveHnn => TrainedModel::NaiveHnn {
                hamiltonian: hamiltonian()?,
                structure: structure()?,
            },
            ModelKind::Transformed => {
                let cdoc = doc.cmap.as_ref().ok_or_else(|| missing("cmap"))?;
                let mut cmap = CoordinateMap::new(vector_net_from_doc(cdoc)?, cdoc.seed)?;
                cmap.frozen = doc.cmap_frozen;
                TrainedModel::Transformed {
                    pair: TransformedPair {
                        hamiltonian: hamiltonian()?,
                        cmap,
                    },
                    structure: structure()?,
                }
            }
            ModelKind::NeuralOde => {
                let vdoc = doc.vector_net.as_ref().ok_or_else(|| missing("vector_net"))?;
                TrainedModel::NeuralOde {
                    net: vector_net_from_doc(vdoc)?,
                    seed: vdoc.seed,
                }
            }
        })
    }

    pub fn save(&self, path: &Path, config: Option<serde_json::Value>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_doc(config))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_doc(&doc)
    }
}

/// Checkpoint document for any [`TrainedModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub schema_version: u32,
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<NetworkDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmap: Option<NetworkDoc>,
    #[serde(default)]
    pub cmap_frozen: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector_net: Option<NetworkDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}
