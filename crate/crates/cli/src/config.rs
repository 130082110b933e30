use std::collections::BTreeMap;
use std::path::Path;

use hnn_core::dynamics::{ReferenceSystem, StructureMatrix, SystemName};
use hnn_core::integrators::{Sampler, DEFAULT_ATOL, DEFAULT_RTOL};
use hnn_core::nn::{Architecture, InitScheme, Readout};
use hnn_core::training::{AdamConfig, ModelKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct Config {
    pub seed: u64,
    pub system: SystemSection,
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub simulate: SimulateSection,
    pub bounds: BoundsSection,
    pub diagnose: DiagnoseSection,
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub name: String,
    pub params: BTreeMap<String, f64>,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            name: "mass_spring".into(),
            params: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub n_traj: Option<usize>,
    pub t_span: Option<[f64; 2]>,
    pub n_points: Option<usize>,
    pub sampler: Option<Sampler>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// naive_hnn | transformed | neural_ode
    pub kind: Option<String>,
    /// mlp | conv
    pub arch: Option<String>,
    pub hidden: Option<Vec<usize>>,
    pub channels: Option<Vec<usize>>,
    pub kernels: Option<Vec<usize>>,
    /// glorot | orthogonal
    pub init: Option<InitScheme>,
    pub p: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub iterations: Option<usize>,
    /// Omitted for whole-dataset batches.
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    /// model | system
    pub source: Option<String>,
    pub t_span: Option<[f64; 2]>,
    pub dt: Option<f64>,
    /// Initial state; drawn from the sampler with the run seed when absent.
    pub initial: Option<Vec<f64>>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSection {
    pub delta: f64,
    pub c_loss: Option<f64>,
    pub c_sobolev: Option<f64>,
    pub inf_density: Option<f64>,
    pub eps0: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection {
            delta: 0.05,
            c_loss: None,
            c_sobolev: None,
            inf_density: None,
            eps0: 1.0,
            c1: None,
            c2: None,
            c3: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSection {
    /// energy_drift | recurrence | gradient_error | value_error
    pub kind: String,
    /// system | model, for energy_drift.
    pub energy: String,
    pub t_center: f64,
    pub window: f64,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        DiagnoseSection {
            kind: "energy_drift".into(),
            energy: "system".into(),
            t_center: 9.8,
            window: 0.5,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn reference_system(&self) -> Result<ReferenceSystem, CliError> {
        Ok(ReferenceSystem::from_params(&self.system.name, &self.system.params)?)
    }

    fn system_name(&self) -> Result<SystemName, CliError> {
        Ok(SystemName::parse(&self.system.name)?)
    }

    /// Fills every unset field with the default for the configured system.
    pub fn resolve(&mut self) -> Result<(), CliError> {
        let sys = self.reference_system()?;
        let name = self.system_name()?;
        let kdv = name == SystemName::KdvSemidiscrete;
        self.system.params = sys.params();

        let d = &mut self.data;
        d.n_traj.get_or_insert(if kdv { 1 } else { 100 });
        d.t_span.get_or_insert(if kdv { [0.0, 2.0] } else { [0.0, 5.0] });
        d.n_points.get_or_insert(if kdv { 201 } else { 100 });
        d.sampler.get_or_insert_with(|| Sampler::default_for(&sys));
        d.rtol.get_or_insert(DEFAULT_RTOL);
        d.atol.get_or_insert(DEFAULT_ATOL);

        let m = &mut self.model;
        let kind = m.kind.get_or_insert_with(|| {
            match name {
                SystemName::MassSpring | SystemName::DoublePendulum => "transformed",
                _ => "naive_hnn",
            }
            .into()
        });
        *kind = ModelKind::parse(kind)?.as_str().into();
        let arch = m.arch.get_or_insert_with(|| if kdv { "conv" } else { "mlp" }.into());
        match arch.as_str() {
            "mlp" => {
                m.hidden.get_or_insert_with(|| vec![50, 50]);
                m.init.get_or_insert(InitScheme::Glorot);
            }
            "conv" => {
                if !kdv {
                    return Err(CliError::Config("arch = \"conv\" needs the kdv_semidiscrete grid".into()));
                }
                m.channels.get_or_insert_with(|| vec![200, 200]);
                m.kernels.get_or_insert_with(|| vec![3, 1, 1]);
                m.init.get_or_insert(InitScheme::Orthogonal);
            }
            other => return Err(CliError::Config(format!("unknown arch '{other}' (mlp | conv)"))),
        }
        m.p.get_or_insert(2.0);

        let t = &mut self.train;
        t.iterations.get_or_insert(10_000);
        if t.batch_size.is_none() && !kdv {
            t.batch_size = Some(if name == SystemName::MassSpring { 100 } else { 200 });
        }
        let adam = AdamConfig::default();
        t.lr.get_or_insert(adam.lr);
        t.beta1.get_or_insert(adam.beta1);
        t.beta2.get_or_insert(adam.beta2);
        t.eps.get_or_insert(adam.eps);

        let s = &mut self.simulate;
        let source = s.source.get_or_insert_with(|| "model".into());
        if source != "model" && source != "system" {
            return Err(CliError::Config(format!("simulate.source '{source}' (model | system)")));
        }
        s.t_span.get_or_insert(if kdv { [0.0, 11.0] } else { [0.0, 5.0] });
        s.dt.get_or_insert(if kdv { 0.01 } else { 0.05 });
        s.rtol.get_or_insert(DEFAULT_RTOL);
        s.atol.get_or_insert(DEFAULT_ATOL);
        if let Some(init) = &s.initial {
            if init.len() != sys.dim() {
                return Err(CliError::Config(format!(
                    "simulate.initial has {} entries, the system has {}",
                    init.len(),
                    sys.dim()
                )));
            }
        }
        Ok(())
    }

    pub fn model_kind(&self) -> ModelKind {
        ModelKind::parse(self.model.kind.as_deref().expect("resolved")).expect("resolved")
    }

    pub fn architecture(&self, dim: usize) -> Architecture {
        let m = &self.model;
        let arch = if m.arch.as_deref() == Some("conv") {
            Architecture::conv(
                dim,
                m.channels.as_deref().expect("resolved"),
                m.kernels.as_deref().expect("resolved"),
            )
        } else {
            Architecture::mlp(dim, m.hidden.as_deref().expect("resolved"), 1, Readout::FinalScalar)
        };
        arch.with_init(m.init.expect("resolved"))
    }

    /// Vector-valued network of the same widths, for coordinate maps and
    /// the neural-ODE field.
    pub fn vector_architecture(&self, dim: usize) -> Architecture {
        let hidden = self.model.hidden.clone().unwrap_or_else(|| vec![50, 50]);
        Architecture::mlp(dim, &hidden, dim, Readout::SumOfOutputs)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            adam: AdamConfig {
                lr: t.lr.expect("resolved"),
                beta1: t.beta1.expect("resolved"),
                beta2: t.beta2.expect("resolved"),
                eps: t.eps.expect("resolved"),
            },
            iterations: t.iterations.expect("resolved"),
            batch_size: t.batch_size.unwrap_or(usize::MAX),
            seed: self.seed,
        }
    }
}

/// The matrix the learned Hamiltonian's gradient is multiplied by: the
/// system's own when it is in structured coordinates, otherwise canonical.
pub fn learning_structure(sys: &ReferenceSystem) -> Result<StructureMatrix, CliError> {
    match sys.structure() {
        Some(s) => Ok(s),
        None => {
            let n = sys.dim();
            if !n.is_multiple_of(2) {
                return Err(CliError::Config(format!("odd state dimension {n} has no canonical structure")));
            }
            Ok(StructureMatrix::canonical(n / 2)?)
        }
    }
}
