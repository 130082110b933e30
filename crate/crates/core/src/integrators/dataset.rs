use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ode::{dopri45, uniform_times, Trajectory, TrajectoryMeta, DEFAULT_ATOL, DEFAULT_RTOL};
use crate::dynamics::ReferenceSystem;
use crate::error::{HnnError, Result};
use crate::linalg::norm2;

pub const DATASET_SCHEMA_VERSION: u32 = 1;

/// One observed pair `(u, du/dt)` at time `t` of its trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub u: Vec<f64>,
    pub dudt: Vec<f64>,
}

/// How initial conditions are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Sampler {
    /// Independent standard-normal components.
    StandardNormal,
    Uniform { low: f64, high: f64 },
    /// Every trajectory starts from `state`.
    Fixed { state: Vec<f64> },
}

impl Sampler {
    /// Standard normal, except the KdV cosine profile for KdV.
    pub fn default_for(system: &ReferenceSystem) -> Self {
        match system {
            ReferenceSystem::KdvSemidiscrete(k) => Sampler::Fixed {
                state: k.cosine_initial(),
            },
            _ => Sampler::StandardNormal,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, dim: usize) -> Result<Vec<f64>> {
        match self {
            Sampler::StandardNormal => Ok((0..dim).map(|_| rng.sample(StandardNormal)).collect()),
            Sampler::Uniform { low, high } => {
                if !(high > low) {
                    return Err(HnnError::InvalidArgument(format!(
                        "uniform sampler needs low < high, got [{low}, {high}]"
                    )));
                }
                Ok((0..dim).map(|_| rng.random_range(*low..*high)).collect())
            }
            Sampler::Fixed { state } => {
                if state.len() != dim {
                    return Err(HnnError::dim("fixed initial state", dim, state.len()));
                }
                Ok(state.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub system: ReferenceSystem,
    pub n_traj: usize,
    pub t_span: (f64, f64),
    pub n_points: usize,
    pub sampler: Sampler,
    pub seed: u64,
    pub rtol: f64,
    pub atol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientDataset {
    pub samples: Vec<Sample>,
    pub provenance: Provenance,
    /// `max ‖u‖₂` over the samples.
    pub input_radius: f64,
}

impl GradientDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.u.len())
    }

    pub fn states(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.u.clone()).collect()
    }
}

pub fn input_radius(samples: &[Sample]) -> f64 {
    samples.iter().map(|s| norm2(&s.u)).fold(0.0, f64::max)
}

/// Integrates `n_traj` initial conditions with [`dopri45`], samples each at
/// `n_points` uniform times in `t_span` and attaches the analytic field.
pub fn generate_dataset(
    system: &ReferenceSystem,
    n_traj: usize,
    t_span: (f64, f64),
    n_points: usize,
    sampler: &Sampler,
    seed: u64,
) -> Result<GradientDataset> {
    generate_dataset_with_tol(system, n_traj, t_span, n_points, sampler, seed, DEFAULT_RTOL, DEFAULT_ATOL)
}

#[allow(clippy::too_many_arguments)]
pub fn generate_dataset_with_tol(
    system: &ReferenceSystem,
    n_traj: usize,
    t_span: (f64, f64),
    n_points: usize,
    sampler: &Sampler,
    seed: u64,
    rtol: f64,
    atol: f64,
) -> Result<GradientDataset> {
    if n_traj == 0 || n_points == 0 {
        return Err(HnnError::InvalidArgument(
            "n_traj and n_points must be at least 1".into(),
        ));
    }
    if !(t_span.1 >= t_span.0) || (n_points > 1 && t_span.1 == t_span.0) {
        return Err(HnnError::InvalidArgument(format!(
            "bad time span [{}, {}]",
            t_span.0, t_span.1
        )));
    }
    system.validate()?;
    let dim = system.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // all initial conditions are drawn up front so the sample stream does
    // not depend on how trajectories are scheduled
    let ics = (0..n_traj)
        .map(|_| sampler.draw(&mut rng, dim))
        .collect::<Result<Vec<_>>>()?;
    let times = uniform_times(t_span.0, t_span.1, n_points);
    let mut samples = Vec::with_capacity(n_traj * n_points);
    for (k, u0) in ics.iter().enumerate() {
        let wrap = |e: HnnError| HnnError::Dataset {
            trajectory: k,
            seed,
            source: Box::new(e),
        };
        let traj = integrate_system(system, u0, &times, rtol, atol).map_err(wrap)?;
        for (t, u) in traj.times.iter().zip(traj.states) {
            let dudt = system.field(&u).map_err(wrap)?;
            samples.push(Sample { t: *t, u, dudt });
        }
    }
    let input_radius = input_radius(&samples);
    Ok(GradientDataset {
        samples,
        provenance: Provenance {
            system: system.clone(),
            n_traj,
            t_span,
            n_points,
            sampler: sampler.clone(),
            seed,
            rtol,
            atol,
        },
        input_radius,
    })
}

/// Solution of the reference system at `times` (the first time is the
/// start of integration).
pub fn integrate_system(
    system: &ReferenceSystem,
    u0: &[f64],
    times: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Trajectory> {
    if u0.len() != system.dim() {
        return Err(HnnError::dim("initial state", system.dim(), u0.len()));
    }
    let mut traj = match times {
        [] => return Err(HnnError::InvalidArgument("no output times".into())),
        [t0] => Trajectory {
            times: vec![*t0],
            states: vec![u0.to_vec()],
            meta: TrajectoryMeta::default(),
        },
        [t0, .., t1] => dopri45(|u| system.field(u), u0, (*t0, *t1), rtol, atol, times)?,
    };
    traj.meta = TrajectoryMeta {
        system: system.name().as_str().to_string(),
        rtol: Some(rtol),
        atol: Some(atol),
        seed: None,
    };
    Ok(traj)
}

/// Sidecar document stored next to a dataset CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub input_radius: f64,
    pub n_samples: usize,
    pub dim: usize,
    /// Resolved configuration of the run that wrote the file, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> HnnError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HnnError::Io(io),
        other => HnnError::Format(format!("csv: {other:?}")),
    }
}

/// `(t, values)` rows of a time series.
pub type SeriesRows = Vec<(f64, Vec<f64>)>;

/// Writes rows `t, values...` under `header`.
pub fn write_series_csv(path: &Path, header: &[String], rows: &[(f64, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for (t, vals) in rows {
        if vals.len() + 1 != header.len() {
            return Err(HnnError::dim("csv row", header.len(), vals.len() + 1));
        }
        let rec: Vec<String> = std::iter::once(*t).chain(vals.iter().copied()).map(fmt_num).collect();
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric CSV; returns the header and `(t, rest)` rows.
pub fn read_series_csv(path: &Path) -> Result<(Vec<String>, SeriesRows)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(|s| s.trim().to_string()).collect();
    if header.is_empty() {
        return Err(HnnError::Format(format!("{}: empty header", path.display())));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| HnnError::Format(format!("{} row {}: {e}", path.display(), line + 2)))?;
        if vals.len() != header.len() {
            return Err(HnnError::dim("csv row", header.len(), vals.len()));
        }
        rows.push((vals[0], vals[1..].to_vec()));
    }
    Ok((header, rows))
}

pub fn state_header(prefix: &str, dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("{prefix}_{i}")).collect()
}

/// Path of the JSON sidecar for a CSV file.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

impl GradientDataset {
    pub fn meta(&self, config: Option<serde_json::Value>) -> DatasetMeta {
        DatasetMeta {
            schema_version: DATASET_SCHEMA_VERSION,
            provenance: self.provenance.clone(),
            input_radius: self.input_radius,
            n_samples: self.len(),
            dim: self.dim(),
            config,
        }
    }

    /// Writes `path` (CSV) and its JSON sidecar.
    pub fn save(&self, path: &Path, config: Option<serde_json::Value>) -> Result<()> {
        let dim = self.dim();
        let mut header = vec!["t".to_string()];
        header.extend(state_header("u", dim));
        header.extend(state_header("dudt", dim));
        let rows: Vec<(f64, Vec<f64>)> = self
            .samples
            .iter()
            .map(|s| (s.t, s.u.iter().chain(&s.dudt).copied().collect()))
            .collect();
        write_series_csv(path, &header, &rows)?;
        let meta = serde_json::to_string_pretty(&self.meta(config))?;
        std::fs::write(sidecar_path(path), meta + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let meta: DatasetMeta = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        if meta.schema_version != DATASET_SCHEMA_VERSION {
            return Err(HnnError::Format(format!(
                "unsupported dataset schema_version {}",
                meta.schema_version
            )));
        }
        let (header, rows) = read_series_csv(path)?;
        let dim = meta.dim;
        if header.len() != 1 + 2 * dim {
            return Err(HnnError::dim("dataset columns", 1 + 2 * dim, header.len()));
        }
        let samples: Vec<Sample> = rows
            .into_iter()
            .map(|(t, v)| Sample {
                t,
                u: v[..dim].to_vec(),
                dudt: v[dim..].to_vec(),
            })
            .collect();
        if samples.len() != meta.n_samples {
            return Err(HnnError::dim("dataset rows", meta.n_samples, samples.len()));
        }
        Ok(GradientDataset {
            input_radius: input_radius(&samples),
            samples,
            provenance: meta.provenance,
        })
    }
}

impl Trajectory {
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(state_header("u", self.dim()));
        let rows: Vec<(f64, Vec<f64>)> = self
            .times
            .iter()
            .copied()
            .zip(self.states.iter().cloned())
            .collect();
        write_series_csv(path, &header, &rows)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let (_, rows) = read_series_csv(path)?;
        let (times, states) = rows.into_iter().unzip();
        Ok(Trajectory {
            times,
            states,
            meta: TrajectoryMeta::default(),
        })
    }
}
