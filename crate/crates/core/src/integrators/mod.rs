//! ODE integration and training-data generation.
pub mod dataset;
pub mod ode;

pub use dataset::{
    generate_dataset, generate_dataset_with_tol, integrate_system, DatasetMeta, GradientDataset, Provenance,
    Sample, Sampler, DATASET_SCHEMA_VERSION,
};
pub use ode::{
    dopri45, dopri45_with_stats, dopri5_fixed, rk4_fixed, uniform_times, StepStats, Trajectory, TrajectoryMeta,
    DEFAULT_ATOL, DEFAULT_RTOL,
};
