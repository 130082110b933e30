//! Structure matrices, learned and analytic vector fields, benchmark systems.

pub mod structure;
pub mod systems;
pub mod transform;

pub use structure::{Character, StructureDoc, StructureKind, StructureMatrix};
pub use systems::{
    energy_rate, DoublePendulum, HarmonicOscillator, Kdv, MassSpring, ReferenceSystem, SystemName,
};
pub use transform::{hnn_vector_field, transformed_vector_field, CoordinateMap};
