//! Neural Hamiltonians trained by gradient matching.
//!
//! Networks with exact input gradients and second-order parameter
//! gradients ([`nn`]), structure matrices and benchmark systems
//! ([`dynamics`]), Dormand–Prince integration and datasets
//! ([`integrators`]), Adam training ([`training`]), the covering-number
//! bound chain ([`bounds`]) and empirical checks ([`diagnostics`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod integrators;
pub mod linalg;
pub mod nn;
pub mod training;

pub use error::{HnnError, Result};
