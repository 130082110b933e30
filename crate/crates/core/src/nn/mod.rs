//! Layered scalar networks with exact input gradients, parameter gradients
//! of gradient-dependent losses, and norm profiling.

pub mod activation;
pub mod hamiltonian;
pub mod init;
pub mod layer;
pub mod model_io;
pub mod network;
pub mod norms;

pub use activation::{Activation, ActivationKind, TANH_SECOND_DERIV_MAX};
pub use hamiltonian::{loss_param_gradient, NeuralHamiltonian, Readout, ScalarField};
pub use init::{init_network, init_vector_net, Architecture, InitScheme, LayerSpec};
pub use layer::LinearLayer;
pub use model_io::{NetworkDoc, MODEL_SCHEMA_VERSION};
pub use network::{Layer, LayeredNet};
pub use norms::{norm_profile, NormProfile};
