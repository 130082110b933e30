use ndarray::{Array1, Array2, ArrayView2};

use super::structure::StructureMatrix;
use crate::error::{HnnError, Result};
use crate::linalg::{self, Factorized};
use crate::nn::{Activation, Layer, LayeredNet, LinearLayer, NeuralHamiltonian, ScalarField};

/// A learned change of variables `u = u_NN(x)`, `ℝᴺ → ℝᴺ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateMap {
    pub net: LayeredNet,
    /// Frozen maps are not updated during training.
    pub frozen: bool,
    pub seed: u64,
}

impl CoordinateMap {
    pub fn new(net: LayeredNet, seed: u64) -> Result<Self> {
        if net.in_dim() != net.out_dim() {
            return Err(HnnError::dim("coordinate map output", net.in_dim(), net.out_dim()));
        }
        Ok(CoordinateMap {
            net,
            frozen: false,
            seed,
        })
    }

    /// `u = P x`, frozen.
    pub fn linear(p: Array2<f64>) -> Result<Self> {
        let n = p.nrows();
        let layer = Layer {
            linear: LinearLayer::dense(p, Array1::zeros(n))?,
            activation: Activation::identity(),
        };
        let mut map = Self::new(LayeredNet::new(vec![layer])?, 0)?;
        map.frozen = true;
        Ok(map)
    }

    pub fn identity(n: usize) -> Self {
        Self::linear(Array2::eye(n)).expect("identity is a valid map")
    }

    pub fn dim(&self) -> usize {
        self.net.in_dim()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = row(x);
        self.net.check_batch(&v)?;
        Ok(self.net.forward(v).row(0).to_vec())
    }

    /// `∂u_NN/∂x` at `x`.
    pub fn jacobian(&self, x: &[f64]) -> Result<Array2<f64>> {
        let v = row(x);
        self.net.check_batch(&v)?;
        Ok(self.net.jacobians(v).pop().expect("one row"))
    }
}

fn row(x: &[f64]) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((1, x.len()), x).expect("row view")
}

/// `S ∇H(u)`.
pub fn hnn_vector_field<H>(h: &H, s: &StructureMatrix, u: &[f64]) -> Result<Vec<f64>>
where
    H: ScalarField + ?Sized,
{
    if h.dim() != s.dim() {
        return Err(HnnError::dim("structure vs hamiltonian", h.dim(), s.dim()));
    }
    s.apply(&h.gradient(u)?)
}

/// `(∂u/∂x)⁻¹ S (∂u/∂x)⁻ᵀ ∂H_NN/∂x`, via two solves with a pivoted LU of
/// the Jacobian.
pub fn transformed_vector_field(
    h: &NeuralHamiltonian,
    cmap: &CoordinateMap,
    s: &StructureMatrix,
    x: &[f64],
) -> Result<Vec<f64>> {
    if cmap.dim() != s.dim() || h.input_dim() != s.dim() {
        return Err(HnnError::dim("transformed field", s.dim(), cmap.dim()));
    }
    let j = cmap.jacobian(x)?;
    let lu = Factorized::new(&j)?;
    let g = h.input_gradient(x)?;
    let w = lu.solve_transpose(&g);
    let v = linalg::matvec(s.matrix(), &w);
    Ok(lu.solve(&v))
}
