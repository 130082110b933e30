use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::hamiltonian::NeuralHamiltonian;
use super::layer::LinearLayer;
use crate::error::{HnnError, Result};
use crate::linalg;

/// Norms and activation constants of a trained network, as consumed by the
/// covering-number bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormProfile {
    /// Operator 2-norms `c_{A_j}` of every linear layer. The last entry is
    /// the norm of the readout functional `u ↦ rᵀ A_L u`.
    pub layer_norms: Vec<f64>,
    /// `ρ_σj` for the hidden activations `σ_1 … σ_{n_l}`.
    pub act_lipschitz: Vec<f64>,
    /// `c_σj = sup|σ_j'|`.
    pub act_deriv_bound: Vec<f64>,
    /// `ρ'_σj`, the Lipschitz constant of `σ_j'`.
    pub act_deriv_lipschitz: Vec<f64>,
    pub input_radius: f64,
    pub loss_lipschitz: f64,
    pub n: usize,
}

impl NormProfile {
    /// Number of hidden activation layers `n_l`.
    pub fn activation_layers(&self) -> usize {
        self.act_lipschitz.len()
    }

    pub fn validate(&self) -> Result<()> {
        let nl = self.act_lipschitz.len();
        if self.layer_norms.len() != nl + 1
            || self.act_deriv_bound.len() != nl
            || self.act_deriv_lipschitz.len() != nl
        {
            return Err(HnnError::InvalidArgument(format!(
                "norm profile needs n_l + 1 layer norms for n_l activations; got {} norms, {} activations",
                self.layer_norms.len(),
                nl
            )));
        }
        if nl == 0 {
            return Err(HnnError::InvalidArgument(
                "norm profile needs at least one activation layer".into(),
            ));
        }
        let positive = self
            .layer_norms
            .iter()
            .chain([&self.input_radius, &self.loss_lipschitz])
            .all(|v| v.is_finite() && *v > 0.0);
        let nonneg = self
            .act_lipschitz
            .iter()
            .chain(&self.act_deriv_bound)
            .chain(&self.act_deriv_lipschitz)
            .all(|v| v.is_finite() && *v >= 0.0);
        if !positive || !nonneg || self.n == 0 {
            return Err(HnnError::InvalidArgument(
                "norm profile entries must be finite, norms/radius/lipschitz positive, n >= 1".into(),
            ));
        }
        Ok(())
    }

    /// `Π c_{A_j} · Π c_σj`, an upper bound on `‖∇H_NN(u)‖₂` for every `u`.
    pub fn gradient_norm_bound(&self) -> f64 {
        self.layer_norms.iter().product::<f64>() * self.act_deriv_bound.iter().product::<f64>()
    }
}

/// Operator norm of each linear layer, by SVD. A circular convolution is
/// block-diagonalized by the DFT over the grid, so its norm is the largest
/// singular value of the `out × in` symbol over all frequencies.
pub fn layer_operator_norms(net: &NeuralHamiltonian) -> Vec<f64> {
    let layers = net.net().layers();
    let last = layers.len() - 1;
    layers
        .iter()
        .enumerate()
        .map(|(j, l)| {
            let lin = &l.linear;
            if j == last {
                // readout functional rᵀ A_L with r = 1: its norm is ‖A_Lᵀ 1‖₂
                let ones = Array2::ones((1, lin.out_dim()));
                let v = lin.apply_transpose(ones.view());
                return v.iter().map(|x| x * x).sum::<f64>().sqrt();
            }
            match lin {
                LinearLayer::Dense { weights, .. } => linalg::to_nalgebra(weights).singular_values().max(),
                LinearLayer::CircularConv1d { grid, weights, .. } => circulant_norm(*grid, weights),
            }
        })
        .collect()
}

fn circulant_norm(grid: usize, weights: &Array3<f64>) -> f64 {
    let (cout, cin, k) = weights.dim();
    let half = (k / 2) as f64;
    (0..grid)
        .map(|w| {
            let symbol = DMatrix::from_fn(cout, cin, |o, i| {
                (0..k)
                    .map(|j| {
                        let phase = 2.0 * PI * w as f64 * (j as f64 - half) / grid as f64;
                        Complex::from_polar(weights[[o, i, j]], phase)
                    })
                    .sum::<Complex<f64>>()
            });
            symbol.singular_values().max()
        })
        .fold(0.0, f64::max)
}

pub fn norm_profile(
    net: &NeuralHamiltonian,
    input_radius: f64,
    loss_lipschitz: f64,
    n: usize,
) -> Result<NormProfile> {
    if !(input_radius > 0.0) {
        return Err(HnnError::InvalidArgument(format!(
            "input radius {input_radius} must be positive"
        )));
    }
    let layers = net.net().layers();
    if !layers.last().expect("nonempty").activation.is_identity() {
        return Err(HnnError::InvalidArgument(
            "norm profile expects a linear output layer".into(),
        ));
    }
    let hidden = &layers[..layers.len() - 1];
    Ok(NormProfile {
        layer_norms: layer_operator_norms(net),
        act_lipschitz: hidden.iter().map(|l| l.activation.lipschitz).collect(),
        act_deriv_bound: hidden.iter().map(|l| l.activation.deriv_bound).collect(),
        act_deriv_lipschitz: hidden.iter().map(|l| l.activation.deriv_lipschitz).collect(),
        input_radius,
        loss_lipschitz,
        n,
    })
}
