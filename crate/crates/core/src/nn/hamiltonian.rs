use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::layer::LinearLayer;
use super::network::{ForwardTape, LayeredNet, VjpTape};
use crate::error::{HnnError, Result};
use crate::integrators::Sample;
use crate::training::loss::{residual_loss, LossConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// `H = Σ_k out_k`; used for the convolutional energy density.
    SumOfOutputs,
    /// The last layer has a single output which is `H`.
    FinalScalar,
}

/// Scalar energy `H_NN: ℝᴺ → ℝ` with exact input gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralHamiltonian {
    net: LayeredNet,
    readout: Readout,
    seed: u64,
}

/// Something with a scalar value and a gradient: analytic reference
/// energies and neural ones alike.
pub trait ScalarField {
    fn dim(&self) -> usize;
    fn value(&self, u: &[f64]) -> Result<f64>;
    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>>;
}

impl NeuralHamiltonian {
    pub fn new(net: LayeredNet, readout: Readout, seed: u64) -> Result<Self> {
        if readout == Readout::FinalScalar && net.out_dim() != 1 {
            return Err(HnnError::dim("final scalar readout", 1, net.out_dim()));
        }
        Ok(NeuralHamiltonian { net, readout, seed })
    }

    pub fn net(&self) -> &LayeredNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut LayeredNet {
        &mut self.net
    }

    pub fn readout(&self) -> Readout {
        self.readout
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.net.in_dim()
    }

    pub fn params(&self) -> Vec<f64> {
        self.net.params()
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        self.net.set_params(p)
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.input_dim() {
            return Err(HnnError::dim("hamiltonian input", self.input_dim(), u.len()));
        }
        Ok(())
    }

    pub fn forward(&self, u: &[f64]) -> Result<f64> {
        self.check(u)?;
        let x = ArrayView2::from_shape((1, u.len()), u).expect("row view");
        Ok(self.forward_batch(x)?[0])
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.net.check_batch(&x)?;
        Ok(self.net.forward(x).sum_axis(Axis(1)))
    }

    /// `∂H_NN/∂u = A_1ᵀ Dσ_1 A_2ᵀ Dσ_2 ⋯ A_Lᵀ r`, with `r` the readout vector.
    pub fn input_gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        let x = ArrayView2::from_shape((1, u.len()), u).expect("row view");
        Ok(self.input_gradient_batch(x)?.row(0).to_vec())
    }

    pub fn input_gradient_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let (_, vjp) = self.gradient_tapes(x)?;
        Ok(vjp.d[0].clone())
    }

    /// Forward and backward chains needed to differentiate functions of
    /// the input gradient with respect to the parameters.
    pub fn gradient_tapes(&self, x: ArrayView2<f64>) -> Result<(ForwardTape, VjpTape)> {
        self.net.check_batch(&x)?;
        let tape = self.net.forward_tape(x);
        let seed = Array2::ones((x.nrows(), self.net.out_dim()));
        let vjp = self.net.vjp_tape(&tape, seed);
        Ok((tape, vjp))
    }

    /// Parameter gradient of `Σ_b ḡ_b · ∇H_NN(x_b)`.
    pub fn gradient_param_vjp(&self, tape: &ForwardTape, vjp: &VjpTape, g_bar: Array2<f64>) -> Vec<f64> {
        let mut grad = vec![0.0; self.param_count()];
        self.net.vjp_param_grad(tape, vjp, g_bar, &mut grad);
        grad
    }

    /// Adds `c` to the network output by adjusting the last layer's bias.
    pub fn shift_output(&mut self, c: f64) {
        let last = self.net.layers_mut().last_mut().expect("nonempty");
        let copies = match &last.linear {
            LinearLayer::Dense { weights, .. } => weights.nrows(),
            LinearLayer::CircularConv1d { grid, weights, .. } => grid * weights.dim().0,
        } as f64;
        debug_assert!(last.activation.is_identity(), "output shift needs a linear readout layer");
        last.linear.bias_mut().mapv_inplace(|b| b + c / copies);
    }
}

impl ScalarField for NeuralHamiltonian {
    fn dim(&self) -> usize {
        self.input_dim()
    }

    fn value(&self, u: &[f64]) -> Result<f64> {
        self.forward(u)
    }

    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.input_gradient(u)
    }
}

pub(crate) fn stack_rows<'a, I>(rows: I, dim: usize) -> Array2<f64>
where
    I: ExactSizeIterator<Item = &'a [f64]>,
{
    let n = rows.len();
    let mut out = Array2::zeros((n, dim));
    for (mut o, r) in out.rows_mut().into_iter().zip(rows) {
        o.assign(&ArrayView1::from(r));
    }
    out
}

/// Batch-mean loss over `batch` and its gradient with respect to every
/// weight and bias of `net`. The loss depends on `∂H_NN/∂u`, so the
/// gradient flows through the input-gradient product.
pub fn loss_param_gradient(
    net: &NeuralHamiltonian,
    batch: &[Sample],
    loss: &LossConfig,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(HnnError::InvalidArgument("empty batch".into()));
    }
    let n = net.input_dim();
    loss.check_dim(n)?;
    let x = stack_rows(batch.iter().map(|s| s.u.as_slice()), n);
    let dudt = stack_rows(batch.iter().map(|s| s.dudt.as_slice()), n);
    let target = loss.targets(dudt.view())?;
    let (tape, vjp) = net.gradient_tapes(x.view())?;
    let pred = loss.predictions(vjp.d[0].view());
    let (value, pred_bar) = residual_loss(&pred, &target, loss.p);
    if !value.is_finite() {
        return Err(HnnError::TrainingDivergence {
            iteration: 0,
            reason: format!("non-finite loss {value}"),
        });
    }
    let g_bar = loss.pullback(pred_bar);
    let grad = net.gradient_param_vjp(&tape, &vjp, g_bar);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(HnnError::TrainingDivergence {
            iteration: 0,
            reason: "non-finite parameter gradient".into(),
        });
    }
    Ok((value, grad))
}
