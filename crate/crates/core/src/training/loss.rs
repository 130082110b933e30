use ndarray::{Array2, ArrayView2};

use crate::dynamics::StructureMatrix;
use crate::error::{HnnError, Result};
use crate::linalg::Factorized;

/// What the network's input gradient is compared against.
#[derive(Clone, Debug, PartialEq)]
pub enum LossTarget {
    /// Compare `∇H_NN(u)` with `∇H(u) = S⁻¹ du/dt` (needs invertible `S`).
    RawGradient(StructureMatrix),
    /// Compare `S ∇H_NN(u)` with the observed `du/dt`.
    SymplecticGradient(StructureMatrix),
}

/// Batch-mean of `‖pred − target‖ₚᵖ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossConfig {
    pub p: f64,
    pub target: LossTarget,
}

impl LossConfig {
    pub fn new(p: f64, target: LossTarget) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(HnnError::InvalidArgument(format!("loss exponent p = {p} must be >= 1")));
        }
        Ok(LossConfig { p, target })
    }

    pub fn mse(target: LossTarget) -> Self {
        LossConfig { p: 2.0, target }
    }

    pub fn structure(&self) -> &StructureMatrix {
        match &self.target {
            LossTarget::RawGradient(s) | LossTarget::SymplecticGradient(s) => s,
        }
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        let d = self.structure().dim();
        if d != n {
            return Err(HnnError::dim("loss structure matrix", n, d));
        }
        Ok(())
    }

    /// Target rows the prediction is compared with, given `du/dt` rows.
    pub fn targets(&self, dudt: ArrayView2<f64>) -> Result<Array2<f64>> {
        match &self.target {
            LossTarget::SymplecticGradient(_) => Ok(dudt.to_owned()),
            LossTarget::RawGradient(s) => {
                let lu = Factorized::new(s.matrix())?;
                let mut out = Array2::zeros(dudt.raw_dim());
                for (mut o, row) in out.rows_mut().into_iter().zip(dudt.rows()) {
                    let sol = lu.solve(row.as_slice().unwrap_or(&row.to_vec()));
                    o.assign(&ndarray::ArrayView1::from(&sol[..]));
                }
                Ok(out)
            }
        }
    }

    /// Maps network gradients `g` (rows) to predictions: `g` or `g Sᵀ`.
    pub fn predictions(&self, grads: ArrayView2<f64>) -> Array2<f64> {
        match &self.target {
            LossTarget::RawGradient(_) => grads.to_owned(),
            LossTarget::SymplecticGradient(s) => grads.dot(&s.matrix().t()),
        }
    }

    /// Pulls prediction adjoints back to gradient adjoints.
    pub fn pullback(&self, pred_bar: Array2<f64>) -> Array2<f64> {
        match &self.target {
            LossTarget::RawGradient(_) => pred_bar,
            LossTarget::SymplecticGradient(s) => pred_bar.dot(s.matrix()),
        }
    }
}

/// `Σᵢ |predᵢ − targetᵢ|ᵖ`.
pub fn pnorm_loss(pred: &[f64], target: &[f64], p: f64) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(HnnError::dim("pnorm_loss", pred.len(), target.len()));
    }
    if !(p >= 1.0) {
        return Err(HnnError::InvalidArgument(format!("loss exponent p = {p} must be >= 1")));
    }
    Ok(pred
        .iter()
        .zip(target)
        .map(|(a, b)| abs_pow(a - b, p))
        .sum())
}

#[inline]
pub(crate) fn abs_pow(r: f64, p: f64) -> f64 {
    if p == 2.0 {
        r * r
    } else {
        r.abs().powf(p)
    }
}

/// `d|r|ᵖ/dr`, with 0 at `r = 0`.
#[inline]
pub(crate) fn abs_pow_deriv(r: f64, p: f64) -> f64 {
    if p == 2.0 {
        2.0 * r
    } else if r == 0.0 {
        0.0
    } else {
        p * r.abs().powf(p - 1.0) * r.signum()
    }
}

/// Batch-mean p-norm loss over residual rows, and its adjoint with respect
/// to the predictions.
pub(crate) fn residual_loss(pred: &Array2<f64>, target: &Array2<f64>, p: f64) -> (f64, Array2<f64>) {
    let batch = pred.nrows().max(1) as f64;
    let mut total = 0.0;
    let mut bar = Array2::zeros(pred.raw_dim());
    ndarray::Zip::from(&mut bar)
        .and(pred)
        .and(target)
        .for_each(|b, &a, &t| {
            let r = a - t;
            total += abs_pow(r, p);
            *b = abs_pow_deriv(r, p) / batch;
        });
    (total / batch, bar)
}

/// Upper bound on the Lipschitz constant of `r ↦ ‖r‖ₚᵖ` (Euclidean norm on
/// `ℝ^dim`) over the ball `‖r‖₂ ≤ radius`.
pub fn pnorm_loss_lipschitz(p: f64, radius: f64, dim: usize) -> f64 {
    // ‖∇‖r‖ₚᵖ‖₂ = p ‖r‖_{2(p-1)}^{p-1}, and ‖r‖_q ≤ dim^{max(0, 1/q - 1/2)} ‖r‖₂
    let dim_factor = (dim as f64).powf(((2.0 - p) / 2.0).max(0.0));
    p * dim_factor * radius.powf(p - 1.0)
}
