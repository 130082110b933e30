use ndarray::Array2;

use super::loss::{abs_pow, abs_pow_deriv, residual_loss, LossConfig, LossTarget};
use super::optim::{optimize, TrainConfig, TrainResult};
use crate::dynamics::{CoordinateMap, StructureMatrix};
use crate::error::{HnnError, Result};
use crate::integrators::{GradientDataset, Sample};
use crate::linalg::{self, Factorized};
use crate::nn::hamiltonian::stack_rows;
use crate::nn::{loss_param_gradient, LayeredNet, NeuralHamiltonian, ScalarField};

fn gather(dataset: &GradientDataset, idx: &[usize]) -> Vec<Sample> {
    idx.iter().map(|&i| dataset.samples[i].clone()).collect()
}

/// Fits `∇H_NN` (or `S∇H_NN`) to the dataset with Adam.
pub fn train(
    net: &NeuralHamiltonian,
    dataset: &GradientDataset,
    loss: &LossConfig,
    cfg: &TrainConfig,
) -> TrainResult<NeuralHamiltonian> {
    let mut work = net.clone();
    let res = optimize(net.params(), dataset.len(), cfg, |p, idx, _| {
        work.set_params(p)?;
        loss_param_gradient(&work, &gather(dataset, idx), loss)
    });
    let rebuild = |p: Vec<f64>| {
        let mut n = net.clone();
        n.set_params(&p).expect("parameter count is preserved");
        n
    };
    match res {
        Ok((p, report)) => Ok((rebuild(p), report)),
        Err(f) => Err(Box::new(f.map(rebuild))),
    }
}

/// A Hamiltonian together with the coordinate map it is expressed in.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformedPair {
    pub hamiltonian: NeuralHamiltonian,
    pub cmap: CoordinateMap,
}

impl TransformedPair {
    fn params(&self) -> Vec<f64> {
        let mut p = self.hamiltonian.params();
        if !self.cmap.frozen {
            p.extend(self.cmap.net.params());
        }
        p
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        let nh = self.hamiltonian.param_count();
        if p.len() < nh {
            return Err(HnnError::dim("joint parameters", nh, p.len()));
        }
        self.hamiltonian.set_params(&p[..nh])?;
        if !self.cmap.frozen {
            self.cmap.net.set_params(&p[nh..])?;
        } else if p.len() != nh {
            return Err(HnnError::dim("joint parameters", nh, p.len()));
        }
        Ok(())
    }
}

/// Loss of the transformed field over `batch` and its gradient with
/// respect to the Hamiltonian parameters followed by the map parameters
/// (omitted when the map is frozen). Samples where the map's Jacobian is
/// singular are skipped; their count is returned.
pub fn transformed_loss_gradient(
    pair: &TransformedPair,
    s: &StructureMatrix,
    batch: &[Sample],
    p: f64,
) -> Result<(f64, Vec<f64>, usize)> {
    let n = s.dim();
    if pair.hamiltonian.input_dim() != n || pair.cmap.dim() != n {
        return Err(HnnError::dim("transformed model", n, pair.cmap.dim()));
    }
    if batch.is_empty() {
        return Err(HnnError::InvalidArgument("empty batch".into()));
    }
    let x = stack_rows(batch.iter().map(|s| s.u.as_slice()), n);
    let (ctape, cjvp) = pair.cmap.net.jacobian_tapes(x.view());
    let cols = cjvp.t.last().expect("nonempty");
    let (htape, hvjp) = pair.hamiltonian.gradient_tapes(x.view())?;
    let g_all = &hvjp.d[0];
    let sm = s.matrix();

    struct Used {
        row: usize,
        lu: Factorized,
        w: Vec<f64>,
        f: Vec<f64>,
    }
    let mut used = Vec::with_capacity(batch.len());
    let mut skipped = 0;
    for b in 0..batch.len() {
        // row b*n + k of the JVP block is column k of J
        let j = Array2::from_shape_fn((n, n), |(i, k)| cols[[b * n + k, i]]);
        let lu = match Factorized::new(&j) {
            Ok(lu) => lu,
            Err(HnnError::SingularTransform { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let g = g_all.row(b).to_vec();
        let w = lu.solve_transpose(&g);
        let v = linalg::matvec(sm, &w);
        let f = lu.solve(&v);
        used.push(Used { row: b, lu, w, f });
    }
    if used.is_empty() {
        return Err(HnnError::TrainingDivergence {
            iteration: 0,
            reason: "coordinate map singular on every sample of the batch".into(),
        });
    }
    let m = used.len() as f64;
    let mut total = 0.0;
    let mut g_bar = Array2::zeros((batch.len(), n));
    let mut t_bar = Array2::zeros(cols.raw_dim());
    let st = sm.t();
    for u in &used {
        let target = &batch[u.row].dudt;
        let mut f_bar = vec![0.0; n];
        for i in 0..n {
            let r = u.f[i] - target[i];
            total += abs_pow(r, p);
            f_bar[i] = abs_pow_deriv(r, p) / m;
        }
        let v_bar = u.lu.solve_transpose(&f_bar);
        let w_bar: Vec<f64> = st.dot(&ndarray::ArrayView1::from(&v_bar[..])).to_vec();
        let gb = u.lu.solve(&w_bar);
        for i in 0..n {
            g_bar[[u.row, i]] = gb[i];
        }
        // J̄ = −v̄ fᵀ − w ḡᵀ, scattered back to the JVP rows
        for k in 0..n {
            for i in 0..n {
                t_bar[[u.row * n + k, i]] = -v_bar[i] * u.f[k] - u.w[i] * gb[k];
            }
        }
    }
    let mut grad = pair.hamiltonian.gradient_param_vjp(&htape, &hvjp, g_bar);
    if !pair.cmap.frozen {
        let mut gc = vec![0.0; pair.cmap.net.param_count()];
        pair.cmap.net.jvp_param_grad(&ctape, &cjvp, t_bar, &mut gc);
        grad.extend(gc);
    }
    Ok((total / m, grad, skipped))
}

/// Joint training of `H_NN` and the coordinate map through the field
/// `(∂u/∂x)⁻¹ S (∂u/∂x)⁻ᵀ ∇H_NN(x)`, matched against `dx/dt`.
pub fn train_transformed(
    hnet: &NeuralHamiltonian,
    cmap: &CoordinateMap,
    dataset: &GradientDataset,
    loss: &LossConfig,
    cfg: &TrainConfig,
) -> TrainResult<TransformedPair> {
    let pair = TransformedPair {
        hamiltonian: hnet.clone(),
        cmap: cmap.clone(),
    };
    let s = match &loss.target {
        LossTarget::SymplecticGradient(s) => s.clone(),
        LossTarget::RawGradient(_) => {
            return Err(Box::new(super::optim::TrainFailure {
                error: HnnError::InvalidArgument(
                    "the transformed model is matched against du/dt; use a symplectic-gradient loss".into(),
                ),
                last_good: pair,
                report: empty_report(),
            }))
        }
    };
    let mut work = pair.clone();
    let mut epoch_seen = 0usize;
    let mut epoch_skipped = 0usize;
    let mut current_epoch = 0usize;
    let mut total_skipped = 0usize;
    let res = optimize(pair.params(), dataset.len(), cfg, |p, idx, epoch| {
        work.set_params(p)?;
        if epoch != current_epoch {
            current_epoch = epoch;
            epoch_seen = 0;
            epoch_skipped = 0;
        }
        let (l, g, skipped) = transformed_loss_gradient(&work, &s, &gather(dataset, idx), loss.p)?;
        if epoch != usize::MAX {
            epoch_seen += idx.len();
            epoch_skipped += skipped;
            total_skipped += skipped;
            if epoch_skipped as f64 > 0.01 * dataset.len() as f64 {
                return Err(HnnError::TrainingDivergence {
                    iteration: 0,
                    reason: format!(
                        "coordinate map singular on {epoch_skipped} of {epoch_seen} samples this epoch"
                    ),
                });
            }
        }
        Ok((l, g))
    });
    let rebuild = |p: Vec<f64>| {
        let mut out = pair.clone();
        out.set_params(&p).expect("parameter count is preserved");
        out
    };
    match res {
        Ok((p, mut report)) => {
            report.skipped_samples = total_skipped;
            Ok((rebuild(p), report))
        }
        Err(f) => {
            let mut f = f.map(rebuild);
            f.report.skipped_samples = total_skipped;
            Err(Box::new(f))
        }
    }
}

fn empty_report() -> super::optim::TrainReport {
    super::optim::TrainReport {
        loss_history: Vec::new(),
        final_train_loss: f64::NAN,
        max_batch_loss: 0.0,
        wall_time: 0.0,
        skipped_samples: 0,
    }
}

/// Loss of a direct vector-field network `f_NN(u) ≈ du/dt` and its
/// parameter gradient.
pub fn neural_ode_loss_gradient(net: &LayeredNet, batch: &[Sample], p: f64) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(HnnError::InvalidArgument("empty batch".into()));
    }
    let n = net.in_dim();
    if net.out_dim() != n {
        return Err(HnnError::dim("vector field output", n, net.out_dim()));
    }
    let x = stack_rows(batch.iter().map(|s| s.u.as_slice()), n);
    let target = stack_rows(batch.iter().map(|s| s.dudt.as_slice()), n);
    net.check_batch(&x.view())?;
    let tape = net.forward_tape(x.view());
    let (value, out_bar) = residual_loss(&tape.output, &target, p);
    let mut grad = vec![0.0; net.param_count()];
    net.backprop(&tape, Some(&out_bar), vec![None; net.layers().len()], &mut grad);
    Ok((value, grad))
}

/// Baseline without any structure: `du/dt = f_NN(u)`.
pub fn train_neural_ode(
    net: &LayeredNet,
    dataset: &GradientDataset,
    p: f64,
    cfg: &TrainConfig,
) -> TrainResult<LayeredNet> {
    let mut work = net.clone();
    let res = optimize(net.params(), dataset.len(), cfg, |params, idx, _| {
        work.set_params(params)?;
        neural_ode_loss_gradient(&work, &gather(dataset, idx), p)
    });
    let rebuild = |p: Vec<f64>| {
        let mut n = net.clone();
        n.set_params(&p).expect("parameter count is preserved");
        n
    };
    match res {
        Ok((p, report)) => Ok((rebuild(p), report)),
        Err(f) => Err(Box::new(f.map(rebuild))),
    }
}

/// `mean(H_true − H_NN)` over `grid`; adding it to `H_NN` makes the error
/// zero-mean on the grid.
pub fn align_mean<H>(net: &NeuralHamiltonian, h_true: &H, grid: &[Vec<f64>]) -> Result<f64>
where
    H: ScalarField + ?Sized,
{
    if grid.is_empty() {
        return Err(HnnError::InvalidArgument("alignment grid is empty".into()));
    }
    let mut acc = 0.0;
    for u in grid {
        acc += h_true.value(u)? - net.forward(u)?;
    }
    Ok(acc / grid.len() as f64)
}
