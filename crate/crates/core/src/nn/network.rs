use ndarray::{Array2, ArrayView2, Zip};

use super::activation::Activation;
use super::layer::LinearLayer;
use crate::error::{HnnError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub linear: LinearLayer,
    pub activation: Activation,
}

/// Composition `σ_L(A_L σ_{L-1}(… σ_1(A_1 x + b_1) …) + b_L)` with vector
/// output. Scalar Hamiltonians and coordinate maps are both built on this.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredNet {
    layers: Vec<Layer>,
}

/// Activations recorded during a batched forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTape {
    /// `inputs[j]` is the input of layer `j` (so `inputs[0]` is the batch).
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activations `z_j`.
    pub pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

/// The chain `d_L = seed`, `e_j = σ'(z_j) ⊙ d_j`, `d_{j-1} = A_jᵀ e_j`.
/// `d[0]` is the vector-Jacobian product with respect to the input.
#[derive(Clone, Debug)]
pub struct VjpTape {
    pub d: Vec<Array2<f64>>,
    pub e: Vec<Array2<f64>>,
}

/// The chain `t_0 = tangent`, `s_j = A_j t_{j-1}`, `t_j = σ'(z_j) ⊙ s_j`.
#[derive(Clone, Debug)]
pub struct JvpTape {
    pub t: Vec<Array2<f64>>,
    pub s: Vec<Array2<f64>>,
}

impl LayeredNet {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(HnnError::InvalidArgument("network needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].linear.out_dim() != w[1].linear.in_dim() {
                return Err(HnnError::dim(
                    "layer composition",
                    w[0].linear.out_dim(),
                    w[1].linear.in_dim(),
                ));
            }
        }
        Ok(LayeredNet { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].linear.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("nonempty").linear.out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.linear.param_count()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            l.linear.write_params(&mut out);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(HnnError::dim("parameter vector", self.param_count(), params.len()));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let n = l.linear.param_count();
            l.linear.read_params(&params[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.layers
            .iter()
            .map(|l| {
                let o = acc;
                acc += l.linear.param_count();
                o
            })
            .collect()
    }

    pub(crate) fn check_batch(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.in_dim() {
            return Err(HnnError::dim("network input", self.in_dim(), x.ncols()));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut a = x.to_owned();
        for l in &self.layers {
            let mut z = l.linear.apply(a.view());
            l.linear.add_bias(&mut z);
            if !l.activation.is_identity() {
                z.mapv_inplace(|v| l.activation.eval(v));
            }
            a = z;
        }
        a
    }

    pub fn forward_tape(&self, x: ArrayView2<f64>) -> ForwardTape {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for l in &self.layers {
            let mut z = l.linear.apply(a.view());
            l.linear.add_bias(&mut z);
            let next = if l.activation.is_identity() {
                z.clone()
            } else {
                z.mapv(|v| l.activation.eval(v))
            };
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        ForwardTape {
            inputs,
            pre,
            output: a,
        }
    }

    /// Backward chain for `∂(seed · output)/∂x`, one seed row per sample.
    pub fn vjp_tape(&self, tape: &ForwardTape, seed: Array2<f64>) -> VjpTape {
        let n = self.layers.len();
        let mut d = vec![Array2::zeros((0, 0)); n + 1];
        let mut e = vec![Array2::zeros((0, 0)); n];
        d[n] = seed;
        for j in (0..n).rev() {
            let act = self.layers[j].activation;
            let ej = if act.is_identity() {
                d[j + 1].clone()
            } else {
                let mut ej = d[j + 1].clone();
                Zip::from(&mut ej)
                    .and(&tape.pre[j])
                    .for_each(|v, &z| *v *= act.deriv(z));
                ej
            };
            d[j] = self.layers[j].linear.apply_transpose(ej.view());
            e[j] = ej;
        }
        VjpTape { d, e }
    }

    /// Forward-mode chain for `J(x) · tangent`; `tangent` has one row per
    /// row of the tape.
    pub fn jvp_tape(&self, tape: &ForwardTape, tangent: Array2<f64>) -> JvpTape {
        let n = self.layers.len();
        let mut t = Vec::with_capacity(n + 1);
        let mut s = Vec::with_capacity(n);
        t.push(tangent);
        for j in 0..n {
            let act = self.layers[j].activation;
            let sj = self.layers[j].linear.apply(t[j].view());
            let tj = if act.is_identity() {
                sj.clone()
            } else {
                let mut tj = sj.clone();
                Zip::from(&mut tj)
                    .and(&tape.pre[j])
                    .for_each(|v, &z| *v *= act.deriv(z));
                tj
            };
            s.push(sj);
            t.push(tj);
        }
        JvpTape { t, s }
    }

    /// Reverse sweep through the forward pass. `out_bar` is the adjoint of
    /// the output (if the objective depends on it) and `z_bar` holds extra
    /// adjoints injected directly at each pre-activation. Returns the
    /// parameter gradient (added into `grad`) and the input adjoint.
    pub fn backprop(
        &self,
        tape: &ForwardTape,
        out_bar: Option<&Array2<f64>>,
        mut z_bar: Vec<Option<Array2<f64>>>,
        grad: &mut [f64],
    ) -> Array2<f64> {
        let n = self.layers.len();
        let offsets = self.offsets();
        let batch = tape.output.nrows();
        let mut a_bar: Option<Array2<f64>> = out_bar.cloned();
        for j in (0..n).rev() {
            let layer = &self.layers[j];
            let mut zb = match a_bar.take() {
                Some(mut ab) => {
                    if !layer.activation.is_identity() {
                        let act = layer.activation;
                        Zip::from(&mut ab)
                            .and(&tape.pre[j])
                            .for_each(|v, &z| *v *= act.deriv(z));
                    }
                    ab
                }
                None => Array2::zeros((batch, layer.linear.out_dim())),
            };
            if let Some(extra) = z_bar[j].take() {
                zb += &extra;
            }
            let off = offsets[j];
            let nw = layer.linear.weight_count();
            let np = layer.linear.param_count();
            let g = &mut grad[off..off + np];
            layer
                .linear
                .accumulate_weight_grad(zb.view(), tape.inputs[j].view(), &mut g[..nw]);
            layer.linear.accumulate_bias_grad(zb.view(), &mut g[nw..]);
            a_bar = Some(layer.linear.apply_transpose(zb.view()));
        }
        a_bar.expect("at least one layer")
    }

    /// Parameter gradient of `Σ_rows d̄_0 · d_0`, where `d_0` is the
    /// vector-Jacobian product recorded in `vjp`. This differentiates the
    /// closed-form product `A_1ᵀ Dσ_1 A_2ᵀ Dσ_2 ⋯` with respect to every
    /// weight and bias.
    pub fn vjp_param_grad(
        &self,
        tape: &ForwardTape,
        vjp: &VjpTape,
        d0_bar: Array2<f64>,
        grad: &mut [f64],
    ) {
        let n = self.layers.len();
        let offsets = self.offsets();
        let mut z_bar: Vec<Option<Array2<f64>>> = vec![None; n];
        let mut d_bar = d0_bar;
        for j in 0..n {
            let layer = &self.layers[j];
            let off = offsets[j];
            let nw = layer.linear.weight_count();
            // d_{j-1} = A_jᵀ e_j
            layer
                .linear
                .accumulate_weight_grad(vjp.e[j].view(), d_bar.view(), &mut grad[off..off + nw]);
            let e_bar = layer.linear.apply(d_bar.view());
            // e_j = σ'(z_j) ⊙ d_j
            let act = layer.activation;
            if act.is_identity() {
                d_bar = e_bar;
            } else {
                let mut zb = e_bar.clone();
                Zip::from(&mut zb)
                    .and(&tape.pre[j])
                    .and(&vjp.d[j + 1])
                    .for_each(|v, &z, &dj| *v *= act.second_deriv(z) * dj);
                z_bar[j] = Some(zb);
                let mut db = e_bar;
                Zip::from(&mut db)
                    .and(&tape.pre[j])
                    .for_each(|v, &z| *v *= act.deriv(z));
                d_bar = db;
            }
        }
        self.backprop(tape, None, z_bar, grad);
    }

    /// Parameter gradient of `Σ_rows t̄_L · t_L` for the forward-mode chain
    /// recorded in `jvp`.
    pub fn jvp_param_grad(
        &self,
        tape: &ForwardTape,
        jvp: &JvpTape,
        t_bar: Array2<f64>,
        grad: &mut [f64],
    ) {
        let n = self.layers.len();
        let offsets = self.offsets();
        let mut z_bar: Vec<Option<Array2<f64>>> = vec![None; n];
        let mut tb = t_bar;
        for j in (0..n).rev() {
            let layer = &self.layers[j];
            let act = layer.activation;
            let s_bar = if act.is_identity() {
                tb
            } else {
                let mut zb = tb.clone();
                Zip::from(&mut zb)
                    .and(&tape.pre[j])
                    .and(&jvp.s[j])
                    .for_each(|v, &z, &s| *v *= act.second_deriv(z) * s);
                z_bar[j] = Some(zb);
                let mut sb = tb;
                Zip::from(&mut sb)
                    .and(&tape.pre[j])
                    .for_each(|v, &z| *v *= act.deriv(z));
                sb
            };
            let off = offsets[j];
            let nw = layer.linear.weight_count();
            layer
                .linear
                .accumulate_weight_grad(s_bar.view(), jvp.t[j].view(), &mut grad[off..off + nw]);
            tb = layer.linear.apply_transpose(s_bar.view());
        }
        self.backprop(tape, None, z_bar, grad);
    }

    /// Jacobians `∂out/∂x` for every row of `x`, each `(out_dim, in_dim)`.
    pub fn jacobians(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let n_in = self.in_dim();
        let (_, jvp) = self.jacobian_tapes(x);
        let t = jvp.t.last().expect("nonempty");
        (0..x.nrows())
            .map(|b| {
                // row k of the block is J e_k, i.e. column k of J
                t.slice(ndarray::s![b * n_in..(b + 1) * n_in, ..])
                    .t()
                    .to_owned()
            })
            .collect()
    }

    /// Forward tape over `x` with each row repeated `in_dim` times, and the
    /// JVP chain seeded with the unit basis (row `b * in_dim + k` carries
    /// direction `e_k`).
    pub fn jacobian_tapes(&self, x: ArrayView2<f64>) -> (ForwardTape, JvpTape) {
        let n_in = self.in_dim();
        let batch = x.nrows();
        let rep = Array2::from_shape_fn((batch * n_in, n_in), |(r, c)| x[[r / n_in, c]]);
        let tangent = Array2::from_shape_fn((batch * n_in, n_in), |(r, c)| {
            if r % n_in == c {
                1.0
            } else {
                0.0
            }
        });
        let tape = self.forward_tape(rep.view());
        let jvp = self.jvp_tape(&tape, tangent);
        (tape, jvp)
    }

    /// Number of layers followed by a non-identity activation.
    pub fn activation_layer_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| !l.activation.is_identity())
            .count()
    }
}
