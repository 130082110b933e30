use nalgebra::DMatrix;
use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::activation::{Activation, ActivationKind};
use super::hamiltonian::{NeuralHamiltonian, Readout};
use super::layer::LinearLayer;
use super::network::{Layer, LayeredNet};
use crate::error::{HnnError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Uniform on `±√(6 / (fan_in + fan_out))`, zero bias.
    Glorot,
    /// Random orthogonal weights (kernels flattened to `out × in·k`), zero bias.
    Orthogonal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LayerSpec {
    Dense {
        out: usize,
        activation: ActivationKind,
    },
    CircularConv {
        out_channels: usize,
        kernel_size: usize,
        activation: ActivationKind,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    /// Spatial grid length for convolutional layers.
    pub grid: Option<usize>,
    pub layers: Vec<LayerSpec>,
    pub readout: Readout,
    pub init: InitScheme,
}

impl Architecture {
    /// Fully connected tanh network with a linear output layer.
    pub fn mlp(input_dim: usize, hidden: &[usize], out: usize, readout: Readout) -> Self {
        let mut layers: Vec<LayerSpec> = hidden
            .iter()
            .map(|&h| LayerSpec::Dense {
                out: h,
                activation: ActivationKind::Tanh,
            })
            .collect();
        layers.push(LayerSpec::Dense {
            out,
            activation: ActivationKind::Identity,
        });
        Architecture {
            input_dim,
            grid: None,
            layers,
            readout,
            init: InitScheme::Glorot,
        }
    }

    /// Circular convolutional energy density summed over the grid: tanh
    /// hidden layers, one output channel, orthogonal initialization.
    pub fn conv(grid: usize, hidden_channels: &[usize], kernels: &[usize]) -> Self {
        let mut layers = Vec::new();
        for (i, &k) in kernels.iter().enumerate() {
            let last = i + 1 == kernels.len();
            layers.push(LayerSpec::CircularConv {
                out_channels: if last { 1 } else { hidden_channels[i] },
                kernel_size: k,
                activation: if last {
                    ActivationKind::Identity
                } else {
                    ActivationKind::Tanh
                },
            });
        }
        Architecture {
            input_dim: grid,
            grid: Some(grid),
            layers,
            readout: Readout::SumOfOutputs,
            init: InitScheme::Orthogonal,
        }
    }

    pub fn with_init(mut self, init: InitScheme) -> Self {
        self.init = init;
        self
    }
}

fn glorot(rng: &mut ChaCha8Rng, shape: (usize, usize), fan_in: usize, fan_out: usize) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_fn(shape, |_| rng.random_range(-limit..limit))
}

/// Random matrix with orthonormal rows or columns (whichever is shorter).
pub fn orthogonal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let (r, c) = if rows < cols { (cols, rows) } else { (rows, cols) };
    let g = DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let rmat = qr.r();
    for j in 0..c {
        if rmat[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let q = if rows < cols { q.transpose() } else { q };
    Array2::from_shape_fn((rows, cols), |(i, j)| q[(i, j)])
}

fn build_layers(arch: &Architecture, seed: u64) -> Result<LayeredNet> {
    if arch.layers.is_empty() || arch.input_dim == 0 {
        return Err(HnnError::InvalidArgument("architecture has no layers".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut width = arch.input_dim;
    let mut layers = Vec::with_capacity(arch.layers.len());
    for spec in &arch.layers {
        let layer = match *spec {
            LayerSpec::Dense { out, activation } => {
                if out == 0 {
                    return Err(HnnError::InvalidArgument("dense layer with zero outputs".into()));
                }
                let w = match arch.init {
                    InitScheme::Glorot => glorot(&mut rng, (out, width), width, out),
                    InitScheme::Orthogonal => orthogonal(&mut rng, out, width),
                };
                Layer {
                    linear: LinearLayer::dense(w, Array1::zeros(out))?,
                    activation: Activation::from_kind(activation),
                }
            }
            LayerSpec::CircularConv {
                out_channels,
                kernel_size,
                activation,
            } => {
                let grid = arch.grid.ok_or_else(|| {
                    HnnError::InvalidArgument("convolutional layer needs a grid length".into())
                })?;
                if !width.is_multiple_of(grid) {
                    return Err(HnnError::InvalidArgument(format!(
                        "width {width} is not a multiple of grid {grid}"
                    )));
                }
                let cin = width / grid;
                let flat = match arch.init {
                    InitScheme::Orthogonal => orthogonal(&mut rng, out_channels, cin * kernel_size),
                    InitScheme::Glorot => glorot(
                        &mut rng,
                        (out_channels, cin * kernel_size),
                        cin * kernel_size,
                        out_channels * kernel_size,
                    ),
                };
                let w = Array3::from_shape_vec(
                    (out_channels, cin, kernel_size),
                    flat.iter().copied().collect(),
                )
                .expect("kernel shape");
                Layer {
                    linear: LinearLayer::circular_conv(grid, w, Array1::zeros(out_channels))?,
                    activation: Activation::from_kind(activation),
                }
            }
        };
        width = layer.linear.out_dim();
        layers.push(layer);
    }
    LayeredNet::new(layers)
}

/// Deterministic scalar network for `arch` and `seed`.
pub fn init_network(arch: &Architecture, seed: u64) -> Result<NeuralHamiltonian> {
    NeuralHamiltonian::new(build_layers(arch, seed)?, arch.readout, seed)
}

/// Vector-output network (coordinate maps, neural ODE right-hand sides).
pub fn init_vector_net(arch: &Architecture, seed: u64) -> Result<LayeredNet> {
    build_layers(arch, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_network() {
        let arch = Architecture::mlp(4, &[50, 50], 1, Readout::FinalScalar);
        let a = init_network(&arch, 17).unwrap();
        let b = init_network(&arch, 17).unwrap();
        assert_eq!(a.params(), b.params());
        let c = init_network(&arch, 18).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn orthogonal_square_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = orthogonal(&mut rng, 12, 12);
        let g = w.t().dot(&w) - Array2::<f64>::eye(12);
        let err = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err < 1e-10);
    }

    #[test]
    fn orthogonal_rectangular_has_orthonormal_short_side() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tall = orthogonal(&mut rng, 20, 3);
        assert!((tall.t().dot(&tall) - Array2::<f64>::eye(3)).iter().all(|v| v.abs() < 1e-12));
        let wide = orthogonal(&mut rng, 3, 20);
        assert!((wide.dot(&wide.t()) - Array2::<f64>::eye(3)).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn glorot_variance_monte_carlo() {
        // 10⁴ weights from a 100×100 layer; Var U(-a, a) = a²/3 = 2/(fan_in + fan_out)
        let arch = Architecture::mlp(100, &[], 100, Readout::SumOfOutputs);
        let net = init_network(&arch, 3).unwrap();
        let w: Vec<f64> = net.params()[..10_000].to_vec();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        let target = 2.0 / 200.0;
        assert!((var - target).abs() < 0.1 * target, "var {var} target {target}");
    }

    #[test]
    fn kdv_architecture_dimensions() {
        let arch = Architecture::conv(20, &[200, 200], &[3, 1, 1]);
        let net = init_network(&arch, 0).unwrap();
        assert_eq!(net.input_dim(), 20);
        let dims: Vec<_> = net.net().layers().iter().map(|l| l.linear.out_dim()).collect();
        assert_eq!(dims, vec![4000, 4000, 20]);
    }

    #[test]
    fn conv_without_grid_is_rejected() {
        let mut arch = Architecture::conv(8, &[4], &[3, 1]);
        arch.grid = None;
        assert!(init_network(&arch, 0).is_err());
    }
}
