#![allow(dead_code)]

use hnn_core::nn::{init_network, Architecture, NeuralHamiltonian, Readout};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Tanh MLP with 1–3 linear layers, widths ≤ 16, and every weight and bias
/// redrawn from N(0, scale²) so no parameter is left at its init value.
pub fn random_mlp(rng: &mut ChaCha8Rng, input_dim: usize, scale: f64) -> NeuralHamiltonian {
    let depth = rng.random_range(1..=3usize);
    let hidden: Vec<usize> = (1..depth).map(|_| rng.random_range(1..=16usize)).collect();
    let mut net = init_network(
        &Architecture::mlp(input_dim, &hidden, 1, Readout::FinalScalar),
        rng.random(),
    )
    .unwrap();
    let p = normal_vec(rng, net.param_count(), scale);
    net.set_params(&p).unwrap();
    net
}

/// Central differences of a scalar function.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut a = x.to_vec();
    (0..x.len())
        .map(|i| {
            let xi = a[i];
            a[i] = xi + h;
            let fp = f(&a);
            a[i] = xi - h;
            let fm = f(&a);
            a[i] = xi;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖₂ / max(‖b‖₂, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / n.max(floor)
}
