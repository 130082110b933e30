mod common;

use common::{normal_vec, random_mlp, rng};
use hnn_core::diagnostics::{aligned_value_error, energy_drift, recurrence_error};
use hnn_core::dynamics::{
    energy_rate, hnn_vector_field, transformed_vector_field, Character, CoordinateMap, ReferenceSystem,
    StructureMatrix, SystemName,
};
use hnn_core::integrators::{Trajectory, TrajectoryMeta};
use hnn_core::linalg::{norm2, to_nalgebra};
use hnn_core::nn::{init_vector_net, norm_profile, Architecture, NeuralHamiltonian, Readout, ScalarField};
use hnn_core::Result;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

fn random_skew(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> StructureMatrix {
    let a = Array2::from_shape_vec((n, n), normal_vec(r, n * n, 1.0)).unwrap();
    StructureMatrix::custom(&a - &a.t(), Character::Skew).unwrap()
}

fn skew_rate_ratio(net: &NeuralHamiltonian, s: &StructureMatrix, u: &[f64]) -> f64 {
    let rate = energy_rate(net, |x| hnn_vector_field(net, s, x), u).unwrap();
    let g = net.input_gradient(u).unwrap();
    let f = hnn_vector_field(net, s, u).unwrap();
    rate.abs() / (norm2(&g) * norm2(&f)).max(f64::MIN_POSITIVE)
}

#[test]
fn skew_structure_conserves_the_learned_energy() {
    let mut r = rng(1);
    for case in 0..1000 {
        let m = r.random_range(1..=8usize);
        let n = 2 * m;
        let net = random_mlp(&mut r, n, 0.7);
        let s = match case % 3 {
            0 => StructureMatrix::canonical(m).unwrap(),
            1 => StructureMatrix::central_difference(n.max(4), 0.1).unwrap(),
            _ => random_skew(&mut r, n),
        };
        if s.dim() != n {
            continue;
        }
        let u = normal_vec(&mut r, n, 1.0);
        let ratio = skew_rate_ratio(&net, &s, &u);
        assert!(ratio < 1e-12, "case {case}: relative rate {ratio:.3e}");
    }
}

#[test]
fn second_difference_dissipates_the_learned_energy() {
    let mut r = rng(2);
    for _ in 0..1000 {
        let n = r.random_range(4..=16usize);
        let net = random_mlp(&mut r, n, 0.7);
        let g2 = StructureMatrix::second_difference(n, 0.1).unwrap();
        let u = normal_vec(&mut r, n, 1.0);
        let rate = energy_rate(&net, |x| hnn_vector_field(&net, &g2, x), &u).unwrap();
        let g = net.input_gradient(&u).unwrap();
        let f = hnn_vector_field(&net, &g2, &u).unwrap();
        let scale = (norm2(&g) * norm2(&f)).max(f64::MIN_POSITIVE);
        assert!(rate / scale <= 1e-10, "rate {rate:.3e}");
    }
}

#[test]
fn transformed_field_conserves_the_learned_energy() {
    let mut r = rng(3);
    for _ in 0..200 {
        let net = random_mlp(&mut r, 4, 0.7);
        let cnet = init_vector_net(&Architecture::mlp(4, &[8], 4, Readout::SumOfOutputs), r.random()).unwrap();
        let cmap = CoordinateMap::new(cnet, 0).unwrap();
        let s = StructureMatrix::canonical(2).unwrap();
        let x = normal_vec(&mut r, 4, 1.0);
        let f = match transformed_vector_field(&net, &cmap, &s, &x) {
            Ok(f) => f,
            Err(e) if e.is_numerical() => continue,
            Err(e) => panic!("{e}"),
        };
        let g = net.input_gradient(&x).unwrap();
        let rate: f64 = g.iter().zip(&f).map(|(a, b)| a * b).sum();
        assert!(rate.abs() <= 1e-10 * norm2(&g) * norm2(&f));
    }
}

#[test]
fn reference_systems_conserve_their_energy() {
    let mut r = rng(4);
    for name in [SystemName::KdvSemidiscrete, SystemName::HarmonicOscillator] {
        let sys = ReferenceSystem::default_for(name);
        for _ in 0..100 {
            let u = normal_vec(&mut r, sys.dim(), 1.0);
            let rate = energy_rate(&sys, |x| sys.field(x), &u).unwrap();
            let scale = norm2(&sys.hamiltonian_gradient(&u).unwrap()) * norm2(&sys.field(&u).unwrap());
            assert!(rate.abs() <= 1e-12 * scale, "{name:?}: {rate:.3e}");
        }
    }
}

#[test]
fn gradient_norm_never_exceeds_the_profile_bound() {
    let mut r = rng(5);
    for _ in 0..100 {
        let n = r.random_range(1..=16usize);
        let net = random_mlp(&mut r, n, 0.8);
        let profile = norm_profile(&net, 1.0, 1.0, 1).unwrap();
        for (layer, c) in net.net().layers().iter().zip(&profile.layer_norms) {
            let svd = to_nalgebra(&layer.linear.to_matrix()).singular_values().max();
            if !std::ptr::eq(layer, net.net().layers().last().unwrap()) {
                assert!((c - svd).abs() <= 1e-12 * svd.max(1.0), "{c} vs {svd}");
            }
        }
        let bound = profile.gradient_norm_bound();
        for _ in 0..20 {
            let u = normal_vec(&mut r, n, 3.0);
            let g = norm2(&net.input_gradient(&u).unwrap());
            assert!(g <= bound * (1.0 + 1e-8), "{g} > {bound}");
        }
    }
}

struct Shifted<'a> {
    net: &'a NeuralHamiltonian,
    c: f64,
}

impl ScalarField for Shifted<'_> {
    fn dim(&self) -> usize {
        self.net.input_dim()
    }
    fn value(&self, u: &[f64]) -> Result<f64> {
        Ok(self.net.forward(u)? + self.c)
    }
    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.net.input_gradient(u)
    }
}

#[test]
fn value_error_is_gauge_invariant() {
    let mut r = rng(6);
    for _ in 0..50 {
        let n = r.random_range(1..=8usize);
        let net = random_mlp(&mut r, n, 0.5);
        let grid: Vec<Vec<f64>> = (0..30).map(|_| normal_vec(&mut r, n, 1.0)).collect();
        let c = 100.0 * r.random::<f64>() - 50.0;
        let (ve, offset) = aligned_value_error(&net, &Shifted { net: &net, c }, &grid).unwrap();
        assert!(ve.max_abs < 1e-12 && ve.mean_abs < 1e-12, "{ve:?}");
        assert!((offset - c).abs() < 1e-12);

        let other = random_mlp(&mut r, n, 0.5);
        let (a, _) = aligned_value_error(&net, &Shifted { net: &other, c: 0.0 }, &grid).unwrap();
        let mut lifted = net.clone();
        let k = 7.25;
        lifted.shift_output(k);
        let (b, _) = aligned_value_error(&lifted, &Shifted { net: &other, c: k }, &grid).unwrap();
        assert!((a.max_abs - b.max_abs).abs() < 1e-12);
        assert!((a.mean_abs - b.mean_abs).abs() < 1e-12);
    }
}

fn trajectory(states: Vec<Vec<f64>>) -> Trajectory {
    Trajectory {
        times: (0..states.len()).map(|i| i as f64 * 0.1).collect(),
        states,
        meta: TrajectoryMeta::default(),
    }
}

proptest! {
    #[test]
    fn diagnostics_are_pure(seed in 0u64..1000, len in 2usize..40) {
        let mut r = rng(seed);
        let states: Vec<Vec<f64>> = (0..len).map(|_| normal_vec(&mut r, 3, 1.0)).collect();
        let tr = trajectory(states);
        let h = |u: &[f64]| Ok(u.iter().map(|x| x * x).sum::<f64>());
        prop_assert_eq!(energy_drift(&tr, h).unwrap(), energy_drift(&tr, h).unwrap());
        let reference = tr.states[len / 2].clone();
        let t = tr.times[len / 2];
        let a = recurrence_error(&tr, &reference, t, 0.05).unwrap();
        prop_assert_eq!(a, recurrence_error(&tr, &reference, t, 0.05).unwrap());
        prop_assert_eq!(a.min_error, 0.0);
    }

    #[test]
    fn skew_rate_vanishes_for_any_state(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let net = random_mlp(&mut r, 4, 0.7);
        let s = StructureMatrix::canonical(2).unwrap();
        let u = normal_vec(&mut r, 4, 2.0);
        prop_assert!(skew_rate_ratio(&net, &s, &u) < 1e-12);
    }
}

#[test]
fn conv_layer_norms_match_the_expanded_circulant() {
    let mut r = rng(7);
    for seed in 0..10 {
        let grid = r.random_range(4..=12usize);
        let mut net = hnn_core::nn::init_network(&Architecture::conv(grid, &[5, 3], &[3, 3, 1]), seed).unwrap();
        let p = normal_vec(&mut r, net.param_count(), 1.0);
        net.set_params(&p).unwrap();
        let profile = norm_profile(&net, 1.0, 1.0, 1).unwrap();
        let layers = net.net().layers();
        for (layer, c) in layers[..layers.len() - 1].iter().zip(&profile.layer_norms) {
            let svd = to_nalgebra(&layer.linear.to_matrix()).singular_values().max();
            assert!((c - svd).abs() <= 1e-12 * svd.max(1.0), "{c} vs {svd}");
        }
    }
}
