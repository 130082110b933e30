mod common;

use common::rng;
use hnn_core::bounds::{
    covering_constant, generalization_bound, kam_probability, linf_hamiltonian_bound, log_covering,
    rademacher_bound, KamOutcome, LinfBound,
};
use hnn_core::nn::NormProfile;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const SWEEPS: usize = 10_000;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(f64::MIN_POSITIVE)
}

fn random_profile(r: &mut ChaCha8Rng) -> NormProfile {
    let nl = r.random_range(1..=4usize);
    let mut draw = |n: usize, lo: f64, hi: f64| (0..n).map(|_| r.random_range(lo..hi)).collect::<Vec<f64>>();
    NormProfile {
        layer_norms: draw(nl + 1, 0.1, 10.0),
        act_lipschitz: draw(nl, 0.1, 3.0),
        act_deriv_bound: draw(nl, 0.1, 3.0),
        act_deriv_lipschitz: draw(nl, 0.1, 3.0),
        input_radius: draw(1, 0.1, 10.0)[0],
        loss_lipschitz: draw(1, 0.1, 10.0)[0],
        n: 1 + (draw(1, 0.0, 5000.0)[0] as usize),
    }
}

// Independent evaluations of each closed form.
fn k_oracle(p: &NormProfile) -> f64 {
    let nl = p.act_lipschitz.len();
    let mut k = 2.0 * p.loss_lipschitz * p.input_radius * p.layer_norms[nl] * p.act_deriv_lipschitz[nl - 1];
    for j in 0..nl - 1 {
        k *= p.act_lipschitz[j] * p.act_deriv_bound[j];
    }
    for j in 0..nl {
        k *= p.layer_norms[j].powi(2);
    }
    k
}

fn r_oracle(k: f64, c: f64, n: usize) -> f64 {
    let n = n as f64;
    6.0 * c * ((n * (k / c + 1.0).ln()).sqrt() + 2.0 * (n * 2f64.ln()).sqrt()) / n
}

fn kam_delta(o: KamOutcome) -> f64 {
    o.delta().unwrap_or(1.0)
}

#[test]
fn worked_examples() {
    let ones = NormProfile {
        layer_norms: vec![1.0; 3],
        act_lipschitz: vec![1.0; 2],
        act_deriv_bound: vec![1.0; 2],
        act_deriv_lipschitz: vec![1.0; 2],
        input_radius: 1.0,
        loss_lipschitz: 1.0,
        n: 4,
    };
    let k = covering_constant(&ones).unwrap();
    assert_eq!(k, 2.0);
    assert!(close(log_covering(k, 1.0, 4).unwrap(), 4.0 * 3f64.ln()));
    assert!(log_covering(k, 1e300, 4).unwrap() < 1e-290);

    let mut doubled = ones.clone();
    doubled.layer_norms.iter_mut().for_each(|c| *c *= 2.0);
    assert_eq!(covering_constant(&doubled).unwrap() / k, 32.0);

    let r = rademacher_bound(1.0, 1.0, 100).unwrap();
    assert!(close(r.rademacher, 18.0 * 2f64.ln().sqrt() / 10.0));
    assert!((r.rademacher - 1.4986).abs() < 1e-4);

    let delta = 4.0 * (-4.0f64).exp();
    assert!(close(generalization_bound(0.0, 0.0, 1.0, delta, 8).unwrap(), 3.0));

    assert_eq!(linf_hamiltonian_bound(0.0, 1.0, 1.0, 5.0, 2).unwrap().value(), Some(0.0));
    assert!(close(linf_hamiltonian_bound(32.0, 1.0, 1.0, 5.0, 2).unwrap().value().unwrap(), 2.0));
    assert!(matches!(
        linf_hamiltonian_bound(1.0, 1.0, 1.0, 2.0, 2).unwrap(),
        LinfBound::NotApplicable { .. }
    ));

    let d = kam_probability(1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 4).unwrap().delta().unwrap();
    assert!((d - (-4.0f64).exp()).abs() < 1e-12);
    assert!(matches!(
        kam_probability(1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 4).unwrap(),
        KamOutcome::NoGuarantee { .. }
    ));
}

#[test]
fn closed_forms_match_independent_oracles() {
    let mut r = rng(31);
    for _ in 0..SWEEPS {
        let p = random_profile(&mut r);
        let k = covering_constant(&p).unwrap();
        assert!(close(k, k_oracle(&p)));

        let eps = r.random_range(1e-3..1e3) * k;
        assert!(close(log_covering(k, eps, p.n).unwrap(), p.n as f64 * (k / eps + 1.0).ln()));

        let c = r.random_range(0.01..100.0);
        let rad = rademacher_bound(k, c, p.n).unwrap();
        assert!(close(rad.rademacher, r_oracle(k, c, p.n)));

        let l = r.random_range(0.0..10.0);
        let delta = r.random_range(1e-6..0.999);
        let gen = generalization_bound(l, rad.rademacher, c, delta, p.n).unwrap();
        let expect = l + 2.0 * rad.rademacher + 3.0 * c * (2.0 * (4.0 / delta).ln() / p.n as f64).sqrt();
        assert!(close(gen, expect));

        let m = r.random_range(1..=3usize);
        let pp = r.random_range(1.0..10.0);
        let (cs, f) = (r.random_range(0.1..3.0), r.random_range(0.1..3.0));
        match linf_hamiltonian_bound(gen, cs, f, pp, m).unwrap() {
            LinfBound::Bound { value } => {
                assert!(pp > 2.0 * m as f64);
                assert!(close(value, (cs.powf(pp) * gen / f).powf(1.0 / pp)));
            }
            LinfBound::NotApplicable { .. } => assert!(pp <= 2.0 * m as f64),
        }

        let (c1, c2, c3) = (r.random_range(0.1..3.0), r.random_range(0.1..3.0), r.random_range(0.1..3.0));
        let eps0 = r.random_range(0.01..10.0);
        let lt = r.random_range(0.0..1.0);
        let rn = r.random_range(0.0..1.0);
        match kam_probability(eps0, c1, c2, c3, lt, rn, p.n).unwrap() {
            KamOutcome::Delta { delta, .. } => {
                let margin = eps0 - c1 * lt - c2 * rn;
                assert!(margin > 0.0);
                let expect = (-(p.n as f64) * (margin / c3).powi(2)).exp();
                assert!((delta - expect).abs() <= 1e-12 * expect.max(f64::MIN_POSITIVE));
                assert!((0.0..=1.0).contains(&delta));
            }
            KamOutcome::NoGuarantee { .. } => assert!(eps0 <= c1 * lt + c2 * rn),
        }
    }
}

#[test]
fn covering_constant_is_monotone_in_every_entry() {
    let mut r = rng(32);
    for _ in 0..SWEEPS {
        let p = random_profile(&mut r);
        let k = covering_constant(&p).unwrap();
        let bump = r.random_range(1.0..2.0);
        let nl = p.act_lipschitz.len();
        let which = r.random_range(0..(4 * nl + 3));
        let mut q = p.clone();
        match which {
            w if w <= nl => q.layer_norms[w] *= bump,
            w if w <= 2 * nl => q.act_lipschitz[w - nl - 1] *= bump,
            w if w <= 3 * nl => q.act_deriv_bound[w - 2 * nl - 1] *= bump,
            w if w <= 4 * nl => q.act_deriv_lipschitz[w - 3 * nl - 1] *= bump,
            w if w == 4 * nl + 1 => q.input_radius *= bump,
            _ => q.loss_lipschitz *= bump,
        }
        assert!(covering_constant(&q).unwrap() >= k);
    }
}

#[test]
fn chain_is_monotone_in_its_inputs() {
    let mut r = rng(33);
    for _ in 0..SWEEPS {
        let k = r.random_range(0.01..1e4);
        let c = r.random_range(0.01..100.0);
        let n = r.random_range(1..10_000usize);
        let n2 = n + r.random_range(1..1000usize);
        let ra = rademacher_bound(k, c, n).unwrap().rademacher;
        assert!(rademacher_bound(k, c, n2).unwrap().rademacher <= ra);
        assert!(rademacher_bound(k * 1.5, c, n).unwrap().rademacher > ra);

        let l = r.random_range(0.0..5.0);
        let d1 = r.random_range(1e-6..0.5);
        let d2 = r.random_range(d1..0.999);
        let g = generalization_bound(l, ra, c, d1, n).unwrap();
        assert!(g >= l);
        assert!(generalization_bound(l, ra, c, d2, n).unwrap() <= g);
        assert!(generalization_bound(l, ra, c, d1, n2).unwrap() <= g);

        let (c1, c2, c3) = (r.random_range(0.1..3.0), r.random_range(0.1..3.0), r.random_range(0.1..3.0));
        let eps0 = r.random_range(0.01..10.0);
        let (lt, rn) = (r.random_range(0.0..1.0), r.random_range(0.0..1.0));
        let base = kam_delta(kam_probability(eps0, c1, c2, c3, lt, rn, n).unwrap());
        let up = r.random_range(0.0..1.0);
        assert!(kam_delta(kam_probability(eps0, c1, c2, c3, lt + up, rn, n).unwrap()) >= base);
        assert!(kam_delta(kam_probability(eps0, c1, c2, c3, lt, rn + up, n).unwrap()) >= base);
        assert!(kam_delta(kam_probability(eps0, c1, c2, c3, lt, rn, n2).unwrap()) <= base);
        assert!(kam_delta(kam_probability(eps0 + up, c1, c2, c3, lt, rn, n).unwrap()) <= base);
    }
}

#[test]
fn kam_delta_strictly_increases_with_training_loss() {
    let (eps0, c) = (2.0, 1.0);
    let mut prev = 0.0;
    for i in 0..10 {
        let l = 0.1 * i as f64;
        let d = kam_probability(eps0, c, c, c, l, 0.0, 3).unwrap().delta().unwrap();
        assert!(d > prev);
        prev = d;
    }
}

#[test]
fn alpha_beta_dominate_the_covering_entropy() {
    let mut r = rng(34);
    for _ in 0..SWEEPS / 10 {
        let k = r.random_range(1e-3..1e6);
        let c = r.random_range(1e-3..1e3);
        let n = r.random_range(1..10_000usize);
        let rad = rademacher_bound(k, c, n).unwrap();
        for kk in 0..=60 {
            let eps = c * 2f64.powi(-kk);
            let lhs = log_covering(k, eps, n).unwrap().sqrt();
            assert!(lhs <= (rad.alpha + kk as f64 * rad.beta) * (1.0 + 1e-12), "k = {kk}");
        }
    }
}
