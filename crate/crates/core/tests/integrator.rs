use hnn_core::dynamics::{HarmonicOscillator, ReferenceSystem};
use hnn_core::integrators::{
    dopri45, dopri45_with_stats, dopri5_fixed, generate_dataset, rk4_fixed, uniform_times, Sampler,
    DEFAULT_ATOL, DEFAULT_RTOL,
};
use hnn_core::Result;

fn decay(u: &[f64]) -> Result<Vec<f64>> {
    Ok(u.iter().map(|v| -v).collect())
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn fixed_step_order_is_five() {
    let err = |h: f64| {
        let n = (1.0 / h).round() as usize;
        let tr = dopri5_fixed(decay, &[1.0], h, n).unwrap();
        (tr.last().unwrap()[0] - (-1.0f64).exp()).abs()
    };
    let hs = [0.2f64, 0.1, 0.05, 0.025];
    let logs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let errs: Vec<f64> = hs.iter().map(|&h| err(h).ln()).collect();
    let order = slope(&logs, &errs);
    assert!((order - 5.0).abs() < 0.3, "order {order}");
}

#[test]
fn adaptive_error_is_proportional_to_tolerance() {
    let tols = [1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11, 1e-12];
    let mut lt = Vec::new();
    let mut le = Vec::new();
    for &tol in &tols {
        let tr = dopri45(decay, &[1.0], (0.0, 1.0), tol, tol * 1e-3, &[1.0]).unwrap();
        let e = (tr.last().unwrap()[0] - (-1.0f64).exp()).abs();
        lt.push(tol.ln());
        le.push(e.ln());
    }
    let k = slope(&lt, &le);
    assert!((k - 1.0).abs() < 0.2, "exponent {k}");
}

#[test]
fn harmonic_energy_drift_scales_with_tolerance() {
    let osc = HarmonicOscillator::default();
    let sys = ReferenceSystem::HarmonicOscillator(osc);
    let u0 = [1.0, 0.0];
    let h0 = osc.energy(&u0);
    let times = uniform_times(0.0, 100.0, 2001);
    for rtol in [DEFAULT_RTOL, 1e-9, 1e-10] {
        let atol = rtol * DEFAULT_ATOL / DEFAULT_RTOL;
        let tr = dopri45(|u| sys.field(u), &u0, (0.0, 100.0), rtol, atol, &times).unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let drift = (osc.energy(s) - h0).abs() / h0.abs().max(1.0);
            assert!(drift < 5.0 * rtol, "rtol {rtol}, t = {t}: {drift:e}");
            let exact = osc.exact(&u0, *t);
            assert!((s[0] - exact[0]).abs() < 500.0 * rtol && (s[1] - exact[1]).abs() < 500.0 * rtol);
        }
    }
}

#[test]
fn rk4_halving_gains_a_factor_sixteen() {
    let err = |h: f64| {
        let tr = rk4_fixed(decay, &[1.0], h, (2.0 / h).round() as usize).unwrap();
        (tr.last().unwrap()[0] - (-2.0f64).exp()).abs()
    };
    let r = err(0.1) / err(0.05);
    assert!((r - 16.0).abs() < 1.0, "ratio {r}");
}

#[test]
fn runs_are_deterministic() {
    let sys = ReferenceSystem::default_for(hnn_core::dynamics::SystemName::DoublePendulum);
    let f = |u: &[f64]| sys.field(u);
    let (a, sa) = dopri45_with_stats(f, &[0.3, -0.2, 0.1, 0.5], (0.0, 5.0), 1e-9, 1e-11, &[]).unwrap();
    let (b, sb) = dopri45_with_stats(f, &[0.3, -0.2, 0.1, 0.5], (0.0, 5.0), 1e-9, 1e-11, &[]).unwrap();
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    assert!(sa.accepted > 0);
}

#[test]
fn dataset_derivatives_are_the_system_field() {
    let sys = ReferenceSystem::default_for(hnn_core::dynamics::SystemName::MassSpring);
    let ds = generate_dataset(&sys, 3, (0.0, 5.0), 40, &Sampler::StandardNormal, 11).unwrap();
    assert_eq!(ds.len(), 120);
    for s in &ds.samples {
        let f = sys.field(&s.u).unwrap();
        for (a, b) in f.iter().zip(&s.dudt) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
    let again = generate_dataset(&sys, 3, (0.0, 5.0), 40, &Sampler::StandardNormal, 11).unwrap();
    assert_eq!(ds.samples, again.samples);
}
