use serde::{Deserialize, Serialize};

use crate::error::{HnnError, Result};

pub const DEFAULT_RTOL: f64 = 1e-8;
pub const DEFAULT_ATOL: f64 = 1e-10;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.1;
const FAC_MAX: f64 = 5.0;
const EXP_CURRENT: f64 = 0.7 / 5.0;
const EXP_PREVIOUS: f64 = 0.4 / 5.0;
const MAX_STEPS: usize = 10_000_000;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub system: String,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }
}

/// Step statistics of an adaptive run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Stage {
    y_new: Vec<f64>,
    k7: Vec<f64>,
    err: Vec<f64>,
    ks: [Vec<f64>; 6],
}

fn axpy(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (c, k) in terms {
        if *c != 0.0 {
            for (o, v) in out.iter_mut().zip(k.iter()) {
                *o += h * c * v;
            }
        }
    }
    out
}

fn check_finite(v: &[f64], t: f64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(HnnError::Divergence { t })
    }
}

fn dopri_stage<F>(field: &F, y: &[f64], k1: &[f64], h: f64) -> Result<Stage>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let k2 = field(&axpy(y, h, &[(A21, k1)]))?;
    let k3 = field(&axpy(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = field(&axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = field(&axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
    let k6 = field(&axpy(
        y,
        h,
        &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
    ))?;
    let y_new = axpy(
        y,
        h,
        &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
    );
    let k7 = field(&y_new)?;
    let err: Vec<f64> = (0..y.len())
        .map(|i| h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]))
        .collect();
    Ok(Stage {
        y_new,
        k7,
        err,
        ks: [k1.to_vec(), k2, k3, k4, k5, k6],
    })
}

/// Dense-output coefficients for one accepted step.
struct Dense {
    t0: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl Dense {
    fn new(t0: f64, h: f64, y0: &[f64], st: &Stage) -> Self {
        let n = y0.len();
        let [k1, _, k3, k4, k5, k6] = &st.ks;
        let mut r1 = vec![0.0; n];
        let mut r2 = vec![0.0; n];
        let mut r3 = vec![0.0; n];
        let mut r4 = vec![0.0; n];
        for i in 0..n {
            let ydiff = st.y_new[i] - y0[i];
            let bspl = h * k1[i] - ydiff;
            r1[i] = ydiff;
            r2[i] = bspl;
            r3[i] = ydiff - h * st.k7[i] - bspl;
            r4[i] = h
                * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * st.k7[i]);
        }
        Dense {
            t0,
            h,
            r: [y0.to_vec(), r1, r2, r3, r4],
        }
    }

    fn eval(&self, t: f64) -> Vec<f64> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [y0, r1, r2, r3, r4] = &self.r;
        (0..y0.len())
            .map(|i| y0[i] + th * (r1[i] + th1 * (r2[i] + th * (r3[i] + th1 * r4[i]))))
            .collect()
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], rtol: f64, atol: f64) -> f64 {
    let n = err.len().max(1) as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = atol + rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

fn initial_step<F>(field: &F, y0: &[f64], f0: &[f64], span: f64, rtol: f64, atol: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let sc: Vec<f64> = y0.iter().map(|y| atol + rtol * y.abs()).collect();
    let rms = |v: &[f64]| {
        (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / v.len().max(1) as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let y1 = axpy(y0, h0, &[(1.0, f0)]);
    let f1 = field(&y1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

/// Adaptive Dormand–Prince 5(4) from `t_span.0` to `t_span.1`.
///
/// Returns the states at `dense_times` (interpolated with the 4th-order
/// continuous extension), or at every accepted step when `dense_times` is
/// empty.
pub fn dopri45<F>(
    field: F,
    u0: &[f64],
    t_span: (f64, f64),
    rtol: f64,
    atol: f64,
    dense_times: &[f64],
) -> Result<Trajectory>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    dopri45_with_stats(field, u0, t_span, rtol, atol, dense_times).map(|(t, _)| t)
}

pub fn dopri45_with_stats<F>(
    field: F,
    u0: &[f64],
    t_span: (f64, f64),
    rtol: f64,
    atol: f64,
    dense_times: &[f64],
) -> Result<(Trajectory, StepStats)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let (t0, t1) = t_span;
    if !(rtol > 0.0) || !(atol > 0.0) {
        return Err(HnnError::InvalidArgument(format!(
            "tolerances must be positive (rtol = {rtol}, atol = {atol})"
        )));
    }
    if !(t1 > t0) {
        return Err(HnnError::InvalidArgument(format!("empty time span [{t0}, {t1}]")));
    }
    if dense_times.windows(2).any(|w| !(w[1] > w[0]))
        || dense_times.iter().any(|&t| t < t0 || t > t1)
    {
        return Err(HnnError::InvalidArgument(
            "output times must be strictly increasing and inside the time span".into(),
        ));
    }
    check_finite(u0, t0)?;
    let span = t1 - t0;
    let mut stats = StepStats::default();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut next_out = 0usize;
    let dense_mode = !dense_times.is_empty();
    if !dense_mode {
        times.push(t0);
        states.push(u0.to_vec());
    }
    // outputs at the start time need no stepping
    while next_out < dense_times.len() && dense_times[next_out] == t0 {
        times.push(t0);
        states.push(u0.to_vec());
        next_out += 1;
    }

    let mut t = t0;
    let mut y = u0.to_vec();
    let mut k1 = field(&y)?;
    stats.evaluations += 1;
    check_finite(&k1, t)?;
    let mut h = initial_step(&field, &y, &k1, span, rtol, atol)?;
    stats.evaluations += 1;
    let mut err_prev: f64 = 1e-4;
    let mut last_rejected = false;

    while t < t1 {
        if stats.accepted + stats.rejected > MAX_STEPS {
            return Err(HnnError::StepSizeUnderflow { t, h });
        }
        if h < 1e-14 * span {
            return Err(HnnError::StepSizeUnderflow { t, h });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let st = dopri_stage(&field, &y, &k1, h)?;
        stats.evaluations += 6;
        let err = error_norm(&st.err, &y, &st.y_new, rtol, atol);
        if !err.is_finite() {
            // treat as a failed step with a drastic cut
            if st.y_new.iter().all(|v| v.is_finite()) {
                return Err(HnnError::Divergence { t });
            }
            h *= FAC_MIN;
            stats.rejected += 1;
            last_rejected = true;
            continue;
        }
        if err <= 1.0 {
            let t_new = if last { t1 } else { t + h };
            check_finite(&st.y_new, t_new)?;
            if dense_mode {
                let dense = Dense::new(t, h, &y, &st);
                while next_out < dense_times.len() && dense_times[next_out] <= t_new {
                    let to = dense_times[next_out];
                    let v = if to == t_new { st.y_new.clone() } else { dense.eval(to) };
                    times.push(to);
                    states.push(v);
                    next_out += 1;
                }
            } else {
                times.push(t_new);
                states.push(st.y_new.clone());
            }
            let mut fac = SAFETY * err.max(1e-10).powf(-EXP_CURRENT) * err_prev.powf(EXP_PREVIOUS);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if last_rejected {
                fac = fac.min(1.0);
            }
            err_prev = err.max(1e-4);
            t = t_new;
            y = st.y_new;
            k1 = st.k7;
            h *= fac;
            stats.accepted += 1;
            last_rejected = false;
        } else {
            let fac = (SAFETY * err.powf(-1.0 / 5.0)).clamp(FAC_MIN, 1.0);
            h *= fac;
            stats.rejected += 1;
            last_rejected = true;
        }
    }
    Ok((
        Trajectory {
            times,
            states,
            meta: TrajectoryMeta {
                system: String::new(),
                rtol: Some(rtol),
                atol: Some(atol),
                seed: None,
            },
        },
        stats,
    ))
}

/// Dormand–Prince 5th-order solution with a fixed step (no error control).
pub fn dopri5_fixed<F>(field: F, u0: &[f64], dt: f64, n_steps: usize) -> Result<Trajectory>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    fixed_step(u0, dt, n_steps, |y| {
        let k1 = field(y)?;
        Ok(dopri_stage(&field, y, &k1, dt)?.y_new)
    })
}

/// Classical fourth-order Runge–Kutta with `n_steps` steps of size `dt`.
pub fn rk4_fixed<F>(field: F, u0: &[f64], dt: f64, n_steps: usize) -> Result<Trajectory>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    fixed_step(u0, dt, n_steps, |y| {
        let k1 = field(y)?;
        let k2 = field(&axpy(y, dt, &[(0.5, &k1)]))?;
        let k3 = field(&axpy(y, dt, &[(0.5, &k2)]))?;
        let k4 = field(&axpy(y, dt, &[(1.0, &k3)]))?;
        Ok(axpy(
            y,
            dt,
            &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)],
        ))
    })
}

fn fixed_step<S>(u0: &[f64], dt: f64, n_steps: usize, mut step: S) -> Result<Trajectory>
where
    S: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(dt > 0.0) {
        return Err(HnnError::InvalidArgument(format!("step size {dt} must be positive")));
    }
    check_finite(u0, 0.0)?;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    states.push(u0.to_vec());
    for i in 1..=n_steps {
        let next = step(states.last().expect("nonempty"))?;
        let t = i as f64 * dt;
        check_finite(&next, t)?;
        times.push(t);
        states.push(next);
    }
    Ok(Trajectory {
        times,
        states,
        meta: TrajectoryMeta::default(),
    })
}

/// `n` equally spaced times covering `[t0, t1]` (just `t0` when `n == 1`).
pub fn uniform_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t0],
        _ => {
            let dt = (t1 - t0) / (n - 1) as f64;
            (0..n)
                .map(|i| if i + 1 == n { t1 } else { t0 + i as f64 * dt })
                .collect()
        }
    }
}
