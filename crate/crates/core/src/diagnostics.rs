//! Energy drift, recurrence, gradient and Hamiltonian-value errors, and a
//! small SVG line-chart writer.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{HnnError, Result};
use crate::integrators::{GradientDataset, Trajectory};
use crate::linalg::norm2;
use crate::nn::{NeuralHamiltonian, ScalarField};
use crate::training::loss::abs_pow;
use crate::training::LossConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyDrift {
    /// `H(u(t)) − H(u(0))` at every trajectory time.
    pub series: Vec<f64>,
    pub max_abs: f64,
    pub mean_abs: f64,
    /// Least-squares slope of `|series|` against time; positive when the
    /// drift grows.
    pub abs_slope: f64,
}

pub fn energy_drift<F>(traj: &Trajectory, h: F) -> Result<EnergyDrift>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if traj.is_empty() {
        return Err(HnnError::InvalidArgument("empty trajectory".into()));
    }
    let h0 = h(&traj.states[0])?;
    let series = traj
        .states
        .iter()
        .map(|u| Ok(h(u)? - h0))
        .collect::<Result<Vec<f64>>>()?;
    let n = series.len() as f64;
    let max_abs = series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mean_abs = series.iter().map(|v| v.abs()).sum::<f64>() / n;
    let tm = traj.times.iter().sum::<f64>() / n;
    let sm = mean_abs;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, s) in traj.times.iter().zip(&series) {
        num += (t - tm) * (s.abs() - sm);
        den += (t - tm) * (t - tm);
    }
    let abs_slope = if den > 0.0 { num / den } else { 0.0 };
    Ok(EnergyDrift {
        series,
        max_abs,
        mean_abs,
        abs_slope,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recurrence {
    pub t_best: f64,
    pub min_error: f64,
}

/// Smallest `‖u(t) − ref‖/‖ref‖` over trajectory times in
/// `[t_center − window, t_center + window]`.
pub fn recurrence_error(traj: &Trajectory, reference: &[f64], t_center: f64, window: f64) -> Result<Recurrence> {
    if reference.len() != traj.dim() {
        return Err(HnnError::dim("recurrence reference", traj.dim(), reference.len()));
    }
    let scale = norm2(reference);
    if !(scale > 0.0) {
        return Err(HnnError::InvalidArgument("reference state must be nonzero".into()));
    }
    let mut best: Option<Recurrence> = None;
    for (t, u) in traj.times.iter().zip(&traj.states) {
        if (t - t_center).abs() > window {
            continue;
        }
        let e = u.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / scale;
        if best.is_none_or(|b| e < b.min_error) {
            best = Some(Recurrence { t_best: *t, min_error: e });
        }
    }
    best.ok_or_else(|| {
        HnnError::InvalidArgument(format!(
            "no trajectory time within [{}, {}]",
            t_center - window,
            t_center + window
        ))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub max: f64,
}

fn stats(values: &[f64]) -> ErrorStats {
    ErrorStats {
        mean: values.iter().sum::<f64>() / values.len().max(1) as f64,
        max: values.iter().copied().fold(0.0, f64::max),
    }
}

/// Per-sample `‖pred − target‖ₚᵖ` of the network's gradient (or symplectic
/// gradient) over a dataset.
pub fn gradient_test_error(net: &NeuralHamiltonian, dataset: &GradientDataset, loss: &LossConfig) -> Result<ErrorStats> {
    Ok(stats(&gradient_errors(net, dataset, loss)?))
}

pub fn gradient_errors(net: &NeuralHamiltonian, dataset: &GradientDataset, loss: &LossConfig) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(HnnError::InvalidArgument("empty dataset".into()));
    }
    let n = net.input_dim();
    let x = crate::nn::hamiltonian::stack_rows(dataset.samples.iter().map(|s| s.u.as_slice()), n);
    let d = crate::nn::hamiltonian::stack_rows(dataset.samples.iter().map(|s| s.dudt.as_slice()), n);
    let g = net.input_gradient_batch(x.view())?;
    let pred = loss.predictions(g.view());
    let target = loss.targets(d.view())?;
    Ok(pred
        .rows()
        .into_iter()
        .zip(target.rows())
        .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| abs_pow(x - y, loss.p)).sum())
        .collect())
}

/// Per-sample `‖f(u) − du/dt‖ₚᵖ` for any vector field.
pub fn field_test_error<F>(field: F, dataset: &GradientDataset, p: f64) -> Result<ErrorStats>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if dataset.is_empty() {
        return Err(HnnError::InvalidArgument("empty dataset".into()));
    }
    let errs = dataset
        .samples
        .iter()
        .map(|s| {
            let f = field(&s.u)?;
            Ok(f.iter().zip(&s.dudt).map(|(a, b)| abs_pow(a - b, p)).sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(stats(&errs))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueError {
    pub mean_abs: f64,
    pub max_abs: f64,
}

/// `|H_true − H_NN|` over `grid`. Apply the mean alignment to the network
/// first; see [`crate::training::align_mean`].
pub fn hamiltonian_value_error<H>(net: &NeuralHamiltonian, h_true: &H, grid: &[Vec<f64>]) -> Result<ValueError>
where
    H: ScalarField + ?Sized,
{
    if grid.is_empty() {
        return Err(HnnError::InvalidArgument("empty grid".into()));
    }
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for u in grid {
        let e = (h_true.value(u)? - net.forward(u)?).abs();
        sum += e;
        max = max.max(e);
    }
    Ok(ValueError {
        mean_abs: sum / grid.len() as f64,
        max_abs: max,
    })
}

/// Aligns a copy of `net` on `grid`, then measures the value error.
pub fn aligned_value_error<H>(net: &NeuralHamiltonian, h_true: &H, grid: &[Vec<f64>]) -> Result<(ValueError, f64)>
where
    H: ScalarField + ?Sized,
{
    let c = crate::training::align_mean(net, h_true, grid)?;
    let mut shifted = net.clone();
    shifted.shift_output(c);
    Ok((hamiltonian_value_error(&shifted, h_true, grid)?, c))
}

/// Colors for state components. Four-dimensional states are ordered
/// `(q₁, q₂, v₁, v₂)` and drawn red, blue, green, black.
pub fn series_color(index: usize, count: usize) -> &'static str {
    const FOUR: [&str; 4] = ["#d62728", "#1f3fbf", "#2ca02c", "#000000"];
    const PALETTE: [&str; 10] = [
        "#d62728", "#1f3fbf", "#2ca02c", "#000000", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
        "#17becf",
    ];
    if count == 4 {
        FOUR[index]
    } else {
        PALETTE[index % PALETTE.len()]
    }
}

/// Static SVG line chart: one polyline per value column against `t`.
pub fn render_svg(title: &str, names: &[String], rows: &[(f64, Vec<f64>)]) -> Result<String> {
    if rows.is_empty() {
        return Err(HnnError::InvalidArgument("nothing to plot".into()));
    }
    let k = names.len();
    if rows.iter().any(|(_, v)| v.len() != k) {
        return Err(HnnError::InvalidArgument("ragged series".into()));
    }
    let (w, h) = (800.0, 450.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let t0 = rows[0].0;
    let t1 = rows[rows.len() - 1].0;
    let finite = rows.iter().flat_map(|(_, v)| v.iter()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-300 {
        lo -= 0.5;
        hi += 0.5;
    }
    let tspan = if t1 > t0 { t1 - t0 } else { 1.0 };
    let px = |t: f64| left + (t - t0) / tspan * pw;
    let py = |v: f64| top + (hi - v) / (hi - lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let tv = t0 + f * tspan;
        let yv = lo + f * (hi - lo);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            px(tv),
            top + ph + 18.0,
            short(tv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            left - 6.0,
            py(yv) + 4.0,
            short(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">t</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    for (c, name) in names.iter().enumerate() {
        let color = series_color(c, k);
        let pts: Vec<String> = rows
            .iter()
            .filter(|(_, v)| v[c].is_finite())
            .map(|(t, v)| format!("{:.2},{:.2}", px(*t), py(v[c])))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-name="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(name),
            pts.join(" ")
        );
        let ly = top + 14.0 + 18.0 * c as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn short(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
