use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::structure::{backward_difference, forward_difference, StructureMatrix};
use crate::error::{HnnError, Result};
use crate::linalg;
use crate::nn::ScalarField;

/// Double pendulum in `[θ₁, θ₂, φ₁, φ₂]` (angles and angular velocities).
/// Angles are measured so that the potential is `+g·cos θ`; `θ = π` hangs
/// straight down.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublePendulum {
    pub l1: f64,
    pub l2: f64,
    pub m1: f64,
    pub m2: f64,
    pub g: f64,
}

impl Default for DoublePendulum {
    fn default() -> Self {
        DoublePendulum {
            l1: 1.0,
            l2: 1.0,
            m1: 1.0,
            m2: 2.0,
            g: 9.8,
        }
    }
}

impl DoublePendulum {
    pub fn field(&self, s: &[f64]) -> Vec<f64> {
        let (t1, t2, w1, w2) = (s[0], s[1], s[2], s[3]);
        let DoublePendulum { l1, l2, m1, m2, g } = *self;
        let mt = m1 + m2;
        let (sd, cd) = (t1 - t2).sin_cos();
        // Euler–Lagrange equations of L = T − V, a 2×2 system in (φ₁', φ₂')
        let a11 = mt * l1 * l1;
        let a12 = m2 * l1 * l2 * cd;
        let a22 = m2 * l2 * l2;
        let r1 = -m2 * l1 * l2 * w2 * w2 * sd + g * mt * l1 * t1.sin();
        let r2 = m2 * l1 * l2 * w1 * w1 * sd + g * m2 * l2 * t2.sin();
        let det = a11 * a22 - a12 * a12;
        let dw1 = (r1 * a22 - a12 * r2) / det;
        let dw2 = (a11 * r2 - a12 * r1) / det;
        vec![w1, w2, dw1, dw2]
    }

    pub fn energy(&self, s: &[f64]) -> f64 {
        let (t1, t2, w1, w2) = (s[0], s[1], s[2], s[3]);
        let DoublePendulum { l1, l2, m1, m2, g } = *self;
        0.5 * (m1 + m2) * l1 * l1 * w1 * w1
            + 0.5 * m2 * l2 * l2 * w2 * w2
            + m2 * l1 * l2 * w1 * w2 * (t1 - t2).cos()
            + g * (m1 + m2) * l1 * t1.cos()
            + g * m2 * l2 * t2.cos()
    }

    pub fn energy_gradient(&self, s: &[f64]) -> Vec<f64> {
        let (t1, t2, w1, w2) = (s[0], s[1], s[2], s[3]);
        let DoublePendulum { l1, l2, m1, m2, g } = *self;
        let (sd, cd) = (t1 - t2).sin_cos();
        let k = m2 * l1 * l2;
        vec![
            -k * w1 * w2 * sd - g * (m1 + m2) * l1 * t1.sin(),
            k * w1 * w2 * sd - g * m2 * l2 * t2.sin(),
            (m1 + m2) * l1 * l1 * w1 + k * w2 * cd,
            m2 * l2 * l2 * w2 + k * w1 * cd,
        ]
    }
}

/// Two masses in a chain of springs, state `[q₁, q₂, v₁, v₂]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassSpring {
    pub k1: f64,
    pub k2: f64,
    pub l1: f64,
    pub l2: f64,
    pub m1: f64,
    pub m2: f64,
}

impl Default for MassSpring {
    fn default() -> Self {
        MassSpring {
            k1: 1.0,
            k2: 1.0,
            l1: 1.0,
            l2: 1.0,
            m1: 1.0,
            m2: 2.0,
        }
    }
}

impl MassSpring {
    pub fn field(&self, s: &[f64]) -> Vec<f64> {
        let (q1, q2, v1, v2) = (s[0], s[1], s[2], s[3]);
        let MassSpring { k1, k2, l1, l2, m1, m2 } = *self;
        let stretch2 = q2 - q1 - l2;
        vec![
            v1,
            v2,
            -k1 / m1 * (q1 - l1) + k2 / m1 * stretch2,
            -k2 / m2 * stretch2,
        ]
    }

    pub fn energy(&self, s: &[f64]) -> f64 {
        let (q1, q2, v1, v2) = (s[0], s[1], s[2], s[3]);
        let MassSpring { k1, k2, l1, l2, m1, m2 } = *self;
        let (p1, p2) = (m1 * v1, m2 * v2);
        p1 * p1 / (2.0 * m1)
            + p2 * p2 / (2.0 * m2)
            + 0.5 * k1 * (q1 - l1).powi(2)
            + 0.5 * k2 * (q2 - q1 - l2).powi(2)
    }

    pub fn energy_gradient(&self, s: &[f64]) -> Vec<f64> {
        let (q1, q2, v1, v2) = (s[0], s[1], s[2], s[3]);
        let MassSpring { k1, k2, l1, l2, m1, m2 } = *self;
        let stretch2 = q2 - q1 - l2;
        vec![k1 * (q1 - l1) - k2 * stretch2, k2 * stretch2, m1 * v1, m2 * v2]
    }

    pub fn rest_state(&self) -> Vec<f64> {
        vec![self.l1, self.l1 + self.l2, 0.0, 0.0]
    }
}

/// Semi-discrete KdV on a periodic grid:
/// `H(u) = Σ [α u³/6 − β((D_f u)² + (D_b u)²)/4] Δx`,
/// `du/dt = D (α u²/2 + β D₂ u)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kdv {
    pub alpha: f64,
    pub beta: f64,
    pub dx: f64,
    pub n: usize,
}

impl Default for Kdv {
    fn default() -> Self {
        Kdv {
            alpha: -1.0,
            beta: -0.022 * 0.022,
            dx: 0.1,
            n: 20,
        }
    }
}

impl Kdv {
    pub fn validate(&self) -> Result<()> {
        if self.n < 4 || !(self.dx > 0.0) {
            return Err(HnnError::InvalidArgument(format!(
                "KdV grid needs n >= 4 and dx > 0 (got n = {}, dx = {})",
                self.n, self.dx
            )));
        }
        Ok(())
    }

    /// `(1/Δx) ∂H/∂u = α u²/2 + β D₂ u`.
    pub fn variational_derivative(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        let inv2 = 1.0 / (self.dx * self.dx);
        (0..n)
            .map(|i| {
                let d2 = (u[(i + 1) % n] - 2.0 * u[i] + u[(i + n - 1) % n]) * inv2;
                0.5 * self.alpha * u[i] * u[i] + self.beta * d2
            })
            .collect()
    }

    pub fn field(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        let w = self.variational_derivative(u);
        let half = 0.5 / self.dx;
        (0..n)
            .map(|i| (w[(i + 1) % n] - w[(i + n - 1) % n]) * half)
            .collect()
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            let f = (u[(i + 1) % n] - u[i]) / self.dx;
            let b = (u[i] - u[(i + n - 1) % n]) / self.dx;
            acc += self.alpha * u[i].powi(3) / 6.0 - self.beta * (f * f + b * b) / 4.0;
        }
        acc * self.dx
    }

    pub fn energy_gradient(&self, u: &[f64]) -> Vec<f64> {
        self.variational_derivative(u)
            .into_iter()
            .map(|v| v * self.dx)
            .collect()
    }

    pub fn grid_points(&self) -> Vec<f64> {
        (0..self.n).map(|i| i as f64 * self.dx).collect()
    }

    /// `u(0, x) = cos(πx)`.
    pub fn cosine_initial(&self) -> Vec<f64> {
        self.grid_points().iter().map(|x| (PI * x).cos()).collect()
    }

    /// Structure matrix in which `du/dt = S ∇H`: `D / Δx`.
    pub fn structure(&self) -> Result<StructureMatrix> {
        StructureMatrix::central_difference(self.n, self.dx)?.scaled(1.0 / self.dx)
    }

    pub fn forward_difference(&self) -> ndarray::Array2<f64> {
        forward_difference(self.n, self.dx)
    }

    pub fn backward_difference(&self) -> ndarray::Array2<f64> {
        backward_difference(self.n, self.dx)
    }
}

/// `H = p²/(2m) + k q²/2` in canonical `[q, p]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicOscillator {
    pub k: f64,
    pub m: f64,
}

impl Default for HarmonicOscillator {
    fn default() -> Self {
        HarmonicOscillator { k: 1.0, m: 1.0 }
    }
}

impl HarmonicOscillator {
    pub fn field(&self, s: &[f64]) -> Vec<f64> {
        vec![s[1] / self.m, -self.k * s[0]]
    }

    pub fn energy(&self, s: &[f64]) -> f64 {
        0.5 * s[1] * s[1] / self.m + 0.5 * self.k * s[0] * s[0]
    }

    pub fn energy_gradient(&self, s: &[f64]) -> Vec<f64> {
        vec![self.k * s[0], s[1] / self.m]
    }

    /// Exact solution from `[q0, p0]` at time `t`.
    pub fn exact(&self, s0: &[f64], t: f64) -> Vec<f64> {
        let w = (self.k / self.m).sqrt();
        let (sn, cs) = (w * t).sin_cos();
        vec![
            s0[0] * cs + s0[1] / (self.m * w) * sn,
            -s0[0] * self.m * w * sn + s0[1] * cs,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemName {
    DoublePendulum,
    MassSpring,
    KdvSemidiscrete,
    HarmonicOscillator,
}

impl SystemName {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "double_pendulum" | "pendulum" => Ok(SystemName::DoublePendulum),
            "mass_spring" => Ok(SystemName::MassSpring),
            "kdv_semidiscrete" | "kdv" => Ok(SystemName::KdvSemidiscrete),
            "harmonic_oscillator" => Ok(SystemName::HarmonicOscillator),
            other => Err(HnnError::InvalidArgument(format!("unknown system '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SystemName::DoublePendulum => "double_pendulum",
            SystemName::MassSpring => "mass_spring",
            SystemName::KdvSemidiscrete => "kdv_semidiscrete",
            SystemName::HarmonicOscillator => "harmonic_oscillator",
        }
    }
}

/// A benchmark system with analytic vector field and energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum ReferenceSystem {
    DoublePendulum(DoublePendulum),
    MassSpring(MassSpring),
    KdvSemidiscrete(Kdv),
    HarmonicOscillator(HarmonicOscillator),
}

impl ReferenceSystem {
    pub fn default_for(name: SystemName) -> Self {
        match name {
            SystemName::DoublePendulum => ReferenceSystem::DoublePendulum(Default::default()),
            SystemName::MassSpring => ReferenceSystem::MassSpring(Default::default()),
            SystemName::KdvSemidiscrete => ReferenceSystem::KdvSemidiscrete(Default::default()),
            SystemName::HarmonicOscillator => {
                ReferenceSystem::HarmonicOscillator(Default::default())
            }
        }
    }

    /// Builds a system from its name and a parameter map; unspecified
    /// parameters keep their defaults, unknown keys are rejected.
    pub fn from_params(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let mut sys = Self::default_for(SystemName::parse(name)?);
        for (key, &value) in params {
            sys.set_param(key, value)?;
        }
        sys.validate()?;
        Ok(sys)
    }

    fn set_param(&mut self, key: &str, v: f64) -> Result<()> {
        let slot: Option<&mut f64> = match self {
            ReferenceSystem::DoublePendulum(p) => match key {
                "l1" => Some(&mut p.l1),
                "l2" => Some(&mut p.l2),
                "m1" => Some(&mut p.m1),
                "m2" => Some(&mut p.m2),
                "g" => Some(&mut p.g),
                _ => None,
            },
            ReferenceSystem::MassSpring(p) => match key {
                "k1" => Some(&mut p.k1),
                "k2" => Some(&mut p.k2),
                "l1" => Some(&mut p.l1),
                "l2" => Some(&mut p.l2),
                "m1" => Some(&mut p.m1),
                "m2" => Some(&mut p.m2),
                _ => None,
            },
            ReferenceSystem::KdvSemidiscrete(p) => match key {
                "alpha" => Some(&mut p.alpha),
                "beta" => Some(&mut p.beta),
                "dx" => Some(&mut p.dx),
                "n" => {
                    if v < 4.0 || v.fract() != 0.0 {
                        return Err(HnnError::InvalidArgument(format!("grid length {v}")));
                    }
                    p.n = v as usize;
                    return Ok(());
                }
                _ => None,
            },
            ReferenceSystem::HarmonicOscillator(p) => match key {
                "k" => Some(&mut p.k),
                "m" => Some(&mut p.m),
                _ => None,
            },
        };
        match slot {
            Some(s) => {
                *s = v;
                Ok(())
            }
            None => Err(HnnError::InvalidArgument(format!(
                "unknown parameter '{key}' for {}",
                self.name().as_str()
            ))),
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match self {
            ReferenceSystem::DoublePendulum(p) => {
                vec![("l1", p.l1), ("l2", p.l2), ("m1", p.m1), ("m2", p.m2), ("g", p.g)]
            }
            ReferenceSystem::MassSpring(p) => vec![
                ("k1", p.k1),
                ("k2", p.k2),
                ("l1", p.l1),
                ("l2", p.l2),
                ("m1", p.m1),
                ("m2", p.m2),
            ],
            ReferenceSystem::KdvSemidiscrete(p) => vec![
                ("alpha", p.alpha),
                ("beta", p.beta),
                ("dx", p.dx),
                ("n", p.n as f64),
            ],
            ReferenceSystem::HarmonicOscillator(p) => vec![("k", p.k), ("m", p.m)],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |names: &[(&str, f64)]| -> Result<()> {
            for (n, v) in names {
                if !(*v > 0.0) || !v.is_finite() {
                    return Err(HnnError::InvalidArgument(format!("parameter {n} = {v} must be > 0")));
                }
            }
            Ok(())
        };
        match self {
            ReferenceSystem::DoublePendulum(p) => positive(&[
                ("l1", p.l1),
                ("l2", p.l2),
                ("m1", p.m1),
                ("m2", p.m2),
                ("g", p.g),
            ]),
            ReferenceSystem::MassSpring(p) => {
                positive(&[("k1", p.k1), ("k2", p.k2), ("m1", p.m1), ("m2", p.m2)])
            }
            ReferenceSystem::KdvSemidiscrete(p) => p.validate(),
            ReferenceSystem::HarmonicOscillator(p) => positive(&[("k", p.k), ("m", p.m)]),
        }
    }

    pub fn name(&self) -> SystemName {
        match self {
            ReferenceSystem::DoublePendulum(_) => SystemName::DoublePendulum,
            ReferenceSystem::MassSpring(_) => SystemName::MassSpring,
            ReferenceSystem::KdvSemidiscrete(_) => SystemName::KdvSemidiscrete,
            ReferenceSystem::HarmonicOscillator(_) => SystemName::HarmonicOscillator,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ReferenceSystem::DoublePendulum(_) | ReferenceSystem::MassSpring(_) => 4,
            ReferenceSystem::KdvSemidiscrete(k) => k.n,
            ReferenceSystem::HarmonicOscillator(_) => 2,
        }
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(HnnError::dim("reference system state", self.dim(), u.len()));
        }
        Ok(())
    }

    pub fn field(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        Ok(match self {
            ReferenceSystem::DoublePendulum(p) => p.field(u),
            ReferenceSystem::MassSpring(p) => p.field(u),
            ReferenceSystem::KdvSemidiscrete(p) => p.field(u),
            ReferenceSystem::HarmonicOscillator(p) => p.field(u),
        })
    }

    pub fn hamiltonian(&self, u: &[f64]) -> Result<f64> {
        self.check(u)?;
        Ok(match self {
            ReferenceSystem::DoublePendulum(p) => p.energy(u),
            ReferenceSystem::MassSpring(p) => p.energy(u),
            ReferenceSystem::KdvSemidiscrete(p) => p.energy(u),
            ReferenceSystem::HarmonicOscillator(p) => p.energy(u),
        })
    }

    pub fn hamiltonian_gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        Ok(match self {
            ReferenceSystem::DoublePendulum(p) => p.energy_gradient(u),
            ReferenceSystem::MassSpring(p) => p.energy_gradient(u),
            ReferenceSystem::KdvSemidiscrete(p) => p.energy_gradient(u),
            ReferenceSystem::HarmonicOscillator(p) => p.energy_gradient(u),
        })
    }

    /// The structure matrix for which the state equation reads `S ∇H`, when
    /// the state is in such coordinates. Velocity coordinates (pendulum,
    /// mass-spring) have none.
    pub fn structure(&self) -> Option<StructureMatrix> {
        match self {
            ReferenceSystem::HarmonicOscillator(_) => StructureMatrix::canonical(1).ok(),
            ReferenceSystem::KdvSemidiscrete(k) => k.structure().ok(),
            _ => None,
        }
    }
}

impl ScalarField for ReferenceSystem {
    fn dim(&self) -> usize {
        ReferenceSystem::dim(self)
    }

    fn value(&self, u: &[f64]) -> Result<f64> {
        self.hamiltonian(u)
    }

    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.hamiltonian_gradient(u)
    }
}

/// `⟨∇H(u), f(u)⟩`, the rate of change of `H` along the field.
pub fn energy_rate<H, F>(h: &H, field: F, u: &[f64]) -> Result<f64>
where
    H: ScalarField + ?Sized,
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let g = h.gradient(u)?;
    let f = field(u)?;
    if f.len() != g.len() {
        return Err(HnnError::dim("energy_rate", g.len(), f.len()));
    }
    Ok(linalg::dot(&g, &f))
}
