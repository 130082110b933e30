//! Covering number → Rademacher complexity → generalization gap → sup-norm
//! Hamiltonian error → probability that invariant tori persist.

use serde::{Deserialize, Serialize};

use crate::error::{HnnError, Result};
use crate::nn::norms::{layer_operator_norms, NormProfile};
use crate::nn::NeuralHamiltonian;
use crate::training::pnorm_loss_lipschitz;

pub const BOUND_SCHEMA_VERSION: u32 = 1;

/// `K = 2 ρ_p c_u c_{A_{nl+1}} ρ'_{σ_nl} Π_{j<nl} ρ_σj Π_{j<nl} c_σj (Π_{j≤nl} c_Aj)²`.
pub fn covering_constant(profile: &NormProfile) -> Result<f64> {
    profile.validate()?;
    let nl = profile.activation_layers();
    let head: f64 = profile.act_lipschitz[..nl - 1].iter().product::<f64>()
        * profile.act_deriv_bound[..nl - 1].iter().product::<f64>();
    let inner: f64 = profile.layer_norms[..nl].iter().product();
    Ok(2.0
        * profile.loss_lipschitz
        * profile.input_radius
        * profile.layer_norms[nl]
        * profile.act_deriv_lipschitz[nl - 1]
        * head
        * inner
        * inner)
}

/// `ln N(ε) ≤ n ln(K/ε + 1)`.
pub fn log_covering(k: f64, eps: f64, n: usize) -> Result<f64> {
    if !(eps > 0.0) || !(k >= 0.0) {
        return Err(HnnError::InvalidArgument(format!(
            "covering bound needs eps > 0 and K >= 0 (eps = {eps}, K = {k})"
        )));
    }
    Ok(n as f64 * (k / eps).ln_1p())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rademacher {
    pub alpha: f64,
    pub beta: f64,
    pub rademacher: f64,
}

/// Dudley-type bound `R_n ≤ 6c(α + 2β)/n` for a class whose covering
/// numbers satisfy `√ln N(c 2⁻ᵏ) ≤ α + kβ`.
pub fn rademacher_bound(k: f64, c_loss: f64, n: usize) -> Result<Rademacher> {
    if !(k > 0.0) || !(c_loss > 0.0) || n == 0 {
        return Err(HnnError::InvalidArgument(format!(
            "rademacher bound needs K > 0, c > 0, n >= 1 (K = {k}, c = {c_loss}, n = {n})"
        )));
    }
    let nf = n as f64;
    // ln N(c 2⁻ᵏ) ≤ n ln(K 2ᵏ/c + 1) ≤ n ln(K/c + 1) + n k ln 2,
    // then √(a + b) ≤ √a + √b and √k ≤ k give α + kβ.
    let alpha = (nf * (k / c_loss).ln_1p()).sqrt();
    let beta = (nf * std::f64::consts::LN_2).sqrt();
    Ok(Rademacher {
        alpha,
        beta,
        rademacher: 6.0 * c_loss * (alpha + 2.0 * beta) / nf,
    })
}

/// `L_train + 2R_n + 3c √(2 ln(4/δ)/n)`, holding with probability `1 − δ`.
pub fn generalization_bound(l_train: f64, r_n: f64, c_loss: f64, delta: f64, n: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) || n == 0 {
        return Err(HnnError::InvalidArgument(format!(
            "generalization bound needs delta in (0, 1) and n >= 1 (delta = {delta})"
        )));
    }
    Ok(l_train + 2.0 * r_n + 3.0 * c_loss * (2.0 * (4.0 / delta).ln() / n as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum LinfBound {
    Bound { value: f64 },
    NotApplicable { reason: String },
}

impl LinfBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            LinfBound::Bound { value } => Some(*value),
            LinfBound::NotApplicable { .. } => None,
        }
    }
}

/// `(C^p · gen / inf f)^{1/p}` when `p > 2M`.
pub fn linf_hamiltonian_bound(gen: f64, c_sobolev: f64, inf_density: f64, p: f64, m: usize) -> Result<LinfBound> {
    if !(gen >= 0.0) || !(c_sobolev > 0.0) || !(inf_density > 0.0) || !(p >= 1.0) {
        return Err(HnnError::InvalidArgument(format!(
            "sup-norm bound needs gen >= 0, C > 0, inf density > 0, p >= 1 (gen = {gen}, C = {c_sobolev}, f = {inf_density}, p = {p})"
        )));
    }
    let dim = 2 * m;
    if p <= dim as f64 {
        return Ok(LinfBound::NotApplicable {
            reason: format!(
                "the Sobolev embedding needs p > 2M; here p = {p} and 2M = {dim}, so choose a loss exponent above {dim}"
            ),
        });
    }
    Ok(LinfBound::Bound {
        value: (c_sobolev.powf(p) * gen / inf_density).powf(1.0 / p),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum KamOutcome {
    /// With probability at least `1 − delta` a set of invariant tori exists
    /// for the trained model.
    Delta { delta: f64, statement: String },
    NoGuarantee { reason: String },
}

impl KamOutcome {
    pub fn delta(&self) -> Option<f64> {
        match self {
            KamOutcome::Delta { delta, .. } => Some(*delta),
            KamOutcome::NoGuarantee { .. } => None,
        }
    }
}

/// `δ = exp(−n((ε₀ − c₁L − c₂R)/c₃)²)` when `ε₀ > c₁L + c₂R`.
pub fn kam_probability(eps0: f64, c1: f64, c2: f64, c3: f64, l_train: f64, r_n: f64, n: usize) -> Result<KamOutcome> {
    if !(eps0 > 0.0 && c1 > 0.0 && c2 > 0.0 && c3 > 0.0) || !(l_train >= 0.0) || !(r_n >= 0.0) || n == 0 {
        return Err(HnnError::InvalidArgument(
            "KAM probability needs positive eps0, c1, c2, c3, n and nonnegative L, R".into(),
        ));
    }
    let margin = eps0 - c1 * l_train - c2 * r_n;
    if margin <= 0.0 {
        return Ok(KamOutcome::NoGuarantee {
            reason: format!(
                "eps0 = {eps0} does not exceed c1 L + c2 R = {}",
                c1 * l_train + c2 * r_n
            ),
        });
    }
    let delta = (-(n as f64) * (margin / c3).powi(2)).exp();
    Ok(KamOutcome::Delta {
        delta,
        statement: format!(
            "with probability at least {:.6} a set of invariant tori exists for the trained model",
            1.0 - delta
        ),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KamConstants {
    pub eps0: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub profile: NormProfile,
    /// Uniform bound on the per-sample loss; defaults to `(2 G)^p` with `G`
    /// the profile's gradient-norm bound.
    pub c_loss: Option<f64>,
    pub delta: f64,
    pub l_train: f64,
    pub p: f64,
    /// Half the phase-space dimension.
    pub m: usize,
    pub c_sobolev: Option<f64>,
    pub inf_density: Option<f64>,
    pub kam: KamConstants,
}

/// Resolved constants actually used in the chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConstants {
    pub c_loss: f64,
    pub c_sobolev: f64,
    pub inf_density: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema_version: u32,
    pub covering_constant: f64,
    /// `ln N(ε) ≤ covering_n · ln(covering_constant/ε + 1)`.
    pub covering_n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub rademacher: f64,
    pub generalization: f64,
    pub linf_hamiltonian: LinfBound,
    pub kam: KamOutcome,
    pub inputs: BoundInputs,
    pub resolved: ResolvedConstants,
    pub assumptions_log: Vec<String>,
}

impl BoundReport {
    pub fn log_covering_at(&self, eps: f64) -> Result<f64> {
        log_covering(self.covering_constant, eps, self.covering_n)
    }

    /// Plain-text table of the chain.
    pub fn table(&self) -> String {
        let mut rows = vec![
            ("covering constant K".to_string(), format!("{:.6e}", self.covering_constant)),
            ("sample count n".to_string(), self.covering_n.to_string()),
            ("alpha".to_string(), format!("{:.6e}", self.alpha)),
            ("beta".to_string(), format!("{:.6e}", self.beta)),
            ("rademacher R_n".to_string(), format!("{:.6e}", self.rademacher)),
            ("generalization bound".to_string(), format!("{:.6e}", self.generalization)),
        ];
        rows.push((
            "sup |H - H_NN|".to_string(),
            match &self.linf_hamiltonian {
                LinfBound::Bound { value } => format!("{value:.6e}"),
                LinfBound::NotApplicable { .. } => "not applicable".to_string(),
            },
        ));
        rows.push((
            "KAM delta".to_string(),
            match &self.kam {
                KamOutcome::Delta { delta, .. } => format!("{delta:.6e}"),
                KamOutcome::NoGuarantee { .. } => "no guarantee".to_string(),
            },
        ));
        let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k:<w$}  {v}\n"));
        }
        for a in &self.assumptions_log {
            out.push_str(&format!("note: {a}\n"));
        }
        out
    }
}

pub fn bound_report(inputs: &BoundInputs) -> Result<BoundReport> {
    let profile = &inputs.profile;
    profile.validate()?;
    let n = profile.n;
    let mut log = Vec::new();
    let p = inputs.p;
    let c_loss = match inputs.c_loss {
        Some(c) => {
            log.push(format!("uniform loss bound c = {c} supplied by the user"));
            c
        }
        None => {
            let g = profile.gradient_norm_bound();
            let c = (2.0 * g).powf(p);
            log.push(format!(
                "uniform loss bound c defaults to (2 G)^p = {c:.6e} with G = {g:.6e} the product bound on |grad H_NN|; it assumes the target gradients obey the same bound"
            ));
            c
        }
    };
    let c_sobolev = inputs.c_sobolev.unwrap_or_else(|| {
        log.push("WARNING: Sobolev/Poincare constant C not supplied; using 1.0, which is not a proven constant for this domain".into());
        1.0
    });
    let inf_density = inputs.inf_density.unwrap_or_else(|| {
        log.push("WARNING: inf of the sampling density not supplied; using 1.0, which is not measured from the data".into());
        1.0
    });
    log.push("the sup-norm bound is stated on the bounding box of the sampled region, after mean alignment".into());
    let scale = c_sobolev.powf(p) / inf_density;
    let kam = inputs.kam;
    let mut pick = |v: Option<f64>, default: f64, name: &str, rule: &str| {
        v.unwrap_or_else(|| {
            log.push(format!("KAM constant {name} not supplied; defaulting to {rule} = {default:.6e}"));
            default
        })
    };
    let c1 = pick(kam.c1, scale, "c1", "C^p / inf f");
    let c2 = pick(kam.c2, 2.0 * scale, "c2", "2 C^p / inf f");
    let c3 = pick(kam.c3, 3.0 * c_loss * 2f64.sqrt() * scale, "c3", "3 c sqrt(2) C^p / inf f");
    if kam.c1.is_none() || kam.c2.is_none() || kam.c3.is_none() {
        log.push("the default KAM constants are read off the generalization chain; they are a modelling choice, not derived constants".into());
    }

    let k = covering_constant(profile)?;
    let rad = rademacher_bound(k, c_loss, n)?;
    let gen = generalization_bound(inputs.l_train, rad.rademacher, c_loss, inputs.delta, n)?;
    let linf = linf_hamiltonian_bound(gen, c_sobolev, inf_density, p, inputs.m)?;
    let kam_out = kam_probability(kam.eps0, c1, c2, c3, inputs.l_train, rad.rademacher, n)?;
    Ok(BoundReport {
        schema_version: BOUND_SCHEMA_VERSION,
        covering_constant: k,
        covering_n: n,
        alpha: rad.alpha,
        beta: rad.beta,
        rademacher: rad.rademacher,
        generalization: gen,
        linf_hamiltonian: linf,
        kam: kam_out,
        inputs: inputs.clone(),
        resolved: ResolvedConstants {
            c_loss,
            c_sobolev,
            inf_density,
            c1,
            c2,
            c3,
        },
        assumptions_log: log,
    })
}

/// Profile of a trained network for the bound chain. `target_radius`
/// bounds the norm of the training targets; the loss Lipschitz constant is
/// taken on the ball of residuals `‖∇H_NN − target‖ ≤ G + target_radius`.
pub fn profile_for(net: &NeuralHamiltonian, input_radius: f64, target_radius: f64, p: f64, n: usize) -> Result<NormProfile> {
    let mut profile = crate::nn::norm_profile(net, input_radius, 1.0, n)?;
    let g = layer_operator_norms(net).iter().product::<f64>() * profile.act_deriv_bound.iter().product::<f64>();
    profile.loss_lipschitz = pnorm_loss_lipschitz(p, g + target_radius, net.input_dim());
    Ok(profile)
}

/// `det ∂²H/∂J²` at `j` by central differences, for checking KAM
/// non-degeneracy of an analytic Hamiltonian given in action variables.
pub fn nondegeneracy_determinant<F>(h: F, j: &[f64], step: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let n = j.len();
    let mut hess = nalgebra::DMatrix::zeros(n, n);
    let at = |di: usize, si: f64, dk: usize, sk: f64| {
        let mut x = j.to_vec();
        x[di] += si * step;
        x[dk] += sk * step;
        h(&x)
    };
    for a in 0..n {
        for b in 0..n {
            hess[(a, b)] = (at(a, 1.0, b, 1.0) - at(a, 1.0, b, -1.0) - at(a, -1.0, b, 1.0) + at(a, -1.0, b, -1.0))
                / (4.0 * step * step);
        }
    }
    hess.determinant()
}
