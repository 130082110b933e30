use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{HnnError, Result};
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Character {
    Skew,
    NegativeSemidefinite,
    General,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StructureKind {
    /// `[[0, I], [-I, 0]]` with half-dimension `m`.
    CanonicalSymplectic { m: usize },
    /// `D = (D_f + D_b) / 2` on a periodic grid.
    CentralDifference { n: usize, dx: f64 },
    /// `D_2 = D_f D_b` on a periodic grid.
    SecondDifference { n: usize, dx: f64 },
    Custom,
}

/// The matrix `S` (or `G`) multiplying `∇H` in `du/dt = S ∇H(u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureMatrix {
    kind: StructureKind,
    matrix: Array2<f64>,
    character: Character,
}

const SKEW_TOL: f64 = 1e-12;
const NSD_TOL: f64 = 1e-10;

/// Forward difference `(D_f u)_i = (u_{i+1} - u_i) / Δx`, periodic.
pub fn forward_difference(n: usize, dx: f64) -> Array2<f64> {
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        m[[i, i]] -= 1.0 / dx;
        m[[i, (i + 1) % n]] += 1.0 / dx;
    }
    m
}

/// Backward difference `(D_b u)_i = (u_i - u_{i-1}) / Δx`, periodic.
pub fn backward_difference(n: usize, dx: f64) -> Array2<f64> {
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        m[[i, i]] += 1.0 / dx;
        m[[i, (i + n - 1) % n]] -= 1.0 / dx;
    }
    m
}

impl StructureMatrix {
    pub fn canonical(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(HnnError::InvalidArgument("canonical structure needs m >= 1".into()));
        }
        let mut s = Array2::zeros((2 * m, 2 * m));
        for i in 0..m {
            s[[i, m + i]] = 1.0;
            s[[m + i, i]] = -1.0;
        }
        Self::checked(StructureKind::CanonicalSymplectic { m }, s, Character::Skew)
    }

    pub fn central_difference(n: usize, dx: f64) -> Result<Self> {
        check_grid(n, dx)?;
        let d = (forward_difference(n, dx) + backward_difference(n, dx)) * 0.5;
        Self::checked(StructureKind::CentralDifference { n, dx }, d, Character::Skew)
    }

    pub fn second_difference(n: usize, dx: f64) -> Result<Self> {
        check_grid(n, dx)?;
        let d2 = forward_difference(n, dx).dot(&backward_difference(n, dx));
        Self::checked(
            StructureKind::SecondDifference { n, dx },
            d2,
            Character::NegativeSemidefinite,
        )
    }

    pub fn custom(matrix: Array2<f64>, character: Character) -> Result<Self> {
        Self::checked(StructureKind::Custom, matrix, character)
    }

    fn checked(kind: StructureKind, matrix: Array2<f64>, character: Character) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(HnnError::Structure(format!(
                "matrix must be square and nonempty, got {:?}",
                matrix.dim()
            )));
        }
        match character {
            Character::Skew => {
                let asym = (&matrix + &matrix.t()).iter().map(|v| v * v).sum::<f64>().sqrt();
                if asym >= SKEW_TOL {
                    return Err(HnnError::Structure(format!(
                        "declared skew but ||S + S^T|| = {asym:.3e}"
                    )));
                }
            }
            Character::NegativeSemidefinite => {
                let sym = (&matrix + &matrix.t()) * 0.5;
                let top = linalg::max_symmetric_eigenvalue(&sym);
                if top > NSD_TOL {
                    return Err(HnnError::Structure(format!(
                        "declared negative semidefinite but max eigenvalue = {top:.3e}"
                    )));
                }
            }
            Character::General => {}
        }
        Ok(StructureMatrix {
            kind,
            matrix,
            character,
        })
    }

    /// `factor · S`; a positive factor keeps the character.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let character = if factor > 0.0 {
            self.character
        } else {
            Character::General
        };
        Self::checked(StructureKind::Custom, &self.matrix * factor, character)
    }

    pub fn kind(&self) -> &StructureKind {
        &self.kind
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn character(&self) -> Character {
        self.character
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(HnnError::dim("structure matrix", self.dim(), v.len()));
        }
        Ok(linalg::matvec(&self.matrix, v))
    }
}

/// On-disk form: the kind tag plus the explicit matrix (row-major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureDoc {
    pub kind: StructureKind,
    pub character: Character,
    pub dim: usize,
    pub matrix: Vec<f64>,
}

impl StructureMatrix {
    pub fn to_doc(&self) -> StructureDoc {
        StructureDoc {
            kind: self.kind.clone(),
            character: self.character,
            dim: self.dim(),
            matrix: self.matrix.iter().copied().collect(),
        }
    }

    /// Rebuilds and re-checks the declared character.
    pub fn from_doc(doc: &StructureDoc) -> Result<Self> {
        let m = Array2::from_shape_vec((doc.dim, doc.dim), doc.matrix.clone())
            .map_err(|_| HnnError::Format("structure matrix size does not match dim".into()))?;
        Self::checked(doc.kind.clone(), m, doc.character)
    }
}

fn check_grid(n: usize, dx: f64) -> Result<()> {
    if n < 4 {
        return Err(HnnError::InvalidArgument(format!("grid length {n} < 4")));
    }
    if !(dx > 0.0) || !dx.is_finite() {
        return Err(HnnError::InvalidArgument(format!("grid spacing {dx} must be positive")));
    }
    Ok(())
}
