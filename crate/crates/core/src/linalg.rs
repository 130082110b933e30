//! Small dense linear-algebra helpers shared across modules.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use crate::error::{HnnError, Result};

pub const POWER_ITERATIONS: usize = 200;
pub const POWER_TOLERANCE: f64 = 1e-10;
/// Condition estimates above this abort a linear solve.
pub const MAX_CONDITION: f64 = 1e12;

pub fn to_nalgebra(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

pub fn from_nalgebra(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Largest singular value of the operator given by `apply` / `apply_t`,
/// by power iteration on `AᵀA` from a deterministic start vector.
pub fn spectral_norm_with<F, G>(n_in: usize, apply: F, apply_t: G) -> f64
where
    F: Fn(&Array1<f64>) -> Array1<f64>,
    G: Fn(&Array1<f64>) -> Array1<f64>,
{
    // fixed, non-degenerate start: unlikely to be orthogonal to the top
    // singular vector
    let mut v = Array1::from_shape_fn(n_in, |i| 1.0 + 0.1 * ((i as f64 * 0.754_877_666).sin()));
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut sigma = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let av = apply(&v);
        let w = apply_t(&av);
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            return 0.0;
        }
        let next = av.dot(&av).sqrt();
        v = w / wn;
        let converged = (next - sigma).abs() <= POWER_TOLERANCE * next.max(f64::MIN_POSITIVE);
        sigma = next;
        if converged {
            break;
        }
    }
    // one more application with the final vector
    let av = apply(&v);
    sigma.max(av.dot(&av).sqrt())
}

pub fn spectral_norm(m: &Array2<f64>) -> f64 {
    spectral_norm_with(m.ncols(), |v| m.dot(v), |w| m.t().dot(w))
}

/// LU factorization with partial pivoting and a 1-norm condition estimate.
pub struct Factorized {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub condition: f64,
}

impl Factorized {
    pub fn new(m: &Array2<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(HnnError::dim("square matrix", m.nrows(), m.ncols()));
        }
        let a = to_nalgebra(m);
        let norm1 = one_norm(&a);
        let lu = a.lu();
        let inv = lu.try_inverse();
        let condition = match inv {
            Some(inv) => norm1 * one_norm(&inv),
            None => f64::INFINITY,
        };
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(HnnError::SingularTransform { condition });
        }
        Ok(Factorized { lu, condition })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = nalgebra::DVector::from_column_slice(b);
        self.lu
            .solve(&rhs)
            .expect("nonsingular by construction")
            .as_slice()
            .to_vec()
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        // A = Pᵀ L U (nalgebra stores P A = L U); Aᵀ x = b ⇔ Uᵀ Lᵀ P x = b
        let mut y = nalgebra::DVector::from_column_slice(b);
        let u = self.lu.u();
        let l = self.lu.l();
        u.transpose()
            .solve_lower_triangular_mut(&mut y);
        l.transpose()
            .solve_upper_triangular_mut(&mut y);
        let mut x = y.clone();
        self.lu.p().inv_permute_rows(&mut x);
        x.as_slice().to_vec()
    }
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_symmetric_eigenvalue(m: &Array2<f64>) -> f64 {
    let eig = nalgebra::SymmetricEigen::new(to_nalgebra(m));
    eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn matvec(m: &Array2<f64>, v: &[f64]) -> Vec<f64> {
    m.dot(&ndarray::ArrayView1::from(v)).to_vec()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
