use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};

use crate::error::{HnnError, Result};

/// A linear map `x ↦ A x + b` acting on batches stored row-wise, shape
/// `(batch, dim)`.
///
/// Circular convolutions use a position-major layout: the feature at grid
/// point `x`, channel `c` lives at index `x * channels + c`. With a single
/// channel this is just the grid vector.
#[derive(Clone, Debug, PartialEq)]
pub enum LinearLayer {
    Dense {
        /// `(out, in)`
        weights: Array2<f64>,
        bias: Array1<f64>,
    },
    CircularConv1d {
        grid: usize,
        /// `(out_channels, in_channels, kernel_size)`; tap `j` reads the
        /// neighbour at offset `j - kernel_size / 2`.
        weights: Array3<f64>,
        /// One entry per output channel, shared across grid points.
        bias: Array1<f64>,
    },
}

impl LinearLayer {
    pub fn dense(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(HnnError::dim("dense bias", weights.nrows(), bias.len()));
        }
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(HnnError::InvalidArgument("empty dense layer".into()));
        }
        Ok(LinearLayer::Dense { weights, bias })
    }

    pub fn circular_conv(grid: usize, weights: Array3<f64>, bias: Array1<f64>) -> Result<Self> {
        let (out, inp, k) = weights.dim();
        if out != bias.len() {
            return Err(HnnError::dim("conv bias", out, bias.len()));
        }
        if grid == 0 || out == 0 || inp == 0 || k == 0 {
            return Err(HnnError::InvalidArgument("empty conv layer".into()));
        }
        if k > grid {
            return Err(HnnError::InvalidArgument(format!(
                "kernel size {k} exceeds grid {grid}"
            )));
        }
        Ok(LinearLayer::CircularConv1d {
            grid,
            weights,
            bias,
        })
    }

    pub fn in_dim(&self) -> usize {
        match self {
            LinearLayer::Dense { weights, .. } => weights.ncols(),
            LinearLayer::CircularConv1d { grid, weights, .. } => grid * weights.dim().1,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            LinearLayer::Dense { weights, .. } => weights.nrows(),
            LinearLayer::CircularConv1d { grid, weights, .. } => grid * weights.dim().0,
        }
    }

    pub fn weight_count(&self) -> usize {
        match self {
            LinearLayer::Dense { weights, .. } => weights.len(),
            LinearLayer::CircularConv1d { weights, .. } => weights.len(),
        }
    }

    pub fn bias(&self) -> &Array1<f64> {
        match self {
            LinearLayer::Dense { bias, .. } | LinearLayer::CircularConv1d { bias, .. } => bias,
        }
    }

    pub fn bias_mut(&mut self) -> &mut Array1<f64> {
        match self {
            LinearLayer::Dense { bias, .. } | LinearLayer::CircularConv1d { bias, .. } => bias,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.bias().len()
    }

    /// Appends weights (row-major) then bias.
    pub fn write_params(&self, out: &mut Vec<f64>) {
        match self {
            LinearLayer::Dense { weights, bias } => {
                out.extend(weights.iter());
                out.extend(bias.iter());
            }
            LinearLayer::CircularConv1d { weights, bias, .. } => {
                out.extend(weights.iter());
                out.extend(bias.iter());
            }
        }
    }

    pub fn read_params(&mut self, src: &[f64]) {
        debug_assert_eq!(src.len(), self.param_count());
        let nw = self.weight_count();
        match self {
            LinearLayer::Dense { weights, bias } => {
                weights.iter_mut().zip(&src[..nw]).for_each(|(w, v)| *w = *v);
                bias.iter_mut().zip(&src[nw..]).for_each(|(b, v)| *b = *v);
            }
            LinearLayer::CircularConv1d { weights, bias, .. } => {
                weights.iter_mut().zip(&src[..nw]).for_each(|(w, v)| *w = *v);
                bias.iter_mut().zip(&src[nw..]).for_each(|(b, v)| *b = *v);
            }
        }
    }

    /// `x Aᵀ` without the bias.
    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        match self {
            LinearLayer::Dense { weights, .. } => x.dot(&weights.t()),
            LinearLayer::CircularConv1d { grid, weights, .. } => {
                let (cout, cin, k) = weights.dim();
                let b = x.nrows();
                let rows = x
                    .as_standard_layout()
                    .into_owned()
                    .into_shape_with_order((b * grid, cin))
                    .expect("contiguous reshape");
                let mut y = Array2::<f64>::zeros((b * grid, cout));
                for j in 0..k {
                    let shift = j as isize - (k / 2) as isize;
                    let tap = weights.index_axis(Axis(2), j);
                    let rolled = roll_rows(&rows, *grid, shift);
                    ndarray::linalg::general_mat_mul(1.0, &rolled, &tap.t(), 1.0, &mut y);
                }
                y.into_shape_with_order((b, grid * cout))
                    .expect("contiguous reshape")
            }
        }
    }

    pub fn add_bias(&self, y: &mut Array2<f64>) {
        match self {
            LinearLayer::Dense { bias, .. } => {
                for mut row in y.rows_mut() {
                    row += bias;
                }
            }
            LinearLayer::CircularConv1d { grid, bias, .. } => {
                let cout = bias.len();
                for mut row in y.rows_mut() {
                    for x in 0..*grid {
                        let mut seg = row.slice_mut(s![x * cout..(x + 1) * cout]);
                        seg += bias;
                    }
                }
            }
        }
    }

    /// `y A` (the adjoint map applied row-wise).
    pub fn apply_transpose(&self, y: ArrayView2<f64>) -> Array2<f64> {
        match self {
            LinearLayer::Dense { weights, .. } => y.dot(weights),
            LinearLayer::CircularConv1d { grid, weights, .. } => {
                let (cout, cin, k) = weights.dim();
                let b = y.nrows();
                let rows = y
                    .as_standard_layout()
                    .into_owned()
                    .into_shape_with_order((b * grid, cout))
                    .expect("contiguous reshape");
                let mut x = Array2::<f64>::zeros((b * grid, cin));
                for j in 0..k {
                    let shift = j as isize - (k / 2) as isize;
                    let tap = weights.index_axis(Axis(2), j);
                    let part = rows.dot(&tap);
                    if shift == 0 {
                        x += &part;
                    } else {
                        // row (b, x) of `part` belongs to input position x + shift
                        x += &roll_rows(&part, *grid, -shift);
                    }
                }
                x.into_shape_with_order((b, grid * cin))
                    .expect("contiguous reshape")
            }
        }
    }

    /// Adds `Σ_batch ȳ ⊗ x` into the weight part of `grad`.
    pub fn accumulate_weight_grad(&self, ybar: ArrayView2<f64>, x: ArrayView2<f64>, grad: &mut [f64]) {
        match self {
            LinearLayer::Dense { weights, .. } => {
                let mut g = ndarray::ArrayViewMut2::from_shape(weights.dim(), &mut grad[..weights.len()])
                    .expect("weight grad shape");
                ndarray::linalg::general_mat_mul(1.0, &ybar.t(), &x, 1.0, &mut g);
            }
            LinearLayer::CircularConv1d { grid, weights, .. } => {
                let (cout, cin, k) = weights.dim();
                let b = x.nrows();
                let xr = x
                    .as_standard_layout()
                    .into_owned()
                    .into_shape_with_order((b * grid, cin))
                    .expect("contiguous reshape");
                let yr = ybar
                    .as_standard_layout()
                    .into_owned()
                    .into_shape_with_order((b * grid, cout))
                    .expect("contiguous reshape");
                let mut g = ndarray::ArrayViewMut3::from_shape((cout, cin, k), &mut grad[..weights.len()])
                    .expect("weight grad shape");
                for j in 0..k {
                    let shift = j as isize - (k / 2) as isize;
                    let rolled = roll_rows(&xr, *grid, shift);
                    let mut tap = g.index_axis_mut(Axis(2), j);
                    ndarray::linalg::general_mat_mul(1.0, &yr.t(), &rolled, 1.0, &mut tap);
                }
            }
        }
    }

    /// Adds the bias gradient for output adjoint `ȳ` into `grad_bias`.
    pub fn accumulate_bias_grad(&self, ybar: ArrayView2<f64>, grad_bias: &mut [f64]) {
        match self {
            LinearLayer::Dense { .. } => {
                for row in ybar.rows() {
                    for (g, v) in grad_bias.iter_mut().zip(row.iter()) {
                        *g += v;
                    }
                }
            }
            LinearLayer::CircularConv1d { grid, bias, .. } => {
                let cout = bias.len();
                for row in ybar.rows() {
                    for x in 0..*grid {
                        for c in 0..cout {
                            grad_bias[c] += row[x * cout + c];
                        }
                    }
                }
            }
        }
    }

    /// The explicit matrix of the linear part, shape `(out_dim, in_dim)`.
    pub fn to_matrix(&self) -> Array2<f64> {
        match self {
            LinearLayer::Dense { weights, .. } => weights.clone(),
            LinearLayer::CircularConv1d { grid, weights, .. } => {
                let (cout, cin, k) = weights.dim();
                let n = *grid;
                let mut m = Array2::zeros((n * cout, n * cin));
                for x in 0..n {
                    for j in 0..k {
                        let src = (x as isize + j as isize - (k / 2) as isize).rem_euclid(n as isize)
                            as usize;
                        for o in 0..cout {
                            for i in 0..cin {
                                m[[x * cout + o, src * cin + i]] += weights[[o, i, j]];
                            }
                        }
                    }
                }
                m
            }
        }
    }

    /// The explicit bias over all output coordinates.
    pub fn expanded_bias(&self) -> Array1<f64> {
        match self {
            LinearLayer::Dense { bias, .. } => bias.clone(),
            LinearLayer::CircularConv1d { grid, bias, .. } => {
                Array1::from_iter((0..*grid).flat_map(|_| bias.iter().copied()))
            }
        }
    }
}

/// Row `(b, x)` of the result is row `(b, (x + shift) mod grid)` of `rows`,
/// where `rows` has `batch * grid` rows.
fn roll_rows(rows: &Array2<f64>, grid: usize, shift: isize) -> Array2<f64> {
    if shift.rem_euclid(grid as isize) == 0 {
        return rows.clone();
    }
    let ch = rows.ncols();
    let batch = rows.nrows() / grid;
    let mut out = Array2::<f64>::zeros(rows.raw_dim());
    for b in 0..batch {
        for x in 0..grid {
            let src = (x as isize + shift).rem_euclid(grid as isize) as usize;
            out.row_mut(b * grid + x)
                .assign(&rows.row(b * grid + src));
        }
    }
    debug_assert_eq!(out.ncols(), ch);
    out
}
