use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default cap on the number of grid points of an assembled 2D operator.
pub const MAX_GRID_POINTS: usize = 1 << 22;

/// Anything that can compute `y = Op x` on a square space.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= n_rows || *c >= n_cols) {
            return Err(Error::invalid(format!(
                "triplet ({r}, {c}) outside a {n_rows}x{n_cols} matrix"
            )));
        }
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn diagonal_matrix(diag: &[f64]) -> Self {
        let n = diag.len();
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.n_rows
    }

    pub fn ncols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).filter(|&(c, _)| c == j).map(|(_, v)| v).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = self · x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + diag(d)`.
    pub fn plus_diagonal(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.n_rows || self.n_rows != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                found: d.len(),
            });
        }
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz() + d.len());
        for i in 0..self.n_rows {
            triplets.extend(self.row(i).map(|(j, v)| (i, j, v)));
            if d[i] != 0.0 {
                triplets.push((i, i, d[i]));
            }
        }
        CsrMatrix::from_triplets(self.n_rows, self.n_cols, triplets)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        (0..self.n_rows).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol))
    }

    /// Upper bound on the spectral radius (max absolute row sum).
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.n_rows)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n_rows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y)
    }
}

/// `y = shift·x + scale·(Op x)`.
pub struct ShiftedOperator<'a, Op: ?Sized> {
    pub op: &'a Op,
    pub shift: f64,
    pub scale: f64,
}

impl<Op: LinearOperator + ?Sized> LinearOperator for ShiftedOperator<'_, Op> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.shift * xi + self.scale * *yi;
        }
    }
}

/// Scratch vectors for [`conjugate_gradient`], reusable across solves.
#[derive(Debug, Clone, Default)]
pub struct CgWorkspace {
    r: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
}

impl CgWorkspace {
    pub fn new(n: usize) -> Self {
        CgWorkspace {
            r: vec![0.0; n],
            p: vec![0.0; n],
            ap: vec![0.0; n],
        }
    }

    fn resize(&mut self, n: usize) {
        self.r.resize(n, 0.0);
        self.p.resize(n, 0.0);
        self.ap.resize(n, 0.0);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradient for SPD operators. `x` holds the initial guess on
/// entry and the solution on exit. Stops when `‖b - Ax‖ ≤ tol·‖b‖`.
/// Returns the iteration count.
pub fn conjugate_gradient<Op: LinearOperator + ?Sized>(
    op: &Op,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    ws: &mut CgWorkspace,
) -> Result<usize> {
    let n = op.dim();
    if b.len() != n || x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len().min(x.len()),
        });
    }
    ws.resize(n);
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let target = tol * b_norm;

    op.apply(x, &mut ws.ap);
    for i in 0..n {
        ws.r[i] = b[i] - ws.ap[i];
        ws.p[i] = ws.r[i];
    }
    let mut rr = dot(&ws.r, &ws.r);
    if rr.sqrt() <= target {
        return Ok(0);
    }
    for iter in 1..=max_iter {
        op.apply(&ws.p, &mut ws.ap);
        let pap = dot(&ws.p, &ws.ap);
        if !(pap > 0.0) {
            return Err(Error::Decomposition(format!(
                "operator is not positive definite (pᵀAp = {pap:e})"
            )));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * ws.p[i];
            ws.r[i] -= alpha * ws.ap[i];
        }
        let rr_new = dot(&ws.r, &ws.r);
        if rr_new.sqrt() <= target {
            return Ok(iter);
        }
        let beta = rr_new / rr;
        for i in 0..n {
            ws.p[i] = ws.r[i] + beta * ws.p[i];
        }
        rr = rr_new;
    }
    Err(Error::SolverNonConvergence {
        iterations: max_iter,
        residual: rr.sqrt() / b_norm,
    })
}

/// Centered-difference Laplacian on `n` interior points with zero Dirichlet
/// boundary: diagonal `-2/h²`, off-diagonals `1/h²`.
pub fn laplacian_1d(n: usize, h: f64) -> Result<CsrMatrix> {
    if n < 2 {
        return Err(Error::invalid(format!("1D Laplacian needs n >= 2, got {n}")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("grid width must be positive, got {h}")));
    }
    let inv_h2 = 1.0 / (h * h);
    let mut triplets = Vec::with_capacity(3 * n);
    for i in 0..n {
        triplets.push((i, i, -2.0 * inv_h2));
        if i > 0 {
            triplets.push((i, i - 1, inv_h2));
        }
        if i + 1 < n {
            triplets.push((i, i + 1, inv_h2));
        }
    }
    CsrMatrix::from_triplets(n, n, triplets)
}

/// `I ⊗ L₁ + L₁ ⊗ I` on an `n × n` grid in row-major order (5-point stencil).
pub fn laplacian_2d_kron(n: usize, h: f64) -> Result<CsrMatrix> {
    laplacian_2d_kron_with_limit(n, h, MAX_GRID_POINTS)
}

pub fn laplacian_2d_kron_with_limit(n: usize, h: f64, max_points: usize) -> Result<CsrMatrix> {
    if n < 2 {
        return Err(Error::invalid(format!("2D Laplacian needs n >= 2, got {n}")));
    }
    let points = n
        .checked_mul(n)
        .filter(|&p| p <= max_points)
        .ok_or_else(|| Error::invalid(format!("{n}x{n} grid exceeds the maximum of {max_points} points")))?;
    let l1 = laplacian_1d(n, h)?;
    let mut triplets = Vec::with_capacity(5 * points);
    for row in 0..n {
        for col in 0..n {
            let k = row * n + col;
            // I ⊗ L₁ couples columns within a row, L₁ ⊗ I couples rows.
            for (c, v) in l1.row(col) {
                triplets.push((k, row * n + c, v));
            }
            for (r, v) in l1.row(row) {
                triplets.push((k, r * n + col, v));
            }
        }
    }
    CsrMatrix::from_triplets(points, points, triplets)
}
