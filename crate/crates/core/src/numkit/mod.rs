//! Dense and sparse numerical kernels shared by both flows.
//!
//! Every exponentiated operator in this crate is symmetric, so matrix
//! exponentials go through a cached symmetric eigendecomposition
//! `M = Q diag(λ) Qᵀ`, giving `exp(-tM) = Q diag(exp(-tλ)) Qᵀ`.

mod sparse;

pub use sparse::{
    conjugate_gradient, laplacian_1d, laplacian_2d_kron, laplacian_2d_kron_with_limit,
    CgWorkspace, CsrMatrix, LinearOperator, ShiftedOperator, MAX_GRID_POINTS,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and size thresholds for the kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    /// Relative residual target for linear solves.
    pub residual_tol: f64,
    pub cg_max_iter: usize,
    /// Largest dimension handled with dense eigendecompositions.
    pub dense_threshold: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            residual_tol: 1e-10,
            cg_max_iter: 20_000,
            dense_threshold: 1000,
        }
    }
}

/// Dense symmetric matrix. Positive (semi-)definiteness is the caller's
/// claim; only symmetry and finiteness are checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        let scale = entries.amax();
        let tolerance = 1e-12 * scale;
        let n = entries.nrows();
        let mut asymmetry = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                asymmetry = asymmetry.max((entries[(i, j)] - entries[(j, i)]).abs());
            }
        }
        if asymmetry > tolerance {
            return Err(Error::NotSymmetric { asymmetry, tolerance });
        }
        Ok(SpdMatrix(entries))
    }

    /// `AᵀA`, symmetrized exactly.
    pub fn gram(a: &DMatrix<f64>) -> Result<Self> {
        let g = a.tr_mul(a);
        let g = (&g + g.transpose()) * 0.5;
        SpdMatrix::new(g)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn eigen(&self) -> SymEigen {
        SymEigen::new(self)
    }
}

/// Cached symmetric eigendecomposition.
#[derive(Debug, Clone)]
pub struct SymEigen {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn new(m: &SpdMatrix) -> Self {
        let eig = m.0.clone().symmetric_eigen();
        SymEigen {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.values.min()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.values.max()
    }

    /// Dense `exp(-tM)`.
    pub fn exp_neg(&self, t: f64) -> DMatrix<f64> {
        let q = &self.vectors;
        let mut scaled = q.clone();
        for (j, lambda) in self.values.iter().enumerate() {
            let f = (-t * lambda).exp();
            scaled.column_mut(j).scale_mut(f);
        }
        let e = scaled * q.transpose();
        (&e + e.transpose()) * 0.5
    }

    /// `out = exp(-tM) v` without forming the dense exponential.
    pub fn apply_exp_neg(&self, t: f64, v: &DVector<f64>, out: &mut DVector<f64>, scratch: &mut DVector<f64>) {
        scratch.gemv_tr(1.0, &self.vectors, v, 0.0);
        for (s, lambda) in scratch.iter_mut().zip(self.values.iter()) {
            *s *= (-t * lambda).exp();
        }
        out.gemv(1.0, &self.vectors, scratch, 0.0);
    }
}

/// `exp(-tM)` for symmetric `M`.
pub fn mat_exp_spd(m: &SpdMatrix, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("time must be finite and nonnegative, got {t}")));
    }
    Ok(m.eigen().exp_neg(t))
}

/// Solves `Mx = v` for symmetric positive definite `M` by Cholesky with one
/// step of iterative refinement.
pub fn spd_solve(m: &SpdMatrix, v: &DVector<f64>) -> Result<DVector<f64>> {
    if v.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("right-hand side"));
    }
    let chol = m
        .0
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Decomposition("matrix is not positive definite".into()))?;
    let mut x = chol.solve(v);
    let residual = v - &m.0 * &x;
    x += chol.solve(&residual);
    if x.iter().any(|e| !e.is_finite()) {
        return Err(Error::Decomposition("Cholesky solve produced non-finite values".into()));
    }
    Ok(x)
}

/// Componentwise `sgn(x)·max(|x| - t, 0)`, the proximal map of `t‖·‖₁`.
pub fn soft_threshold(x: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("threshold must be nonnegative, got {t}")));
    }
    let mut out = x.clone();
    soft_threshold_in_place(out.as_mut_slice(), t);
    Ok(out)
}

pub(crate) fn soft_threshold_in_place(x: &mut [f64], t: f64) {
    for v in x.iter_mut() {
        let mag = (v.abs() - t).max(0.0);
        *v = if *v > 0.0 {
            mag
        } else if *v < 0.0 {
            -mag
        } else {
            0.0
        };
    }
}
