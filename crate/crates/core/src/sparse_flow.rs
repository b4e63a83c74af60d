//! L1-regularized least squares `½‖Aθ - b‖² + ‖θ‖₁` and its split flows.
//!
//! Regime 0 follows the data flow `dθ/dt = -(𝑨θ - 𝒃)` with `𝑨 = AᵀA`,
//! `𝒃 = Aᵀb`, solved exactly as `𝑨⁻¹𝒃 + exp(-t𝑨)(θ₀ - 𝑨⁻¹𝒃)`. Regime 1
//! follows `dθ/dt ∈ -∂‖θ‖₁`, which is soft thresholding by elapsed time.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::flow::{euler_with_kinks, simulate_schedule, SwitchedFlow};
use crate::numkit::{soft_threshold, soft_threshold_in_place, spd_solve, SpdMatrix, SymEigen};
use crate::switching::{Regime, SwitchSchedule};
use crate::trajectory::{TimeGrid, TrajectorySample};

/// Norm beyond which forward-backward iterates are declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct SparseProblem {
    design: DMatrix<f64>,
    data: DVector<f64>,
    normal_op: SpdMatrix,
    normal_rhs: DVector<f64>,
    eigen: SymEigen,
    sigma_min: f64,
    unreg_min: DVector<f64>,
}

impl SparseProblem {
    /// Builds the problem and caches the normal equations, their
    /// eigendecomposition and the unregularized minimizer. `A` must have
    /// full column rank.
    pub fn new(design: DMatrix<f64>, data: DVector<f64>) -> Result<Self> {
        if design.nrows() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: design.nrows(),
                found: data.len(),
            });
        }
        if design.ncols() == 0 {
            return Err(Error::invalid("design matrix has no columns"));
        }
        if design.iter().chain(data.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix or data"));
        }
        let normal_op = SpdMatrix::gram(&design)?;
        let normal_rhs = design.tr_mul(&data);
        let eigen = normal_op.eigen();
        let (lmin, lmax) = (eigen.min_eigenvalue(), eigen.max_eigenvalue());
        if !(lmin > 1e-12 * lmax.max(f64::MIN_POSITIVE)) {
            return Err(Error::RankDeficient {
                sigma_min: lmin.max(0.0).sqrt(),
            });
        }
        let unreg_min = spd_solve(&normal_op, &normal_rhs)?;
        Ok(SparseProblem {
            design,
            data,
            normal_op,
            normal_rhs,
            eigen,
            sigma_min: lmin.sqrt(),
            unreg_min,
        })
    }

    /// The scalar problem `½(aθ - b)² + |θ|`.
    pub fn scalar(a: f64, b: f64) -> Result<Self> {
        SparseProblem::new(DMatrix::from_element(1, 1, a), DVector::from_element(1, b))
    }

    /// Gaussian `m × n` design with a sparse ground truth and small noise.
    pub fn synthetic(m: usize, n: usize, seed: u64) -> Result<Self> {
        if m < n || n == 0 {
            return Err(Error::invalid(format!("synthetic problem needs m >= n >= 1, got {m}x{n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let design = DMatrix::from_fn(m, n, |_, _| normal());
        let truth = DVector::from_fn(n, |i, _| if i % 3 == 0 { 3.0 * normal() } else { 0.0 });
        let noise = DVector::from_fn(m, |_, _| 0.1 * normal());
        let data = &design * truth + noise;
        SparseProblem::new(design, data)
    }

    /// Loads a headerless design CSV (one row per line) and data CSV (one
    /// value per line).
    pub fn from_csv(design_path: &Path, data_path: &Path) -> Result<Self> {
        let rows = read_matrix_csv(design_path)?;
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("design CSV has ragged rows"));
        }
        let design = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
        let data: Vec<f64> = read_matrix_csv(data_path)?.into_iter().flatten().collect();
        SparseProblem::new(design, DVector::from_vec(data))
    }

    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn normal_op(&self) -> &SpdMatrix {
        &self.normal_op
    }

    pub fn normal_rhs(&self) -> &DVector<f64> {
        &self.normal_rhs
    }

    pub fn eigen(&self) -> &SymEigen {
        &self.eigen
    }

    /// Smallest singular value of `A`.
    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.eigen.max_eigenvalue().sqrt()
    }

    /// `𝑨⁻¹𝒃`, the minimizer of the data term alone.
    pub fn unreg_min(&self) -> &DVector<f64> {
        &self.unreg_min
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `½‖Aθ - b‖² + ‖θ‖₁`.
    pub fn potential(&self, theta: &DVector<f64>) -> Result<f64> {
        self.check_dim(theta)?;
        let r = &self.design * theta - &self.data;
        Ok(0.5 * r.norm_squared() + theta.lp_norm(1))
    }

    /// `∇Φ_d(θ) = 𝑨θ - 𝒃`.
    pub fn data_gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(theta)?;
        Ok(self.normal_op.as_matrix() * theta - &self.normal_rhs)
    }

    /// Exact data subflow at time `t`.
    pub fn data_subflow(&self, z0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        self.check_dim(z0)?;
        check_time(t)?;
        let mut state = z0.clone();
        let mut ws = self.workspace();
        self.advance(Regime::Linear, &mut state, t, &mut ws)?;
        Ok(state)
    }

    /// Right semi-derivative of the full flow `dζ/dt ∈ -½∇Φ_d - ½∂‖·‖₁`.
    ///
    /// At `ζ_i = 0` the coordinate stays put when `|(∇Φ_d)_i| ≤ 1` (ties
    /// included) and otherwise leaves with the one-sided slope.
    pub fn semi_derivative(&self, zeta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(zeta)?;
        let mut out = DVector::zeros(self.dim());
        self.semi_derivative_into(zeta, &mut out);
        Ok(out)
    }

    fn semi_derivative_into(&self, zeta: &DVector<f64>, out: &mut DVector<f64>) {
        out.gemv(1.0, self.normal_op.as_matrix(), zeta, 0.0);
        *out -= &self.normal_rhs;
        for (v, &z) in out.iter_mut().zip(zeta.iter()) {
            let grad = *v;
            let push = -grad; // (-∇Φ_d)_i
            *v = if z > 0.0 {
                0.5 * (push - 1.0)
            } else if z < 0.0 {
                0.5 * (push + 1.0)
            } else if push > 1.0 {
                0.5 * (push - 1.0)
            } else if push < -1.0 {
                0.5 * (push + 1.0)
            } else {
                0.0
            };
        }
    }

    /// Exact stochastic approximation along `schedule`.
    pub fn simulate_stochastic(
        &self,
        theta0: &DVector<f64>,
        schedule: &SwitchSchedule,
        grid: &TimeGrid,
    ) -> Result<TrajectorySample> {
        simulate_schedule(self, theta0, schedule, grid)
    }

    /// Explicit Euler on the semi-derivative field, clamping at 0.
    pub fn deterministic_flow(&self, z0: &DVector<f64>, grid: &TimeGrid, step: f64) -> Result<TrajectorySample> {
        self.check_dim(z0)?;
        let stiffness = 0.5 * self.eigen.max_eigenvalue();
        if step * stiffness > 2.0 {
            return Err(Error::UnstableStep { step, stiffness });
        }
        euler_with_kinks(|x, v| self.semi_derivative_into(x, v), &[0.0], z0, grid, step)
    }

    /// Forward-backward splitting `ζ ← ST(ζ - h_k(𝑨ζ - 𝒃), h_k)`. Step `k`
    /// uses `steps[k]`, repeating the last entry once the list runs out.
    pub fn forward_backward(&self, z0: &DVector<f64>, steps: &[f64], iters: usize) -> Result<DVector<f64>> {
        self.check_dim(z0)?;
        if steps.is_empty() || steps.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(Error::invalid("step sizes must be positive"));
        }
        if iters == 0 {
            return Err(Error::invalid("forward-backward needs at least one iteration"));
        }
        let mut z = z0.clone();
        let mut grad = DVector::zeros(self.dim());
        for k in 0..iters {
            let h = steps[k.min(steps.len() - 1)];
            grad.gemv(1.0, self.normal_op.as_matrix(), &z, 0.0);
            grad -= &self.normal_rhs;
            z.axpy(-h, &grad, 1.0);
            soft_threshold_in_place(z.as_mut_slice(), h);
            let norm = z.norm();
            if !(norm <= DIVERGENCE_NORM) {
                return Err(Error::Divergence { iteration: k + 1, norm });
            }
        }
        Ok(z)
    }

    /// Largest violation of `0 ∈ 𝑨θ - 𝒃 + ∂‖θ‖₁` over coordinates.
    pub fn stationarity_violation(&self, theta: &DVector<f64>) -> Result<f64> {
        let g = self.data_gradient(theta)?;
        Ok(theta
            .iter()
            .zip(g.iter())
            .map(|(&t, &gi)| {
                if t > 0.0 {
                    (gi + 1.0).abs()
                } else if t < 0.0 {
                    (gi - 1.0).abs()
                } else {
                    (gi.abs() - 1.0).max(0.0)
                }
            })
            .fold(0.0, f64::max))
    }
}

/// Exact L1 subflow: soft thresholding by `t`.
pub fn l1_subflow(z0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    check_time(t)?;
    soft_threshold(z0, t)
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("time must be finite and nonnegative, got {t}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SparseWorkspace {
    diff: DVector<f64>,
    scratch: DVector<f64>,
    out: DVector<f64>,
}

impl SwitchedFlow for SparseProblem {
    type Workspace = SparseWorkspace;

    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn workspace(&self) -> SparseWorkspace {
        let n = self.dim();
        SparseWorkspace {
            diff: DVector::zeros(n),
            scratch: DVector::zeros(n),
            out: DVector::zeros(n),
        }
    }

    fn advance(&self, regime: Regime, state: &mut DVector<f64>, dt: f64, ws: &mut SparseWorkspace) -> Result<()> {
        match regime {
            Regime::Linear => {
                ws.diff.copy_from(state);
                ws.diff -= &self.unreg_min;
                self.eigen.apply_exp_neg(dt, &ws.diff, &mut ws.out, &mut ws.scratch);
                state.copy_from(&self.unreg_min);
                *state += &ws.out;
            }
            Regime::Threshold => soft_threshold_in_place(state.as_mut_slice(), dt),
        }
        Ok(())
    }
}

pub(crate) fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::invalid(format!("{}: cannot parse {s:?}: {e}", path.display())))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}
