//! Binary classification through the discrete Allen–Cahn inclusion
//!
//! `dξ/dt ∈ -(𝑷 - ε△′)ξ + 𝒅 - ε⁻¹∂W(ξ)`
//!
//! with `𝑷 = αPᵀP` the fidelity projection onto the observed entries and `W`
//! the non-smooth double well `W(x) = ½(1 - x²)` on `[-1, 1]`, `|x| - 1`
//! outside. Regime 0 runs the linear part `ξ ↦ x* + exp(-tM)(ξ - x*)` with
//! `M = 𝑷 - ε△′`, `x* = M⁻¹𝒅`. Regime 1 runs the double-well part, whose
//! coordinates are repelled from 0 at rate `ε⁻¹` and absorbed at ±1.
//!
//! The double-well solution on `(-1, 0)` and `(0, 1)` is `exp(t/ε)·x₀`
//! clamped at ±1; this is the exact solution of `dξ/dt = ξ/ε`.

use std::path::Path;
use std::sync::OnceLock;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{euler_with_kinks, simulate_schedule, SwitchedFlow};
use crate::numkit::{
    conjugate_gradient, laplacian_1d, laplacian_2d_kron, spd_solve, CgWorkspace, CsrMatrix, KernelConfig,
    LinearOperator, ShiftedOperator, SpdMatrix, SymEigen,
};
use crate::sparse_flow::read_matrix_csv;
use crate::switching::{Regime, SwitchSchedule};
use crate::trajectory::{TimeGrid, TrajectorySample};

const CLASS1D_TRUTH: &str = include_str!("../fixtures/class1d_truth.csv");
const CLASS2D_TRUTH_50: &str = include_str!("../fixtures/class2d_truth_50.csv");
const CLASS2D_TRUTH_200: &str = include_str!("../fixtures/class2d_truth_200.csv");

/// How regime-0 events are integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearMode {
    /// Exact propagator from the dense eigendecomposition.
    #[default]
    Exact,
    /// One Crank–Nicolson step per event (subdivided above `dt_max`).
    Cn,
}

/// Sorted set of observed coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask {
    n: usize,
    indices: Vec<usize>,
}

impl ObservationMask {
    /// Every `stride`-th entry starting at 0.
    pub fn stride_1d(n: usize, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::invalid("mask stride must be positive"));
        }
        ObservationMask::explicit(n, (0..n).step_by(stride).collect())
    }

    /// Every `stride`-th column of every `stride`-th row on a `side × side`
    /// row-major grid.
    pub fn stride_2d(side: usize, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::invalid("mask stride must be positive"));
        }
        let idx = (0..side)
            .step_by(stride)
            .flat_map(|r| (0..side).step_by(stride).map(move |c| r * side + c))
            .collect();
        ObservationMask::explicit(side * side, idx)
    }

    pub fn explicit(n: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::invalid(format!("mask index {last} out of range for dimension {n}")));
            }
        }
        Ok(ObservationMask { n, indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// `W(x)`: `½(1 - x²)` for `|x| ≤ 1`, `|x| - 1` otherwise.
pub fn double_well(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        0.5 * (1.0 - x * x)
    } else {
        x.abs() - 1.0
    }
}

#[derive(Debug)]
pub struct ClassificationProblem {
    n: usize,
    mask: ObservationMask,
    data: Vec<f64>,
    alpha: f64,
    epsilon: f64,
    laplacian: Option<CsrMatrix>,
    fidelity: Vec<f64>,
    forcing: DVector<f64>,
    system: CsrMatrix,
    eigen: Option<SymEigen>,
    stationary: DVector<f64>,
    mu_min: OnceLock<f64>,
    kernel: KernelConfig,
}

impl ClassificationProblem {
    /// `laplacian = None` drops the diffusion term (then the mask must cover
    /// every coordinate for `M` to be invertible). `data[k]` is the
    /// observation at `mask.indices()[k]`.
    pub fn new(
        laplacian: Option<CsrMatrix>,
        mask: ObservationMask,
        data: Vec<f64>,
        alpha: f64,
        epsilon: f64,
        kernel: KernelConfig,
    ) -> Result<Self> {
        let n = mask.dim();
        if n == 0 {
            return Err(Error::invalid("classification problem has dimension 0"));
        }
        if data.len() != mask.len() {
            return Err(Error::DimensionMismatch {
                expected: mask.len(),
                found: data.len(),
            });
        }
        if !(alpha > 0.0) || !alpha.is_finite() || !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid(format!(
                "alpha and epsilon must be positive, got {alpha}, {epsilon}"
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observations"));
        }
        let mut fidelity = vec![0.0; n];
        let mut forcing = DVector::zeros(n);
        for (&i, &d) in mask.indices().iter().zip(&data) {
            fidelity[i] = alpha;
            forcing[i] = alpha * d;
        }
        let system = match &laplacian {
            Some(l) => {
                if l.nrows() != n || l.ncols() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: l.nrows(),
                    });
                }
                if !l.is_symmetric(1e-12 * l.gershgorin_bound().max(1.0)) {
                    return Err(Error::NotSymmetric {
                        asymmetry: f64::NAN,
                        tolerance: 1e-12,
                    });
                }
                l.scaled(-epsilon).plus_diagonal(&fidelity)?
            }
            None => CsrMatrix::diagonal_matrix(&fidelity),
        };

        let not_pd = || Error::Decomposition("P - ε△′ is not positive definite".into());
        let (eigen, stationary, mu_min) = if n <= kernel.dense_threshold {
            let spd = SpdMatrix::new(system.to_dense())?;
            let eigen = spd.eigen();
            let mu = eigen.min_eigenvalue();
            if !(mu > 0.0) {
                return Err(not_pd());
            }
            let stationary = spd_solve(&spd, &forcing)?;
            let cell = OnceLock::new();
            let _ = cell.set(mu);
            (Some(eigen), stationary, cell)
        } else {
            let mut x = vec![0.0; n];
            let mut ws = CgWorkspace::new(n);
            conjugate_gradient(&system, forcing.as_slice(), &mut x, kernel.residual_tol, kernel.cg_max_iter, &mut ws)
                .map_err(|e| match e {
                    Error::Decomposition(_) => not_pd(),
                    other => other,
                })?;
            (None, DVector::from_vec(x), OnceLock::new())
        };

        Ok(ClassificationProblem {
            n,
            mask,
            data,
            alpha,
            epsilon,
            laplacian,
            fidelity,
            forcing,
            system,
            eigen,
            stationary,
            mu_min,
            kernel,
        })
    }

    /// 1D fixture: `laplacian_1d(n, h)`, observations of `truth` at every
    /// `stride`-th entry.
    pub fn from_truth_1d(truth: &[f64], h: f64, alpha: f64, epsilon: f64, stride: usize) -> Result<Self> {
        let n = truth.len();
        let mask = ObservationMask::stride_1d(n, stride)?;
        let data = mask.indices().iter().map(|&i| truth[i]).collect();
        ClassificationProblem::new(Some(laplacian_1d(n, h)?), mask, data, alpha, epsilon, KernelConfig::default())
    }

    /// 2D fixture on a `side × side` grid with the Kronecker-sum Laplacian.
    pub fn from_truth_2d(truth: &[f64], side: usize, h: f64, alpha: f64, epsilon: f64, stride: usize) -> Result<Self> {
        if truth.len() != side * side {
            return Err(Error::DimensionMismatch {
                expected: side * side,
                found: truth.len(),
            });
        }
        let mask = ObservationMask::stride_2d(side, stride)?;
        let data = mask.indices().iter().map(|&i| truth[i]).collect();
        ClassificationProblem::new(
            Some(laplacian_2d_kron(side, h)?),
            mask,
            data,
            alpha,
            epsilon,
            KernelConfig::default(),
        )
    }

    /// The bundled n = 200 fixture with `h = 0.2`, `α = 1` and stride 5.
    pub fn class1d(epsilon: f64) -> Result<Self> {
        ClassificationProblem::from_truth_1d(&class1d_truth(), 0.2, 1.0, epsilon, 5)
    }

    /// Every 4th entry of the n = 200 fixture, `h = 0.8` so the domain
    /// length matches, stride 5.
    pub fn class1d_small(epsilon: f64) -> Result<Self> {
        let truth: Vec<f64> = class1d_truth().into_iter().step_by(4).collect();
        ClassificationProblem::from_truth_1d(&truth, 0.8, 1.0, epsilon, 5)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mask(&self) -> &ObservationMask {
        &self.mask
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn laplacian(&self) -> Option<&CsrMatrix> {
        self.laplacian.as_ref()
    }

    /// Diagonal of `𝑷`.
    pub fn fidelity_diag(&self) -> &[f64] {
        &self.fidelity
    }

    /// `𝒅 = αPᵀd`.
    pub fn forcing(&self) -> &DVector<f64> {
        &self.forcing
    }

    /// `M = 𝑷 - ε△′`.
    pub fn system(&self) -> &CsrMatrix {
        &self.system
    }

    /// `M⁻¹𝒅`.
    pub fn stationary(&self) -> &DVector<f64> {
        &self.stationary
    }

    pub fn eigen(&self) -> Option<&SymEigen> {
        self.eigen.as_ref()
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    /// Smallest eigenvalue of `M`. Computed on first use by inverse
    /// iteration when no dense decomposition is cached.
    pub fn mu_min(&self) -> Result<f64> {
        if let Some(&mu) = self.mu_min.get() {
            return Ok(mu);
        }
        let mu = inverse_iteration(&self.system, &self.kernel)?;
        Ok(*self.mu_min.get_or_init(|| mu))
    }

    /// Whether `μ_min > ε⁻¹`, the contraction condition under which the
    /// switched process is known to be ergodic.
    pub fn ergodicity_hypothesis(&self) -> Result<bool> {
        Ok(self.mu_min()? > 1.0 / self.epsilon)
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `(α/2)‖Pη - d‖² + (ε/2)‖∇′η‖² + ε⁻¹ΣW(η_i)`, with the gradient term
    /// evaluated as `-⟨η, △′η⟩`.
    pub fn gl_potential(&self, eta: &DVector<f64>) -> Result<f64> {
        self.check_dim(eta)?;
        let fit: f64 = self
            .mask
            .indices()
            .iter()
            .zip(&self.data)
            .map(|(&i, &d)| (eta[i] - d).powi(2))
            .sum();
        let dirichlet = match &self.laplacian {
            Some(l) => -eta.as_slice().iter().zip(l.mul_vec(eta.as_slice())).map(|(a, b)| a * b).sum::<f64>(),
            None => 0.0,
        };
        let well: f64 = eta.iter().map(|&x| double_well(x)).sum();
        Ok(0.5 * self.alpha * fit + 0.5 * self.epsilon * dirichlet + well / self.epsilon)
    }

    /// `∇Φ_ℓ(ξ) = Mξ - 𝒅`.
    pub fn linear_gradient(&self, xi: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(xi)?;
        let mut g = DVector::from_vec(self.system.mul_vec(xi.as_slice()));
        g -= &self.forcing;
        Ok(g)
    }

    /// Exact linear subflow. Only available below the dense threshold.
    pub fn linear_subflow(&self, x0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        self.check_dim(x0)?;
        check_time(t)?;
        let flow = self.flow(LinearMode::Exact, None)?;
        let mut x = x0.clone();
        let mut ws = flow.workspace();
        flow.advance(Regime::Linear, &mut x, t, &mut ws)?;
        Ok(x)
    }

    /// One Crank–Nicolson step `(I + dt/2·M)x₁ = (I - dt/2·M)x₀ + dt·𝒅`.
    pub fn cn_step(&self, x0: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
        self.check_dim(x0)?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("step must be positive, got {dt}")));
        }
        let mut x = x0.clone();
        let mut ws = AcWorkspace::new(self.n);
        self.cn_in_place(&mut x, dt, &mut ws)?;
        Ok(x)
    }

    fn cn_in_place(&self, x: &mut DVector<f64>, dt: f64, ws: &mut AcWorkspace) -> Result<()> {
        let half = 0.5 * dt;
        self.system.mul_vec_into(x.as_slice(), &mut ws.rhs);
        for i in 0..self.n {
            ws.rhs[i] = x[i] - half * ws.rhs[i] + dt * self.forcing[i];
        }
        let op = ShiftedOperator {
            op: &self.system,
            shift: 1.0,
            scale: half,
        };
        conjugate_gradient(
            &op,
            &ws.rhs,
            x.as_mut_slice(),
            self.kernel.residual_tol,
            self.kernel.cg_max_iter,
            &mut ws.cg,
        )?;
        Ok(())
    }

    /// Regime-specific flow view used by the simulators.
    pub fn flow(&self, mode: LinearMode, dt_max: Option<f64>) -> Result<AcFlow<'_>> {
        if mode == LinearMode::Exact && self.eigen.is_none() {
            return Err(Error::DenseThresholdExceeded {
                n: self.n,
                threshold: self.kernel.dense_threshold,
            });
        }
        if let Some(h) = dt_max {
            if !(h > 0.0) {
                return Err(Error::invalid(format!("dt_max must be positive, got {h}")));
            }
        }
        Ok(AcFlow {
            problem: self,
            mode,
            dt_max,
        })
    }

    pub fn simulate_stochastic(
        &self,
        eta0: &DVector<f64>,
        schedule: &SwitchSchedule,
        grid: &TimeGrid,
        mode: LinearMode,
        dt_max: Option<f64>,
    ) -> Result<TrajectorySample> {
        self.check_dim(eta0)?;
        let flow = self.flow(mode, dt_max)?;
        simulate_schedule(&flow, eta0, schedule, grid)
    }

    /// Right semi-derivative `-½∇Φ_ℓ + ½G′` of the full flow. At ±1 a
    /// coordinate sticks while `|(∇Φ_ℓ)_i| ≤ ε⁻¹`.
    pub fn semi_derivative(&self, xi: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(xi)?;
        let mut out = DVector::zeros(self.n);
        self.semi_derivative_into(xi, &mut out);
        Ok(out)
    }

    fn semi_derivative_into(&self, xi: &DVector<f64>, out: &mut DVector<f64>) {
        self.system.mul_vec_into(xi.as_slice(), out.as_mut_slice());
        let inv_eps = 1.0 / self.epsilon;
        for i in 0..self.n {
            let push = self.forcing[i] - out[i]; // (-∇Φ_ℓ)_i
            let x = xi[i];
            let g = if x < -1.0 {
                inv_eps
            } else if x > 1.0 {
                -inv_eps
            } else if x.abs() < 1.0 {
                inv_eps * x
            } else if push > inv_eps {
                -inv_eps
            } else if push < -inv_eps {
                inv_eps
            } else {
                out[i] = 0.0;
                continue;
            };
            out[i] = 0.5 * (push + g);
        }
    }

    /// Explicit Euler on the semi-derivative field, clamping at ±1.
    pub fn deterministic_flow(&self, x0: &DVector<f64>, grid: &TimeGrid, step: f64) -> Result<TrajectorySample> {
        self.check_dim(x0)?;
        let stiffness = 0.5 * self.system.gershgorin_bound();
        if step * stiffness > 2.0 {
            return Err(Error::UnstableStep { step, stiffness });
        }
        euler_with_kinks(|x, v| self.semi_derivative_into(x, v), &[-1.0, 1.0], x0, grid, step)
    }
}

/// Exact double-well subflow, componentwise.
pub fn double_well_subflow(x0: &DVector<f64>, epsilon: f64, t: f64) -> Result<DVector<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    check_time(t)?;
    let mut x = x0.clone();
    double_well_in_place(x.as_mut_slice(), epsilon, t);
    Ok(x)
}

fn double_well_in_place(x: &mut [f64], epsilon: f64, t: f64) {
    let s = t / epsilon;
    let growth = s.exp();
    for v in x.iter_mut() {
        let x0 = *v;
        *v = if x0 < -1.0 {
            (x0 + s).min(-1.0)
        } else if x0 < 0.0 {
            (growth * x0).max(-1.0)
        } else if x0 == 0.0 {
            0.0
        } else if x0 <= 1.0 {
            (growth * x0).min(1.0)
        } else {
            (x0 - s).max(1.0)
        };
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("time must be finite and nonnegative, got {t}")));
    }
    Ok(())
}

/// Smallest eigenvalue of an SPD operator by inverse iteration with CG.
fn inverse_iteration(op: &CsrMatrix, kernel: &KernelConfig) -> Result<f64> {
    let n = op.dim();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut w = vec![0.0; n];
    let mut av = vec![0.0; n];
    let mut ws = CgWorkspace::new(n);
    let mut prev = f64::INFINITY;
    for _ in 0..2000 {
        w.copy_from_slice(&v);
        conjugate_gradient(op, &v, &mut w, kernel.residual_tol, kernel.cg_max_iter, &mut ws)?;
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / norm);
        op.apply(&v, &mut av);
        let rq: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
        if (rq - prev).abs() <= 1e-12 * rq.abs() {
            return Ok(rq);
        }
        prev = rq;
    }
    Err(Error::SolverNonConvergence {
        iterations: 2000,
        residual: f64::NAN,
    })
}

/// The classification problem paired with a linear-mode choice.
#[derive(Debug, Clone, Copy)]
pub struct AcFlow<'a> {
    problem: &'a ClassificationProblem,
    mode: LinearMode,
    dt_max: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AcWorkspace {
    diff: DVector<f64>,
    out: DVector<f64>,
    scratch: DVector<f64>,
    rhs: Vec<f64>,
    cg: CgWorkspace,
}

impl AcWorkspace {
    fn new(n: usize) -> Self {
        AcWorkspace {
            diff: DVector::zeros(n),
            out: DVector::zeros(n),
            scratch: DVector::zeros(n),
            rhs: vec![0.0; n],
            cg: CgWorkspace::new(n),
        }
    }
}

impl SwitchedFlow for AcFlow<'_> {
    type Workspace = AcWorkspace;

    fn dim(&self) -> usize {
        self.problem.n
    }

    fn workspace(&self) -> AcWorkspace {
        AcWorkspace::new(self.problem.n)
    }

    fn advance(&self, regime: Regime, state: &mut DVector<f64>, dt: f64, ws: &mut AcWorkspace) -> Result<()> {
        let p = self.problem;
        match (regime, self.mode) {
            (Regime::Threshold, _) => double_well_in_place(state.as_mut_slice(), p.epsilon, dt),
            (Regime::Linear, _) if dt == 0.0 => {}
            (Regime::Linear, LinearMode::Exact) => {
                let eigen = p.eigen.as_ref().expect("checked when the flow was built");
                ws.diff.copy_from(state);
                ws.diff -= &p.stationary;
                eigen.apply_exp_neg(dt, &ws.diff, &mut ws.out, &mut ws.scratch);
                state.copy_from(&p.stationary);
                *state += &ws.out;
            }
            (Regime::Linear, LinearMode::Cn) => {
                let pieces = match self.dt_max {
                    Some(h) if dt > h => (dt / h).ceil() as usize,
                    _ => 1,
                };
                let sub = dt / pieces as f64;
                for _ in 0..pieces {
                    p.cn_in_place(state, sub, ws)?;
                }
            }
        }
        Ok(())
    }
}

/// Labels from a CSV of ±1 values. A non-numeric first row is treated as a
/// header; all rows are concatenated in order.
pub fn load_labels_csv(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    parse_labels(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

fn parse_labels(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(vals) => out.extend(vals),
            Err(_) if k == 0 => continue,
            Err(e) => return Err(Error::invalid(format!("line {}: {e}", k + 1))),
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("no labels found"));
    }
    if out.iter().any(|v| *v != 1.0 && *v != -1.0) {
        return Err(Error::invalid("labels must be -1 or 1"));
    }
    Ok(out)
}

/// The bundled 200-entry 1D ground truth.
pub fn class1d_truth() -> Vec<f64> {
    parse_labels(CLASS1D_TRUTH).expect("bundled fixture is valid")
}

/// The bundled 2D ground truth for `side` ∈ {50, 200}, row-major.
pub fn class2d_truth(side: usize) -> Result<Vec<f64>> {
    match side {
        50 => Ok(parse_labels(CLASS2D_TRUTH_50).expect("bundled fixture is valid")),
        200 => Ok(parse_labels(CLASS2D_TRUTH_200).expect("bundled fixture is valid")),
        _ => Err(Error::invalid(format!("no bundled 2D fixture of side {side} (have 50, 200)"))),
    }
}

/// Loads a dense matrix CSV (e.g. a custom Laplacian) into CSR form.
pub fn load_operator_csv(path: &Path) -> Result<CsrMatrix> {
    let rows = read_matrix_csv(path)?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("operator CSV must be square"));
    }
    let triplets = rows
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(j, &v)| (i, j, v)))
        .collect();
    CsrMatrix::from_triplets(n, n, triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::switching::SwitchEvent;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    fn decoupled(n: usize, data: Vec<f64>, eps: f64) -> ClassificationProblem {
        let mask = ObservationMask::explicit(n, (0..n).collect()).unwrap();
        ClassificationProblem::new(None, mask, data, 1.0, eps, KernelConfig::default()).unwrap()
    }

    fn random_problem(n: usize, eps: f64, seed: u64) -> ClassificationProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        ClassificationProblem::from_truth_1d(&truth, 0.5, 1.0, eps, 3).unwrap()
    }

    #[test]
    fn masks() {
        assert_eq!(ObservationMask::stride_1d(12, 5).unwrap().indices(), &[0, 5, 10]);
        assert_eq!(ObservationMask::stride_1d(200, 5).unwrap().len(), 40);
        let m = ObservationMask::stride_2d(200, 5).unwrap();
        assert_eq!(m.len(), 1600);
        assert_eq!(m.len() as f64 / 40_000.0, 0.04);
        assert_eq!(ObservationMask::stride_2d(10, 5).unwrap().indices(), &[0, 5, 50, 55]);
        assert!(ObservationMask::explicit(3, vec![3]).is_err());
        assert!(ObservationMask::stride_1d(3, 0).is_err());
    }

    #[test]
    fn double_well_values() {
        assert_eq!(double_well(1.0), 0.0);
        assert_eq!(double_well(-1.0), 0.0);
        assert_eq!(double_well(0.0), 0.5);
        assert_eq!(double_well(2.0), 1.0);
        assert_eq!(double_well(-3.0), 2.0);
        for k in -40..=40 {
            assert!(double_well(k as f64 / 10.0) >= 0.0);
        }
    }

    #[test]
    fn potential_examples() {
        let eps = 0.1;
        let p = decoupled(4, vec![1.0, -1.0, 1.0, 1.0], eps);
        assert_eq!(p.gl_potential(&v(&[1.0, -1.0, 1.0, 1.0])).unwrap(), 0.0);
        let zero = p.gl_potential(&DVector::zeros(4)).unwrap();
        // fidelity ½·4 plus wells ε⁻¹·4·½
        assert!((zero - (2.0 + 4.0 * 0.5 / eps)).abs() < 1e-12);

        let q = random_problem(30, 0.05, 1);
        let eta = DVector::from_fn(30, |i, _| (i as f64 * 0.37).sin());
        let l = q.laplacian().unwrap().to_dense();
        // ∇′ as forward differences with zero boundary: ‖∇′η‖² = -⟨η, △′η⟩
        let h: f64 = 0.5;
        let mut grad_sq = eta[0].powi(2) / (h * h) + eta[29].powi(2) / (h * h);
        for i in 0..29 {
            grad_sq += (eta[i + 1] - eta[i]).powi(2) / (h * h);
        }
        assert!((grad_sq + eta.dot(&(&l * &eta))).abs() < 1e-9);
        assert!(p.gl_potential(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn system_structure() {
        let q = random_problem(20, 0.1, 2);
        let fid = q.fidelity_diag();
        for (i, &f) in fid.iter().enumerate() {
            assert_eq!(f, if i % 3 == 0 { 1.0 } else { 0.0 });
            if i % 3 != 0 {
                assert_eq!(q.forcing()[i], 0.0);
            }
        }
        let dense = q.system().to_dense();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(fid.to_vec())) - q.laplacian().unwrap().to_dense() * 0.1;
        assert!((dense - expected).amax() < 1e-12);
        let res = q.system().to_dense() * q.stationary() - q.forcing();
        assert!(res.amax() < 1e-10);
    }

    #[test]
    fn partial_mask_without_laplacian_is_rejected() {
        let mask = ObservationMask::explicit(3, vec![0]).unwrap();
        let err = ClassificationProblem::new(None, mask, vec![1.0], 1.0, 0.1, KernelConfig::default()).unwrap_err();
        assert!(err.is_numerical());
    }

    #[test]
    fn double_well_examples() {
        let eps = 1.0;
        assert_eq!(double_well_subflow(&v(&[0.0]), 0.01, 100.0).unwrap()[0], 0.0);
        assert!((double_well_subflow(&v(&[0.5]), eps, 2f64.ln()).unwrap()[0] - 1.0).abs() < 1e-15);
        assert_eq!(double_well_subflow(&v(&[2.0]), 0.5, 0.25).unwrap()[0], 1.5);
        let out = double_well_subflow(&v(&[-3.0, -0.25, 0.25, 3.0, 1.0, -1.0]), 0.5, 0.5).unwrap();
        assert_eq!(out[0], -2.0);
        assert!((out[1] + 0.25 * 1f64.exp()).abs() < 1e-15);
        assert!((out[2] - 0.25 * 1f64.exp()).abs() < 1e-15);
        assert_eq!(out[3], 2.0);
        assert_eq!(out[4], 1.0);
        assert_eq!(out[5], -1.0);
        assert!(double_well_subflow(&v(&[1.0]), 0.0, 1.0).is_err());
        // huge exponent stays finite
        assert_eq!(double_well_subflow(&v(&[1e-300, -1e-300]), 1e-6, 64.0).unwrap(), v(&[1.0, -1.0]));
    }

    #[test]
    fn double_well_solves_its_ode() {
        // dξ/dt = -ε⁻¹W'(ξ) integrated with small RK4 steps away from kinks
        let eps = 0.3;
        let rhs = |x: f64| if x.abs() < 1.0 { x / eps } else { -x.signum() / eps };
        for &x0 in &[-2.5, -0.4, 0.1, 0.7, 1.8] {
            let t = 0.1;
            let steps = 20_000;
            let h = t / steps as f64;
            let mut x = x0;
            for _ in 0..steps {
                let k1 = rhs(x);
                let k2 = rhs(x + 0.5 * h * k1);
                let k3 = rhs(x + 0.5 * h * k2);
                let k4 = rhs(x + h * k3);
                x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            let exact = double_well_subflow(&v(&[x0]), eps, t).unwrap()[0];
            assert!((exact - x).abs() < 1e-9, "{x0}: {exact} vs {x}");
        }
    }

    #[test]
    fn double_well_output_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x0 = rng.random_range(-3.0..3.0);
            let t = rng.random_range(0.0..2.0);
            let y = double_well_subflow(&v(&[x0]), 0.7, t).unwrap()[0];
            assert!(y.abs() <= x0.abs().max(1.0) + 1e-15);
            if x0.abs() > 1.0 {
                assert!(y.abs() >= 1.0 && y.signum() == x0.signum());
            } else if x0 != 0.0 {
                assert!(y.abs() >= x0.abs() && y.signum() == x0.signum());
            }
        }
    }

    #[test]
    fn linear_subflow_fixed_point_and_threshold() {
        let q = random_problem(25, 0.05, 4);
        let y = q.linear_subflow(q.stationary(), 3.0).unwrap();
        assert!((y - q.stationary()).amax() < 1e-12);

        let mask = ObservationMask::stride_1d(1500, 5).unwrap();
        let data = vec![1.0; mask.len()];
        let big = ClassificationProblem::new(
            Some(laplacian_1d(1500, 0.2).unwrap()),
            mask,
            data,
            1.0,
            0.01,
            KernelConfig::default(),
        )
        .unwrap();
        assert!(big.eigen().is_none());
        assert!(matches!(
            big.linear_subflow(&DVector::zeros(1500), 1.0),
            Err(Error::DenseThresholdExceeded { .. })
        ));
        let res = DVector::from_vec(big.system().mul_vec(big.stationary().as_slice())) - big.forcing();
        assert!(res.norm() < 1e-9 * big.forcing().norm());
        assert!(big.cn_step(&DVector::zeros(1500), 0.5).is_ok());
    }

    #[test]
    fn linear_subflow_matches_rk4() {
        let q = random_problem(20, 0.1, 5);
        let x0 = DVector::from_fn(20, |i, _| ((i * 7) % 5) as f64 - 2.0);
        let m = q.system().to_dense();
        let f = |x: &DVector<f64>| -(&m * x) + q.forcing();
        let (t, steps) = (2.0, 4000);
        let h = t / steps as f64;
        let mut x = x0.clone();
        for _ in 0..steps {
            let k1 = f(&x);
            let k2 = f(&(&x + &k1 * (0.5 * h)));
            let k3 = f(&(&x + &k2 * (0.5 * h)));
            let k4 = f(&(&x + &k3 * h));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        assert!((q.linear_subflow(&x0, t).unwrap() - x).amax() < 1e-9);
    }

    #[test]
    fn cn_fixed_point_and_identity_limit() {
        let q = random_problem(30, 0.05, 6);
        let y = q.cn_step(q.stationary(), 0.3).unwrap();
        assert!((y - q.stationary()).amax() < 1e-9);
        let x0 = DVector::from_fn(30, |i, _| (i as f64).cos());
        let y = q.cn_step(&x0, 1e-12).unwrap();
        assert!((y - &x0).amax() < 1e-9);
        assert!(q.cn_step(&x0, 0.0).is_err());
    }

    #[test]
    fn cn_matches_spectral_rational_function() {
        // on eigenvectors of M the CN map acts as (1 - dt·μ/2)/(1 + dt·μ/2)
        let q = random_problem(20, 0.2, 7);
        let eig = q.eigen().unwrap();
        let dt = 0.4;
        for k in [0, 7, 19] {
            let mu = eig.eigenvalues()[k];
            let u = eig.eigenvectors().column(k).into_owned();
            let x0 = q.stationary() + &u;
            let y = q.cn_step(&x0, dt).unwrap() - q.stationary();
            let r = (1.0 - 0.5 * dt * mu) / (1.0 + 0.5 * dt * mu);
            assert!((y - &u * r).amax() < 1e-8, "mode {k}");
            let e = q.linear_subflow(&x0, dt).unwrap() - q.stationary();
            assert!((e - &u * (-dt * mu).exp()).amax() < 1e-10);
        }
    }

    #[test]
    fn cn_mode_subdivides_long_events() {
        let q = random_problem(15, 0.1, 8);
        let x0 = DVector::from_element(15, 0.3);
        let sched = SwitchSchedule::new(vec![SwitchEvent { regime: Regime::Linear, duration: 1.0 }], 1.0).unwrap();
        let grid = TimeGrid::new(vec![1.0]).unwrap();
        let one = q.simulate_stochastic(&x0, &sched, &grid, LinearMode::Cn, None).unwrap();
        assert!((one.last_state() - q.cn_step(&x0, 1.0).unwrap()).amax() < 1e-12);
        let four = q.simulate_stochastic(&x0, &sched, &grid, LinearMode::Cn, Some(0.25)).unwrap();
        let mut manual = x0.clone();
        for _ in 0..4 {
            manual = q.cn_step(&manual, 0.25).unwrap();
        }
        assert!((four.last_state() - manual).amax() < 1e-12);
        let exact = q.simulate_stochastic(&x0, &sched, &grid, LinearMode::Exact, None).unwrap();
        assert!((exact.last_state() - q.linear_subflow(&x0, 1.0).unwrap()).amax() < 1e-12);
    }

    #[test]
    fn mu_min_inverse_iteration_matches_dense() {
        let q = random_problem(40, 0.05, 9);
        let dense = q.mu_min().unwrap();
        let it = inverse_iteration(q.system(), q.kernel()).unwrap();
        assert!((dense - it).abs() < 1e-8 * dense, "{dense} vs {it}");
    }

    #[test]
    fn ergodicity_flag() {
        let eps = 1.0;
        let strong = ClassificationProblem::from_truth_1d(&[1.0; 10], 1.0, 10.0, eps, 1).unwrap();
        assert!(strong.mu_min().unwrap() > 1.0 / eps);
        assert!(strong.ergodicity_hypothesis().unwrap());
        let weak = ClassificationProblem::class1d(1e-2).unwrap();
        assert!(weak.mu_min().unwrap() < 100.0);
        assert!(!weak.ergodicity_hypothesis().unwrap());
    }

    #[test]
    fn semi_derivative_cases() {
        let eps = 0.5; // ε⁻¹ = 2
        // 𝑷 = I, 𝒅 = data, no Laplacian: -∇Φ_ℓ = d - ξ
        let p = decoupled(6, vec![0.0, 0.0, 4.5, -2.5, 0.0, 0.0], eps);
        let f = p.semi_derivative(&v(&[-2.0, 0.5, 1.0, 1.0, 1.0, 3.0])).unwrap();
        assert_eq!(f[0], 0.5 * (2.0 + 2.0)); // below -1
        assert_eq!(f[1], 0.5 * (-0.5 + 1.0)); // interior
        assert_eq!(f[2], 0.5 * (3.5 - 2.0)); // leaves +1 upward
        assert_eq!(f[3], 0.5 * (-3.5 + 2.0)); // leaves +1 downward
        assert_eq!(f[4], 0.0); // sticks at +1
        assert_eq!(f[5], 0.5 * (-3.0 - 2.0)); // above +1
    }

    #[test]
    fn deterministic_flow_fixed_points() {
        let p = decoupled(5, vec![0.0; 5], 0.1);
        let grid = TimeGrid::uniform(2.0, 5).unwrap();
        let path = p.deterministic_flow(&DVector::zeros(5), &grid, 1e-3).unwrap();
        assert!(path.states.iter().all(|s| s.iter().all(|x| *x == 0.0)));

        let q = ClassificationProblem::class1d_small(1e-2).unwrap();
        let signs = DVector::from_vec(class1d_truth().into_iter().step_by(4).collect());
        let g = q.linear_gradient(&signs).unwrap();
        assert!(g.amax() <= 1.0 / q.epsilon());
        let path = q.deterministic_flow(&signs, &grid, 1e-3).unwrap();
        assert!(path.states.iter().all(|s| *s == signs));
    }

    #[test]
    fn deterministic_flow_descends() {
        let q = random_problem(10, 0.2, 11);
        let x0 = DVector::from_fn(10, |i, _| 0.3 * (i as f64 - 4.5));
        let step = 1e-4;
        let grid = TimeGrid::uniform(3.0, 61).unwrap();
        let path = q.deterministic_flow(&x0, &grid, step).unwrap();
        let phi: Vec<f64> = path.states.iter().map(|s| q.gl_potential(s).unwrap()).collect();
        for w in phi.windows(2) {
            assert!(w[1] <= w[0] + 100.0 * step, "{} -> {}", w[0], w[1]);
        }
        assert!(phi.last().unwrap() <= &phi[0]);
        assert!(matches!(q.deterministic_flow(&x0, &grid, 10.0), Err(Error::UnstableStep { .. })));
    }

    #[test]
    fn labels_parse() {
        let t = class1d_truth();
        assert_eq!(t.len(), 200);
        assert_eq!(class2d_truth(50).unwrap().len(), 2500);
        assert_eq!(class2d_truth(200).unwrap().len(), 40_000);
        assert!(class2d_truth(7).is_err());
        assert!(parse_labels("label\n1\n0\n").is_err());
        assert_eq!(parse_labels("1,-1\n-1,1\n").unwrap(), vec![1.0, -1.0, -1.0, 1.0]);
    }
}
