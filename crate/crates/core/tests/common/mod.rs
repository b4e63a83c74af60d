#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use randsplit::SparseProblem;

/// Minimizer of `½‖Aθ - b‖² + ‖θ‖₁` by enumerating every sign pattern in
/// {-1, 0, +1}ⁿ and solving the KKT system restricted to its support.
pub fn active_set_minimizer(p: &SparseProblem) -> DVector<f64> {
    let g = p.normal_op().as_matrix();
    let rhs = p.normal_rhs();
    let n = p.dim();
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut signs = vec![-1i8; n];
    loop {
        if let Some(theta) = kkt_candidate(g, rhs, &signs) {
            let phi = p.potential(&theta).unwrap();
            if best.as_ref().is_none_or(|(b, _)| phi < *b) {
                best = Some((phi, theta));
            }
        }
        // odometer over {-1, 0, 1}ⁿ
        let mut k = 0;
        while k < n && signs[k] == 1 {
            signs[k] = -1;
            k += 1;
        }
        if k == n {
            break;
        }
        signs[k] += 1;
    }
    best.expect("strictly convex problem has a KKT point").1
}

fn kkt_candidate(g: &DMatrix<f64>, rhs: &DVector<f64>, signs: &[i8]) -> Option<DVector<f64>> {
    let n = signs.len();
    let support: Vec<usize> = (0..n).filter(|&i| signs[i] != 0).collect();
    let mut theta = DVector::zeros(n);
    if !support.is_empty() {
        let k = support.len();
        let gs = DMatrix::from_fn(k, k, |a, b| g[(support[a], support[b])]);
        let r = DVector::from_fn(k, |a, _| rhs[support[a]] - signs[support[a]] as f64);
        let sol = gs.cholesky()?.solve(&r);
        for (a, &i) in support.iter().enumerate() {
            if sol[a] * signs[i] as f64 <= 0.0 {
                return None;
            }
            theta[i] = sol[a];
        }
    }
    let grad = g * &theta - rhs;
    for i in 0..n {
        if signs[i] == 0 && grad[i].abs() > 1.0 + 1e-12 {
            return None;
        }
    }
    Some(theta)
}

/// `Σ sin(x_i) + x_i³/6` and its gradient: smooth and non-quadratic.
pub fn smooth_f(x: &DVector<f64>) -> f64 {
    x.iter().map(|v| v.sin() + v.powi(3) / 6.0).sum()
}

pub fn smooth_grad(x: &DVector<f64>) -> DVector<f64> {
    x.map(|v| v.cos() + v * v / 2.0)
}
