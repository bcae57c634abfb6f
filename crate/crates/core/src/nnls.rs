//! Nonnegative least squares in Gram form: minimize
//! `w^T G w / 2 - c^T w` subject to `w >= 0`, where `G` is the atom Gram
//! matrix. Lawson-Hanson active set first; if a passive-set Cholesky fails
//! the solver falls back to projected gradient with a duality-residual stop.

use nalgebra::{Cholesky, DMatrix, DVector};

const DUAL_RTOL: f64 = 1e-12;

pub(crate) fn solve(gram: &DMatrix<f64>, linear: &DVector<f64>) -> DVector<f64> {
    solve_warm(gram, linear, None)
}

/// `warm` seeds the passive set from an existing feasible weight vector,
/// which makes the repeated re-fits of a slowly changing atom pool cheap.
pub(crate) fn solve_warm(
    gram: &DMatrix<f64>,
    linear: &DVector<f64>,
    warm: Option<&[f64]>,
) -> DVector<f64> {
    match active_set(gram, linear, warm) {
        Some(w) => w,
        None => projected_gradient(gram, linear),
    }
}

fn active_set(
    gram: &DMatrix<f64>,
    linear: &DVector<f64>,
    warm: Option<&[f64]>,
) -> Option<DVector<f64>> {
    let n = linear.len();
    if n == 0 {
        return Some(DVector::zeros(0));
    }
    let scale = linear.amax().max(1.0);
    let tol_dual = DUAL_RTOL * scale;
    let mut w = DVector::zeros(n);
    let mut passive = vec![false; n];
    let mut resolve_passive = false;
    if let Some(start) = warm {
        if start.len() == n {
            for i in 0..n {
                if start[i] > 0.0 {
                    w[i] = start[i];
                    passive[i] = true;
                    resolve_passive = true;
                }
            }
        }
    }
    for _outer in 0..(10 * n + 100) {
        if !resolve_passive {
            let residual = linear - gram * &w;
            let mut best: Option<(usize, f64)> = None;
            for i in 0..n {
                if !passive[i] && best.is_none_or(|(_, r)| residual[i] > r) {
                    best = Some((i, residual[i]));
                }
            }
            let Some((enter, r_max)) = best else {
                return Some(w);
            };
            if r_max <= tol_dual {
                return Some(w);
            }
            passive[enter] = true;
        }
        resolve_passive = false;
        for _inner in 0..n + 1 {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let gpp = DMatrix::from_fn(idx.len(), idx.len(), |a, b| gram[(idx[a], idx[b])]);
            let cp = DVector::from_fn(idx.len(), |a, _| linear[idx[a]]);
            let chol = Cholesky::new(gpp)?;
            let z = chol.solve(&cp);
            if z.iter().all(|v| *v > 0.0) {
                w.fill(0.0);
                for (a, &i) in idx.iter().enumerate() {
                    w[i] = z[a];
                }
                break;
            }
            // step toward z until the first passive weight hits zero
            let mut alpha = f64::INFINITY;
            for (a, &i) in idx.iter().enumerate() {
                if z[a] <= 0.0 {
                    let denom = w[i] - z[a];
                    if denom > 0.0 {
                        alpha = alpha.min(w[i] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            if !alpha.is_finite() {
                return None;
            }
            for (a, &i) in idx.iter().enumerate() {
                w[i] += alpha * (z[a] - w[i]);
            }
            for &i in &idx {
                if w[i] <= 1e-14 * scale {
                    w[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    // iteration cap; caller falls back
    None
}

fn projected_gradient(gram: &DMatrix<f64>, linear: &DVector<f64>) -> DVector<f64> {
    let n = linear.len();
    let scale = linear.amax().max(1.0);
    let tol_dual = DUAL_RTOL * scale;
    // Gershgorin bound on |G|_2
    let lipschitz = (0..n)
        .map(|i| (0..n).map(|j| gram[(i, j)].abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let step = 1.0 / lipschitz;
    let mut w: DVector<f64> = DVector::zeros(n);
    for sweep in 0..50_000 {
        let grad = gram * &w - linear;
        for i in 0..n {
            w[i] = (w[i] - step * grad[i]).max(0.0);
        }
        if sweep % 16 == 0 {
            let grad = gram * &w - linear;
            let viol = (0..n)
                .map(|i| {
                    if w[i] > 0.0 {
                        grad[i].abs()
                    } else {
                        (-grad[i]).max(0.0)
                    }
                })
                .fold(0.0f64, f64::max);
            if viol <= tol_dual {
                break;
            }
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn orthogonal_gram_recovers_weights() {
        let gram = DMatrix::identity(2, 2);
        let c = DVector::from_vec(vec![0.3, 0.7]);
        let w = solve(&gram, &c);
        assert_relative_eq!(w[0], 0.3, max_relative = 1e-12);
        assert_relative_eq!(w[1], 0.7, max_relative = 1e-12);
    }

    #[test]
    fn negative_component_is_clipped() {
        // rho = sigma(e0) - 0.5 sigma(e1) against atoms {e0, e1}:
        // unconstrained solution (1, -0.5), the KKT answer is (1, 0)
        let gram = DMatrix::identity(2, 2);
        let c = DVector::from_vec(vec![1.0, -0.5]);
        let w = solve(&gram, &c);
        assert_relative_eq!(w[0], 1.0, max_relative = 1e-12);
        assert_eq!(w[1], 0.0);
    }

    #[test]
    fn correlated_atoms_satisfy_kkt() {
        let gram = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 1.0, 0.4, 0.2, 0.4, 1.0]);
        let c = DVector::from_vec(vec![0.9, -0.3, 0.5]);
        let w = solve(&gram, &c);
        let grad = &gram * &w - &c;
        for i in 0..3 {
            assert!(w[i] >= 0.0);
            if w[i] > 0.0 {
                assert!(grad[i].abs() <= 1e-10);
            } else {
                assert!(grad[i] >= -1e-10);
            }
        }
    }

    #[test]
    fn projected_gradient_agrees_with_active_set() {
        let gram = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
        let c = DVector::from_vec(vec![1.0, 0.5]);
        let a = active_set(&gram, &c, None).unwrap();
        let b = projected_gradient(&gram, &c);
        assert_relative_eq!((a - b).norm(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn warm_start_reaches_the_same_optimum() {
        let gram = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 1.0, 0.4, 0.2, 0.4, 1.0]);
        let c = DVector::from_vec(vec![0.9, -0.3, 0.5]);
        let cold = solve(&gram, &c);
        // warm starts from the wrong support still land on the optimum
        let warm = solve_warm(&gram, &c, Some(&[0.0, 1.0, 0.0]));
        assert_relative_eq!((&cold - &warm).norm(), 0.0, epsilon = 1e-10);
        let warm2 = solve_warm(&gram, &c, Some(cold.as_slice()));
        assert_relative_eq!((&cold - &warm2).norm(), 0.0, epsilon = 1e-12);
    }
}
