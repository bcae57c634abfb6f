//! Brute-force reference computations, kept deliberately naive and separate
//! from the solver paths: quadruple-loop contractions over dense entries, a
//! sphere grid search, central finite differences, optimality sampling, and
//! a Jacobi eigensolver for the PSD-cone distance.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::atoms::AtomList;
use crate::error::{CsError, Result};
use crate::form::{flat_index, QuarticForm};
use crate::quartic::SymmetricQuartic;
use crate::sampling::sphere_uniform;

/// Reference result bundle for a cross-check run.
#[derive(Debug, Clone)]
pub struct OracleReport {
    /// Which operation the report targets.
    pub target: String,
    /// Reference value(s) produced by the naive path.
    pub reference: Vec<f64>,
    /// Largest relative discrepancy between naive and structured paths.
    pub discrepancy: f64,
    /// Resolution or sample-count parameters used.
    pub parameters: String,
}

/// Naive `f(x)` straight from dense coefficients, quadruple loop with
/// compensated summation so the finite-difference stencils built on top are
/// not dominated by accumulation error.
pub fn f_naive(n: usize, entries: &[f64], x: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let xij = x[i] * x[j];
            for k in 0..n {
                let xijk = xij * x[k];
                let base = flat_index(n, i, j, k, 0);
                for l in 0..n {
                    let term = entries[base + l] * xijk * x[l];
                    let y = term - carry;
                    let t = sum + y;
                    carry = (t - sum) - y;
                    sum = t;
                }
            }
        }
    }
    0.25 * sum
}

fn b_naive(n: usize, entries: &[f64], x: &[f64]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                let base = flat_index(n, i, j, k, 0);
                for l in 0..n {
                    acc += entries[base + l] * x[k] * x[l];
                }
            }
            b[(i, j)] = acc;
        }
    }
    b
}

/// Exhaustive sphere search for the maximum of `f`. Angle grid for n = 2,
/// spherical-coordinate grid for n = 3; accuracy is O(resolution^2) near a
/// smooth maximum.
pub fn grid_max(form: &QuarticForm, resolution: f64) -> Result<(DVector<f64>, f64)> {
    let n = form.n();
    let entries = form.to_dense_entries()?;
    match n {
        2 => {
            let steps = (std::f64::consts::PI / resolution).ceil() as usize;
            let mut best = (DVector::from_vec(vec![1.0, 0.0]), f64::NEG_INFINITY);
            for s in 0..=steps {
                let theta = s as f64 * resolution;
                let x = [theta.cos(), theta.sin()];
                let f = f_naive(n, &entries, &x);
                if f > best.1 {
                    best = (DVector::from_vec(x.to_vec()), f);
                }
            }
            Ok(best)
        }
        3 => {
            let polar_steps = (std::f64::consts::PI / resolution).ceil() as usize;
            let azimuth_steps = (2.0 * std::f64::consts::PI / resolution).ceil() as usize;
            let mut best = (DVector::from_vec(vec![0.0, 0.0, 1.0]), f64::NEG_INFINITY);
            for a in 0..=polar_steps {
                let theta = a as f64 * resolution;
                let (st, ct) = (theta.sin(), theta.cos());
                for b in 0..azimuth_steps {
                    let phi = b as f64 * resolution;
                    let x = [st * phi.cos(), st * phi.sin(), ct];
                    let f = f_naive(n, &entries, &x);
                    if f > best.1 {
                        best = (DVector::from_vec(x.to_vec()), f);
                    }
                }
            }
            Ok(best)
        }
        other => Err(CsError::UnsupportedDimension(other)),
    }
}

/// Central finite differences of the naive `f` only; never touches the
/// analytic derivative paths.
pub fn fd_derivatives(
    form: &QuarticForm,
    x: &DVector<f64>,
    h: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = form.n();
    let entries = form.to_dense_entries()?;
    let eval = |v: &[f64]| f_naive(n, &entries, v);
    let base: Vec<f64> = x.as_slice().to_vec();
    let mut grad = DVector::zeros(n);
    for i in 0..n {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[i] += h;
        minus[i] -= h;
        grad[i] = (eval(&plus) - eval(&minus)) / (2.0 * h);
    }
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut pp = base.clone();
            let mut pm = base.clone();
            let mut mp = base.clone();
            let mut mm = base.clone();
            pp[i] += h;
            pp[j] += h;
            pm[i] += h;
            pm[j] -= h;
            mp[i] -= h;
            mp[j] += h;
            mm[i] -= h;
            mm[j] -= h;
            hess[(i, j)] = (eval(&pp) - eval(&pm) - eval(&mp) + eval(&mm)) / (4.0 * h * h);
        }
    }
    Ok((grad, hess))
}

fn dense_of_atoms(n: usize, atoms: &AtomList) -> Vec<f64> {
    let mut out = vec![0.0; n * n * n * n];
    for (w, x) in atoms.weights().iter().zip(atoms.vectors()) {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        out[flat_index(n, i, j, k, l)] += w * x[i] * x[j] * x[k] * x[l];
                    }
                }
            }
        }
    }
    out
}

/// Max over sphere-uniform samples of `<rho - rho_star, sigma(y) - rho_star>`.
/// Nonpositive values up to tolerance certify (sample-limited) optimality of
/// the projection.
pub fn optimality_sample(
    rho: &QuarticForm,
    rho_star: &AtomList,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let n = rho.n();
    let rho_entries = rho.to_dense_entries()?;
    let star_entries = dense_of_atoms(n, rho_star);
    let diff: Vec<f64> = rho_entries
        .iter()
        .zip(&star_entries)
        .map(|(a, b)| a - b)
        .collect();
    let diff_dot_star: f64 = diff.iter().zip(&star_entries).map(|(a, b)| a * b).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let y = sphere_uniform(n, &mut rng);
        let mut diff_dot_sigma = 0.0;
        for i in 0..n {
            for j in 0..n {
                let yij = y[i] * y[j];
                for k in 0..n {
                    let base = flat_index(n, i, j, k, 0);
                    for l in 0..n {
                        diff_dot_sigma += diff[base + l] * yij * y[k] * y[l];
                    }
                }
            }
        }
        worst = worst.max(diff_dot_sigma - diff_dot_star);
    }
    Ok(worst)
}

/// Densifies a structured form and compares `B_x`, `f`, and the self inner
/// product against naive dense contractions on random directions.
pub fn cross_check(form: &QuarticForm) -> Result<OracleReport> {
    let n = form.n();
    if n > 6 {
        return Err(CsError::DenseCapExceeded(n));
    }
    let entries = form.to_dense_entries()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut discrepancy = 0.0f64;
    let mut reference = Vec::new();
    for _ in 0..3 {
        let x = sphere_uniform(n, &mut rng);
        let f_ref = f_naive(n, &entries, x.as_slice());
        let f_fast = form.f_value(&x);
        reference.push(f_ref);
        discrepancy = discrepancy.max(rel_err(f_fast, f_ref));
        let b_ref = b_naive(n, &entries, x.as_slice());
        let b_fast = form.b_matrix(&x);
        let scale = b_ref.norm().max(1e-300);
        discrepancy = discrepancy.max((&b_fast - &b_ref).norm() / scale);
    }
    let self_ref: f64 = entries.iter().map(|e| e * e).sum();
    let self_fast = crate::form::inner_product(form, form)?;
    reference.push(self_ref);
    discrepancy = discrepancy.max(rel_err(self_fast, self_ref));
    Ok(OracleReport {
        target: "b_matrix/f_value/inner_product".to_string(),
        reference,
        discrepancy,
        parameters: "3 random unit directions, seed 0xC0FFEE".to_string(),
    })
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0e-300).max(1.0e-12)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations. Slow and
/// simple on purpose; used as the independent spectral reference.
pub fn jacobi_eigenvalues(matrix: &DMatrix<f64>) -> Vec<f64> {
    let n = matrix.nrows();
    assert_eq!(n, matrix.ncols());
    let mut a = matrix.clone();
    let norm = a.norm().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-14 * norm {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = c * aip - s * aiq;
                    a[(i, q)] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[(p, i)];
                    let aqi = a[(q, i)];
                    a[(p, i)] = c * api - s * aqi;
                    a[(q, i)] = s * api + c * aqi;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)]).collect()
}

/// Frobenius distance from the realized matrix to the PSD cone, via the
/// Jacobi spectrum: the norm of the negative eigenvalue part.
pub fn psd_distance(form: &QuarticForm) -> Result<f64> {
    let m = form.to_dense_matrix()?;
    let eigs = jacobi_eigenvalues(&m);
    Ok(eigs
        .iter()
        .map(|e| e.min(0.0).powi(2))
        .sum::<f64>()
        .sqrt())
}
