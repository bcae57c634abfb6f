//! Completely symmetric quartic forms in their three storage layouts.
//!
//! A form `eta` is an `N^2 x N^2` real matrix whose 4-index coefficients
//! `eta_{ijkl}` (entry at matrix row `i*N + k`, column `j*N + l`) are
//! invariant under every permutation of `(i, j, k, l)`. Three layouts are
//! supported:
//!
//! * `Dense`: the flat `N^4` coefficient array, index order `(i, j, k, l)`
//!   with `i` slowest,
//! * `LowRank`: a weighted sum of rank-one powers `sum_m p_m x_m^{(x4)}`
//!   with unit vectors `x_m`,
//! * `SumKernel`: coefficients that only depend on the index sum,
//!   `eta_{ijkl} = phi(i + j + k + l)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CsError, Result};
use crate::sampling::sphere_uniform;

/// Largest local dimension for which dense reconstruction is attempted
/// (N^4 entries, so 64 keeps it under ~17M doubles).
pub const DENSE_CAP: usize = 64;

/// Relative tolerance for the complete-symmetry check on dense input.
pub const SYMMETRY_RTOL: f64 = 1e-10;

/// All 24 permutations of four index positions.
pub const INDEX_PERMS: [[usize; 4]; 24] = [
    [0, 1, 2, 3],
    [0, 1, 3, 2],
    [0, 2, 1, 3],
    [0, 2, 3, 1],
    [0, 3, 1, 2],
    [0, 3, 2, 1],
    [1, 0, 2, 3],
    [1, 0, 3, 2],
    [1, 2, 0, 3],
    [1, 2, 3, 0],
    [1, 3, 0, 2],
    [1, 3, 2, 0],
    [2, 0, 1, 3],
    [2, 0, 3, 1],
    [2, 1, 0, 3],
    [2, 1, 3, 0],
    [2, 3, 0, 1],
    [2, 3, 1, 0],
    [3, 0, 1, 2],
    [3, 0, 2, 1],
    [3, 1, 0, 2],
    [3, 1, 2, 0],
    [3, 2, 0, 1],
    [3, 2, 1, 0],
];

#[inline]
pub fn flat_index(n: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * n + j) * n + k) * n + l
}

/// Number of index tuples `(i,j,k,l)` in `[0,n)^4` with a given sum,
/// computed by folding the all-ones sequence four times.
pub fn sum_counts(n: usize) -> Vec<f64> {
    let ones = vec![1.0; n];
    let two = convolve(&ones, &ones);
    convolve(&two, &two)
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Storage layout of a completely symmetric form.
#[derive(Debug, Clone)]
pub enum Repr {
    /// Flat `n^4` coefficient array, `(i, j, k, l)` with `i` slowest.
    Dense { entries: Vec<f64> },
    /// `sum_m weights[m] * sigma(vectors[m])` with unit vectors.
    LowRank {
        weights: Vec<f64>,
        vectors: Vec<DVector<f64>>,
    },
    /// `eta_{ijkl} = phi[i + j + k + l]`, table length `4n - 3`.
    SumKernel { phi: Vec<f64> },
}

/// A validated completely symmetric form together with a certified upper
/// bound on its spectral norm.
#[derive(Debug, Clone)]
pub struct QuarticForm {
    n: usize,
    repr: Repr,
    spectral_bound: f64,
}

impl QuarticForm {
    /// Builds a form from dense coefficients, validating complete symmetry.
    pub fn dense(n: usize, entries: Vec<f64>) -> Result<Self> {
        check_local_dim(n)?;
        let expected = n * n * n * n;
        if entries.len() != expected {
            return Err(CsError::DimensionMismatch(format!(
                "dense payload has {} entries, expected n^4 = {}",
                entries.len(),
                expected
            )));
        }
        let max_abs = entries.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let tolerance = SYMMETRY_RTOL * max_abs;
        let mut max_violation = 0.0f64;
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    for l in k..n {
                        let canon = entries[flat_index(n, i, j, k, l)];
                        let idx = [i, j, k, l];
                        for perm in &INDEX_PERMS {
                            let v = entries
                                [flat_index(n, idx[perm[0]], idx[perm[1]], idx[perm[2]], idx[perm[3]])];
                            max_violation = max_violation.max((v - canon).abs());
                        }
                    }
                }
            }
        }
        if max_violation > tolerance {
            return Err(CsError::NotCompletelySymmetric {
                max_violation,
                tolerance,
            });
        }
        let spectral_bound = entries.iter().map(|e| e * e).sum::<f64>().sqrt();
        Ok(Self {
            n,
            repr: Repr::Dense { entries },
            spectral_bound,
        })
    }

    /// Builds a low-rank form. Vectors are normalized; the attached weight
    /// absorbs the scale as `w * |x|^4`. Zero vectors are rejected.
    pub fn low_rank(n: usize, weights: Vec<f64>, vectors: Vec<DVector<f64>>) -> Result<Self> {
        check_local_dim(n)?;
        if weights.len() != vectors.len() {
            return Err(CsError::DimensionMismatch(format!(
                "{} weights but {} vectors",
                weights.len(),
                vectors.len()
            )));
        }
        let mut ws = Vec::with_capacity(weights.len());
        let mut xs = Vec::with_capacity(vectors.len());
        for (index, (w, v)) in weights.into_iter().zip(vectors).enumerate() {
            if v.len() != n {
                return Err(CsError::DimensionMismatch(format!(
                    "vector {} has length {}, expected {}",
                    index,
                    v.len(),
                    n
                )));
            }
            let norm = v.norm();
            if norm < 1e-12 {
                return Err(CsError::ZeroVectorAtom { index });
            }
            if (norm - 1.0).abs() <= 1e-12 {
                // already unit; leave the payload bit-exact
                ws.push(w);
                xs.push(v);
            } else {
                ws.push(w * norm.powi(4));
                xs.push(v / norm);
            }
        }
        let spectral_bound = ws.iter().map(|w| w.abs()).sum();
        Ok(Self {
            n,
            repr: Repr::LowRank {
                weights: ws,
                vectors: xs,
            },
            spectral_bound,
        })
    }

    /// Builds a sum-kernel form from its `phi` table of length `4n - 3`.
    pub fn sum_kernel(n: usize, phi: Vec<f64>) -> Result<Self> {
        check_local_dim(n)?;
        if phi.len() != 4 * n - 3 {
            return Err(CsError::DimensionMismatch(format!(
                "phi table has length {}, expected 4n-3 = {}",
                phi.len(),
                4 * n - 3
            )));
        }
        let counts = sum_counts(n);
        let spectral_bound = counts
            .iter()
            .zip(&phi)
            .map(|(c, p)| c * p * p)
            .sum::<f64>()
            .sqrt();
        Ok(Self {
            n,
            repr: Repr::SumKernel { phi },
            spectral_bound,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    /// Certified upper bound on the spectral norm of the realized matrix.
    pub fn spectral_bound(&self) -> f64 {
        self.spectral_bound
    }

    /// Trace of the realized `N^2 x N^2` matrix, `sum_{ik} eta_{iikk}`.
    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Dense { entries } => {
                let n = self.n;
                let mut t = 0.0;
                for i in 0..n {
                    for k in 0..n {
                        t += entries[flat_index(n, i, i, k, k)];
                    }
                }
                t
            }
            // atoms are unit vectors, so each contributes exactly its weight
            Repr::LowRank { weights, .. } => weights.iter().sum(),
            Repr::SumKernel { phi } => {
                let n = self.n;
                let mut t = 0.0;
                for i in 0..n {
                    for k in 0..n {
                        t += phi[2 * i + 2 * k];
                    }
                }
                t
            }
        }
    }

    /// Frobenius norm of the realized matrix, via the representation-native
    /// inner product.
    pub fn frob_norm(&self) -> f64 {
        inner_product(self, self)
            .expect("self inner product is always supported")
            .max(0.0)
            .sqrt()
    }

    /// Flat dense coefficients. Exact complete symmetry by construction for
    /// the structured layouts: each sorted index class is evaluated once and
    /// copied to all permutations.
    pub fn to_dense_entries(&self) -> Result<Vec<f64>> {
        let n = self.n;
        if n > DENSE_CAP {
            return Err(CsError::DenseCapExceeded(n));
        }
        match &self.repr {
            Repr::Dense { entries } => Ok(entries.clone()),
            Repr::LowRank { weights, vectors } => {
                let mut out = vec![0.0; n * n * n * n];
                for i in 0..n {
                    for j in i..n {
                        for k in j..n {
                            for l in k..n {
                                let mut v = 0.0;
                                for (w, x) in weights.iter().zip(vectors) {
                                    v += w * x[i] * x[j] * x[k] * x[l];
                                }
                                let idx = [i, j, k, l];
                                for perm in &INDEX_PERMS {
                                    out[flat_index(
                                        n,
                                        idx[perm[0]],
                                        idx[perm[1]],
                                        idx[perm[2]],
                                        idx[perm[3]],
                                    )] = v;
                                }
                            }
                        }
                    }
                }
                Ok(out)
            }
            Repr::SumKernel { phi } => {
                let mut out = vec![0.0; n * n * n * n];
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            for l in 0..n {
                                out[flat_index(n, i, j, k, l)] = phi[i + j + k + l];
                            }
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Realized `N^2 x N^2` symmetric matrix, row `i*N + k`, column `j*N + l`.
    pub fn to_dense_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.n;
        let entries = self.to_dense_entries()?;
        let mut m = DMatrix::zeros(n * n, n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        m[(i * n + k, j * n + l)] = entries[flat_index(n, i, j, k, l)];
                    }
                }
            }
        }
        Ok(m)
    }
}

fn check_local_dim(n: usize) -> Result<()> {
    if n < 2 {
        Err(CsError::DimensionMismatch(format!(
            "local dimension must be at least 2, got {n}"
        )))
    } else {
        Ok(())
    }
}

/// Built-in benchmark generators.
///
/// * id 1: `4n` atoms, weights uniform on `(0,1)` normalized to sum one,
///   sphere-uniform unit vectors (a trace-one state),
/// * id 2: same atoms but signed weights uniform on `(-1,1)`, not normalized,
/// * id 3: sum kernel `phi(s) = s / (4 n^3)`,
/// * id 4: sum kernel `phi(s) = sin(s / (4n)) / n^2`.
///
/// Deterministic given `(id, n, seed)`.
pub fn gen_example(id: u32, n: usize, seed: u64) -> Result<QuarticForm> {
    check_local_dim(n)?;
    match id {
        1 | 2 => {
            let count = 4 * n;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut weights: Vec<f64> = (0..count).map(|_| rng.random::<f64>()).collect();
            if id == 1 {
                let total: f64 = weights.iter().sum();
                for w in &mut weights {
                    *w /= total;
                }
            } else {
                for w in &mut weights {
                    *w = 2.0 * *w - 1.0;
                }
            }
            let vectors: Vec<DVector<f64>> = (0..count).map(|_| sphere_uniform(n, &mut rng)).collect();
            QuarticForm::low_rank(n, weights, vectors)
        }
        3 => {
            let scale = 4.0 * (n as f64).powi(3);
            let phi = (0..4 * n - 3).map(|s| s as f64 / scale).collect();
            QuarticForm::sum_kernel(n, phi)
        }
        4 => {
            let n_f = n as f64;
            let phi = (0..4 * n - 3)
                .map(|s| (s as f64 / (4.0 * n_f)).sin() / (n_f * n_f))
                .collect();
            QuarticForm::sum_kernel(n, phi)
        }
        other => Err(CsError::UnknownExampleId(other)),
    }
}

/// Reduced state `rho_1` with `(rho_1)_{ij} = sum_k eta_{ijkk}`.
///
/// On the dense path the second partial trace `rho_2` is computed as well and
/// checked against `rho_1`; complete symmetry makes them identical.
pub fn reduced_state(form: &QuarticForm) -> DMatrix<f64> {
    let n = form.n;
    match &form.repr {
        Repr::Dense { entries } => {
            let mut r1 = DMatrix::zeros(n, n);
            let mut r2 = DMatrix::zeros(n, n);
            for a in 0..n {
                for b in 0..n {
                    let mut s1 = 0.0;
                    let mut s2 = 0.0;
                    for k in 0..n {
                        s1 += entries[flat_index(n, a, b, k, k)];
                        s2 += entries[flat_index(n, k, k, a, b)];
                    }
                    r1[(a, b)] = s1;
                    r2[(a, b)] = s2;
                }
            }
            let max_abs = entries.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            let tol = 1e-10 * r1.norm() + 1e-12 * n as f64 * max_abs;
            assert!(
                (&r1 - &r2).norm() <= tol,
                "partial traces disagree on a validated form"
            );
            r1
        }
        Repr::LowRank { weights, vectors } => {
            let mut r = DMatrix::zeros(n, n);
            for (w, x) in weights.iter().zip(vectors) {
                r.ger(*w, x, x, 1.0);
            }
            r
        }
        Repr::SumKernel { phi } => {
            DMatrix::from_fn(n, n, |i, j| (0..n).map(|k| phi[i + j + 2 * k]).sum())
        }
    }
}

/// Frobenius inner product `<a, b> = tr(a b)` across any pair of layouts.
///
/// Fast paths: low-rank against anything via quartic-form evaluation,
/// sum-kernel pairs via the sum-count convolution, dense pairs entrywise.
/// The remaining mixed pair densifies the sum-kernel side.
pub fn inner_product(a: &QuarticForm, b: &QuarticForm) -> Result<f64> {
    if a.n != b.n {
        return Err(CsError::DimensionMismatch(format!(
            "n = {} vs n = {}",
            a.n, b.n
        )));
    }
    let n = a.n;
    match (&a.repr, &b.repr) {
        (
            Repr::LowRank { weights: wa, vectors: xa },
            Repr::LowRank { weights: wb, vectors: xb },
        ) => {
            let mut acc = 0.0;
            for (wi, xi) in wa.iter().zip(xa) {
                for (wj, xj) in wb.iter().zip(xb) {
                    acc += wi * wj * xi.dot(xj).powi(4);
                }
            }
            Ok(acc)
        }
        (_, Repr::LowRank { weights, vectors }) => {
            Ok(weights
                .iter()
                .zip(vectors)
                .map(|(w, x)| w * 4.0 * crate::quartic::SymmetricQuartic::f_value(a, x))
                .sum())
        }
        (Repr::LowRank { weights, vectors }, _) => {
            Ok(weights
                .iter()
                .zip(vectors)
                .map(|(w, x)| w * 4.0 * crate::quartic::SymmetricQuartic::f_value(b, x))
                .sum())
        }
        (Repr::SumKernel { phi: pa }, Repr::SumKernel { phi: pb }) => {
            let counts = sum_counts(n);
            Ok(counts
                .iter()
                .zip(pa.iter().zip(pb))
                .map(|(c, (x, y))| c * x * y)
                .sum())
        }
        (Repr::Dense { entries: ea }, Repr::Dense { entries: eb }) => {
            Ok(ea.iter().zip(eb).map(|(x, y)| x * y).sum())
        }
        (Repr::Dense { entries }, Repr::SumKernel { .. }) => {
            if n > DENSE_CAP {
                return Err(CsError::RepresentationPairUnsupported(n));
            }
            let other = b.to_dense_entries()?;
            Ok(entries.iter().zip(&other).map(|(x, y)| x * y).sum())
        }
        (Repr::SumKernel { .. }, Repr::Dense { entries }) => {
            if n > DENSE_CAP {
                return Err(CsError::RepresentationPairUnsupported(n));
            }
            let other = a.to_dense_entries()?;
            Ok(entries.iter().zip(&other).map(|(x, y)| x * y).sum())
        }
    }
}
