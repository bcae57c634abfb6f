//! The quartic objective `f(x) = <x,x| eta |x,x> / 4` behind a common trait,
//! so the inner solvers run unchanged on a stored form, an atom list, or the
//! formal difference `rho - rho_k` that the projection loop feeds them.

use nalgebra::{DMatrix, DVector};

use crate::atoms::AtomList;
use crate::form::{flat_index, QuarticForm, Repr};

/// Anything that can play the role of a completely symmetric matrix in the
/// sphere-constrained maximization.
pub trait SymmetricQuartic: Sync {
    /// Local dimension N.
    fn dim(&self) -> usize;

    /// The contraction `(B_x)_{ij} = sum_{kl} eta_{ijkl} x_k x_l`.
    ///
    /// Homogeneous of degree two in `x`; the gradient of `f` is `B_x x` and
    /// the Hessian is `3 B_x`.
    fn b_matrix(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Certified upper bound on the spectral norm of the realized matrix.
    fn spectral_bound(&self) -> f64;

    /// `f(x) = x^T B_x x / 4`, valid for any `x` (degree-4 homogeneous).
    fn f_value(&self, x: &DVector<f64>) -> f64 {
        0.25 * (self.b_matrix(x) * x).dot(x)
    }
}

pub(crate) fn low_rank_b_matrix(
    weights: &[f64],
    vectors: &[DVector<f64>],
    x: &DVector<f64>,
) -> DMatrix<f64> {
    let n = x.len();
    let mut b = DMatrix::zeros(n, n);
    for (w, v) in weights.iter().zip(vectors) {
        let s = v.dot(x);
        b.ger(w * s * s, v, v, 1.0);
    }
    b
}

impl SymmetricQuartic for QuarticForm {
    fn dim(&self) -> usize {
        self.n()
    }

    fn b_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        assert_eq!(x.len(), n, "b_matrix input has wrong dimension");
        match self.repr() {
            Repr::Dense { entries } => {
                let mut b = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = 0.0;
                        for k in 0..n {
                            let base = flat_index(n, i, j, k, 0);
                            let mut row = 0.0;
                            for l in 0..n {
                                row += entries[base + l] * x[l];
                            }
                            acc += row * x[k];
                        }
                        b[(i, j)] = acc;
                    }
                }
                b
            }
            Repr::LowRank { weights, vectors } => low_rank_b_matrix(weights, vectors, x),
            Repr::SumKernel { phi } => {
                // autocorrelation w(s) = sum_{k+l=s} x_k x_l, then
                // psi(u) = sum_s phi(u+s) w(s) and (B_x)_{ij} = psi(i+j)
                let mut w = vec![0.0; 2 * n - 1];
                for k in 0..n {
                    for l in 0..n {
                        w[k + l] += x[k] * x[l];
                    }
                }
                let mut psi = vec![0.0; 2 * n - 1];
                for (u, p) in psi.iter_mut().enumerate() {
                    *p = w.iter().enumerate().map(|(s, ws)| phi[u + s] * ws).sum();
                }
                DMatrix::from_fn(n, n, |i, j| psi[i + j])
            }
        }
    }

    fn spectral_bound(&self) -> f64 {
        QuarticForm::spectral_bound(self)
    }
}

impl SymmetricQuartic for AtomList {
    fn dim(&self) -> usize {
        self.n()
    }

    fn b_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        low_rank_b_matrix(self.weights(), self.vectors(), x)
    }

    fn spectral_bound(&self) -> f64 {
        self.total_weight()
    }
}

/// Formal difference `target - approx`, evaluated structurally on both sides
/// without ever materializing a dense tensor.
pub struct Residual<'a> {
    pub target: &'a QuarticForm,
    pub approx: &'a AtomList,
}

impl SymmetricQuartic for Residual<'_> {
    fn dim(&self) -> usize {
        self.target.n()
    }

    fn b_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.target.b_matrix(x) - self.approx.b_matrix(x)
    }

    fn spectral_bound(&self) -> f64 {
        self.target.spectral_bound() + self.approx.total_weight()
    }
}
