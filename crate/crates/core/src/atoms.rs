//! Weighted lists of symmetric product atoms `sigma(x) = xx^T (x) xx^T`.

use nalgebra::DVector;

use crate::error::{CsError, Result};
use crate::form::QuarticForm;

/// Overlap above which two atoms are treated as the same direction
/// (`sigma(x) = sigma(-x)`, so the absolute overlap is what counts).
pub const MERGE_OVERLAP: f64 = 1.0 - 1e-10;

/// Feasible set the projection operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FeasibleSet {
    /// Nonnegative weights, unconstrained sum (conic hull of atoms).
    #[serde(rename = "cone")]
    Cone,
    /// Nonnegative weights with sum at most one (convex hull plus zero).
    #[serde(rename = "convex")]
    Convex,
}

/// Nonnegative combination `sum_i p_i sigma(x_i)` with unit atoms, the
/// S-separable iterate and final approximation of the projection loop.
#[derive(Debug, Clone)]
pub struct AtomList {
    n: usize,
    mode: FeasibleSet,
    weights: Vec<f64>,
    vectors: Vec<DVector<f64>>,
}

impl AtomList {
    pub fn new(n: usize, mode: FeasibleSet) -> Self {
        Self {
            n,
            mode,
            weights: Vec::new(),
            vectors: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> FeasibleSet {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Inserts an atom, merging into an existing one when the absolute
    /// overlap exceeds [`MERGE_OVERLAP`]. Returns the index the weight
    /// landed on. The stored direction is sign-canonicalized so its
    /// largest-magnitude component is positive.
    pub fn insert(&mut self, weight: f64, x: DVector<f64>) -> Result<usize> {
        if x.len() != self.n {
            return Err(CsError::DimensionMismatch(format!(
                "atom has length {}, expected {}",
                x.len(),
                self.n
            )));
        }
        if weight < 0.0 {
            return Err(CsError::DimensionMismatch(format!(
                "atom weight must be nonnegative, got {weight}"
            )));
        }
        let norm = x.norm();
        if norm < 1e-12 {
            return Err(CsError::ZeroVectorAtom { index: self.len() });
        }
        let x = canonical_sign(x / norm);
        for (i, existing) in self.vectors.iter().enumerate() {
            if existing.dot(&x).abs() > MERGE_OVERLAP {
                self.weights[i] += weight;
                return Ok(i);
            }
        }
        self.weights.push(weight);
        self.vectors.push(x);
        Ok(self.len() - 1)
    }

    /// Scales every weight (the `(1 - alpha)` part of a Frank-Wolfe step).
    pub fn scale_weights(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
    }

    /// Replaces all weights; lengths must match.
    pub fn set_weights(&mut self, weights: &[f64]) {
        assert_eq!(weights.len(), self.weights.len());
        self.weights.copy_from_slice(weights);
    }

    /// Moves atom `i` to a new unit direction (local refinement step).
    pub(crate) fn move_atom(&mut self, i: usize, x: DVector<f64>) {
        let norm = x.norm();
        self.vectors[i] = canonical_sign(x / norm);
    }

    /// Rebuilds from aligned arrays without the merge pass; used where a
    /// caller keeps side tables indexed by atom position.
    pub(crate) fn from_parts(
        n: usize,
        mode: FeasibleSet,
        weights: Vec<f64>,
        vectors: Vec<DVector<f64>>,
    ) -> Self {
        debug_assert_eq!(weights.len(), vectors.len());
        Self {
            n,
            mode,
            weights,
            vectors,
        }
    }

    /// Drops atoms with weight below `threshold`, returning how many.
    pub fn prune(&mut self, threshold: f64) -> usize {
        let mut removed = 0;
        let mut i = 0;
        while i < self.weights.len() {
            if self.weights[i] < threshold {
                self.weights.swap_remove(i);
                self.vectors.swap_remove(i);
                removed += 1;
            } else {
                i += 1;
            }
        }
        removed
    }

    /// Gram matrix `G_{ij} = (x_i . x_j)^4`.
    pub fn gram(&self) -> nalgebra::DMatrix<f64> {
        let k = self.len();
        nalgebra::DMatrix::from_fn(k, k, |i, j| self.vectors[i].dot(&self.vectors[j]).powi(4))
    }

    /// Frobenius norm of the realized matrix via the Gram matrix.
    pub fn frob_norm(&self) -> f64 {
        let mut acc = 0.0;
        for (i, (wi, xi)) in self.weights.iter().zip(&self.vectors).enumerate() {
            for (wj, xj) in self.weights[i + 1..].iter().zip(&self.vectors[i + 1..]) {
                acc += 2.0 * wi * wj * xi.dot(xj).powi(4);
            }
            acc += wi * wi;
        }
        acc.max(0.0).sqrt()
    }

    /// Inner product of the realized matrices of two atom lists.
    pub fn dot(&self, other: &AtomList) -> f64 {
        let mut acc = 0.0;
        for (wi, xi) in self.weights.iter().zip(&self.vectors) {
            for (wj, xj) in other.weights.iter().zip(&other.vectors) {
                acc += wi * wj * xi.dot(xj).powi(4);
            }
        }
        acc
    }

    /// The realized matrix as a low-rank [`QuarticForm`].
    pub fn to_form(&self) -> Result<QuarticForm> {
        QuarticForm::low_rank(self.n, self.weights.clone(), self.vectors.clone())
    }
}

/// Flips the sign so the largest-magnitude component is positive
/// (`sigma(x) = sigma(-x)`, so this is purely a reporting convention).
pub fn canonical_sign(x: DVector<f64>) -> DVector<f64> {
    let mut best = 0;
    for i in 1..x.len() {
        if x[i].abs() > x[best].abs() {
            best = i;
        }
    }
    if x[best] < 0.0 {
        -x
    } else {
        x
    }
}
