//! Frank-Wolfe projection onto the S-separable set.
//!
//! Each outer iteration maximizes `f` for the residual `rho - rho_k`, tests
//! the stopping gap `4 f(x*) - <eta, rho_k>`, takes the exact line-search
//! step toward the new atom, and (by default) re-fits all weights by
//! nonnegative least squares followed by local descent on the atom
//! positions. The residual is always handled as a structured difference;
//! nothing is densified.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::atoms::{AtomList, FeasibleSet};
use crate::error::{CsError, Result};
use crate::form::{inner_product, QuarticForm, DENSE_CAP};
use crate::inner::{inner_solve, multi_start, InnerOptions};
use crate::nnls;
use crate::quartic::{Residual, SymmetricQuartic};

/// Weights below this are dropped after each refinement.
pub const PRUNE_THRESHOLD: f64 = 1e-12;

/// Relative factor for the stopping gap: stop once
/// `gap <= GAP_RTOL * max(1, |rho|_F)`.
pub const GAP_RTOL: f64 = 1e-10;

/// Distances below `1e-6 * max(1, |rho|_F)` count as numerically separable.
pub const SEPARABLE_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProjectOptions {
    /// Outer stopping tolerance on `|rho_k - rho_{k-1}|_F`.
    pub outer_tol: f64,
    pub max_outer: usize,
    pub inner: InnerOptions,
    /// Multi-start count per outer iteration.
    pub starts: usize,
    pub seed: u64,
    pub mode: FeasibleSet,
    /// Fully corrective refinement (weight re-fit plus atom descent). Off
    /// reproduces the plain conditional-gradient iteration.
    pub refine: bool,
    /// Relative stopping-gap factor.
    pub gap_rtol: f64,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        Self {
            outer_tol: 1e-12,
            max_outer: 1000,
            inner: InnerOptions::default(),
            starts: 5,
            seed: 0,
            mode: FeasibleSet::Cone,
            refine: true,
            gap_rtol: GAP_RTOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "S_SEPARABLE_NUMERICAL")]
    SSeparableNumerical,
    #[serde(rename = "NOT_S_SEPARABLE_CERTIFIED")]
    NotSSeparableCertified,
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    #[serde(rename = "gap_converged")]
    GapConverged,
    #[serde(rename = "step_converged")]
    StepConverged,
    #[serde(rename = "max_outer_reached")]
    MaxOuterReached,
    #[serde(rename = "inner_solver_failed")]
    InnerSolverFailed,
}

#[derive(Debug, Clone, Serialize)]
pub struct OuterTraceRow {
    pub iter: usize,
    pub distance: f64,
    pub gap: f64,
    pub alpha: f64,
    pub atom_count: usize,
    pub inner_iterations: usize,
    /// True when the exact step size fell outside [0, 1] and was clamped.
    pub alpha_clamped: bool,
}

#[derive(Debug)]
pub struct OuterResult {
    pub approximation: AtomList,
    pub distance: f64,
    pub gap: f64,
    pub iterations: usize,
    pub trace: Vec<OuterTraceRow>,
    pub verdict: Verdict,
    pub stop_reason: StopReason,
}

/// Atom pool with cached Gram matrix and target correlations
/// `c_i = <rho, sigma(x_i)>`, so distances are O(k^2) throughout.
struct Pool<'a> {
    rho: &'a QuarticForm,
    rho_sq: f64,
    atoms: AtomList,
    gram: DMatrix<f64>,
    correlations: DVector<f64>,
}

impl<'a> Pool<'a> {
    fn new(rho: &'a QuarticForm, rho_sq: f64, mode: FeasibleSet) -> Self {
        Self {
            rho,
            rho_sq,
            atoms: AtomList::new(rho.n(), mode),
            gram: DMatrix::zeros(0, 0),
            correlations: DVector::zeros(0),
        }
    }

    fn len(&self) -> usize {
        self.atoms.len()
    }

    fn weights(&self) -> DVector<f64> {
        DVector::from_column_slice(self.atoms.weights())
    }

    fn correlation_of(&self, x: &DVector<f64>) -> f64 {
        4.0 * self.rho.f_value(x)
    }

    /// `<rho_k, sigma(x)> = sum_j w_j (x_j . x)^4`.
    fn overlap_with(&self, x: &DVector<f64>) -> f64 {
        self.atoms
            .weights()
            .iter()
            .zip(self.atoms.vectors())
            .map(|(w, v)| w * v.dot(x).powi(4))
            .sum()
    }

    fn insert(&mut self, weight: f64, x: DVector<f64>) -> Result<()> {
        let before = self.len();
        self.atoms.insert(weight, x)?;
        if self.atoms.len() > before {
            let k = self.atoms.len();
            let mut gram = DMatrix::zeros(k, k);
            gram.view_mut((0, 0), (k - 1, k - 1)).copy_from(&self.gram);
            let new = &self.atoms.vectors()[k - 1];
            for i in 0..k {
                let v = self.atoms.vectors()[i].dot(new).powi(4);
                gram[(i, k - 1)] = v;
                gram[(k - 1, i)] = v;
            }
            self.gram = gram;
            self.correlations = self.correlations.clone().insert_row(k - 1, 0.0);
            self.correlations[k - 1] = self.correlation_of(new);
        }
        Ok(())
    }

    fn move_atom(&mut self, i: usize, x: DVector<f64>) {
        self.atoms.move_atom(i, x);
        let moved = self.atoms.vectors()[i].clone();
        for j in 0..self.len() {
            let v = self.atoms.vectors()[j].dot(&moved).powi(4);
            self.gram[(i, j)] = v;
            self.gram[(j, i)] = v;
        }
        self.correlations[i] = self.correlation_of(&moved);
    }

    /// Moves atom `i` only if the distance does not increase, deciding from
    /// the O(k) change in the quadratic form instead of a full recompute:
    /// `d(dist^2) = -2 w_i dc_i + 2 w_i sum_{j != i} w_j dG_ij`
    /// (the diagonal entry stays 1 for unit atoms).
    fn try_move_atom(&mut self, i: usize, x: DVector<f64>) -> bool {
        let norm = x.norm();
        if !(norm.is_finite() && norm > 1e-12) {
            return false;
        }
        let candidate = x / norm;
        let wi = self.atoms.weights()[i];
        let delta_c = self.correlation_of(&candidate) - self.correlations[i];
        let mut delta_cross = 0.0;
        for j in 0..self.len() {
            if j == i {
                continue;
            }
            let new_g = self.atoms.vectors()[j].dot(&candidate).powi(4);
            delta_cross += self.atoms.weights()[j] * (new_g - self.gram[(i, j)]);
        }
        let delta = -2.0 * wi * delta_c + 2.0 * wi * delta_cross;
        if delta <= 0.0 {
            self.move_atom(i, candidate);
            true
        } else {
            false
        }
    }

    fn dist_sq_with(&self, weights: &DVector<f64>) -> f64 {
        self.rho_sq - 2.0 * self.correlations.dot(weights) + (&self.gram * weights).dot(weights)
    }

    fn dist_sq(&self) -> f64 {
        self.dist_sq_with(&self.weights())
    }

    /// `<rho - rho_k, rho_k>`.
    fn residual_dot_iterate(&self) -> f64 {
        let w = self.weights();
        self.correlations.dot(&w) - (&self.gram * &w).dot(&w)
    }

    /// NNLS weight re-fit, accepted only if the distance does not increase
    /// (and, in convex mode, the weights stay inside the hull).
    fn refit_weights(&mut self) {
        if self.len() == 0 {
            return;
        }
        let refit = nnls::solve_warm(&self.gram, &self.correlations, Some(self.atoms.weights()));
        if self.atoms.mode() == FeasibleSet::Convex && refit.sum() > 1.0 + 1e-12 {
            return;
        }
        if self.dist_sq_with(&refit) <= self.dist_sq() {
            self.atoms.set_weights(refit.as_slice());
        }
    }

    fn prune(&mut self) {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.atoms.weights()[i] >= PRUNE_THRESHOLD)
            .collect();
        if keep.len() == self.len() {
            return;
        }
        let weights: Vec<f64> = keep.iter().map(|&i| self.atoms.weights()[i]).collect();
        let vectors: Vec<DVector<f64>> =
            keep.iter().map(|&i| self.atoms.vectors()[i].clone()).collect();
        // exact rebuild: sliding may have brought two surviving atoms within
        // the merge threshold, and an insert-based rebuild would collapse
        // them and desynchronize the cached Gram matrix
        self.gram = DMatrix::from_fn(keep.len(), keep.len(), |a, b| self.gram[(keep[a], keep[b])]);
        self.correlations = DVector::from_fn(keep.len(), |a, _| self.correlations[keep[a]]);
        self.atoms = AtomList::from_parts(self.atoms.n(), self.atoms.mode(), weights, vectors);
    }
}

/// Exact line-search step size `alpha = <rho - rho_k, sigma - rho_k> /
/// |sigma - rho_k|_F^2`, clamped to [0, 1]. The squared denominator is the
/// minimizer of the quadratic objective along the step direction.
pub fn step_size(rho: &QuarticForm, rho_k: &AtomList, sigma_atom: &DVector<f64>) -> Result<f64> {
    if sigma_atom.len() != rho.n() || rho_k.n() != rho.n() {
        return Err(CsError::DimensionMismatch(
            "step_size arguments disagree on n".to_string(),
        ));
    }
    let x = sigma_atom / sigma_atom.norm();
    let rho_dot_sigma = 4.0 * rho.f_value(&x);
    let rho_dot_rhok: f64 = rho_k
        .weights()
        .iter()
        .zip(rho_k.vectors())
        .map(|(w, v)| w * 4.0 * rho.f_value(v))
        .sum();
    let rhok_dot_sigma: f64 = rho_k
        .weights()
        .iter()
        .zip(rho_k.vectors())
        .map(|(w, v)| w * v.dot(&x).powi(4))
        .sum();
    let rhok_sq = rho_k.frob_norm().powi(2);
    let denom = 1.0 - 2.0 * rhok_dot_sigma + rhok_sq;
    if denom < 1e-28 {
        return Err(CsError::DegenerateDirection);
    }
    let numer = rho_dot_sigma - rho_dot_rhok - rhok_dot_sigma + rhok_sq;
    Ok((numer / denom).clamp(0.0, 1.0))
}

/// Optimal nonnegative weights for a fixed atom set:
/// `min_{w >= 0} |rho - sum_i w_i sigma(x_i)|_F^2`.
pub fn refine_weights(rho: &QuarticForm, atom_vectors: &[DVector<f64>]) -> Result<Vec<f64>> {
    let n = rho.n();
    let mut unit = Vec::with_capacity(atom_vectors.len());
    for v in atom_vectors {
        if v.len() != n {
            return Err(CsError::DimensionMismatch(format!(
                "atom has length {}, expected {}",
                v.len(),
                n
            )));
        }
        let norm = v.norm();
        if norm < 1e-12 {
            return Err(CsError::ZeroVectorAtom { index: unit.len() });
        }
        unit.push(v / norm);
    }
    let k = unit.len();
    let gram = DMatrix::from_fn(k, k, |i, j| unit[i].dot(&unit[j]).powi(4));
    let c = DVector::from_fn(k, |i, _| 4.0 * rho.f_value(&unit[i]));
    Ok(nnls::solve(&gram, &c).as_slice().to_vec())
}

/// Frobenius distance from the realized matrix to the PSD cone (the energy
/// of the negative eigenvalues). Dense path, so only below the cap.
pub fn psd_cone_distance(rho: &QuarticForm) -> Option<f64> {
    if rho.n() > DENSE_CAP {
        return None;
    }
    let m = rho.to_dense_matrix().ok()?;
    let eigen = m.symmetric_eigen();
    Some(
        eigen
            .eigenvalues
            .iter()
            .map(|e| e.min(0.0).powi(2))
            .sum::<f64>()
            .sqrt(),
    )
}

/// Final classification of a projection run. The PSD-cone distance is a
/// certified lower bound on the S-separable distance, which makes the
/// negative verdict sound; everything between the two thresholds stays
/// inconclusive.
pub fn verdict(result: &OuterResult, rho: &QuarticForm) -> Verdict {
    decide_verdict(result.distance, rho)
}

fn decide_verdict(distance: f64, rho: &QuarticForm) -> Verdict {
    let scale = rho.frob_norm().max(1.0);
    if distance <= SEPARABLE_RTOL * scale {
        return Verdict::SSeparableNumerical;
    }
    if let Some(lower) = psd_cone_distance(rho) {
        if lower > 1e-8 && distance >= lower - 1e-10 {
            return Verdict::NotSSeparableCertified;
        }
    }
    Verdict::Inconclusive
}

const OUTER_SEED_STRIDE: u64 = 0x9E3779B97F4A7C15;

/// Projects `rho` onto the cone (or hull) of symmetric product atoms.
pub fn project(rho: &QuarticForm, opts: &ProjectOptions) -> Result<OuterResult> {
    let rho_sq = inner_product(rho, rho)?;
    let scale = rho_sq.max(0.0).sqrt().max(1.0);
    let gap_tol = opts.gap_rtol * scale;
    let mut pool = Pool::new(rho, rho_sq, opts.mode);
    let mut trace: Vec<OuterTraceRow> = Vec::new();
    let mut stop_reason = StopReason::MaxOuterReached;
    let mut last_gap = f64::INFINITY;
    let mut iterations = 0;

    for k in 1..=opts.max_outer {
        iterations = k;
        let inner_result = {
            let residual = Residual {
                target: rho,
                approx: &pool.atoms,
            };
            let seed_k = opts
                .seed
                .wrapping_add((k as u64).wrapping_mul(OUTER_SEED_STRIDE));
            multi_start(&residual, opts.starts, seed_k, &opts.inner)
        };
        if !inner_result.f_star.is_finite() {
            stop_reason = StopReason::InnerSolverFailed;
            trace.push(OuterTraceRow {
                iter: k,
                distance: pool.dist_sq().max(0.0).sqrt(),
                gap: f64::NAN,
                alpha: 0.0,
                atom_count: pool.len(),
                inner_iterations: inner_result.iterations,
                alpha_clamped: false,
            });
            break;
        }
        let gap = 4.0 * inner_result.f_star - pool.residual_dot_iterate();
        last_gap = gap;
        if gap <= gap_tol {
            stop_reason = StopReason::GapConverged;
            trace.push(OuterTraceRow {
                iter: k,
                distance: pool.dist_sq().max(0.0).sqrt(),
                gap,
                alpha: 0.0,
                atom_count: pool.len(),
                inner_iterations: inner_result.iterations,
                alpha_clamped: false,
            });
            break;
        }

        let snapshot_weights = pool.atoms.weights().to_vec();
        let snapshot_vectors = pool.atoms.vectors().to_vec();

        // |sigma(x*) - rho_k|_F^2
        let rhok_sq = {
            let w = pool.weights();
            (&pool.gram * &w).dot(&w)
        };
        let denom = 1.0 - 2.0 * pool.overlap_with(&inner_result.x_star) + rhok_sq;
        debug_assert!(denom > -1e-12);
        let raw_alpha = if denom < 1e-28 { 1.0 } else { gap / denom };
        let alpha = raw_alpha.clamp(0.0, 1.0);
        let alpha_clamped = raw_alpha != alpha;

        pool.atoms.scale_weights(1.0 - alpha);
        pool.insert(alpha, inner_result.x_star.clone())?;

        if opts.refine {
            pool.refit_weights();
            refine_atoms(&mut pool, opts);
        }
        pool.prune();

        let step = iterate_change(
            &snapshot_weights,
            &snapshot_vectors,
            pool.atoms.weights(),
            pool.atoms.vectors(),
        );
        let distance = pool.dist_sq().max(0.0).sqrt();
        trace.push(OuterTraceRow {
            iter: k,
            distance,
            gap,
            alpha,
            atom_count: pool.len(),
            inner_iterations: inner_result.iterations,
            alpha_clamped,
        });
        if step <= opts.outer_tol {
            stop_reason = StopReason::StepConverged;
            break;
        }
    }

    let mut distance = pool.dist_sq().max(0.0).sqrt();
    // the Gram bookkeeping computes dist^2 as a difference of O(scale^2)
    // terms and floors out near sqrt(eps) * scale; for small claimed
    // distances switch to the entrywise dense difference, which has no
    // cancellation amplification
    if distance <= 1e-6 * scale {
        if let Some(precise) = dense_difference_norm(rho, &pool.atoms) {
            distance = precise;
        }
    }
    let verdict = if stop_reason == StopReason::InnerSolverFailed {
        Verdict::Inconclusive
    } else {
        decide_verdict(distance, rho)
    };
    Ok(OuterResult {
        approximation: pool.atoms,
        distance,
        gap: last_gap,
        iterations,
        trace,
        verdict,
        stop_reason,
    })
}

/// `|rho - rho_k|_F` from the entrywise dense difference; only attempted on
/// dimensions where densifying is cheap.
fn dense_difference_norm(rho: &QuarticForm, atoms: &AtomList) -> Option<f64> {
    let n = rho.n();
    if n > 16 {
        return None;
    }
    let mut diff = rho.to_dense_entries().ok()?;
    for (w, x) in atoms.weights().iter().zip(atoms.vectors()) {
        let mut idx = 0;
        for i in 0..n {
            for j in 0..n {
                let xij = w * x[i] * x[j];
                for k in 0..n {
                    let xijk = xij * x[k];
                    for l in 0..n {
                        diff[idx] -= xijk * x[l];
                        idx += 1;
                    }
                }
            }
        }
    }
    Some(diff.iter().map(|d| d * d).sum::<f64>().sqrt())
}

/// `|rho_k - rho_{k-1}|_F` across a possibly different atom set.
fn iterate_change(
    old_weights: &[f64],
    old_vectors: &[DVector<f64>],
    new_weights: &[f64],
    new_vectors: &[DVector<f64>],
) -> f64 {
    let pair = |wa: &[f64], xa: &[DVector<f64>], wb: &[f64], xb: &[DVector<f64>]| -> f64 {
        let mut acc = 0.0;
        for (wi, xi) in wa.iter().zip(xa) {
            for (wj, xj) in wb.iter().zip(xb) {
                acc += wi * wj * xi.dot(xj).powi(4);
            }
        }
        acc
    };
    let aa = pair(old_weights, old_vectors, old_weights, old_vectors);
    let bb = pair(new_weights, new_vectors, new_weights, new_vectors);
    let ab = pair(old_weights, old_vectors, new_weights, new_vectors);
    (aa + bb - 2.0 * ab).max(0.0).sqrt()
}

/// Local descent on atom positions: each atom is re-maximized against the
/// residual with its own contribution removed (warm-started inner solve),
/// accepted only when the distance does not increase. Nearby atoms are then
/// merged when the combined move still does not increase the distance.
fn refine_atoms(pool: &mut Pool, opts: &ProjectOptions) {
    let slide_opts = InnerOptions {
        tol: opts.inner.tol,
        max_iterations: 12,
        init: opts.inner.init,
    };
    for _pass in 0..2 {
        let mut moved = false;
        for i in 0..pool.len() {
            if pool.atoms.weights()[i] < 1e-10 {
                continue;
            }
            let current = pool.atoms.vectors()[i].clone();
            let refined = {
                let mut weights = pool.atoms.weights().to_vec();
                let saved = weights[i];
                weights[i] = 0.0;
                pool.atoms.set_weights(&weights);
                let residual = Residual {
                    target: pool.rho,
                    approx: &pool.atoms,
                };
                let result = inner_solve(&residual, &current, &slide_opts);
                weights[i] = saved;
                pool.atoms.set_weights(&weights);
                result.x_star
            };
            if !refined.iter().all(|v| v.is_finite()) {
                continue;
            }
            if pool.try_move_atom(i, refined) && (&pool.atoms.vectors()[i] - &current).norm() > 1e-10
            {
                moved = true;
            }
        }
        pool.refit_weights();
        pool.prune();
        consolidate(pool, opts);
        if !moved {
            break;
        }
    }
}

/// Merges pairs of atoms whose overlap exceeds `1 - 1e-4` (including pairs
/// that sliding pushed inside the insert-time merge threshold),
/// re-optimizing the merged direction; the merge is kept only when the
/// distance after the weight re-fit is no worse.
fn consolidate(pool: &mut Pool, opts: &ProjectOptions) {
    let slide_opts = InnerOptions {
        tol: opts.inner.tol,
        max_iterations: 12,
        init: opts.inner.init,
    };
    let mut i = 0;
    while i < pool.len() {
        let mut j = i + 1;
        while j < pool.len() {
            let overlap = pool.atoms.vectors()[i].dot(&pool.atoms.vectors()[j]).abs();
            if overlap > 1.0 - 1e-4 {
                let before = pool.dist_sq();
                let saved_weights = pool.atoms.weights().to_vec();
                let saved_vectors = pool.atoms.vectors().to_vec();
                let wi = saved_weights[i];
                let wj = saved_weights[j];
                let sign = if pool.atoms.vectors()[i].dot(&pool.atoms.vectors()[j]) >= 0.0 {
                    1.0
                } else {
                    -1.0
                };
                let merged = &pool.atoms.vectors()[i] * wi + &pool.atoms.vectors()[j] * (sign * wj);
                if merged.norm() < 1e-14 {
                    j += 1;
                    continue;
                }
                let mut weights = saved_weights.clone();
                weights[i] = wi + wj;
                weights[j] = 0.0;
                pool.atoms.set_weights(&weights);
                pool.move_atom(i, merged);
                // re-center the merged atom against its own residual
                let refined = {
                    let mut w2 = weights.clone();
                    w2[i] = 0.0;
                    pool.atoms.set_weights(&w2);
                    let residual = Residual {
                        target: pool.rho,
                        approx: &pool.atoms,
                    };
                    let r = inner_solve(&residual, &pool.atoms.vectors()[i].clone(), &slide_opts);
                    pool.atoms.set_weights(&weights);
                    r.x_star
                };
                if refined.iter().all(|v| v.is_finite()) {
                    pool.move_atom(i, refined);
                }
                pool.refit_weights();
                if pool.dist_sq() <= before {
                    pool.prune();
                    j = i + 1;
                } else {
                    // roll back the merge
                    for (idx, v) in saved_vectors.iter().enumerate() {
                        pool.move_atom(idx, v.clone());
                    }
                    pool.atoms.set_weights(&saved_weights);
                    j += 1;
                }
            } else {
                j += 1;
            }
        }
        i += 1;
    }
}
