//! Exact maximization of `f` over the unit circle spanned by two directions.
//!
//! With unit `x`, `y` and `b = x . y`, the objective along `(x + t y)` is
//! `g(t) = P(t) / (1 + 2 b t + t^2)^2` with quartic `P`. Stationary points
//! solve `P'(t) (1 + 2 b t + t^2) - 4 P(t) (b + t) = 0`; the degree-5 terms
//! cancel, leaving a quartic solved through its companion matrix. The
//! numerator is built by polynomial arithmetic rather than from a printed
//! expansion.

use nalgebra::DVector;

use super::roots::{poly_mul, real_roots};
use crate::quartic::SymmetricQuartic;

/// Overlap beyond which the two directions are treated as parallel and the
/// better endpoint is returned unchanged.
pub const PARALLEL_OVERLAP: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Picked {
    First,
    Second,
    Mixed,
}

/// Global maximizer of `f` over unit vectors in `span{x, y}`.
///
/// The winner is selected among `t = 0` (returns `x`), `t = inf` (returns
/// `y`), and the real stationary points; its value is never below `f` at
/// either input. Among numerically tied candidates the one closest to
/// `hint` wins, which keeps the solver in the basin it came from.
pub(crate) fn two_point_search<F: SymmetricQuartic + ?Sized>(
    form: &F,
    x: &DVector<f64>,
    y: &DVector<f64>,
    hint: Option<&DVector<f64>>,
) -> (DVector<f64>, f64, Picked) {
    let b = x.dot(y);
    let bx = form.b_matrix(x);
    let p0 = 0.25 * (&bx * x).dot(x);
    if b.abs() > PARALLEL_OVERLAP {
        let by = form.b_matrix(y);
        let p4 = 0.25 * (&by * y).dot(y);
        return if p0 >= p4 {
            (x.clone(), p0, Picked::First)
        } else {
            (y.clone(), p4, Picked::Second)
        };
    }
    let by = form.b_matrix(y);
    let p1 = (&bx * y).dot(x);
    let p2 = 1.5 * (&by * x).dot(x);
    let p3 = (&by * y).dot(x);
    let p4 = 0.25 * (&by * y).dot(y);

    let p = [p0, p1, p2, p3, p4];
    let dp = [p1, 2.0 * p2, 3.0 * p3, 4.0 * p4];
    let denom = [1.0, 2.0 * b, 1.0];
    let lhs = poly_mul(&dp, &denom);
    let rhs = poly_mul(&[4.0 * p0, 4.0 * p1, 4.0 * p2, 4.0 * p3, 4.0 * p4], &[b, 1.0]);
    let mut numerator = [0.0f64; 5];
    for (i, slot) in numerator.iter_mut().enumerate() {
        *slot = lhs[i] - rhs[i];
    }
    // the t^5 terms cancel algebraically; lhs[5] - rhs[5] = 4 p4 - 4 p4 = 0

    let g = |t: f64| {
        let pt = (((p[4] * t + p[3]) * t + p[2]) * t + p[1]) * t + p[0];
        let d = 1.0 + 2.0 * b * t + t * t;
        pt / (d * d)
    };

    // candidate list: endpoints first, then stationary points
    let mut candidates: Vec<(Option<f64>, f64)> = vec![(Some(0.0), p0), (None, p4)];
    for t in real_roots(&numerator) {
        if t.is_finite() {
            candidates.push((Some(t), g(t)));
        }
    }

    let g_best = candidates
        .iter()
        .map(|c| c.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = p0.max(p4);
    let make_vec = |t: Option<f64>| -> DVector<f64> {
        match t {
            Some(0.0) => x.clone(),
            Some(t) => {
                let v = x + y * t;
                let norm = v.norm();
                v / norm
            }
            None => y.clone(),
        }
    };

    let tie_tol = 1e-12 * (1.0 + g_best.abs());
    let winner = match hint {
        Some(h) => {
            let mut best: Option<(usize, f64)> = None;
            for (i, cand) in candidates.iter().enumerate() {
                if cand.1 >= g_best - tie_tol && cand.1 >= floor {
                    let closeness = make_vec(cand.0).dot(h).abs();
                    if best.is_none_or(|(_, c)| closeness > c) {
                        best = Some((i, closeness));
                    }
                }
            }
            best.map(|(i, _)| i).unwrap_or_else(|| argmax(&candidates))
        }
        None => argmax(&candidates),
    };

    let (t, value) = candidates[winner];
    let picked = match t {
        Some(0.0) => Picked::First,
        None => Picked::Second,
        _ => Picked::Mixed,
    };
    (make_vec(t), value, picked)
}

fn argmax(candidates: &[(Option<f64>, f64)]) -> usize {
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        if c.1 > candidates[best].1 {
            best = i;
        }
    }
    best
}

/// Public variant of the two-direction search: returns the maximizer and its
/// objective value. Near-parallel inputs short-circuit to the better one.
pub fn line_search_2d<F: SymmetricQuartic + ?Sized>(
    form: &F,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> (DVector<f64>, f64) {
    let (v, f, _) = two_point_search(form, x, y, None);
    (v, f)
}
