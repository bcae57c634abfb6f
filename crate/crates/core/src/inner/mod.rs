//! Maximization of `f(x) = <x,x| eta |x,x> / 4` over the unit sphere:
//! analytic derivatives, a shifted power method, an SQP (projected Newton)
//! step on the KKT system, and their combination through an exact
//! two-direction line search, plus seeded multi-start.

mod line_search;
mod roots;

pub use line_search::line_search_2d;
pub use roots::real_roots;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CsError, Result};
use crate::quartic::SymmetricQuartic;
use crate::sampling::{component_uniform, sphere_uniform};

use line_search::{two_point_search, Picked};

/// Relative KKT-residual stop: terminate once
/// `|grad f - lambda x| <= KKT_STOP_RTOL * (1 + |lambda|)`.
/// Guards against step-size stagnation far from the step tolerance.
pub const KKT_STOP_RTOL: f64 = 1e-10;

/// Margin added to `3 * spectral_bound` so the shifted Hessian stays
/// positive definite under rounding.
pub const SHIFT_MARGIN: f64 = 1e-8;

/// Condition-number proxy above which the KKT solve is treated as singular.
pub const KKT_COND_LIMIT: f64 = 1e12;

/// How the starting vector is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InitKind {
    /// Normalized standard normal (uniform on the sphere). Default.
    #[serde(rename = "sphere")]
    SphereUniform,
    /// Componentwise uniform on [0,1), then normalized; biased toward
    /// the positive orthant.
    #[serde(rename = "component")]
    ComponentUniform,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct InnerOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub init: InitKind,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iterations: 500,
            init: InitKind::SphereUniform,
        }
    }
}

/// Which step produced an iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepSource {
    #[serde(rename = "INIT")]
    Init,
    #[serde(rename = "SQP")]
    Sqp,
    #[serde(rename = "PM")]
    Pm,
    #[serde(rename = "MIX")]
    Mix,
}

#[derive(Debug, Clone, Serialize)]
pub struct InnerTraceRow {
    pub iter: usize,
    pub f: f64,
    pub kkt_residual: f64,
    pub step_source: StepSource,
}

/// Outcome of a sphere-constrained maximization.
#[derive(Debug, Clone)]
pub struct InnerResult {
    pub x_star: DVector<f64>,
    pub f_star: f64,
    pub lambda_star: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<InnerTraceRow>,
}

/// One `b_matrix` call yields everything: `f = x^T B x / 4`, `grad = B x`,
/// `hess = 3 B`.
pub fn derivatives<F: SymmetricQuartic + ?Sized>(
    form: &F,
    x: &DVector<f64>,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let b = form.b_matrix(x);
    let grad = &b * x;
    let f = 0.25 * grad.dot(x);
    (f, grad, b * 3.0)
}

/// Shifted power method: `x_{k+1} = (B_x x + alpha x) / |.|` with
/// `alpha = 3 * spectral_bound + margin`, which keeps the iteration monotone
/// in `f`.
pub fn power_method<F: SymmetricQuartic + ?Sized>(
    form: &F,
    x0: &DVector<f64>,
    tol: f64,
    max_iterations: usize,
) -> InnerResult {
    let alpha = 3.0 * form.spectral_bound() + SHIFT_MARGIN;
    let mut x = x0 / x0.norm();
    let mut trace = Vec::new();
    let mut iter = 0;
    let mut source = StepSource::Init;
    let mut converged = false;
    let mut stop_after_record = false;
    loop {
        let b = form.b_matrix(&x);
        let grad = &b * &x;
        let f = 0.25 * grad.dot(&x);
        let lambda = grad.dot(&x);
        let residual = (&grad - &x * lambda).norm();
        trace.push(InnerTraceRow {
            iter,
            f,
            kkt_residual: residual,
            step_source: source,
        });
        if stop_after_record {
            converged = true;
            break;
        }
        if !f.is_finite() {
            break;
        }
        if iter >= max_iterations {
            break;
        }
        let direction = &grad + &x * alpha;
        let next = &direction / direction.norm();
        if (&x - &next).norm() <= tol {
            stop_after_record = true;
        }
        x = next;
        iter += 1;
        source = StepSource::Pm;
    }
    finish(x, iter, converged, trace)
}

/// One SQP step: solve the bordered Newton system
/// `[[3 B_x - lambda I, -x], [-x^T, 0]] (p, dlambda) = (-(grad - lambda x), 0)`
/// and return `(x + p) / |x + p|`. `p` is tangent to `x`, so the
/// normalization never divides by less than one.
pub fn sqp_step<F: SymmetricQuartic + ?Sized>(
    form: &F,
    x: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    let b = form.b_matrix(x);
    let grad = &b * x;
    sqp_step_from_parts(&b, &grad, x, lambda)
}

fn sqp_step_from_parts(
    b: &DMatrix<f64>,
    grad: &DVector<f64>,
    x: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    let n = x.len();
    let mut kkt = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            kkt[(i, j)] = 3.0 * b[(i, j)];
        }
        kkt[(i, i)] -= lambda;
        kkt[(i, n)] = -x[i];
        kkt[(n, i)] = -x[i];
    }
    let mut rhs = DVector::zeros(n + 1);
    for i in 0..n {
        rhs[i] = -(grad[i] - lambda * x[i]);
    }
    let lu = kkt.lu();
    let u = lu.u();
    let mut min_diag = f64::INFINITY;
    let mut max_diag = 0.0f64;
    for i in 0..n + 1 {
        let d = u[(i, i)].abs();
        min_diag = min_diag.min(d);
        max_diag = max_diag.max(d);
    }
    if min_diag == 0.0 || max_diag / min_diag > KKT_COND_LIMIT {
        return Err(CsError::SingularKktSystem);
    }
    let solution = lu.solve(&rhs).ok_or(CsError::SingularKktSystem)?;
    let mut next = x.clone();
    for i in 0..n {
        next[i] += solution[i];
    }
    let norm = next.norm();
    if !norm.is_finite() || norm < 1e-300 {
        return Err(CsError::SingularKktSystem);
    }
    Ok(next / norm)
}

/// Newton refinement on the full KKT system with the multiplier carried as an
/// unknown. Used only to escape the limit cycle the multiplier-recompute
/// iteration can enter near a nearly degenerate critical point; accepted
/// only when it reaches the residual stop without losing objective value.
fn stagnation_polish<F: SymmetricQuartic + ?Sized>(
    form: &F,
    x: &DVector<f64>,
    lambda: f64,
    f_current: f64,
) -> Option<DVector<f64>> {
    let n = x.len();
    let mut z = x.clone();
    let mut mu = lambda;
    for _ in 0..5 {
        let b = form.b_matrix(&z);
        let grad = &b * &z;
        let mut kkt = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                kkt[(i, j)] = 3.0 * b[(i, j)];
            }
            kkt[(i, i)] -= mu;
            kkt[(i, n)] = -z[i];
            kkt[(n, i)] = -z[i];
        }
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            rhs[i] = -(grad[i] - mu * z[i]);
        }
        rhs[n] = 0.5 * (z.dot(&z) - 1.0);
        let step = kkt.lu().solve(&rhs)?;
        for i in 0..n {
            z[i] += step[i];
        }
        mu += step[n];
        let candidate = &z / z.norm();
        let (f_c, grad_c, _) = derivatives(form, &candidate);
        let lambda_c = grad_c.dot(&candidate);
        let residual = (&grad_c - &candidate * lambda_c).norm();
        if !f_c.is_finite() {
            return None;
        }
        if residual <= KKT_STOP_RTOL * (1.0 + lambda_c.abs()) {
            return (f_c >= f_current - 1e-12).then_some(candidate);
        }
    }
    None
}

/// Combined solver: at every iteration the SQP step and the shifted power
/// step are blended through the exact two-direction line search, so the
/// objective never decreases while Newton speed is kept near a maximizer.
/// Stops on step size, on the KKT residual, or at the iteration cap
/// (`converged = false`).
pub fn inner_solve<F: SymmetricQuartic + ?Sized>(
    form: &F,
    x0: &DVector<f64>,
    opts: &InnerOptions,
) -> InnerResult {
    inner_solve_observed(form, x0, opts, |_| {})
}

/// Same as [`inner_solve`] but reporting every iterate, for convergence-rate
/// instrumentation.
pub fn inner_solve_observed<F: SymmetricQuartic + ?Sized>(
    form: &F,
    x0: &DVector<f64>,
    opts: &InnerOptions,
    mut observer: impl FnMut(&DVector<f64>),
) -> InnerResult {
    let alpha = 3.0 * form.spectral_bound() + SHIFT_MARGIN;
    let mut x = x0 / x0.norm();
    let mut trace: Vec<InnerTraceRow> = Vec::new();
    let mut steps: Vec<f64> = Vec::new();
    let mut iter = 0;
    let mut source = StepSource::Init;
    let mut converged = false;
    let mut stop_after_record = false;
    loop {
        let b = form.b_matrix(&x);
        let grad = &b * &x;
        let f = 0.25 * grad.dot(&x);
        let lambda = grad.dot(&x);
        let residual = (&grad - &x * lambda).norm();
        trace.push(InnerTraceRow {
            iter,
            f,
            kkt_residual: residual,
            step_source: source,
        });
        observer(&x);
        if stop_after_record {
            converged = true;
            break;
        }
        if !f.is_finite() {
            break;
        }
        if residual <= KKT_STOP_RTOL * (1.0 + lambda.abs()) {
            converged = true;
            break;
        }
        if iter >= opts.max_iterations {
            break;
        }

        // multiplier-recompute Newton can cycle with tiny amplitude near a
        // nearly degenerate KKT point; detect the flat spot and finish the
        // root with the multiplier carried as a Newton unknown
        let flat = trace.len() >= 4
            && steps.len() >= 3
            && window_spread(&trace) <= 1e-13 * (1.0 + f.abs())
            && steps[steps.len() - 3..].iter().all(|s| *s > opts.tol);
        if flat {
            if let Some(z) = stagnation_polish(form, &x, lambda, f) {
                x = z;
                iter += 1;
                source = StepSource::Sqp;
                steps.push(0.0);
                continue;
            }
        }

        let pm_direction = &grad + &x * alpha;
        let x_pm = &pm_direction / pm_direction.norm();
        let (x_sqp, sqp_ok) = match sqp_step_from_parts(&b, &grad, &x, lambda) {
            Ok(v) => (v, true),
            Err(_) => (x_pm.clone(), false),
        };
        let (mut next, _value, picked) = two_point_search(form, &x_sqp, &x_pm, Some(&x));
        if next.dot(&x) < 0.0 {
            next = -next;
        }
        source = match picked {
            Picked::First if sqp_ok => StepSource::Sqp,
            Picked::First => StepSource::Pm,
            Picked::Second => StepSource::Pm,
            Picked::Mixed => StepSource::Mix,
        };
        let step = (&x - &next).norm();
        steps.push(step);
        if step <= opts.tol {
            stop_after_record = true;
        }
        x = next;
        iter += 1;
    }
    finish(x, iter, converged, trace)
}

fn window_spread(trace: &[InnerTraceRow]) -> f64 {
    let tail = &trace[trace.len() - 4..];
    let max = tail.iter().map(|r| r.f).fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().map(|r| r.f).fold(f64::INFINITY, f64::min);
    max - min
}

fn finish(
    x: DVector<f64>,
    iterations: usize,
    converged: bool,
    trace: Vec<InnerTraceRow>,
) -> InnerResult {
    let f = trace.last().expect("trace has the final iterate").f;
    InnerResult {
        x_star: crate::atoms::canonical_sign(x),
        f_star: f,
        // lambda = x^T B_x x is exactly 4 f in floating point as well,
        // since f was formed as 0.25 * that dot product
        lambda_star: 4.0 * f,
        iterations,
        converged,
        trace,
    }
}

/// Best of `starts` independent solves. Start `i` draws its initial vector
/// from a stream seeded with `seed ^ i`, so the outcome does not depend on
/// scheduling; ties on the objective go to the lowest start index.
pub fn multi_start<F: SymmetricQuartic + ?Sized>(
    form: &F,
    starts: usize,
    seed: u64,
    opts: &InnerOptions,
) -> InnerResult {
    assert!(starts >= 1, "multi_start needs at least one start");
    let n = form.dim();
    let results: Vec<InnerResult> = (0..starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
            let x0 = match opts.init {
                InitKind::SphereUniform => sphere_uniform(n, &mut rng),
                InitKind::ComponentUniform => component_uniform(n, &mut rng),
            };
            inner_solve(form, &x0, opts)
        })
        .collect();
    results
        .into_iter()
        .reduce(|best, candidate| {
            if candidate.f_star > best.f_star {
                candidate
            } else {
                best
            }
        })
        .expect("at least one start")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::form::QuarticForm;
    use approx::assert_relative_eq;

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    fn axis_pair() -> QuarticForm {
        QuarticForm::low_rank(2, vec![1.0, 1.0], vec![e(2, 0), e(2, 1)]).unwrap()
    }

    #[test]
    fn b_matrix_of_single_atom() {
        let form = QuarticForm::low_rank(2, vec![1.0], vec![e(2, 0)]).unwrap();
        let x = DVector::from_vec(vec![0.3, 0.9]);
        let b = form.b_matrix(&x);
        assert_relative_eq!(b[(0, 0)], 0.09, max_relative = 1e-14);
        assert_eq!(b[(0, 1)], 0.0);
        assert_eq!(b[(1, 1)], 0.0);
    }

    #[test]
    fn b_matrix_of_axis_pair_is_diagonal() {
        let form = axis_pair();
        let x = DVector::from_vec(vec![0.8, 0.6]);
        let b = form.b_matrix(&x);
        assert_relative_eq!(b[(0, 0)], 0.64, max_relative = 1e-14);
        assert_relative_eq!(b[(1, 1)], 0.36, max_relative = 1e-14);
        assert_eq!(b[(0, 1)], 0.0);
    }

    #[test]
    fn b_matrix_of_example3_at_e0() {
        let form = crate::form::gen_example(3, 2, 0).unwrap();
        let b = form.b_matrix(&e(2, 0));
        assert_relative_eq!(b[(0, 0)], 0.0, epsilon = 1e-15);
        assert_relative_eq!(b[(0, 1)], 1.0 / 32.0, max_relative = 1e-14);
        assert_relative_eq!(b[(1, 0)], 1.0 / 32.0, max_relative = 1e-14);
        assert_relative_eq!(b[(1, 1)], 2.0 / 32.0, max_relative = 1e-14);
    }

    #[test]
    fn derivatives_of_single_atom() {
        let form = QuarticForm::low_rank(2, vec![1.0], vec![e(2, 0)]).unwrap();
        let (f, grad, hess) = derivatives(&form, &e(2, 0));
        assert_relative_eq!(f, 0.25);
        assert_relative_eq!(grad[0], 1.0);
        assert_relative_eq!(grad[1], 0.0);
        assert_relative_eq!(hess[(0, 0)], 3.0);

        let diag = DVector::from_vec(vec![1.0, 1.0]).normalize();
        let (f, grad, _) = derivatives(&form, &diag);
        assert_relative_eq!(f, 1.0 / 16.0, max_relative = 1e-14);
        assert_relative_eq!(grad[0], 1.0 / (2.0 * 2.0f64.sqrt()), max_relative = 1e-14);
        assert_relative_eq!(grad[1], 0.0);
    }

    #[test]
    fn power_method_finds_nearer_axis() {
        let form = axis_pair();
        let x0 = DVector::from_vec(vec![0.8, 0.6]);
        let result = power_method(&form, &x0, 1e-12, 500);
        assert!(result.converged);
        assert_relative_eq!(result.f_star, 0.25, max_relative = 1e-10);
        assert!(result.x_star[0].abs() > 0.999999);
    }

    #[test]
    fn power_method_fixed_point_in_one_iteration() {
        let form = QuarticForm::low_rank(2, vec![1.0], vec![e(2, 0)]).unwrap();
        let result = power_method(&form, &e(2, 0), 1e-12, 500);
        assert!(result.converged);
        assert_eq!(result.iterations, 1);
    }

    #[test]
    fn power_method_sits_at_symmetric_saddle() {
        // documents why multi-start exists: the diagonal is a fixed point
        let form = axis_pair();
        let x0 = DVector::from_vec(vec![1.0, 1.0]).normalize();
        let result = power_method(&form, &x0, 1e-12, 500);
        assert_relative_eq!(result.f_star, 0.125, max_relative = 1e-12);
        assert_relative_eq!(result.x_star[0].abs(), std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-10);
    }

    #[test]
    fn sqp_step_is_identity_at_kkt_point() {
        let form = QuarticForm::low_rank(2, vec![1.0], vec![e(2, 0)]).unwrap();
        let out = sqp_step(&form, &e(2, 0), 1.0).unwrap();
        assert_relative_eq!((&out - &e(2, 0)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sqp_step_contracts_kkt_residual() {
        let form = axis_pair();
        let theta: f64 = 0.1;
        let x = DVector::from_vec(vec![theta.cos(), theta.sin()]);
        let (_, grad, _) = derivatives(&form, &x);
        let lambda = grad.dot(&x);
        let before = (&grad - &x * lambda).norm();
        let next = sqp_step(&form, &x, lambda).unwrap();
        let (_, grad2, _) = derivatives(&form, &next);
        let lambda2 = grad2.dot(&next);
        let after = (&grad2 - &next * lambda2).norm();
        assert!(
            after * 10.0 < before,
            "residual {before:.3e} -> {after:.3e} is not a 10x contraction"
        );
    }

    #[test]
    fn inner_solve_on_single_atom() {
        let form = QuarticForm::low_rank(3, vec![1.0], vec![e(3, 0)]).unwrap();
        let x0 = DVector::from_vec(vec![0.5, 0.7, 0.6]);
        let result = inner_solve(&form, &x0, &InnerOptions::default());
        assert!(result.converged);
        assert_relative_eq!(result.f_star, 0.25, max_relative = 1e-10);
        assert_relative_eq!(result.lambda_star, 1.0, max_relative = 1e-10);
        assert!(result.x_star[0] > 0.999999);
    }

    #[test]
    fn inner_solve_respects_basin_of_nearer_axis() {
        let form = axis_pair();
        let x0 = DVector::from_vec(vec![0.8, 0.6]);
        let result = inner_solve(&form, &x0, &InnerOptions::default());
        assert!(result.converged);
        assert!(result.x_star[0].abs() > 0.999999, "x = {}", result.x_star);
        assert_relative_eq!(result.f_star, 0.25, max_relative = 1e-10);
    }

    #[test]
    fn traces_are_monotone() {
        let form = crate::form::gen_example(2, 6, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x0 = sphere_uniform(6, &mut rng);
        let result = inner_solve(&form, &x0, &InnerOptions::default());
        assert!(result.converged);
        for pair in result.trace.windows(2) {
            assert!(pair[1].f >= pair[0].f - 1e-12);
        }
    }

    #[test]
    fn multi_start_is_deterministic_and_finds_global_on_axis_pair() {
        let form = axis_pair();
        let a = multi_start(&form, 20, 123, &InnerOptions::default());
        let b = multi_start(&form, 20, 123, &InnerOptions::default());
        assert_eq!(a.x_star, b.x_star);
        assert_relative_eq!(a.f_star, 0.25, max_relative = 1e-10);
    }

    #[test]
    fn multi_start_single_start_matches_inner_solve() {
        let form = axis_pair();
        let opts = InnerOptions::default();
        let ms = multi_start(&form, 1, 99, &opts);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let x0 = sphere_uniform(2, &mut rng);
        let direct = inner_solve(&form, &x0, &opts);
        assert_eq!(ms.x_star, direct.x_star);
        assert_eq!(ms.f_star, direct.f_star);
    }

    #[test]
    fn max_iterations_returns_best_iterate_unconverged() {
        let form = axis_pair();
        let x0 = DVector::from_vec(vec![0.8, 0.6]);
        let result = inner_solve(
            &form,
            &x0,
            &InnerOptions {
                tol: 1e-16,
                max_iterations: 0,
                init: InitKind::SphereUniform,
            },
        );
        assert!(!result.converged);
        assert_eq!(result.iterations, 0);
    }
}
