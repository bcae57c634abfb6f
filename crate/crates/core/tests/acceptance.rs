//! Acceptance suite: every criterion runs at its stated tolerance and prints
//! one pass line (visible with `--nocapture`; a failed assert marks the
//! criterion failed).

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use csep_core::inner::{derivatives, inner_solve_observed, InnerOptions};
use csep_core::oracle;
use csep_core::projection::{OuterResult, ProjectOptions, Verdict};
use csep_core::sampling::sphere_uniform;
use csep_core::{gen_example, inner_solve, multi_start, project, QuarticForm};

fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, e| acc.max(e.abs()))
}

fn axis_pair() -> QuarticForm {
    QuarticForm::low_rank(2, vec![1.0, 1.0], vec![unit(2, 0), unit(2, 1)]).unwrap()
}

fn signed_pair() -> QuarticForm {
    QuarticForm::low_rank(2, vec![1.0, -1.0], vec![unit(2, 0), unit(2, 1)]).unwrap()
}

struct ProjectionCase {
    label: String,
    rho: QuarticForm,
    result: OuterResult,
}

/// Criterion 6 runs: 20 single-atom targets plus the signed pair.
fn criterion6_cases() -> &'static Vec<ProjectionCase> {
    static CASES: OnceLock<Vec<ProjectionCase>> = OnceLock::new();
    CASES.get_or_init(|| {
        let mut cases = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0x61);
        for trial in 0..20 {
            let n = 2 + trial % 5;
            let x = sphere_uniform(n, &mut rng);
            let rho = QuarticForm::low_rank(n, vec![1.0], vec![x]).unwrap();
            let result = project(&rho, &ProjectOptions::default()).unwrap();
            cases.push(ProjectionCase {
                label: format!("sigma(x) trial {trial} (n={n})"),
                rho,
                result,
            });
        }
        let rho = signed_pair();
        let result = project(&rho, &ProjectOptions::default()).unwrap();
        cases.push(ProjectionCase {
            label: "sigma(e0) - sigma(e1)".to_string(),
            rho,
            result,
        });
        cases
    })
}

/// Criterion 7 runs: Example 1 recovery at N = 4 and 8, refinement on.
fn criterion7_cases() -> &'static Vec<(ProjectionCase, f64)> {
    static CASES: OnceLock<Vec<(ProjectionCase, f64)>> = OnceLock::new();
    CASES.get_or_init(|| {
        [(4usize, 131u64), (8usize, 7u64)]
            .iter()
            .map(|&(n, seed)| {
                let rho = gen_example(1, n, seed).unwrap();
                let started = Instant::now();
                let result = project(&rho, &ProjectOptions::default()).unwrap();
                let secs = started.elapsed().as_secs_f64();
                (
                    ProjectionCase {
                        label: format!("example 1, n={n}"),
                        rho,
                        result,
                    },
                    secs,
                )
            })
            .collect()
    })
}

/// Criterion 8 runs: Examples 2-4 at N = 4.
fn criterion8_cases() -> &'static Vec<ProjectionCase> {
    static CASES: OnceLock<Vec<ProjectionCase>> = OnceLock::new();
    CASES.get_or_init(|| {
        [(2u32, 77u64), (3, 0), (4, 0)]
            .iter()
            .map(|&(id, seed)| {
                let rho = gen_example(id, 4, seed).unwrap();
                let result = project(&rho, &ProjectOptions::default()).unwrap();
                ProjectionCase {
                    label: format!("example {id}, n=4"),
                    rho,
                    result,
                }
            })
            .collect()
    })
}

#[test]
fn criterion_01_derivative_correctness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x01);
    let h = 1e-5;
    let mut worst_grad = 0.0f64;
    let mut worst_hess = 0.0f64;
    for trial in 0..100u64 {
        let n = [2usize, 4, 8][(trial % 3) as usize];
        let form = gen_example(1, n, 0x9000 + trial).unwrap();
        let x = sphere_uniform(n, &mut rng);
        let (_, grad, hess) = derivatives(&form, &x);
        let (fd_grad, fd_hess) = oracle::fd_derivatives(&form, &x, h).unwrap();
        let grad_err = (&grad - &fd_grad).norm() / grad.norm();
        let hess_err = (&hess - &fd_hess).norm() / hess.norm();
        worst_grad = worst_grad.max(grad_err);
        worst_hess = worst_hess.max(hess_err);
        assert!(
            grad_err <= 1e-6,
            "gradient mismatch {grad_err:.3e} at trial {trial} (n={n})"
        );
        assert!(
            hess_err <= 1e-6,
            "hessian mismatch {hess_err:.3e} at trial {trial} (n={n})"
        );
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 10.0, "criterion 1 took {secs:.1} s, budget 10 s");
    println!(
        "criterion 01 PASS: derivatives match finite differences \
         (worst grad {worst_grad:.2e}, worst hess {worst_hess:.2e}, {secs:.1} s)"
    );
}

#[test]
fn criterion_02_curvature_and_identity_invariants() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x02);

    // exchange identity y^T H(x) y = x^T H(y) x
    for trial in 0..1000u64 {
        let n = 2 + (trial % 5) as usize;
        let form = gen_example(2, n, 0xA000 + trial / 5).unwrap();
        let x = sphere_uniform(n, &mut rng);
        let y = sphere_uniform(n, &mut rng);
        let (_, _, hx) = derivatives(&form, &x);
        let (_, _, hy) = derivatives(&form, &y);
        let lhs = (&hx * &y).dot(&y);
        let rhs = (&hy * &x).dot(&x);
        assert!(
            (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1e-12),
            "exchange identity broke: {lhs} vs {rhs}"
        );
    }

    // Hessian norm and Lipschitz bounds
    for trial in 0..1000u64 {
        let n = 2 + (trial % 4) as usize;
        let form = gen_example(2, n, 0xB000 + trial / 7).unwrap();
        let bound = form.spectral_bound();
        let x = sphere_uniform(n, &mut rng);
        let y = sphere_uniform(n, &mut rng);
        let (_, _, hx) = derivatives(&form, &x);
        let (_, _, hy) = derivatives(&form, &y);
        let slack = 1e-10 * bound.max(1.0);
        assert!(
            spectral_norm(&hx) <= 3.0 * bound + slack,
            "Hessian norm bound violated"
        );
        assert!(
            spectral_norm(&(&hx - &hy)) <= 6.0 * bound * (&x - &y).norm() + slack,
            "Lipschitz bound violated"
        );
    }

    // lambda* = 4 f* at the solver output
    for trial in 0..1000u64 {
        let n = 2 + (trial % 3) as usize;
        let form = gen_example(1, n, 0xC000 + trial).unwrap();
        let x0 = sphere_uniform(n, &mut rng);
        let result = inner_solve(&form, &x0, &InnerOptions::default());
        assert!(
            (result.lambda_star - 4.0 * result.f_star).abs()
                <= 1e-10 * result.lambda_star.abs().max(1.0),
            "lambda* != 4 f*"
        );
    }

    // sine identity for x = cos(t) x* + sin(t) x_perp, angles kept away
    // from multiples of pi where both sides vanish
    for _ in 0..1000 {
        let n = 3;
        let a = sphere_uniform(n, &mut rng);
        let mut b = sphere_uniform(n, &mut rng);
        b -= &a * a.dot(&b);
        if b.norm() < 1e-6 {
            continue;
        }
        b /= b.norm();
        let sign: f64 = if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
        let theta = sign * (0.01 + rng.random::<f64>() * (std::f64::consts::PI - 0.02));
        let x = &a * theta.cos() + &b * theta.sin();
        let d = (&x - &a).norm();
        let rhs = (d * d - d.powi(4) / 4.0).max(0.0).sqrt();
        assert!(
            (theta.sin().abs() - rhs).abs() <= 1e-12,
            "sine identity broke at theta = {theta}"
        );
    }

    // normalization never moves a point away from the sphere
    for _ in 0..1000 {
        let n = 4;
        let u = sphere_uniform(n, &mut rng);
        let scale = 1.0 + 2.0 * rng.random::<f64>();
        let v = sphere_uniform(n, &mut rng) * scale;
        let lhs = (&v / v.norm() - &u).norm();
        let rhs = (&v - &u).norm();
        assert!(lhs <= rhs + 1e-15, "normalization inequality broke");
    }

    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 30.0, "criterion 2 took {secs:.1} s, budget 30 s");
    println!("criterion 02 PASS: curvature bounds and vector identities ({secs:.1} s)");
}

#[test]
fn criterion_03_inner_convergence_across_dimensions() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x03);
    let mut worst_iterations = 0;
    for id in 1..=4u32 {
        for n in [4usize, 8, 16, 32, 64] {
            let form = gen_example(id, n, 1000 * id as u64 + n as u64).unwrap();
            let x0 = sphere_uniform(n, &mut rng);
            let result = inner_solve(&form, &x0, &InnerOptions::default());
            assert!(
                result.converged && result.iterations <= 500,
                "example {id} n={n} did not converge in 500 iterations \
                 ({} used, converged={})",
                result.iterations,
                result.converged
            );
            for pair in result.trace.windows(2) {
                assert!(
                    pair[1].f >= pair[0].f - 1e-12,
                    "example {id} n={n}: f decreased in trace"
                );
            }
            worst_iterations = worst_iterations.max(result.iterations);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 60.0, "criterion 3 took {secs:.1} s, budget 60 s");
    println!(
        "criterion 03 PASS: inner solver converged on examples 1-4 up to n=64 \
         (max {worst_iterations} iterations, {secs:.1} s)"
    );
}

#[test]
fn criterion_04_local_quadratic_rate() {
    let form = axis_pair();
    let theta: f64 = 0.3;
    let x0 = DVector::from_vec(vec![theta.cos(), theta.sin()]);
    let mut points: Vec<DVector<f64>> = Vec::new();
    let result = inner_solve_observed(&form, &x0, &InnerOptions::default(), |x| {
        points.push(x.clone());
    });
    assert!(result.converged);
    let target = unit(2, 0);
    let errors: Vec<f64> = points
        .iter()
        .map(|x| (x - &target).norm().min((x + &target).norm()))
        .collect();
    assert!(errors.len() >= 2, "need at least two iterates");
    let tail = &errors[errors.len().saturating_sub(4)..];
    for pair in tail.windows(2) {
        if pair[0] == 0.0 {
            assert_eq!(pair[1], 0.0);
            continue;
        }
        assert!(
            pair[1] <= 100.0 * pair[0] * pair[0],
            "quadratic rate broke: e_k = {:.3e}, e_k+1 = {:.3e}",
            pair[0],
            pair[1]
        );
    }
    println!(
        "criterion 04 PASS: quadratic tail from angle 0.3 (errors {:?})",
        errors
    );
}

#[test]
fn criterion_05_global_agreement_at_n2() {
    let mut successes = 0;
    for seed in 0..100u64 {
        let id = if seed % 2 == 0 { 1 } else { 2 };
        let form = gen_example(id, 2, 0x5000 + seed).unwrap();
        let best = multi_start(&form, 20, seed, &InnerOptions::default());
        let (_, grid_value) = oracle::grid_max(&form, 1e-4).unwrap();
        if best.f_star >= grid_value - 1e-6 {
            successes += 1;
        }
    }
    assert!(
        successes >= 95,
        "only {successes}/100 seeds matched the grid oracle"
    );
    println!("criterion 05 PASS: multi-start matched the grid oracle on {successes}/100 seeds");
}

#[test]
fn criterion_06_projection_exactness() {
    let cases = criterion6_cases();
    for case in &cases[..20] {
        assert!(
            case.result.distance <= 1e-8,
            "{}: distance {} above 1e-8",
            case.label,
            case.result.distance
        );
        assert!(
            case.result.iterations <= 5,
            "{}: {} outer iterations, budget 5",
            case.label,
            case.result.iterations
        );
    }
    let signed = &cases[20];
    assert_eq!(signed.result.verdict, Verdict::NotSSeparableCertified);
    // |rho* - sigma(e0)|_F via the atom Gram form
    let atoms = &signed.result.approximation;
    let e0 = unit(2, 0);
    let star_sq = atoms.frob_norm().powi(2);
    let cross: f64 = atoms
        .weights()
        .iter()
        .zip(atoms.vectors())
        .map(|(w, v)| w * v.dot(&e0).powi(4))
        .sum();
    let deviation = (star_sq - 2.0 * cross + 1.0).max(0.0).sqrt();
    assert!(
        deviation <= 1e-6,
        "projection of the signed pair deviates from sigma(e0) by {deviation}"
    );
    assert!((signed.result.distance - 1.0).abs() <= 1e-6);
    println!(
        "criterion 06 PASS: 20 atom targets recovered exactly; signed pair lands on sigma(e0) \
         (deviation {deviation:.2e})"
    );
}

#[test]
fn criterion_07_separable_recovery() {
    let cases = criterion7_cases();
    let total: f64 = cases.iter().map(|(_, secs)| *secs).sum();
    for (case, _) in cases {
        assert!(
            case.result.distance <= 1e-4,
            "{}: distance {} above 1e-4 after {} outer iterations",
            case.label,
            case.result.distance,
            case.result.iterations
        );
        assert!(case.result.iterations <= 1000);
    }
    assert!(total < 300.0, "criterion 7 took {total:.0} s, budget 300 s");
    println!(
        "criterion 07 PASS: example 1 recovered at n=4 (dist {:.2e}) and n=8 (dist {:.2e}) in {total:.0} s",
        cases[0].0.result.distance,
        cases[1].0.result.distance
    );
}

#[test]
fn criterion_08_non_separable_certification() {
    for case in criterion8_cases() {
        for pair in case.result.trace.windows(2) {
            assert!(
                pair[1].distance <= pair[0].distance + 1e-12,
                "{}: distance trace increased",
                case.label
            );
        }
        let lower = oracle::psd_distance(&case.rho).unwrap();
        assert!(
            case.result.distance >= lower - 1e-8,
            "{}: terminal distance {} below the PSD lower bound {}",
            case.label,
            case.result.distance,
            lower
        );
        assert!(lower > 1e-3, "{}: example should be clearly non-PSD", case.label);
    }
    println!("criterion 08 PASS: examples 2-4 terminate above the independent PSD lower bound");
}

#[test]
fn criterion_09_termination_rule_fidelity() {
    let opts = ProjectOptions::default();
    let echoed = serde_json::to_string(&opts).expect("serializable");
    let expected = concat!(
        "{\"outer_tol\":1e-12,\"max_outer\":1000,",
        "\"inner\":{\"tol\":1e-12,\"max_iterations\":500,\"init\":\"sphere\"},",
        "\"starts\":5,\"seed\":0,\"mode\":\"cone\",\"refine\":true,\"gap_rtol\":1e-10}"
    );
    assert_eq!(echoed, expected, "default configuration drifted");
    let inner = InnerOptions::default();
    assert_eq!(inner.tol, 1e-12);
    assert_eq!(inner.max_iterations, 500);
    println!("criterion 09 PASS: default tolerances echo byte-identically");
}

#[test]
fn criterion_10_oracle_optimality_sampling() {
    let mut checked = 0;
    let mut worst = f64::NEG_INFINITY;
    let all: Vec<&ProjectionCase> = criterion6_cases()
        .iter()
        .chain(criterion7_cases().iter().map(|(c, _)| c))
        .chain(criterion8_cases().iter())
        .collect();
    for case in all {
        let scale = case.rho.frob_norm().max(1.0);
        let violation =
            oracle::optimality_sample(&case.rho, &case.result.approximation, 1000, 0xD0).unwrap();
        assert!(
            violation <= 1e-8 * scale,
            "{}: sampled optimality violation {violation:.3e} above 1e-8 * {scale:.2}",
            case.label
        );
        worst = worst.max(violation / scale);
        checked += 1;
    }
    println!(
        "criterion 10 PASS: {checked} terminal approximations pass optimality sampling \
         (worst scaled violation {worst:.2e})"
    );
}
