//! Real roots of low-degree polynomials via companion-matrix eigenvalues.

use nalgebra::DMatrix;

/// Real roots of `sum_i coeffs[i] t^i`. Leading coefficients below
/// `1e-14 * max|c|` are trimmed, so a degenerate quartic falls back to the
/// cubic/quadratic/linear case. Complex eigenvalues with imaginary part up
/// to `1e-8 * (1 + |re|)` are accepted as real.
pub fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let max_abs = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if max_abs == 0.0 || !max_abs.is_finite() {
        return Vec::new();
    }
    let mut degree = coeffs.len() - 1;
    while degree > 0 && coeffs[degree].abs() <= 1e-14 * max_abs {
        degree -= 1;
    }
    match degree {
        0 => Vec::new(),
        1 => vec![-coeffs[0] / coeffs[1]],
        d => {
            let lead = coeffs[d];
            let mut companion = DMatrix::zeros(d, d);
            for i in 0..d {
                companion[(i, d - 1)] = -coeffs[i] / lead;
                if i + 1 < d {
                    companion[(i + 1, i)] = 1.0;
                }
            }
            companion
                .complex_eigenvalues()
                .iter()
                .filter(|z| z.im.abs() <= 1e-8 * (1.0 + z.re.abs()))
                .map(|z| z.re)
                .collect()
        }
    }
}

/// Product of two dense polynomials in ascending-coefficient form.
pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}
