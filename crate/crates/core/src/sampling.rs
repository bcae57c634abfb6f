//! Seeded random direction generators shared by the solvers and tests.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

/// Uniform direction on the unit sphere (normalized standard normal draw).
pub fn sphere_uniform<R: Rng>(n: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Componentwise uniform draw on `[0, 1)`, normalized. The resulting
/// direction is biased toward the positive orthant.
pub fn component_uniform<R: Rng>(n: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.random::<f64>());
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}
