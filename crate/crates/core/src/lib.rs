//! Best S-separable approximation of completely symmetric matrices.
//!
//! A completely symmetric matrix has 4-index coefficients invariant under
//! every index permutation. The S-separable ones are the nonnegative
//! combinations of symmetric product atoms `sigma(x) = xx^T (x) xx^T`. This
//! crate computes the Frobenius projection of a completely symmetric matrix
//! onto that set with a Frank-Wolfe outer loop whose linear subproblem, the
//! maximization of a quartic form over the unit sphere, is solved by a
//! combined SQP / shifted-power-method iteration.
//!
//! Modules:
//! * [`form`]: representations, generators, inner products, reduced states,
//! * [`certificate`]: structural S-separability certificates,
//! * [`inner`]: the sphere-constrained maximizer,
//! * [`projection`]: the Frank-Wolfe projection and verdicts,
//! * [`oracle`]: independent brute-force references used by the test suite,
//! * [`io`]: the csmat-v1 JSON file format.

pub mod atoms;
pub mod certificate;
pub mod error;
pub mod form;
pub mod inner;
pub mod io;
mod nnls;
pub mod oracle;
pub mod projection;
pub mod quartic;
pub mod sampling;

pub use atoms::{AtomList, FeasibleSet};
pub use certificate::{structural_certificate, Certificate, Theorem1Verdict};
pub use error::{CsError, Result};
pub use form::{gen_example, inner_product, reduced_state, QuarticForm, Repr, DENSE_CAP};
pub use inner::{
    inner_solve, line_search_2d, multi_start, power_method, sqp_step, InnerOptions, InnerResult,
};
pub use projection::{
    project, psd_cone_distance, refine_weights, step_size, verdict, OuterResult, ProjectOptions,
    Verdict,
};
pub use quartic::{Residual, SymmetricQuartic};
