//! Complex linear algebra and reproducible sampling.
//!
//! Complex scalars are `num_complex::Complex64` (interleaved real/imag doubles). The
//! neural layers work on real vectors; [`split_real_imag`] and [`join_real_imag`] are the
//! single conversion boundary between the two representations.

mod eigen;
mod matrix;
mod rng;

pub use eigen::{
    canonicalize_phase, hermitian_sqrt, largest_eigenvalue_hermitian, principal_eigenvector,
    HermitianEigen, DEFAULT_TOL,
};
pub use matrix::{
    inner, join_real_imag, split_real_imag, vec_norm, vec_norm_sqr, Cholesky, ComplexMatrix,
};
pub use num_complex::Complex64;
pub use rng::{sample_standard_complex_gaussian, RngStream};
