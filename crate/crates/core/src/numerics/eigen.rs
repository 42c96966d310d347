//! Hermitian eigensolver (cyclic complex Jacobi) and the routines built on it.

use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition `A = V diag(values) V^H`, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, ordered like `values`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn new(a: &ComplexMatrix, tol: f64) -> Result<Self> {
        check_hermitian(a, tol)?;
        jacobi(a)
    }

    pub fn principal_vector(&self) -> Vec<Complex64> {
        self.vectors.column(0)
    }
}

fn check_hermitian(a: &ComplexMatrix, tol: f64) -> Result<()> {
    if !a.is_square() {
        return Err(Error::shape(
            "hermitian eigensolver",
            "square matrix",
            format!("{:?}", a.shape()),
        ));
    }
    if !a.is_finite() {
        return Err(Error::NumericalSingularity("non-finite matrix entries"));
    }
    let defect = a.hermitian_defect();
    if defect > tol {
        return Err(Error::NotHermitian {
            asymmetry: defect,
            tol,
        });
    }
    Ok(())
}

fn off_diagonal_norm_sqr(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s
}

fn jacobi(input: &ComplexMatrix) -> Result<HermitianEigen> {
    let n = input.rows();
    // Work on the Hermitian part so tiny input asymmetry cannot stall convergence.
    let mut a = ComplexMatrix::from_fn(n, n, |i, j| (input[(i, j)] + input[(j, i)].conj()) * 0.5);
    let mut v = ComplexMatrix::identity(n);
    let total = a.frobenius_norm().powi(2);
    let threshold = total * (f64::EPSILON * f64::EPSILON);

    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm_sqr(&a) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm_sqr(&a) <= threshold {
        converged = true;
    }
    if !converged {
        return Err(Error::NoConvergence {
            routine: "jacobi eigensolver",
            iterations: MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// One complex Jacobi rotation zeroing `a[p][q]`; accumulates the rotation into `v`.
fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    if r < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[(p, q)] = Complex64::new(0.0, 0.0);
        a[(q, p)] = Complex64::new(0.0, 0.0);
        return;
    }
    // Phase that makes the pivot real, then a real symmetric rotation.
    let phase = apq / r;
    let theta = (aqq - app) / (2.0 * r);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // J restricted to (p, q): [[c, s], [-s * conj(phase), c * conj(phase)]]
    let jpp = Complex64::new(c, 0.0);
    let jpq = Complex64::new(s, 0.0);
    let jqp = -phase.conj() * s;
    let jqq = phase.conj() * c;

    let n = a.rows();
    // A <- A J
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * jpp + akq * jqp;
        a[(k, q)] = akp * jpq + akq * jqq;
    }
    // A <- J^H A
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
        a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)].im = 0.0;
    a[(q, q)].im = 0.0;
    // V <- V J
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * jpp + vkq * jqp;
        v[(k, q)] = vkp * jpq + vkq * jqq;
    }
}

/// Hermitian square root `S = V diag(sqrt(max(λ, 0))) V^H`, so `S S^H = A`.
///
/// Eigenvalues in `[-tol·‖A‖_F, 0)` are clamped to zero; anything more negative is
/// reported as [`Error::Indefinite`].
pub fn hermitian_sqrt(a: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    let eig = HermitianEigen::new(a, tol)?;
    let scale = a.frobenius_norm().max(1.0);
    if let Some(&min) = eig.values.last() {
        if min < -tol * scale {
            return Err(Error::Indefinite {
                eigenvalue: min,
                tol: tol * scale,
            });
        }
    }
    let n = a.rows();
    let roots: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let v = &eig.vectors;
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| v[(i, k)] * roots[k] * v[(j, k)].conj())
            .sum()
    }))
}

/// Largest eigenvalue of a Hermitian positive semidefinite matrix.
pub fn largest_eigenvalue_hermitian(a: &ComplexMatrix, tol: f64) -> Result<f64> {
    let eig = HermitianEigen::new(a, tol)?;
    Ok(eig.values.first().copied().unwrap_or(0.0).max(0.0))
}

/// Principal eigenvector with the canonical phase: first non-negligible entry real positive.
pub fn principal_eigenvector(a: &ComplexMatrix, tol: f64) -> Result<(f64, Vec<Complex64>)> {
    let eig = HermitianEigen::new(a, tol)?;
    let mut v = eig.principal_vector();
    canonicalize_phase(&mut v);
    Ok((eig.values[0], v))
}

/// Rotates `v` by a common unit-modulus factor so its first non-negligible entry is real positive.
pub fn canonicalize_phase(v: &mut [Complex64]) {
    let peak = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return;
    }
    if let Some(first) = v.iter().find(|z| z.norm() > 1e-12 * peak).copied() {
        let rot = first.conj() / first.norm();
        for z in v.iter_mut() {
            *z *= rot;
        }
        // exact zero imaginary part on the pivot
        if let Some(pivot) = v.iter_mut().find(|z| z.norm() > 1e-12 * peak) {
            pivot.im = 0.0;
        }
    }
}
