//! Small complex linear-algebra helpers shared across the crate.
//!
//! Everything here wraps [`nalgebra`] dynamic matrices with the conventions
//! used throughout: `C64` scalars, Hermitian systems solved through a
//! Cholesky factorization (never an explicit inverse), and PSD square roots
//! taken through a clamped Hermitian eigendecomposition.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

pub type C64 = num_complex::Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative negativity tolerance for "numerically PSD" checks: eigenvalues in
/// `[-PSD_TOL * max_eig, 0)` are clamped to zero, anything lower is an error.
pub const PSD_TOL: f64 = 1e-9;

/// One sample of the standard circularly-symmetric complex Gaussian
/// CN(0, 1): independent real and imaginary parts of variance 1/2.
pub fn cn01<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// A length-`n` vector of iid CN(0, 1) entries.
pub fn cn01_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    CVec::from_fn(n, |_, _| cn01(rng))
}

/// An `r x c` matrix of iid CN(0, 1) entries (column-major fill order).
pub fn cn01_matrix<R: Rng + ?Sized>(r: usize, c: usize, rng: &mut R) -> CMat {
    CMat::from_fn(r, c, |_, _| cn01(rng))
}

/// Force exact Hermitian symmetry: `(a + a^H) / 2`.
///
/// Used before factorizations on matrices that are Hermitian analytically
/// but carry rounding asymmetry from their assembly.
pub fn hermitize(a: &CMat) -> CMat {
    let n = a.nrows();
    let mut out = a.clone();
    for i in 0..n {
        out[(i, i)] = C64::new(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}

/// Solve `A X = B` for Hermitian positive-definite `A` via Cholesky.
pub fn hermitian_solve(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "hermitian_solve: A is {}x{} but B has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let chol = hermitize(a)
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{}x{} Hermitian system is not positive definite", a.nrows(), a.ncols())))?;
    Ok(chol.solve(b))
}

/// Solve `A x = b` for Hermitian positive-definite `A` via Cholesky.
pub fn hermitian_solve_vec(a: &CMat, b: &CVec) -> Result<CVec> {
    let x = hermitian_solve(a, &CMat::from_column_slice(b.len(), 1, b.as_slice()))?;
    Ok(CVec::from_column_slice(x.as_slice()))
}

/// Hermitian eigendecomposition with PSD clamping.
///
/// Returns the eigenvector matrix `U` and eigenvalues `lambda >= 0` such that
/// `a ~= U diag(lambda) U^H`. Eigenvalues in `[-PSD_TOL * max, 0)` are
/// clamped to zero; anything below that is reported as [`Error::NotPsd`]
/// with the offending value, since it signals a genuinely indefinite input
/// rather than rounding noise.
pub fn psd_eigen(a: &CMat, what: &str) -> Result<(CMat, Vec<f64>)> {
    let eig = hermitize(a).symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let floor = -PSD_TOL * max.max(1.0);
    let mut vals = Vec::with_capacity(eig.eigenvalues.len());
    for &l in eig.eigenvalues.iter() {
        if l < floor {
            return Err(Error::NotPsd(format!("{what}: eigenvalue {l:.3e} below tolerance {floor:.3e}")));
        }
        vals.push(l.max(0.0));
    }
    Ok((eig.eigenvectors, vals))
}

/// Principal PSD square root `A^{1/2} = U diag(sqrt(lambda)) U^H`.
pub fn psd_sqrt(a: &CMat, what: &str) -> Result<CMat> {
    let (u, vals) = psd_eigen(a, what)?;
    let n = vals.len();
    let mut scaled = u.clone();
    for (j, &l) in vals.iter().enumerate() {
        let s = C64::new(l.sqrt(), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    Ok(&scaled * u.adjoint())
}

/// Frobenius norm of the difference, relative to the Frobenius norm of `b`.
pub fn rel_frobenius(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cn01_has_unit_variance_and_zero_pseudo_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let (mut p, mut pseudo) = (0.0, C64::new(0.0, 0.0));
        for _ in 0..n {
            let z = cn01(&mut rng);
            p += z.norm_sqr();
            pseudo += z * z;
        }
        assert!((p / n as f64 - 1.0).abs() < 0.01);
        assert!((pseudo / n as f64).norm() < 0.01);
    }

    #[test]
    fn hermitian_solve_recovers_known_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = cn01_matrix(5, 5, &mut rng);
        let a = &g * g.adjoint() + CMat::identity(5, 5) * C64::new(0.1, 0.0);
        let x = cn01_matrix(5, 2, &mut rng);
        let b = &a * &x;
        let x_hat = hermitian_solve(&a, &b).unwrap();
        assert!(rel_frobenius(&x_hat, &x) < 1e-10);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = cn01_matrix(6, 6, &mut rng);
        let a = hermitize(&(&g * g.adjoint()));
        let s = psd_sqrt(&a, "test").unwrap();
        assert!(rel_frobenius(&(&s * &s), &a) < 1e-10);
        // The square root of a Hermitian PSD matrix is itself Hermitian.
        assert!(rel_frobenius(&s.adjoint(), &s) < 1e-12);
    }

    #[test]
    fn psd_eigen_rejects_indefinite_input() {
        let mut a = CMat::identity(3, 3);
        a[(2, 2)] = C64::new(-0.5, 0.0);
        assert!(matches!(psd_eigen(&a, "test"), Err(Error::NotPsd(_))));
    }

    #[test]
    fn singular_system_is_reported() {
        let a = CMat::zeros(3, 3);
        let b = CMat::identity(3, 3);
        assert!(matches!(hermitian_solve(&a, &b), Err(Error::Singular(_))));
    }
}
