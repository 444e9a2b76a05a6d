//! Small dense linear-algebra helpers shared by the filters and bounds.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Jitter added to the diagonal when a factorization fails once.
pub const FACTORIZATION_JITTER: f64 = 1e-12;

/// Replaces `m` by `(m + mᵀ)/2` in place.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Cholesky factorization with a single jitter retry.
pub fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let n = m.nrows();
    let scale = (m.trace().abs() / n.max(1) as f64).max(1.0);
    let jittered = m + DMatrix::identity(n, n) * (FACTORIZATION_JITTER * scale);
    Cholesky::new(jittered)
        .ok_or_else(|| Error::Numerical(format!("cholesky failed on {n}x{n} matrix")))
}

/// Inverse of a symmetric positive definite matrix, symmetrized.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut inv = cholesky(m)?.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Square-root factor `L` with `L Lᵀ = m` for symmetric PSD `m`.
///
/// Cholesky when possible, otherwise a clamped eigen-decomposition, so
/// singular noise covariances are accepted.
pub fn psd_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c.l());
    }
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let eig = sym.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().any(|&l| !(l >= -1e-9 * scale)) {
        return Err(Error::Numerical("covariance is not positive semidefinite".into()));
    }
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(eig.eigenvectors * DMatrix::from_diagonal(&d))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Solves the discrete Lyapunov equation `P = A P Aᵀ + U` for small `A`
/// via the Kronecker form `(I − A⊗A) vec(P) = vec(U)`.
pub fn discrete_lyapunov(a: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let kron = a.kronecker(a);
    let lhs = DMatrix::identity(n * n, n * n) - kron;
    let rhs = DVector::from_iterator(n * n, u.iter().copied());
    let vec_p = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("lyapunov system singular (unstable transition)".into()))?;
    let mut p = DMatrix::from_iterator(n, n, vec_p.iter().copied());
    symmetrize(&mut p);
    Ok(p)
}

/// Van Loan discretization of `ẋ = A x + w`, `E[w wᵀ] = W δ(t)`, over step `dt`.
/// Returns the transition `Φ = e^{A dt}` and the discrete noise covariance.
pub fn van_loan(a: &DMatrix<f64>, w: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(-a * dt));
    m.view_mut((0, n), (n, n)).copy_from(&(w * dt));
    m.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * dt));
    let e = m.exp();
    let phi = e.view((n, n), (n, n)).transpose();
    let upper = e.view((0, n), (n, n)).into_owned();
    let mut q = &phi * upper;
    symmetrize(&mut q);
    (phi, q)
}

/// Relative Frobenius distance `‖a − b‖ / max(‖b‖, tiny)`.
pub fn relative_difference(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
