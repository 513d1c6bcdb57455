//! Continuous Lyapunov equation `FᵀQ + QF = -ηI` by the matrix sign function.
//!
//! Newton's iteration `A ← (A + A⁻¹)/2`, `C ← (C + A⁻ᵀCA⁻¹)/2` keeps
//! `AᵀQ + QA + C = 0` invariant and drives `A` to `-I` exactly when `F` is
//! Hurwitz, leaving `Q = C/2`. Only inversions are needed, so repeated or
//! clustered eigenvalues are harmless.

use nalgebra::{DMatrix, SymmetricEigen};

use super::StabilityError;
use crate::error::DimensionMismatch;

const MAX_ITERATIONS: usize = 100;

fn solve_sign(f: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>, StabilityError> {
    let n = f.nrows();
    let mut a = f.clone();
    let mut c = c.clone();
    let mut scale = true;
    for _ in 0..MAX_ITERATIONS {
        let inv = a.clone().try_inverse().ok_or(StabilityError::NotHurwitz)?;
        // Frobenius scaling speeds up the early, far-from-converged steps.
        let mu = if scale { (inv.norm() / a.norm()).sqrt() } else { 1.0 };
        let next_a = (&a * mu + &inv / mu) * 0.5;
        c = (&c * mu + inv.transpose() * &c * &inv / mu) * 0.5;
        let change = (&next_a - &a).norm();
        a = next_a;
        if change < 1e-2 * a.norm() {
            scale = false;
        }
        if change <= 1e-13 * a.norm() {
            break;
        }
    }
    if !c.iter().all(|v| v.is_finite()) || (&a + DMatrix::identity(n, n)).norm() > 1e-6 * (n as f64).sqrt() {
        return Err(StabilityError::NotHurwitz);
    }
    Ok(c * 0.5)
}

/// Solves `FᵀQ + QF = -ηI` for symmetric positive definite `Q`.
pub fn lyapunov_solve(f: &DMatrix<f64>, eta: f64) -> Result<DMatrix<f64>, StabilityError> {
    let n = f.nrows();
    if f.ncols() != n {
        return Err(StabilityError::DimensionMismatch(DimensionMismatch {
            what: "Lyapunov matrix columns",
            expected: n,
            found: f.ncols(),
        }));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(StabilityError::InvalidEta(eta));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(StabilityError::NonFinite);
    }
    let mut q = solve_sign(f, &(DMatrix::identity(n, n) * eta))?;
    // One correction step on the residual equation.
    let residual = f.transpose() * &q + &q * f + DMatrix::identity(n, n) * eta;
    if residual.norm() > 1e-14 * q.norm() {
        q += solve_sign(f, &residual)?;
    }
    let q = (&q + q.transpose()) * 0.5;
    if SymmetricEigen::new(q.clone()).eigenvalues.min() <= 0.0 {
        return Err(StabilityError::NotHurwitz);
    }
    Ok(q)
}

/// `‖FᵀQ + QF + ηI‖_F`.
pub fn lyapunov_residual(f: &DMatrix<f64>, q: &DMatrix<f64>, eta: f64) -> f64 {
    let n = f.nrows();
    (f.transpose() * q + q * f + DMatrix::identity(n, n) * eta).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar() {
        let q = lyapunov_solve(&DMatrix::from_element(1, 1, -1.0), 2.0).unwrap();
        assert!((q[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_by_two_by_hand() {
        let f = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -1.0]);
        let q = lyapunov_solve(&f, 2.0).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        assert!((q - want).norm() < 1e-12);
    }

    #[test]
    fn unstable_is_rejected() {
        assert_eq!(
            lyapunov_solve(&DMatrix::from_element(1, 1, 1.0), 1.0),
            Err(StabilityError::NotHurwitz)
        );
        let centre = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert_eq!(lyapunov_solve(&centre, 1.0), Err(StabilityError::NotHurwitz));
        let saddle = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.5]);
        assert_eq!(lyapunov_solve(&saddle, 1.0), Err(StabilityError::NotHurwitz));
        assert_eq!(lyapunov_solve(&DMatrix::zeros(2, 2), 1.0), Err(StabilityError::NotHurwitz));
    }

    #[test]
    fn bad_arguments() {
        let f = DMatrix::from_element(1, 1, -1.0);
        assert_eq!(lyapunov_solve(&f, 0.0), Err(StabilityError::InvalidEta(0.0)));
        assert!(lyapunov_solve(&DMatrix::zeros(2, 3), 1.0).is_err());
    }

    #[test]
    fn complex_spectrum_residual() {
        let f = DMatrix::from_row_slice(3, 3, &[-0.5, 4.0, 0.0, -4.0, -0.5, 1.0, 0.3, 0.0, -2.0]);
        let q = lyapunov_solve(&f, 1.0).unwrap();
        assert!(lyapunov_residual(&f, &q, 1.0) < 1e-10 * q.norm());
        assert_eq!(q, q.transpose());
    }

    #[test]
    fn repeated_eigenvalues() {
        // Companion of (s + 1)^3 repeated on a block diagonal: defective and repeated.
        let c = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -1.0, -3.0, -3.0]);
        let f = c.kronecker(&DMatrix::<f64>::identity(4, 4));
        let q = lyapunov_solve(&f, 1.0).unwrap();
        assert!(lyapunov_residual(&f, &q, 1.0) < 1e-10 * q.norm());
    }
}
