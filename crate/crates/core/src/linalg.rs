//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Number of jitter escalations tried after a failed factorization.
pub const MAX_JITTER_ESCALATIONS: usize = 3;

/// Solves `h x = rhs` for symmetric positive (semi)definite `h`.
///
/// Tries a plain Cholesky first; on failure adds `τ·I` with
/// `τ = 1e-12·tr(h)/M`, growing τ tenfold per escalation.
pub fn solve_spd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let dim = h.nrows();
    if h.ncols() != dim {
        return Err(Error::DimensionMismatch {
            context: "solve_spd (square matrix)",
            expected: dim,
            found: h.ncols(),
        });
    }
    if rhs.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "solve_spd (right-hand side)",
            expected: dim,
            found: rhs.len(),
        });
    }
    if !h.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("Hessian"));
    }

    let trace = h.trace();
    let base = if trace > 0.0 {
        1e-12 * trace / dim as f64
    } else {
        1e-12
    };
    for attempt in 0..=MAX_JITTER_ESCALATIONS {
        let mut m = h.clone();
        if attempt > 0 {
            let tau = base * 10f64.powi(attempt as i32 - 1);
            for i in 0..dim {
                m[(i, i)] += tau;
            }
        }
        if let Some(chol) = Cholesky::new(m) {
            let x = chol.solve(rhs);
            if x.iter().all(|v| v.is_finite()) {
                return Ok(x);
            }
        }
    }
    Err(Error::SolveFailed {
        attempts: MAX_JITTER_ESCALATIONS,
    })
}

/// Copies the lower triangle onto the upper one so `m` is exactly symmetric.
pub fn symmetrize_lower(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            m[(j, i)] = m[(i, j)];
        }
    }
}

pub fn add_diagonal(m: &mut DMatrix<f64>, value: f64) {
    for i in 0..m.nrows().min(m.ncols()) {
        m[(i, i)] += value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_well_conditioned_system() {
        let h = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let x = solve_spd(&h, &b).unwrap();
        assert!((&h * &x - &b).norm() < 1e-14);
    }

    #[test]
    fn jitter_rescues_singular_psd() {
        // rank one, consistent right-hand side
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let x = solve_spd(&h, &b).unwrap();
        assert!(x.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn indefinite_matrix_fails() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(solve_spd(&h, &b), Err(Error::SolveFailed { .. })));
    }

    #[test]
    fn rejects_non_finite() {
        let h = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        let b = DVector::from_vec(vec![1.0]);
        assert!(matches!(solve_spd(&h, &b), Err(Error::NonFinite(_))));
    }
}
