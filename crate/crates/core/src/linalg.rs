//! Small dense linear-algebra helpers shared by the bound, the baselines and
//! the evaluation code.

use nalgebra::{DMatrix, DVector};

/// Determinants with magnitude below this are treated as singular.
pub const SINGULAR_DET: f64 = 1e-300;

/// `ln |det a|` and the sign of `det a`, from a partially pivoted LU
/// factorisation. Returns `None` when `|det a|` underflows [`SINGULAR_DET`].
pub fn log_abs_det(a: &DMatrix<f64>) -> Option<(f64, f64)> {
    debug_assert!(a.is_square());
    if a.nrows() == 0 {
        return Some((0.0, 1.0));
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let mut log_det = 0.0;
    let mut sign = 1.0;
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        log_det += d.abs().ln();
        if d < 0.0 {
            sign = -sign;
        }
    }
    // each row transposition flips the sign
    if lu.p().determinant::<f64>() < 0.0 {
        sign = -sign;
    }
    if log_det < SINGULAR_DET.ln() || !log_det.is_finite() {
        return None;
    }
    Some((log_det, sign))
}

/// Moore-Penrose pseudo-inverse via SVD, singular values below
/// `max(m, n) * eps * sigma_max` are discarded.
pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return DMatrix::zeros(n, m);
    }
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let cutoff = (m.max(n) as f64) * f64::EPSILON * sigma_max;
    let u = svd.u.as_ref().expect("u requested");
    let mut scaled = svd.v_t.clone().expect("v_t requested");
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let inv = if s > cutoff { 1.0 / s } else { 0.0 };
        scaled.row_mut(k).scale_mut(inv);
    }
    scaled.tr_mul(&u.transpose())
}

/// Solve `a x = b` for symmetric positive definite `a`, or `None` if the
/// Cholesky factorisation fails.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().cholesky().map(|c| c.solve(b))
}

/// Inverse of a symmetric positive definite matrix through its Cholesky
/// factor, symmetrised.
pub fn spd_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let inv = spd_solve(a, &DMatrix::identity(n, n))?;
    Some((&inv + inv.transpose()) * 0.5)
}

pub fn frobenius_sq(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

pub fn all_finite_vec(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn all_finite_mat(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_det_matches_determinant() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, -1.0, 3.0, 1.0, 0.5, 0.0, -2.0]);
        let det = a.determinant();
        let (ld, sign) = log_abs_det(&a).unwrap();
        assert_relative_eq!(ld, det.abs().ln(), epsilon = 1e-12);
        assert_eq!(sign, det.signum());
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(log_abs_det(&a).is_none());
        let tiny = DMatrix::from_diagonal_element(4, 4, 1e-80);
        assert!(log_abs_det(&tiny).is_none());
    }

    #[test]
    fn pinv_of_invertible_is_inverse() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 2.0, 3.0]);
        let p = pinv(&a);
        let inv = a.clone().try_inverse().unwrap();
        assert_relative_eq!(p, inv, epsilon = 1e-12);
    }

    #[test]
    fn pinv_of_rank_one() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let p = pinv(&a);
        // Penrose conditions
        assert_relative_eq!(&a * &p * &a, a, epsilon = 1e-12);
        assert_relative_eq!(&p * &a * &p, p, epsilon = 1e-12);
    }
}
