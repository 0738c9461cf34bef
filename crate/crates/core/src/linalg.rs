//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative eigenvalue floor for positive definiteness.
pub const PD_REL_TOL: f64 = 1e-10;

/// Negative-eigenvalue allowance (relative to the trace) for PSD checks.
pub const PSD_TRACE_TOL: f64 = 1e-10;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest |m_ij - m_ji| relative to the largest |m_ij|.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).amax() / scale
}

/// (smallest, largest) eigenvalue of a symmetric matrix.
pub fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let ev = symmetrize(m).symmetric_eigenvalues();
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Scale-free positive-definiteness test: λ_min > 1e-10 · λ_max.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    if m.nrows() == 0 {
        return true;
    }
    if !m.iter().all(|x| x.is_finite()) {
        return false;
    }
    let (lo, hi) = eigen_range(m);
    hi > 0.0 && lo > PD_REL_TOL * hi
}

pub fn require_positive_definite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if is_positive_definite(m) {
        Ok(())
    } else {
        let (lo, hi) = eigen_range(m);
        Err(Error::NotPositiveDefinite(format!(
            "{what}: eigenvalues in [{lo:.3e}, {hi:.3e}]"
        )))
    }
}

/// Solve `a x = b` through a fully pivoted LU factorization.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    if a.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let lu = a.clone().full_piv_lu();
    if !lu.is_invertible() {
        return Err(Error::Singular(what.to_string()));
    }
    lu.solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(what.to_string()))
}

/// Matrix version of [`solve`].
pub fn solve_mat(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if a.nrows() == 0 {
        return Ok(DMatrix::zeros(0, b.ncols()));
    }
    let lu = a.clone().full_piv_lu();
    if !lu.is_invertible() {
        return Err(Error::Singular(what.to_string()));
    }
    lu.solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(what.to_string()))
}

/// Check that a symmetric matrix is PSD up to `-PSD_TRACE_TOL * trace` and
/// return a copy with the negative eigenvalues clipped to zero.
pub fn clip_psd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let sym = symmetrize(m);
    let trace = sym.trace().abs().max(f64::MIN_POSITIVE);
    let eig = sym.clone().symmetric_eigen();
    let lo = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if lo < -PSD_TRACE_TOL * trace {
        return Err(Error::NotPsd(format!(
            "{what}: smallest eigenvalue {lo:.3e} (trace {trace:.3e})"
        )));
    }
    if lo >= 0.0 {
        return Ok(sym);
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let q = &eig.eigenvectors;
    Ok(symmetrize(
        &(q * DMatrix::from_diagonal(&clipped) * q.transpose()),
    ))
}

/// Lower-triangular `L` with `L Lᵀ = m` for a PSD matrix. Pivots that fall to
/// roundoff level are treated as exact zeros, which is what lets boundary
/// cases such as R²_long = 1 be factored.
pub fn psd_cholesky(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let a = clip_psd(m, what)?;
    let n = a.nrows();
    let scale = a.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 1e-12 * scale {
            // zero pivot: the column is (numerically) a combination of earlier ones
            continue;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pd_check_is_scale_free() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert!(is_positive_definite(&m));
        assert!(is_positive_definite(&(m.clone() * 1e-8)));
        assert!(is_positive_definite(&(m * 1e8)));
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(!is_positive_definite(&singular));
    }

    #[test]
    fn psd_cholesky_handles_rank_deficiency() {
        // rank-2 matrix in 3 dimensions
        let v = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 1.0, 3.0, 1.0]);
        let m = &v * v.transpose();
        let l = psd_cholesky(&m, "test").unwrap();
        let back = &l * l.transpose();
        assert!((back - m).amax() < 1e-12);
    }

    #[test]
    fn clip_psd_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(clip_psd(&m, "x"), Err(Error::NotPsd(_))));
    }

    #[test]
    fn solve_detects_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert!(solve(&a, &b, "a").is_err());
    }
}
