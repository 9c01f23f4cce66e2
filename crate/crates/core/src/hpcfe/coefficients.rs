//! Coefficient solve for the weighted normal equations `C α = D`.
//!
//! `C = Ψᵀ R⁻¹ Ψ` built on an extended basis has redundant rows. After they
//! are removed the reduced system `C' α = D'` is under-determined and the
//! least-squares solution set is an affine space. A particular element is
//! chosen by the homotopy projection
//!
//! ```text
//! α₀   = C'⁺ D'
//! P    = I − C'⁺ C'                      (projector onto null(C'))
//! P W  = U diag(D_r, 0) Vᵀ
//! α_HA = V_{q−r} (U_{q−r}ᵀ V_{q−r})⁻¹ U_{q−r}ᵀ α₀
//! ```
//!
//! where `U_{q−r}`, `V_{q−r}` are the trailing `q − r` singular vectors and
//! `r = rank(P W)`. With `W = I` this returns the minimum-norm solution.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, ordered_svd, pinv};

/// Drop redundant rows of `(C, D)`.
///
/// A row is dropped when it is zero, when it matches an earlier kept row to
/// within `dedup_tol` relative difference, or when it is linearly dependent
/// on the rows kept so far (Gram-Schmidt residual below `rank_tol` of the
/// largest row norm).
pub fn reduce_system(
    c: &DMatrix<f64>,
    d: &DVector<f64>,
    dedup_tol: f64,
    rank_tol: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if c.nrows() != d.len() {
        return Err(Error::DimensionMismatch(format!(
            "C has {} rows, D has {}",
            c.nrows(),
            d.len()
        )));
    }
    let q = c.ncols();
    let max_norm = c.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    if max_norm == 0.0 {
        return Err(Error::Degenerate("coefficient matrix is identically zero".into()));
    }
    let mut kept: Vec<usize> = Vec::new();
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    for i in 0..c.nrows() {
        let row = c.row(i).transpose();
        let nrm = row.norm();
        if nrm == 0.0 {
            continue;
        }
        let duplicate = kept.iter().any(|&k| {
            let other = c.row(k).transpose();
            let scale = nrm.max(other.norm());
            (&row - &other).norm() <= dedup_tol * scale
        });
        if duplicate {
            continue;
        }
        let mut resid = row.clone();
        for _ in 0..2 {
            for o in &ortho {
                let p = o.dot(&resid);
                resid -= o * p;
            }
        }
        let rn = resid.norm();
        if rn <= rank_tol * max_norm {
            continue;
        }
        ortho.push(resid / rn);
        kept.push(i);
    }
    let mut c_red = DMatrix::zeros(kept.len(), q);
    let mut d_red = DVector::zeros(kept.len());
    for (dst, &src) in kept.iter().enumerate() {
        c_red.set_row(dst, &c.row(src));
        d_red[dst] = d[src];
    }
    Ok((c_red, d_red))
}

/// Null-space projector `I − C⁺ C` using the pseudo-inverse.
pub fn null_space_projector(c: &DMatrix<f64>, rtol: f64) -> Result<DMatrix<f64>> {
    let (cp, _) = pinv(c, rtol)?;
    Ok(DMatrix::identity(c.ncols(), c.ncols()) - cp * c)
}

/// `I − C⁻¹ C` with an ordinary inverse. Only defined for square
/// non-singular `C`, where it is (numerically) zero, like the pseudo-inverse
/// form.
pub fn null_space_projector_literal(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !c.is_square() {
        return Err(Error::DimensionMismatch(
            "ordinary inverse needs a square matrix".into(),
        ));
    }
    let inv = c
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("C' has no ordinary inverse".into()))?;
    Ok(DMatrix::identity(c.ncols(), c.ncols()) - inv * c)
}

/// Homotopy-projected least-squares solution of `C' α = D'` under weight
/// matrix `W`.
pub fn solve_coefficients(
    c: &DMatrix<f64>,
    d: &DVector<f64>,
    w: &DMatrix<f64>,
    rtol: f64,
) -> Result<DVector<f64>> {
    let q = c.ncols();
    if c.nrows() != d.len() {
        return Err(Error::DimensionMismatch(format!(
            "C' has {} rows, D' has {}",
            c.nrows(),
            d.len()
        )));
    }
    if w.nrows() != q || w.ncols() != q {
        return Err(Error::DimensionMismatch(format!(
            "weight matrix is {}x{}, expected {q}x{q}",
            w.nrows(),
            w.ncols()
        )));
    }
    if c.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("C' is identically zero".into()));
    }

    let (cp, _) = pinv(c, rtol)?;
    let alpha0 = &cp * d;
    let p = DMatrix::identity(q, q) - &cp * c;
    let pw = &p * w;
    let (u, s, v) = ordered_svd(&pw)?;
    let (_, sw, _) = ordered_svd(w)?;
    let w_scale = sw[0];
    if w_scale == 0.0 {
        return Err(Error::Degenerate("weight matrix is zero".into()));
    }
    // P is a projector, so its singular values are 1 or round-off; when C'
    // is ill-conditioned the round-off can exceed rtol, and rank(P W) is
    // bounded by the count of unit ones.
    let (_, sp, _) = ordered_svd(&p)?;
    let rank_p = sp.iter().filter(|&&x| x > 0.5).count();
    // P W has unit-scale singular values times those of W; anything below
    // rtol relative to ‖W‖ is treated as zero.
    let r = s.iter().filter(|&&x| x > rtol * w_scale).count().min(rank_p);
    let k = q - r;
    if k == 0 {
        return Ok(DVector::zeros(q));
    }
    let uk = u.columns(r, k).into_owned();
    let vk = v.columns(r, k).into_owned();
    let m = uk.transpose() * &vk;
    let m_inv = m.try_inverse().ok_or_else(|| {
        Error::Singular("U_{q-r}ᵀ V_{q-r} is singular for this weight matrix".into())
    })?;
    let alpha = vk * m_inv * uk.transpose() * &alpha0;
    // α − α₀ lies in null(C') exactly; projecting it again removes the
    // row-space error that an ill-conditioned Uᵀ V introduces.
    Ok(&alpha0 + &p * (alpha - &alpha0))
}

/// Numerical rank of `C` at relative tolerance `rtol`.
pub fn rank(c: &DMatrix<f64>, rtol: f64) -> Result<usize> {
    let (_, s, _) = ordered_svd(c)?;
    Ok(numerical_rank(&s, rtol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn full_rank_matches_direct_solve() {
        let c = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let d = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let w = DMatrix::identity(3, 3);
        let a = solve_coefficients(&c, &d, &w, 1e-12).unwrap();
        let direct = c.clone().lu().solve(&d).unwrap();
        assert_abs_diff_eq!(a, direct, epsilon = 1e-10);
    }

    #[test]
    fn projector_forms_agree_for_full_rank() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let p = null_space_projector(&c, 1e-12).unwrap();
        let p_lit = null_space_projector_literal(&c).unwrap();
        assert_abs_diff_eq!(p, DMatrix::zeros(2, 2), epsilon = 1e-12);
        assert_abs_diff_eq!(p_lit, DMatrix::zeros(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn literal_projector_rejects_singular() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(null_space_projector_literal(&c).is_err());
        let p = null_space_projector(&c, 1e-12).unwrap();
        // projector onto span{(2, -1)/√5}
        assert_abs_diff_eq!(p[(0, 0)], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(p[(0, 1)], -0.4, epsilon = 1e-12);
    }

    #[test]
    fn zero_system_is_rejected() {
        let c = DMatrix::zeros(2, 3);
        let d = DVector::zeros(2);
        assert!(solve_coefficients(&c, &d, &DMatrix::identity(3, 3), 1e-12).is_err());
        assert!(reduce_system(&c, &d, 1e-12, 1e-12).is_err());
    }

    #[test]
    fn weight_dimension_checked() {
        let c = DMatrix::identity(2, 2);
        let d = DVector::zeros(2);
        assert!(matches!(
            solve_coefficients(&c, &d, &DMatrix::identity(3, 3), 1e-12),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn reduction_drops_duplicates_and_dependent_rows() {
        let c = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 2.0, 0.0, 1.0, 2.0, 0.0, 0.0, 1.0, 1.0, 1.0, 3.0, 1.0],
        );
        let d = DVector::from_vec(vec![1.0, 1.0, 2.0, 3.0]);
        let (cr, dr) = reduce_system(&c, &d, 1e-12, 1e-10).unwrap();
        assert_eq!(cr.nrows(), 2);
        assert_eq!(dr.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn nonidentity_weight_stays_in_solution_set() {
        // one equation, three unknowns
        let c = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let d = DVector::from_vec(vec![3.0]);
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 4.0]));
        let a = solve_coefficients(&c, &d, &w, 1e-12).unwrap();
        assert_abs_diff_eq!((&c * &a)[0], 3.0, epsilon = 1e-10);
    }
}
