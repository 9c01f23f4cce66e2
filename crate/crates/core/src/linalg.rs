//! Small dense helpers on top of nalgebra: ordered SVD, pseudo-inverse,
//! numerical rank.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular value decomposition with singular values sorted in
/// non-increasing order. Returns `(U, sigma, V)` with `A = U diag(sigma) Vᵀ`.
pub fn ordered_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (nr, nc) = a.shape();
    if nr == 0 || nc == 0 {
        return Err(Error::DimensionMismatch("SVD of an empty matrix".into()));
    }
    let svd = a.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Singular("SVD did not return U".into()))?;
    let vt = svd
        .v_t
        .ok_or_else(|| Error::Singular("SVD did not return Vᵀ".into()))?;
    let s = svd.singular_values;
    let k = s.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));
    let mut u_s = DMatrix::zeros(nr, k);
    let mut v_s = DMatrix::zeros(nc, k);
    let mut s_s = DVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        u_s.set_column(dst, &u.column(src));
        v_s.set_column(dst, &vt.row(src).transpose());
        s_s[dst] = s[src];
    }
    Ok((u_s, s_s, v_s))
}

/// Number of singular values above `rtol * max(sigma)`.
pub fn numerical_rank(sigma: &DVector<f64>, rtol: f64) -> usize {
    let smax = sigma.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > rtol * smax).count()
}

/// Moore-Penrose pseudo-inverse with relative singular-value cutoff.
/// Returns the pseudo-inverse together with the numerical rank used.
pub fn pinv(a: &DMatrix<f64>, rtol: f64) -> Result<(DMatrix<f64>, usize)> {
    let (u, s, v) = ordered_svd(a)?;
    let rank = numerical_rank(&s, rtol);
    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    for i in 0..rank {
        let vi = v.column(i);
        let ui = u.column(i);
        out += (vi * ui.transpose()) / s[i];
    }
    Ok((out, rank))
}

/// Complete `V` (n×k, orthonormal columns, k ≤ n) to an n×n orthonormal basis
/// by Gram-Schmidt against the canonical vectors.
pub fn complete_basis(v: &DMatrix<f64>) -> DMatrix<f64> {
    let n = v.nrows();
    let mut cols: Vec<DVector<f64>> = v.column_iter().map(|c| c.into_owned()).collect();
    let mut e = 0;
    while cols.len() < n && e < n {
        let mut cand = DVector::zeros(n);
        cand[e] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let p = c.dot(&cand);
                cand -= c * p;
            }
        }
        let nrm = cand.norm();
        if nrm > 1e-8 {
            cols.push(cand / nrm);
        }
        e += 1;
    }
    DMatrix::from_columns(&cols)
}
