//! Extended orthonormal-polynomial bases for the correlated function
//! expansion.
//!
//! Inputs are first mapped affinely onto `[-1, 1]^d`. The design matrix then
//! holds one column per expansion term. A term is a variable subset
//! `{j1 < … < jk}` with `k ≤ M` together with a degree tuple `(m1, …, mk)`,
//! `1 ≤ mi ≤ s`, and evaluates to `φ_{m1}(z_{j1}) ··· φ_{mk}(z_{jk})`.
//!
//! Column order: subsets by increasing size, lexicographic within a size;
//! for each subset, degree tuples in lexicographic order. The constant term
//! is not part of the matrix; the mean response is handled by the caller.
//!
//! The nested sums over `r` in the usual written form of the expansion
//! index degrees ambiguously; this module implements the plain tensor-product
//! enumeration per variable subset.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack allowed when checking samples against their bounds.
pub const BOUNDS_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PolynomialFamily {
    /// Legendre polynomials scaled to unit norm under the uniform
    /// probability measure on `[-1, 1]`.
    #[default]
    Legendre,
}

impl PolynomialFamily {
    /// Fill `out[m-1] = φ_m(z)` for `m = 1..=out.len()`.
    pub fn eval_into(&self, z: f64, out: &mut [f64]) {
        match self {
            PolynomialFamily::Legendre => {
                let mut p_prev = 1.0;
                let mut p = z;
                for (i, slot) in out.iter_mut().enumerate() {
                    let m = i + 1;
                    if m > 1 {
                        let mf = (m - 1) as f64;
                        let next = ((2.0 * mf + 1.0) * z * p - mf * p_prev) / (mf + 1.0);
                        p_prev = p;
                        p = next;
                    }
                    *slot = ((2 * m + 1) as f64).sqrt() * p;
                }
            }
        }
    }

    /// Single orthonormal polynomial `φ_m(z)`, `φ_0 = 1`.
    pub fn eval(&self, m: usize, z: f64) -> f64 {
        if m == 0 {
            return 1.0;
        }
        let mut buf = vec![0.0; m];
        self.eval_into(z, &mut buf);
        buf[m - 1]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    #[serde(default)]
    pub family: PolynomialFamily,
    /// Highest univariate degree `s`.
    pub degree: usize,
    /// Largest variable-subset size `M`.
    pub interaction_order: usize,
}

impl Default for BasisSpec {
    fn default() -> Self {
        BasisSpec {
            family: PolynomialFamily::Legendre,
            degree: 5,
            interaction_order: 2,
        }
    }
}

/// One column of the design matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub vars: Vec<usize>,
    pub degrees: Vec<usize>,
}

impl Term {
    pub fn label(&self) -> String {
        self.vars
            .iter()
            .zip(&self.degrees)
            .map(|(v, m)| format!("P{}(z{})", m, v + 1))
            .collect::<Vec<_>>()
            .join("*")
    }
}

impl BasisSpec {
    pub fn new(degree: usize, interaction_order: usize) -> Self {
        BasisSpec {
            family: PolynomialFamily::Legendre,
            degree,
            interaction_order,
        }
    }

    /// Check the spec against an input dimension `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.degree == 0 {
            return Err(Error::InvalidParameter("basis degree must be >= 1".into()));
        }
        if self.interaction_order == 0 {
            return Err(Error::InvalidParameter(
                "interaction order must be >= 1".into(),
            ));
        }
        if self.interaction_order > d {
            return Err(Error::InvalidParameter(format!(
                "interaction order {} exceeds input dimension {}",
                self.interaction_order, d
            )));
        }
        Ok(())
    }

    /// Interaction order actually used for dimension `d` (clamped to `d`).
    pub fn effective_order(&self, d: usize) -> usize {
        self.interaction_order.min(d)
    }

    /// Number of columns `q = Σ_{k=1}^{M} C(d, k) s^k`.
    pub fn num_terms(&self, d: usize) -> usize {
        let m = self.effective_order(d);
        (1..=m)
            .map(|k| binomial(d, k) * self.degree.pow(k as u32))
            .sum()
    }

    /// Enumerate terms in column order.
    pub fn terms(&self, d: usize) -> Vec<Term> {
        let mut out = Vec::with_capacity(self.num_terms(d));
        for k in 1..=self.effective_order(d) {
            for vars in combinations(d, k) {
                for degrees in degree_tuples(k, self.degree) {
                    out.push(Term {
                        vars: vars.clone(),
                        degrees,
                    });
                }
            }
        }
        out
    }

    /// Column headers, stable across runs.
    pub fn column_labels(&self, d: usize) -> Vec<String> {
        self.terms(d).iter().map(Term::label).collect()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn extend(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            extend(v + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    extend(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn degree_tuples(k: usize, s: usize) -> Vec<Vec<usize>> {
    let total = s.pow(k as u32);
    (0..total)
        .map(|mut code| {
            let mut t = vec![0; k];
            for slot in t.iter_mut().rev() {
                *slot = code % s + 1;
                code /= s;
            }
            t
        })
        .collect()
}

/// Axis-aligned box holding the input domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl InputBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch(format!(
                "lower has {} entries, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.is_empty() {
            return Err(Error::InvalidParameter("bounds must be non-empty".into()));
        }
        for (j, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidParameter(format!(
                    "bounds for column {j} are not an interval: [{l}, {u}]"
                )));
            }
        }
        Ok(InputBounds { lower, upper })
    }

    pub fn unit(d: usize) -> Self {
        InputBounds {
            lower: vec![0.0; d],
            upper: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Append one coordinate interval.
    pub fn extended(&self, lower: f64, upper: f64) -> Result<Self> {
        let mut lo = self.lower.clone();
        let mut hi = self.upper.clone();
        lo.push(lower);
        hi.push(upper);
        InputBounds::new(lo, hi)
    }

    fn map(&self, x: f64, j: usize) -> f64 {
        2.0 * (x - self.lower[j]) / (self.upper[j] - self.lower[j]) - 1.0
    }

    /// Affine map onto `[-1, 1]^d`; every sample must lie within the bounds.
    pub fn normalize(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                let v = x[(i, j)];
                if !(v >= self.lower[j] - BOUNDS_TOLERANCE && v <= self.upper[j] + BOUNDS_TOLERANCE)
                {
                    return Err(Error::OutOfBounds {
                        row: i,
                        col: j,
                        value: v,
                        lower: self.lower[j],
                        upper: self.upper[j],
                    });
                }
            }
        }
        Ok(self.normalize_unchecked(x))
    }

    /// Same map without the bounds check; the second value reports whether
    /// any sample fell outside the box.
    pub fn normalize_lenient(&self, x: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
        self.check_dim(x)?;
        let outside = (0..x.nrows()).any(|i| {
            (0..x.ncols()).any(|j| {
                let v = x[(i, j)];
                v < self.lower[j] - BOUNDS_TOLERANCE || v > self.upper[j] + BOUNDS_TOLERANCE
            })
        });
        Ok((self.normalize_unchecked(x), outside))
    }

    fn normalize_unchecked(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| self.map(x[(i, j)], j))
    }

    fn check_dim(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "inputs have {} columns, bounds have {}",
                x.ncols(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Normalize `x` into `[-1, 1]^d` under `bounds`.
pub fn normalize_inputs(bounds: &InputBounds, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    bounds.normalize(x)
}

/// Evaluate the design matrix `Ψ` (n × q) on normalized inputs.
pub fn build_design_matrix(spec: &BasisSpec, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, d) = z.shape();
    if n == 0 {
        return Err(Error::InsufficientData("empty input matrix".into()));
    }
    spec.validate(d)?;
    let terms = spec.terms(d);
    let s = spec.degree;
    let mut psi = DMatrix::zeros(n, terms.len());
    let mut uni = vec![0.0; d * s];
    for i in 0..n {
        for j in 0..d {
            spec.family.eval_into(z[(i, j)], &mut uni[j * s..(j + 1) * s]);
        }
        for (c, term) in terms.iter().enumerate() {
            let mut v = 1.0;
            for (&var, &m) in term.vars.iter().zip(&term.degrees) {
                v *= uni[var * s + m - 1];
            }
            psi[(i, c)] = v;
        }
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normalize_examples() {
        let b = InputBounds::new(vec![0.0], vec![1.0]).unwrap();
        let z = normalize_inputs(&b, &DMatrix::from_element(1, 1, 0.5)).unwrap();
        assert_eq!(z[(0, 0)], 0.0);

        let b = InputBounds::new(vec![-1.0], vec![1.0]).unwrap();
        let z = normalize_inputs(&b, &DMatrix::from_element(1, 1, 0.3)).unwrap();
        assert_abs_diff_eq!(z[(0, 0)], 0.3, epsilon = 1e-15);

        let b = InputBounds::new(vec![2.0], vec![4.0]).unwrap();
        let z = normalize_inputs(&b, &DMatrix::from_element(1, 1, 4.0)).unwrap();
        assert_eq!(z[(0, 0)], 1.0);
    }

    #[test]
    fn normalize_reports_offending_sample() {
        let b = InputBounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.2, 1.5]);
        match normalize_inputs(&b, &x) {
            Err(Error::OutOfBounds { row, col, .. }) => assert_eq!((row, col), (1, 1)),
            other => panic!("expected out-of-bounds, got {other:?}"),
        }
        let bad = DMatrix::from_row_slice(1, 3, &[0.1, 0.2, 0.3]);
        assert!(matches!(
            normalize_inputs(&b, &bad),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn bounds_reject_empty_interval() {
        assert!(InputBounds::new(vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn design_row_examples() {
        let z = DMatrix::from_element(1, 1, 0.0);
        let psi = build_design_matrix(&BasisSpec::new(2, 1), &z).unwrap();
        assert_abs_diff_eq!(psi[(0, 0)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(psi[(0, 1)], -1.118_034_0, epsilon = 1e-7);

        let z = DMatrix::from_element(1, 1, 1.0);
        let psi = build_design_matrix(&BasisSpec::new(1, 1), &z).unwrap();
        assert_abs_diff_eq!(psi[(0, 0)], 1.732_050_8, epsilon = 1e-7);
    }

    #[test]
    fn column_count_and_order() {
        let spec = BasisSpec::new(2, 2);
        assert_eq!(spec.num_terms(2), 8);
        assert_eq!(
            spec.column_labels(2),
            vec![
                "P1(z1)",
                "P2(z1)",
                "P1(z2)",
                "P2(z2)",
                "P1(z1)*P1(z2)",
                "P1(z1)*P2(z2)",
                "P2(z1)*P1(z2)",
                "P2(z1)*P2(z2)"
            ]
        );
        assert_eq!(BasisSpec::new(3, 2).num_terms(5), 5 * 3 + 10 * 9);
        assert_eq!(BasisSpec::new(2, 3).num_terms(3), 3 * 2 + 3 * 4 + 8);
    }

    #[test]
    fn order_exceeding_dimension_is_rejected() {
        let z = DMatrix::from_element(3, 1, 0.1);
        assert!(build_design_matrix(&BasisSpec::new(2, 2), &z).is_err());
        let empty = DMatrix::<f64>::zeros(0, 1);
        assert!(build_design_matrix(&BasisSpec::new(2, 1), &empty).is_err());
    }

    #[test]
    fn closed_forms_match_recurrence() {
        let f = PolynomialFamily::Legendre;
        for &z in &[-0.9, -0.3, 0.0, 0.4, 1.0] {
            assert_abs_diff_eq!(f.eval(1, z), 3f64.sqrt() * z, epsilon = 1e-14);
            assert_abs_diff_eq!(
                f.eval(2, z),
                5f64.sqrt() * (3.0 * z * z - 1.0) / 2.0,
                epsilon = 1e-14
            );
            assert_abs_diff_eq!(
                f.eval(3, z),
                7f64.sqrt() * (5.0 * z * z * z - 3.0 * z) / 2.0,
                epsilon = 1e-14
            );
        }
    }
}
