//! Stationary correlation kernels and concentrated-likelihood estimation of
//! their lengthscales.
//!
//! The profile objective is
//!
//! ```text
//! J(ℓ) = (1/n) log|R(ℓ)| + log(dᵀ R(ℓ)⁻¹ d)
//! ```
//!
//! and is *minimized*; it is the negative concentrated log-likelihood up to
//! constants. Maximizing it is unbounded.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    #[default]
    SquaredExponential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub lengthscales: Vec<f64>,
    /// Added to the diagonal of the training correlation matrix.
    pub nugget: f64,
    #[serde(default)]
    pub family: KernelFamily,
}

impl KernelSpec {
    pub fn new(lengthscales: Vec<f64>, nugget: f64) -> Result<Self> {
        let spec = KernelSpec {
            lengthscales,
            nugget,
            family: KernelFamily::SquaredExponential,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn isotropic(d: usize, lengthscale: f64, nugget: f64) -> Result<Self> {
        KernelSpec::new(vec![lengthscale; d], nugget)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self
            .lengthscales
            .iter()
            .find(|l| !(l.is_finite() && **l > 0.0))
        {
            return Err(Error::InvalidParameter(format!(
                "lengthscale must be positive and finite, got {l}"
            )));
        }
        if !(self.nugget >= 0.0 && self.nugget.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "nugget must be non-negative, got {}",
                self.nugget
            )));
        }
        Ok(())
    }

    #[inline]
    fn eval_rows(&self, a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
        match self.family {
            KernelFamily::SquaredExponential => {
                let mut s = 0.0;
                for (k, l) in self.lengthscales.iter().enumerate() {
                    let diff = a[(i, k)] - b[(j, k)];
                    s += diff * diff / (l * l);
                }
                (-0.5 * s).exp()
            }
        }
    }
}

fn check_inputs(spec: &KernelSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    spec.validate()?;
    if a.ncols() != spec.dim() || b.ncols() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "kernel has {} lengthscales, inputs have {} and {} columns",
            spec.dim(),
            a.ncols(),
            b.ncols()
        )));
    }
    Ok(())
}

/// Cross-correlation between two point sets, `(i, j) = k(a_i, b_j)`.
/// No nugget is applied.
pub fn corr_matrix(spec: &KernelSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_inputs(spec, a, b)?;
    Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        spec.eval_rows(a, i, b, j)
    }))
}

/// Correlation of a training set with itself, nugget on the diagonal.
pub fn train_corr_matrix(spec: &KernelSpec, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_inputs(spec, a, a)?;
    let n = a.nrows();
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = 1.0 + spec.nugget;
        for j in 0..i {
            let v = spec.eval_rows(a, i, a, j);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(r)
}

/// Cholesky factor of the training correlation matrix.
pub fn factorize(spec: &KernelSpec, a: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let r = train_corr_matrix(spec, a)?;
    Cholesky::new(r).ok_or_else(|| {
        Error::Singular(format!(
            "correlation matrix is not positive definite (nugget {}); duplicate inputs?",
            spec.nugget
        ))
    })
}

/// Options for [`fit_hyperparameters`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelFitOptions {
    pub lower: f64,
    pub upper: f64,
    pub nugget: f64,
    /// Number of isotropic log-spaced starting points.
    pub starts: usize,
    /// How many of the best starts are refined coordinate-wise.
    pub refine: usize,
    pub max_sweeps: usize,
    /// Golden-section tolerance in log-lengthscale.
    pub tolerance: f64,
}

impl Default for KernelFitOptions {
    fn default() -> Self {
        KernelFitOptions {
            lower: 1e-2,
            upper: 1e2,
            nugget: 1e-8,
            starts: 8,
            refine: 3,
            max_sweeps: 3,
            tolerance: 1e-3,
        }
    }
}

impl KernelFitOptions {
    fn validate(&self) -> Result<()> {
        if !(self.lower > 0.0 && self.upper > self.lower && self.upper.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lengthscale bounds must satisfy 0 < lower < upper, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        if self.starts == 0 {
            return Err(Error::InvalidParameter("need at least one start".into()));
        }
        if !(self.nugget >= 0.0) {
            return Err(Error::InvalidParameter("nugget must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelFit {
    pub spec: KernelSpec,
    /// Process variance `dᵀ R⁻¹ d / n` at the optimum.
    pub sigma2: f64,
    /// Concentrated objective at the optimum.
    pub objective: f64,
    /// Objective at every multi-start seed, in seed order.
    pub seed_objectives: Vec<f64>,
}

/// Concentrated objective at `spec`. Returns `+∞` when the correlation
/// matrix cannot be factorized.
pub fn concentrated_objective(spec: &KernelSpec, z: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
    let dd = d.norm_squared();
    match scaled_objective(spec, z, d) {
        Some(v) => v + dd.ln(),
        None => f64::INFINITY,
    }
}

/// `(1/n) log|R| + log(dᵀR⁻¹d / dᵀd)`: the objective with the data scale
/// removed, so its argmin is exactly invariant to scaling `d`.
fn scaled_objective(spec: &KernelSpec, z: &DMatrix<f64>, d: &DVector<f64>) -> Option<f64> {
    let chol = factorize(spec, z).ok()?;
    let n = z.nrows() as f64;
    let l = chol.l_dirty();
    let mut logdet = 0.0;
    for i in 0..z.nrows() {
        logdet += 2.0 * l[(i, i)].ln();
    }
    let quad = chol.solve(d).dot(d);
    let ratio = quad / d.norm_squared();
    if !(ratio > 0.0 && ratio.is_finite() && logdet.is_finite()) {
        return None;
    }
    Some(logdet / n + ratio.ln())
}

fn has_duplicate_rows(z: &DMatrix<f64>) -> bool {
    let n = z.nrows();
    (0..n).any(|i| (0..i).any(|j| z.row(i) == z.row(j)))
}

/// Fit lengthscales by minimizing the concentrated objective over
/// `[lower, upper]^d`, then report `σ² = dᵀR⁻¹d / n`.
///
/// Search: `starts` isotropic seeds, log-spaced over the box; the `refine`
/// best seeds are improved by coordinate-wise golden-section sweeps in
/// log-lengthscale. The result is never worse than any seed. Ties are broken
/// by seed index, so the outcome does not depend on evaluation order.
pub fn fit_hyperparameters(
    z: &DMatrix<f64>,
    dvec: &DVector<f64>,
    opts: &KernelFitOptions,
) -> Result<KernelFit> {
    fit_hyperparameters_seeded(z, dvec, opts, None)
}

/// As [`fit_hyperparameters`], with an optional extra seed (for example the
/// previous estimate in an outer iteration).
pub fn fit_hyperparameters_seeded(
    z: &DMatrix<f64>,
    dvec: &DVector<f64>,
    opts: &KernelFitOptions,
    extra_seed: Option<&[f64]>,
) -> Result<KernelFit> {
    check_fit_inputs(z, dvec, opts)?;
    let (n, dim) = z.shape();
    let lo = opts.lower.ln();
    let hi = opts.upper.ln();
    let eval = |logl: &[f64]| -> f64 {
        let spec = KernelSpec {
            lengthscales: logl.iter().map(|v| v.exp()).collect(),
            nugget: opts.nugget,
            family: KernelFamily::SquaredExponential,
        };
        scaled_objective(&spec, z, dvec).unwrap_or(f64::INFINITY)
    };

    let mut seeds: Vec<Vec<f64>> = (0..opts.starts)
        .map(|i| {
            let t = (i as f64 + 0.5) / opts.starts as f64;
            vec![lo + t * (hi - lo); dim]
        })
        .collect();
    if let Some(s) = extra_seed {
        if s.len() == dim && s.iter().all(|v| *v > 0.0) {
            seeds.push(s.iter().map(|v| v.ln().clamp(lo, hi)).collect());
        }
    }
    let seed_vals: Vec<f64> = seeds.par_iter().map(|s| eval(s)).collect();

    let mut order: Vec<usize> = (0..seeds.len()).collect();
    order.sort_by(|&a, &b| seed_vals[a].total_cmp(&seed_vals[b]).then(a.cmp(&b)));
    let step = (hi - lo) / opts.starts as f64;
    let sweeps = if dim == 1 { 1 } else { opts.max_sweeps.max(1) };

    let refined: Vec<(Vec<f64>, f64)> = order
        .iter()
        .take(opts.refine)
        .filter(|&&i| seed_vals[i].is_finite())
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&i| {
            coordinate_descent(&eval, seeds[i].clone(), seed_vals[i], lo, hi, step, sweeps, opts.tolerance)
        })
        .collect();

    let mut best: Option<(Vec<f64>, f64)> = None;
    let candidates = seeds
        .iter()
        .cloned()
        .zip(seed_vals.iter().cloned())
        .chain(refined);
    for (x, v) in candidates {
        let better = match &best {
            None => v.is_finite(),
            Some((_, bv)) => v < *bv,
        };
        if better {
            best = Some((x, v));
        }
    }
    let (logl, _) = best.ok_or_else(|| {
        Error::Singular("correlation matrix singular for every candidate lengthscale".into())
    })?;
    finish_fit(z, dvec, opts, &logl, seed_vals, n)
}

/// Local refinement of `start` only: one coordinate-wise pass over a
/// half-width window around each lengthscale. Cheap follow-up to a full
/// [`fit_hyperparameters`] when the targets changed only slightly.
pub fn refine_hyperparameters(
    z: &DMatrix<f64>,
    dvec: &DVector<f64>,
    opts: &KernelFitOptions,
    start: &[f64],
) -> Result<KernelFit> {
    check_fit_inputs(z, dvec, opts)?;
    let (n, dim) = z.shape();
    if start.len() != dim || start.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter(
            "refinement start must hold one positive lengthscale per input".into(),
        ));
    }
    let lo = opts.lower.ln();
    let hi = opts.upper.ln();
    let eval = |logl: &[f64]| -> f64 {
        let spec = KernelSpec {
            lengthscales: logl.iter().map(|v| v.exp()).collect(),
            nugget: opts.nugget,
            family: KernelFamily::SquaredExponential,
        };
        scaled_objective(&spec, z, dvec).unwrap_or(f64::INFINITY)
    };
    let x0: Vec<f64> = start.iter().map(|v| v.ln().clamp(lo, hi)).collect();
    let f0 = eval(&x0);
    if !f0.is_finite() {
        return fit_hyperparameters(z, dvec, opts);
    }
    let half = 0.5 * (hi - lo) / opts.starts as f64;
    let sweeps = if dim == 1 { 1 } else { opts.max_sweeps.max(1) };
    let (logl, _) = coordinate_descent(&eval, x0, f0, lo, hi, half, sweeps, opts.tolerance);
    finish_fit(z, dvec, opts, &logl, vec![f0], n)
}

fn check_fit_inputs(z: &DMatrix<f64>, dvec: &DVector<f64>, opts: &KernelFitOptions) -> Result<()> {
    opts.validate()?;
    let n = z.nrows();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "kernel fit needs at least 2 samples, got {n}"
        )));
    }
    if dvec.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} targets for {} inputs",
            dvec.len(),
            n
        )));
    }
    if dvec.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate(
            "residual targets are identically zero".into(),
        ));
    }
    if opts.nugget == 0.0 && has_duplicate_rows(z) {
        return Err(Error::Singular(
            "duplicate inputs with zero nugget make R singular".into(),
        ));
    }

    Ok(())
}

fn finish_fit(
    z: &DMatrix<f64>,
    dvec: &DVector<f64>,
    opts: &KernelFitOptions,
    logl: &[f64],
    seed_vals: Vec<f64>,
    n: usize,
) -> Result<KernelFit> {
    let spec = KernelSpec::new(logl.iter().map(|v| v.exp()).collect(), opts.nugget)?;
    let chol = factorize(&spec, z)?;
    let sigma2 = chol.solve(dvec).dot(dvec) / n as f64;
    let seed_objectives = seed_vals
        .iter()
        .map(|v| v + dvec.norm_squared().ln())
        .collect();
    Ok(KernelFit {
        objective: concentrated_objective(&spec, z, dvec),
        spec,
        sigma2,
        seed_objectives,
    })
}

#[allow(clippy::too_many_arguments)]
fn coordinate_descent<F: Fn(&[f64]) -> f64>(
    f: &F,
    mut x: Vec<f64>,
    mut fx: f64,
    lo: f64,
    hi: f64,
    half_width: f64,
    sweeps: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    for _ in 0..sweeps {
        let start = fx;
        for k in 0..x.len() {
            let a = (x[k] - half_width).max(lo);
            let b = (x[k] + half_width).min(hi);
            let mut probe = x.clone();
            let (xk, fk) = golden_section(
                |t| {
                    probe[k] = t;
                    f(&probe)
                },
                a,
                b,
                tol,
            );
            if fk < fx {
                x[k] = xk;
                fx = fk;
            }
        }
        if !(fx < start - 1e-12 * start.abs().max(1.0)) {
            break;
        }
    }
    (x, fx)
}

/// Golden-section minimization on `[a, b]`; returns the best point seen
/// (including both ends).
pub(crate) fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut best = (a, f(a));
    let fb = f(b);
    if fb < best.1 {
        best = (b, fb);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd || (fc == fd && fc.is_finite()) {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        for (x, v) in [(c, fc), (d, fd)] {
            if v < best.1 {
                best = (x, v);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn single_point_has_unit_plus_nugget() {
        let spec = KernelSpec::isotropic(2, 0.7, 1e-6).unwrap();
        let a = DMatrix::from_row_slice(1, 2, &[0.3, -0.2]);
        let r = train_corr_matrix(&spec, &a).unwrap();
        assert_eq!(r[(0, 0)], 1.0 + 1e-6);
    }

    #[test]
    fn unit_distance_unit_lengthscale() {
        let spec = KernelSpec::isotropic(1, 1.0, 0.0).unwrap();
        let r = corr_matrix(&spec, &col(&[0.0]), &col(&[1.0])).unwrap();
        assert_abs_diff_eq!(r[(0, 0)], 0.606_530_7, epsilon = 1e-7);
    }

    #[test]
    fn long_lengthscale_limit() {
        let spec = KernelSpec::isotropic(1, 1e8, 0.0).unwrap();
        let r = corr_matrix(&spec, &col(&[-1.0, 0.0, 1.0]), &col(&[0.5, 1.0])).unwrap();
        assert!(r.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_lengthscale_and_shapes() {
        assert!(KernelSpec::new(vec![0.0], 0.0).is_err());
        let spec = KernelSpec::isotropic(2, 1.0, 0.0).unwrap();
        assert!(corr_matrix(&spec, &col(&[0.0]), &col(&[1.0])).is_err());
    }

    #[test]
    fn single_sample_is_insufficient() {
        let r = fit_hyperparameters(&col(&[0.0]), &DVector::from_vec(vec![1.0]), &Default::default());
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn zero_targets_are_degenerate() {
        let r = fit_hyperparameters(
            &col(&[0.0, 1.0]),
            &DVector::from_vec(vec![0.0, 0.0]),
            &Default::default(),
        );
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn duplicates_without_nugget_are_singular() {
        let opts = KernelFitOptions {
            nugget: 0.0,
            ..Default::default()
        };
        let r = fit_hyperparameters(
            &col(&[0.2, 0.2, 0.7]),
            &DVector::from_vec(vec![1.0, 1.0, -1.0]),
            &opts,
        );
        assert!(matches!(r, Err(Error::Singular(_))));
    }

    #[test]
    fn two_point_fit_matches_grid_oracle() {
        let z = col(&[0.0, 1.0]);
        let d = DVector::from_vec(vec![1.0, -1.0]);
        let opts = KernelFitOptions::default();
        let fit = fit_hyperparameters(&z, &d, &opts).unwrap();
        let grid_min = (0..200)
            .map(|i| {
                let t = i as f64 / 199.0;
                let l = (opts.lower.ln() + t * (opts.upper.ln() - opts.lower.ln())).exp();
                let spec = KernelSpec::isotropic(1, l, opts.nugget).unwrap();
                concentrated_objective(&spec, &z, &d)
            })
            .fold(f64::INFINITY, f64::min);
        assert!((fit.objective - grid_min).abs() <= 1e-6, "{} vs {}", fit.objective, grid_min);
    }

    #[test]
    fn result_never_worse_than_seeds() {
        let z = DMatrix::from_fn(12, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let d = DVector::from_fn(12, |i, _| (i as f64 * 0.9).sin());
        let fit = fit_hyperparameters(&z, &d, &Default::default()).unwrap();
        for s in &fit.seed_objectives {
            assert!(fit.objective <= *s + 1e-12);
        }
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) = golden_section(|t| (t - 0.3) * (t - 0.3) + 1.0, -2.0, 2.0, 1e-8);
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-6);
        assert_abs_diff_eq!(fx, 1.0, epsilon = 1e-12);
    }
}
