//! Single-fidelity H-PCFE: a global polynomial correlated function expansion
//! trend plus a zero-mean Gaussian-process residual sharing one correlation
//! structure.
//!
//! Training follows the usual sequence (mean response, centered targets,
//! design matrix, kernel fit, weighted normal equations, redundancy removal,
//! homotopy-projected solve) and then alternates kernel fit and coefficient
//! solve until the coefficients settle. `max_iterations = 1` is the plain
//! single pass.
//!
//! Prediction uses the regression-kriging mean
//! `μ(x) = f0 + φ(x)α + r(x) R⁻¹ (d − Ψα)` and the universal-kriging
//! variance
//!
//! ```text
//! s²(x) = σ² { 1 − r R⁻¹ rᵀ + uᵀ (Ψᵀ R⁻¹ Ψ)⁺ u },   u = Ψᵀ R⁻¹ rᵀ − φ(x)ᵀ
//! ```
//!
//! which reduces to the scalar textbook form for a single basis column.

pub mod coefficients;
mod persist;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::basis::{build_design_matrix, BasisSpec, InputBounds};
use crate::error::{Error, Result};
use crate::kernel::{self, corr_matrix, KernelFitOptions, KernelSpec};
use crate::linalg::pinv;

pub use coefficients::{reduce_system, solve_coefficients};
pub use persist::{HpcfeDocument, MODEL_FORMAT, MODEL_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HpcfeConfig {
    pub basis: BasisSpec,
    pub kernel: KernelFitOptions,
    /// GP-only model: no mean response, no polynomial trend.
    #[serde(default)]
    pub zero_mean_trend: bool,
    /// Leading input columns left out of the polynomial trend (the GP still
    /// sees them).
    #[serde(default)]
    pub trend_skip: usize,
    /// Relative singular-value cutoff for pseudo-inverses.
    pub pinv_tolerance: f64,
    /// Relative difference below which two rows of `C` count as duplicates.
    pub dedup_tolerance: f64,
    pub max_iterations: usize,
    /// Stop when `‖Δα‖ ≤ tol · max(1, ‖α‖)`.
    pub coefficient_tolerance: f64,
}

impl Default for HpcfeConfig {
    fn default() -> Self {
        HpcfeConfig {
            basis: BasisSpec::default(),
            kernel: KernelFitOptions::default(),
            zero_mean_trend: false,
            trend_skip: 0,
            pinv_tolerance: 1e-10,
            dedup_tolerance: 1e-12,
            max_iterations: 20,
            coefficient_tolerance: 1e-8,
        }
    }
}

impl HpcfeConfig {
    pub fn with_basis(mut self, degree: usize, interaction_order: usize) -> Self {
        self.basis = BasisSpec::new(degree, interaction_order);
        self
    }

    pub fn gp_only(mut self) -> Self {
        self.zero_mean_trend = true;
        self
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.pinv_tolerance > 0.0 && self.pinv_tolerance < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "pinv tolerance must lie in (0, 1), got {}",
                self.pinv_tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        if !self.zero_mean_trend {
            if self.trend_skip >= d {
                return Err(Error::InvalidParameter(format!(
                    "trend skips {} of {d} inputs",
                    self.trend_skip
                )));
            }
            // interaction orders above d are clamped, the rest must hold
            let dt = d - self.trend_skip;
            let mut b = self.basis.clone();
            b.interaction_order = b.interaction_order.min(dt);
            b.validate(dt)?;
        }
        Ok(())
    }

    fn n_terms(&self, d: usize) -> usize {
        if self.zero_mean_trend {
            0
        } else {
            let dt = d.saturating_sub(self.trend_skip);
            let mut b = self.basis.clone();
            b.interaction_order = b.interaction_order.min(dt);
            b.num_terms(dt)
        }
    }

    fn design(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if self.zero_mean_trend {
            return Ok(DMatrix::zeros(z.nrows(), 0));
        }
        let dt = z.ncols().saturating_sub(self.trend_skip);
        let mut b = self.basis.clone();
        b.interaction_order = b.interaction_order.min(dt);
        build_design_matrix(&b, &z.columns(self.trend_skip, dt).into_owned())
    }
}

/// Factorizations derived from the stored parameters; rebuilt on load.
#[derive(Clone, Debug)]
struct Caches {
    chol: Cholesky<f64, Dyn>,
    /// `R⁻¹ (d − Ψα)`
    weights: DVector<f64>,
    /// `L⁻¹ Ψ`
    whitened_psi: DMatrix<f64>,
    /// `(Ψᵀ R⁻¹ Ψ)⁺`
    gram_pinv: DMatrix<f64>,
}

impl Caches {
    fn build(
        config: &HpcfeConfig,
        kernel: &KernelSpec,
        z: &DMatrix<f64>,
        resid: &DVector<f64>,
    ) -> Result<Self> {
        let chol = kernel::factorize(kernel, z)?;
        let weights = chol.solve(resid);
        let psi = config.design(z)?;
        let whitened_psi = chol.l_dirty().solve_lower_triangular(&psi).ok_or_else(|| {
            Error::Singular("triangular solve with the correlation factor failed".into())
        })?;
        let gram_pinv = if psi.ncols() == 0 {
            DMatrix::zeros(0, 0)
        } else {
            pinv(&(whitened_psi.transpose() * &whitened_psi), config.pinv_tolerance)?.0
        };
        Ok(Caches {
            chol,
            weights,
            whitened_psi,
            gram_pinv,
        })
    }
}

#[derive(Clone, Debug)]
pub struct HpcfeModel {
    config: HpcfeConfig,
    bounds: InputBounds,
    f0: f64,
    alpha: DVector<f64>,
    kernel: KernelSpec,
    sigma2: f64,
    z_train: DMatrix<f64>,
    /// `d − Ψα` at the training inputs.
    resid: DVector<f64>,
    iterations: usize,
    caches: Caches,
}

/// Predictive mean and variance at a batch of points.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub mean: DVector<f64>,
    /// Clamped at zero.
    pub variance: DVector<f64>,
    /// Variance before clamping.
    pub raw_variance: DVector<f64>,
    /// Some query point was outside the training bounds.
    pub extrapolated: bool,
}

impl HpcfeModel {
    /// Train on `x` (n × d, within `bounds`) and targets `y`.
    pub fn train(
        config: &HpcfeConfig,
        bounds: &InputBounds,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
    ) -> Result<Self> {
        Self::train_with_floor(config, bounds, x, y, x.ncols() + 2)
    }

    /// As [`HpcfeModel::train`] with an explicit minimum sample count; upper
    /// cascade stages count only the original inputs, since the appended
    /// columns are functions of them.
    pub(crate) fn train_with_floor(
        config: &HpcfeConfig,
        bounds: &InputBounds,
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        min_samples: usize,
    ) -> Result<Self> {
        let (n, d) = x.shape();
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} outputs for {} inputs",
                y.len(),
                n
            )));
        }
        if n < min_samples.max(2) {
            return Err(Error::InsufficientData(format!(
                "need at least {} samples, got {}",
                min_samples.max(2),
                n
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("training data contains NaN or inf".into()));
        }
        config.validate(d)?;
        let z = bounds.normalize(x)?;

        let f0 = if config.zero_mean_trend { 0.0 } else { y.mean() };
        let dvec = y.map(|v| v - f0);
        let psi = config.design(&z)?;
        let q = psi.ncols();
        let w_ha = DMatrix::identity(q, q);

        let mut alpha = DVector::zeros(q);
        let mut resid = dvec.clone();
        let mut kernel: Option<KernelSpec> = None;
        let mut iterations = 0;
        let d_norm = dvec.norm();

        for _ in 0..config.max_iterations {
            if resid.norm() <= 1e-13 * d_norm || d_norm == 0.0 {
                // Nothing left for the GP; keep the last kernel (or a default).
                break;
            }
            iterations += 1;
            // Full searches while the residual still changes shape (raw
            // response, then first detrended residual); local refinement after.
            let fit = match &kernel {
                Some(k) if iterations > 2 => {
                    kernel::refine_hyperparameters(&z, &resid, &config.kernel, &k.lengthscales)?
                }
                prev => kernel::fit_hyperparameters_seeded(
                    &z,
                    &resid,
                    &config.kernel,
                    prev.as_ref().map(|k| k.lengthscales.as_slice()),
                )?,
            };
            let chol = kernel::factorize(&fit.spec, &z)?;
            kernel = Some(fit.spec);
            if q == 0 {
                break;
            }
            let l = chol.l_dirty();
            let a = l.solve_lower_triangular(&psi).ok_or_else(|| {
                Error::Singular("triangular solve with the correlation factor failed".into())
            })?;
            let b = l.solve_lower_triangular(&dvec).ok_or_else(|| {
                Error::Singular("triangular solve with the correlation factor failed".into())
            })?;
            let c = a.transpose() * &a;
            let rhs = a.transpose() * &b;
            let (c_red, d_red) =
                reduce_system(&c, &rhs, config.dedup_tolerance, config.pinv_tolerance)?;
            let new_alpha = solve_coefficients(&c_red, &d_red, &w_ha, config.pinv_tolerance)?;
            let change = (&new_alpha - &alpha).norm();
            alpha = new_alpha;
            resid = &dvec - &psi * &alpha;
            if change <= config.coefficient_tolerance * alpha.norm().max(1.0) {
                break;
            }
        }

        let kernel = match kernel {
            Some(k) => k,
            None => KernelSpec::isotropic(d, 1.0, config.kernel.nugget)?,
        };
        let caches = Caches::build(config, &kernel, &z, &resid)?;
        let sigma2 = (resid.dot(&caches.weights) / n as f64).max(0.0);
        Ok(HpcfeModel {
            config: config.clone(),
            bounds: bounds.clone(),
            f0,
            alpha,
            kernel,
            sigma2,
            z_train: z,
            resid,
            iterations,
            caches,
        })
    }

    pub fn predict(&self, xstar: &DMatrix<f64>) -> Result<Prediction> {
        let (zs, extrapolated) = self.bounds.normalize_lenient(xstar)?;
        let m = zs.nrows();
        let mut r = corr_matrix(&self.kernel, &zs, &self.z_train)?;
        // Coincident points see the nugget as part of the process, so
        // training data are reproduced exactly.
        let mut prior = vec![1.0; m];
        let nugget = self.kernel.nugget;
        if nugget > 0.0 {
            for i in 0..m {
                for j in 0..self.z_train.nrows() {
                    if zs.row(i) == self.z_train.row(j) {
                        r[(i, j)] += nugget;
                        prior[i] = 1.0 + nugget;
                    }
                }
            }
        }
        let mut mean = &r * &self.caches.weights;
        mean.add_scalar_mut(self.f0);
        let phi = self.config.design(&zs)?;
        if phi.ncols() > 0 {
            mean += &phi * &self.alpha;
        }

        let v = self
            .caches
            .chol
            .l_dirty()
            .solve_lower_triangular(&r.transpose())
            .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
        let mut raw = DVector::zeros(m);
        for i in 0..m {
            let vi = v.column(i);
            let mut s = prior[i] - vi.norm_squared();
            if phi.ncols() > 0 {
                let u = self.caches.whitened_psi.transpose() * vi - phi.row(i).transpose();
                s += (u.transpose() * &self.caches.gram_pinv * &u)[(0, 0)];
            }
            raw[i] = self.sigma2 * s;
        }
        let variance = raw.map(|s| s.max(0.0));
        Ok(Prediction {
            mean,
            variance,
            raw_variance: raw,
            extrapolated,
        })
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    pub fn bounds(&self) -> &InputBounds {
        &self.bounds
    }
    pub fn config(&self) -> &HpcfeConfig {
        &self.config
    }
    pub fn iterations(&self) -> usize {
        self.iterations
    }
    pub fn input_dim(&self) -> usize {
        self.bounds.dim()
    }
    pub fn n_train(&self) -> usize {
        self.z_train.nrows()
    }
    pub fn train_residuals(&self) -> &DVector<f64> {
        &self.resid
    }

    /// Training inputs in original coordinates.
    pub fn train_inputs(&self) -> DMatrix<f64> {
        let b = &self.bounds;
        DMatrix::from_fn(self.z_train.nrows(), self.z_train.ncols(), |i, j| {
            b.lower[j] + (self.z_train[(i, j)] + 1.0) * 0.5 * (b.upper[j] - b.lower[j])
        })
    }

    /// `‖C'α − D'‖ / ‖D'‖` for the reduced weighted normal equations at the
    /// fitted kernel; zero for GP-only models.
    pub fn normal_equation_residual(&self) -> Result<f64> {
        if self.alpha.is_empty() {
            return Ok(0.0);
        }
        let psi = self.config.design(&self.z_train)?;
        let dvec = &self.resid + &psi * &self.alpha;
        let l = self.caches.chol.l_dirty();
        let b = l
            .solve_lower_triangular(&dvec)
            .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
        let a = &self.caches.whitened_psi;
        let c = a.transpose() * a;
        let rhs = a.transpose() * b;
        let (c_red, d_red) = reduce_system(
            &c,
            &rhs,
            self.config.dedup_tolerance,
            self.config.pinv_tolerance,
        )?;
        let dn = d_red.norm();
        let rn = (&c_red * &self.alpha - &d_red).norm();
        Ok(if dn == 0.0 { rn } else { rn / dn })
    }

    /// Relative reconstruction error of the cached Cholesky factor against
    /// a freshly assembled correlation matrix.
    pub fn factor_reconstruction_error(&self) -> Result<f64> {
        let r = kernel::train_corr_matrix(&self.kernel, &self.z_train)?;
        let l = self.caches.chol.l();
        Ok((&l * l.transpose() - &r).norm() / r.norm())
    }
}

/// Train a single H-PCFE model; thin wrapper over [`HpcfeModel::train`].
pub fn train(
    config: &HpcfeConfig,
    bounds: &InputBounds,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<HpcfeModel> {
    HpcfeModel::train(config, bounds, x, y)
}
