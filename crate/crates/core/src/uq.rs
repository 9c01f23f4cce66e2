//! Random inputs, kernel density estimates and distribution comparison.
//!
//! Sampling uses ChaCha8 (a counter-based stream cipher generator): the
//! generator is seeded from the batch seed and column `j` is drawn from
//! stream `j`, so every column is reproducible on its own and independent
//! of the batch width.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Uniform, Weibull};
use serde::{Deserialize, Serialize};

use crate::basis::InputBounds;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    Lognormal,
    Rayleigh,
    Uniform,
}

/// A random variable described by mean and coefficient of variation.
///
/// The Rayleigh family has a fixed COV of √(4/π − 1) ≈ 0.523, so only its
/// mean is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomVariableSpec {
    pub name: String,
    pub family: Family,
    pub mean: f64,
    pub cov: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NativeParams {
    Normal { mu: f64, sigma: f64 },
    Lognormal { mu_ln: f64, sigma_ln: f64 },
    Rayleigh { scale: f64 },
    Uniform { low: f64, high: f64 },
}

impl RandomVariableSpec {
    pub fn new(name: impl Into<String>, family: Family, mean: f64, cov: f64) -> Result<Self> {
        let s = RandomVariableSpec {
            name: name.into(),
            family,
            mean,
            cov,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() || self.mean == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{}: mean must be finite and non-zero",
                self.name
            )));
        }
        if !(self.cov > 0.0 && self.cov.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{}: cov must be positive",
                self.name
            )));
        }
        if matches!(self.family, Family::Lognormal | Family::Rayleigh) && self.mean <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{}: {:?} requires a positive mean",
                self.name, self.family
            )));
        }
        Ok(())
    }

    pub fn native(&self) -> Result<NativeParams> {
        to_native_params(self)
    }

    /// Standard deviation of the distribution.
    pub fn std_dev(&self) -> f64 {
        match self.family {
            Family::Rayleigh => self.mean * (4.0 / std::f64::consts::PI - 1.0).sqrt(),
            _ => (self.mean * self.cov).abs(),
        }
    }

    /// `mean ± 3σ`, clipped to the support of the distribution.
    pub fn three_sigma_box(&self) -> Result<(f64, f64)> {
        let s = self.std_dev();
        let mut lo = self.mean - 3.0 * s;
        let hi = self.mean + 3.0 * s;
        match self.native()? {
            NativeParams::Lognormal { .. } | NativeParams::Rayleigh { .. } if lo <= 0.0 => {
                lo = self.quantile_floor();
            }
            NativeParams::Uniform { low, high } => return Ok((low, high)),
            _ => {}
        }
        Ok((lo, hi))
    }

    fn quantile_floor(&self) -> f64 {
        // 1e-6 quantile of the positive families
        match self.native() {
            Ok(NativeParams::Rayleigh { scale }) => scale * (-2.0 * (1.0 - 1e-6f64).ln()).sqrt(),
            Ok(NativeParams::Lognormal { mu_ln, sigma_ln }) => (mu_ln - 4.753 * sigma_ln).exp(),
            _ => 0.0,
        }
    }
}

/// Family-specific parameters matching the requested mean and COV.
pub fn to_native_params(spec: &RandomVariableSpec) -> Result<NativeParams> {
    spec.validate()?;
    let (m, c) = (spec.mean, spec.cov);
    Ok(match spec.family {
        Family::Normal => NativeParams::Normal {
            mu: m,
            sigma: (m * c).abs(),
        },
        Family::Lognormal => {
            let sigma_ln = (1.0 + c * c).ln().sqrt();
            NativeParams::Lognormal {
                mu_ln: m.ln() - 0.5 * sigma_ln * sigma_ln,
                sigma_ln,
            }
        }
        Family::Rayleigh => NativeParams::Rayleigh {
            scale: m / (std::f64::consts::PI / 2.0).sqrt(),
        },
        Family::Uniform => {
            let h = 3f64.sqrt() * c * m.abs();
            NativeParams::Uniform {
                low: m - h,
                high: m + h,
            }
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub values: DMatrix<f64>,
    pub seed: u64,
    pub specs: Vec<RandomVariableSpec>,
}

fn draw_column<D: Distribution<f64>>(rng: &mut ChaCha8Rng, dist: D, n: usize) -> Vec<f64> {
    (0..n).map(|_| dist.sample(rng)).collect()
}

fn dist_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(e.to_string())
}

/// `n` independent draws of every variable.
pub fn sample(specs: &[RandomVariableSpec], n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::InsufficientData("sample size must be >= 1".into()));
    }
    let mut values = DMatrix::zeros(n, specs.len());
    for (j, spec) in specs.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        let col = match spec.native()? {
            NativeParams::Normal { mu, sigma } => {
                draw_column(&mut rng, Normal::new(mu, sigma).map_err(dist_err)?, n)
            }
            NativeParams::Lognormal { mu_ln, sigma_ln } => {
                draw_column(&mut rng, LogNormal::new(mu_ln, sigma_ln).map_err(dist_err)?, n)
            }
            // Rayleigh(σ) is Weibull with shape 2 and scale σ√2.
            NativeParams::Rayleigh { scale } => draw_column(
                &mut rng,
                Weibull::new(scale * 2f64.sqrt(), 2.0).map_err(dist_err)?,
                n,
            ),
            NativeParams::Uniform { low, high } => {
                draw_column(&mut rng, Uniform::new_inclusive(low, high).map_err(dist_err)?, n)
            }
        };
        values.set_column(j, &DVector::from_vec(col));
    }
    Ok(SampleBatch {
        values,
        seed,
        specs: specs.to_vec(),
    })
}

/// Uniform draws inside a box, one stream per column.
pub fn sample_uniform_box(bounds: &InputBounds, n: usize, seed: u64, stream_offset: u64) -> DMatrix<f64> {
    let mut values = DMatrix::zeros(n, bounds.dim());
    for j in 0..bounds.dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_offset + j as u64);
        let (lo, hi) = (bounds.lower[j], bounds.upper[j]);
        for i in 0..n {
            let u: f64 = rng.random();
            values[(i, j)] = lo + u * (hi - lo);
        }
    }
    values
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Silverman's rule-of-thumb bandwidth `1.06 σ̂ n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData("KDE needs at least two samples".into()));
    }
    let (_, sd) = mean_std(samples);
    if !(sd > 0.0) {
        return Err(Error::Degenerate("samples have zero variance".into()));
    }
    Ok(1.06 * sd * (samples.len() as f64).powf(-0.2))
}

/// Gaussian kernel density estimate evaluated on `grid`.
pub fn kde_pdf(samples: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    let h = silverman_bandwidth(samples)?;
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .iter()
        .map(|&g| {
            samples
                .iter()
                .map(|&s| {
                    let u = (g - s) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect())
}

/// `points` equally spaced values spanning the sample range padded by four
/// bandwidths on each side.
pub fn kde_grid(samples: &[f64], points: usize) -> Result<Vec<f64>> {
    let h = silverman_bandwidth(samples)?;
    if points < 2 {
        return Err(Error::InvalidParameter("KDE grid needs at least two points".into()));
    }
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min) - 4.0 * h;
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 4.0 * h;
    Ok((0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect())
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Two-sample Kolmogorov-Smirnov statistic: the largest gap between the
/// empirical CDFs.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("KS distance of an empty sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Present when both inputs have the same length.
    pub rmse: Option<f64>,
    pub ks_distance: f64,
    pub mean_abs_error: Option<f64>,
}

pub fn compare(predicted: &[f64], oracle: &[f64]) -> Result<Metrics> {
    let ks = ks_distance(predicted, oracle)?;
    let (rmse, mae) = if predicted.len() == oracle.len() {
        let n = predicted.len() as f64;
        let (mut se, mut ae) = (0.0, 0.0);
        for (p, o) in predicted.iter().zip(oracle) {
            se += (p - o) * (p - o);
            ae += (p - o).abs();
        }
        (Some((se / n).sqrt()), Some(ae / n))
    } else {
        (None, None)
    };
    Ok(Metrics {
        rmse,
        ks_distance: ks,
        mean_abs_error: mae,
    })
}

/// Root-mean-square difference of two equal-length vectors.
pub fn rmse(predicted: &[f64], oracle: &[f64]) -> Result<f64> {
    if predicted.len() != oracle.len() || predicted.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "rmse of vectors with lengths {} and {}",
            predicted.len(),
            oracle.len()
        )));
    }
    compare(predicted, oracle).map(|m| m.rmse.unwrap_or(f64::NAN))
}
