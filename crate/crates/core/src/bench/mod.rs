//! Analytical benchmark problems with several fidelity levels.

pub mod study;

use std::sync::Arc;

use crate::basis::InputBounds;
use crate::error::{Error, Result};
use crate::uq::{Family, RandomVariableSpec};

pub use study::{run_study, ModelScore, OutputTransform, StudyConfig, StudyResult};

/// Low- and high-fidelity responses of the one-dimensional benchmark:
/// `g_low = sin(8πx)`, `g_high = (x − √2)·g_low²`.
pub fn pedagogical(x: f64) -> (f64, f64) {
    let lo = pedagogical_low(x);
    (lo, (x - std::f64::consts::SQRT_2) * lo * lo)
}

pub fn pedagogical_low(x: f64) -> f64 {
    (8.0 * std::f64::consts::PI * x).sin()
}

pub fn pedagogical_high(x: f64) -> f64 {
    pedagogical(x).1
}

/// Plate buckling coefficient `min_m (m b/a + a/(m b))²` over `m = 1..=10`.
pub fn buckling_coefficient(a: f64, b: f64) -> f64 {
    (1..=10)
        .map(|m| {
            let r = m as f64 * b / a;
            (r + 1.0 / r).powi(2)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Critical buckling load of a simply supported plate.
///
/// Level 1 is the classical formula `k π² D / b²` with
/// `D = E t³ / (12 (1 − μ²))`. Levels 2 and 3 are smooth synthetic
/// corrections standing in for finer models:
/// `L2 = L1 (1 + 0.08 sin(π a/b) − 0.03 t/b)`, `L3 = L2 (1 − 0.02 μ/0.3)`.
pub fn buckling(level: u32, a: f64, b: f64, t: f64, e: f64, mu: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && t > 0.0 && e > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "plate dimensions and modulus must be positive (a={a}, b={b}, t={t}, E={e})"
        )));
    }
    if !(mu > 0.0 && mu < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "Poisson ratio must lie in (0, 0.5), got {mu}"
        )));
    }
    let d = e * t.powi(3) / (12.0 * (1.0 - mu * mu));
    let l1 = buckling_coefficient(a, b) * std::f64::consts::PI.powi(2) * d / (b * b);
    let l2 = l1 * (1.0 + 0.08 * (std::f64::consts::PI * a / b).sin() - 0.03 * t / b);
    match level {
        1 => Ok(l1),
        2 => Ok(l2),
        3 => Ok(l2 * (1.0 - 0.02 * mu / 0.3)),
        _ => Err(Error::InvalidParameter(format!(
            "buckling has fidelity levels 1-3, got {level}"
        ))),
    }
}

/// Input distributions of the plate: a, b, t, E, μ.
pub fn buckling_variables() -> Vec<RandomVariableSpec> {
    [
        ("a", Family::Normal, 3.0, 0.05),
        ("b", Family::Normal, 2.0, 0.05),
        ("t", Family::Rayleigh, 0.2, 0.075),
        ("E", Family::Lognormal, 2e9, 0.1),
        ("mu", Family::Lognormal, 0.3, 0.025),
    ]
    .into_iter()
    .map(|(n, f, m, c)| RandomVariableSpec::new(n, f, m, c).expect("valid table entry"))
    .collect()
}

pub type Evaluator = Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;

/// A benchmark function family, lowest fidelity first.
#[derive(Clone)]
pub struct BenchmarkProblem {
    pub name: String,
    pub dim: usize,
    pub bounds: InputBounds,
    pub levels: Vec<Evaluator>,
    /// Input distributions for propagation studies (empty when unused).
    pub variables: Vec<RandomVariableSpec>,
}

impl std::fmt::Debug for BenchmarkProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("bounds", &self.bounds)
            .field("levels", &self.levels.len())
            .field("variables", &self.variables)
            .finish()
    }
}

impl BenchmarkProblem {
    pub fn pedagogical() -> Self {
        BenchmarkProblem {
            name: "pedagogical".into(),
            dim: 1,
            bounds: InputBounds::unit(1),
            levels: vec![
                Arc::new(|x: &[f64]| Ok(pedagogical_low(x[0]))),
                Arc::new(|x: &[f64]| Ok(pedagogical_high(x[0]))),
            ],
            variables: Vec::new(),
        }
    }

    /// Plate buckling over the ±3σ box of its input distributions.
    pub fn buckling() -> Result<Self> {
        let variables = buckling_variables();
        let (lower, upper): (Vec<f64>, Vec<f64>) = variables
            .iter()
            .map(|v| v.three_sigma_box())
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        let levels: Vec<Evaluator> = (1..=3)
            .map(|lv| -> Evaluator {
                Arc::new(move |x: &[f64]| buckling(lv, x[0], x[1], x[2], x[3], x[4]))
            })
            .collect();
        Ok(BenchmarkProblem {
            name: "buckling".into(),
            dim: 5,
            bounds: InputBounds::new(lower, upper)?,
            levels,
            variables,
        })
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "pedagogical" => Ok(Self::pedagogical()),
            "buckling" => Self::buckling(),
            _ => Err(Error::InvalidParameter(format!("unknown benchmark {name:?}"))),
        }
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Evaluate fidelity `level` (1-based) on every row of `x`.
    pub fn evaluate(&self, level: usize, x: &nalgebra::DMatrix<f64>) -> Result<nalgebra::DVector<f64>> {
        let f = level
            .checked_sub(1)
            .and_then(|i| self.levels.get(i))
            .ok_or_else(|| Error::InvalidParameter(format!("{} has no level {level}", self.name)))?;
        if x.ncols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "{} takes {} inputs, got {}",
                self.name,
                self.dim,
                x.ncols()
            )));
        }
        let mut out = nalgebra::DVector::zeros(x.nrows());
        let mut row = vec![0.0; self.dim];
        for i in 0..x.nrows() {
            for (j, r) in row.iter_mut().enumerate() {
                *r = x[(i, j)];
            }
            out[i] = f(&row)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn pedagogical_values() {
        assert_eq!(pedagogical(0.0), (0.0, 0.0));
        let (l, h) = pedagogical(0.5);
        assert_abs_diff_eq!(l, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(h, 0.0, epsilon = 1e-14);
        let (l, h) = pedagogical(1.0 / 16.0);
        assert_abs_diff_eq!(l, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h, 1.0 / 16.0 - std::f64::consts::SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(h, -1.3517136, epsilon = 1e-7);
    }

    #[test]
    fn buckling_at_table_means() {
        assert_abs_diff_eq!(buckling_coefficient(3.0, 2.0), 4.340278, epsilon = 1e-6);
        let d = 2e9 * 0.008 / (12.0 * 0.91);
        assert_abs_diff_eq!(d / 1.46520e6, 1.0, epsilon = 5e-6);
        let l1 = buckling(1, 3.0, 2.0, 0.2, 2e9, 0.3).unwrap();
        assert_abs_diff_eq!(l1 / 1.5691e7, 1.0, epsilon = 1e-4);
    }

    #[test]
    fn buckling_limits_and_errors() {
        assert!(buckling(1, 3.0, 2.0, 1e-6, 2e9, 0.3).unwrap() < 1e-6);
        assert!(buckling(1, 3.0, 2.0, 0.2, 2e9, 1.0).is_err());
        assert!(buckling(4, 3.0, 2.0, 0.2, 2e9, 0.3).is_err());
        assert!(buckling(1, -3.0, 2.0, 0.2, 2e9, 0.3).is_err());
    }

    #[test]
    fn problem_registry() {
        let p = BenchmarkProblem::by_name("buckling").unwrap();
        assert_eq!((p.dim, p.num_levels()), (5, 3));
        assert!(p.bounds.lower.iter().all(|&l| l > 0.0));
        assert!(BenchmarkProblem::by_name("nope").is_err());
        let x = nalgebra::DMatrix::from_row_slice(1, 5, &[3.0, 2.0, 0.2, 2e9, 0.3]);
        assert_abs_diff_eq!(p.evaluate(1, &x).unwrap()[0] / 1.5691e7, 1.0, epsilon = 1e-4);
        assert!(p.evaluate(0, &x).is_err());
    }

    fn in_box() -> impl Strategy<Value = Vec<f64>> {
        let b = BenchmarkProblem::buckling().unwrap().bounds;
        (0..5)
            .map(|j| b.lower[j]..b.upper[j])
            .collect::<Vec<_>>()
    }

    proptest! {
        #[test]
        fn load_increases_with_modulus_and_thickness(x in in_box()) {
            let f = |e: f64, t: f64| buckling(1, x[0], x[1], t, e, x[4]).unwrap();
            let base = f(x[3], x[2]);
            prop_assert!(f(x[3] * 1.001, x[2]) > base);
            prop_assert!(f(x[3], x[2] * 1.001) > base);
        }

        #[test]
        fn synthetic_levels_stay_close(x in in_box()) {
            let l1 = buckling(1, x[0], x[1], x[2], x[3], x[4]).unwrap();
            for lv in 2..=3 {
                let l = buckling(lv, x[0], x[1], x[2], x[3], x[4]).unwrap();
                prop_assert!((l / l1 - 1.0).abs() <= 0.15);
            }
        }
    }
}
