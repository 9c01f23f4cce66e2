//! Surrogate comparison on a benchmark: multi-fidelity cascade against
//! single-fidelity fits on the lowest and highest level.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::BenchmarkProblem;
use crate::datasets::{nested_design, DesignKind, DesignSpec};
use crate::error::{Error, Result};
use crate::hpcfe::{HpcfeConfig, HpcfeModel};
use crate::mf::{CascadeConfig, DeepHpcfeModel, FidelityDataset, FidelityLevel};
use crate::uq::{compare, kde_grid, kde_pdf, sample, sample_uniform_box};

/// Stream offset of the evaluation sample, far from the design streams.
const EVAL_STREAM: u64 = 1 << 30;

/// Response scale the surrogates are trained on; predictions are mapped
/// back before scoring.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputTransform {
    #[default]
    Identity,
    /// Natural log; every training response must be positive.
    Log,
}

impl OutputTransform {
    fn forward(self, y: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            OutputTransform::Identity => Ok(y.clone()),
            OutputTransform::Log => {
                if let Some(v) = y.iter().find(|v| !(**v > 0.0)) {
                    return Err(Error::InvalidParameter(format!(
                        "log transform needs positive responses, got {v}"
                    )));
                }
                Ok(y.map(f64::ln))
            }
        }
    }

    fn inverse(self, v: f64) -> f64 {
        match self {
            OutputTransform::Identity => v,
            OutputTransform::Log => v.exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub design: DesignSpec,
    pub cascade: CascadeConfig,
    /// Used for the highest-level single-fidelity fit.
    pub single: HpcfeConfig,
    /// Size of the evaluation sample: Monte Carlo draws from the input
    /// distributions when the problem has them, uniform points otherwise.
    pub eval_points: usize,
    pub kde_points: usize,
    #[serde(default)]
    pub transform: OutputTransform,
}

impl StudyConfig {
    /// Settings used for the pedagogical problem.
    pub fn pedagogical(n_low: usize, n_high: usize, seed: u64) -> Self {
        StudyConfig {
            design: DesignSpec::nested(DesignKind::UniformRandom, vec![n_low, n_high], seed),
            cascade: CascadeConfig::per_level(vec![
                HpcfeConfig::default(),
                HpcfeConfig::default().with_basis(1, 1),
            ]),
            single: HpcfeConfig::default(),
            eval_points: 1000,
            kde_points: 200,
            transform: OutputTransform::Identity,
        }
    }

    /// Settings used for plate buckling. The response spans several decades
    /// and is close to a product of powers, so surrogates work on its log.
    pub fn buckling(counts: Vec<usize>, seed: u64) -> Self {
        StudyConfig {
            design: DesignSpec::nested(DesignKind::UniformRandom, counts, seed),
            cascade: CascadeConfig::per_level(vec![
                HpcfeConfig::default().with_basis(3, 1),
                HpcfeConfig::default().with_basis(1, 1),
                HpcfeConfig::default().with_basis(1, 1),
            ])
            .appended_trend(true),
            single: HpcfeConfig::default().with_basis(1, 1),
            eval_points: 10_000,
            kde_points: 200,
            transform: OutputTransform::Log,
        }
    }

    pub fn for_problem(problem: &BenchmarkProblem, seed: u64) -> Result<Self> {
        match problem.name.as_str() {
            "pedagogical" => Ok(Self::pedagogical(50, 16, seed)),
            "buckling" => Ok(Self::buckling(vec![210, 15, 8], seed)),
            other => Err(Error::InvalidParameter(format!("no default study for {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: String,
    /// Against the highest-fidelity truth on the evaluation sample.
    pub rmse: f64,
    pub ks_distance: f64,
    pub mean_abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub model: String,
    pub density: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub problem: String,
    pub counts: Vec<usize>,
    pub seed: u64,
    pub scores: Vec<ModelScore>,
    pub kde_grid: Vec<f64>,
    /// `truth` first, then one curve per surrogate.
    pub densities: Vec<DensityCurve>,
}

impl StudyResult {
    pub fn score(&self, model: &str) -> Option<&ModelScore> {
        self.scores.iter().find(|s| s.model == model)
    }
}

/// Inputs of the evaluation sample.
pub fn evaluation_inputs(problem: &BenchmarkProblem, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if problem.variables.is_empty() {
        Ok(sample_uniform_box(&problem.bounds, n, seed, EVAL_STREAM))
    } else {
        Ok(sample(&problem.variables, n, seed ^ EVAL_STREAM)?.values)
    }
}

/// Train the cascade and both single-fidelity surrogates, then score them on
/// a common evaluation sample.
pub fn run_study(problem: &BenchmarkProblem, cfg: &StudyConfig) -> Result<StudyResult> {
    let m = cfg.design.counts.len();
    if m != problem.num_levels() {
        return Err(Error::InvalidParameter(format!(
            "{} has {} fidelity levels, design gives {m}",
            problem.name,
            problem.num_levels()
        )));
    }
    let xs = nested_design(&cfg.design, &problem.bounds)?;
    let levels = xs
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let y = cfg.transform.forward(&problem.evaluate(i + 1, &x)?)?;
            Ok(FidelityLevel::new(i as u32 + 1, x, y))
        })
        .collect::<Result<Vec<_>>>()?;
    let data = FidelityDataset::new(levels, problem.bounds.clone())?;
    let mf = DeepHpcfeModel::train(&cfg.cascade, &data)?;
    let low = &data.levels[0];
    let high = &data.levels[m - 1];
    let lf = HpcfeModel::train(&cfg.cascade.stage(0, m, problem.dim)?, &problem.bounds, &low.x, &low.y)
        .map_err(|e| e.at_stage(1))?;
    let hf = HpcfeModel::train(&cfg.single, &problem.bounds, &high.x, &high.y)
        .map_err(|e| e.at_stage(m))?;

    let xe = evaluation_inputs(problem, cfg.eval_points, cfg.design.seed)?;
    let truth: Vec<f64> = problem.evaluate(m, &xe)?.iter().copied().collect();
    let preds = [
        ("mf", mf.predict(&xe)?.highest().mean.clone()),
        ("lf_only", lf.predict(&xe)?.mean),
        ("hf_only", hf.predict(&xe)?.mean),
    ];
    let grid = kde_grid(&truth, cfg.kde_points)?;
    let mut densities = vec![DensityCurve {
        model: "truth".into(),
        density: kde_pdf(&truth, &grid)?,
    }];
    let mut scores = Vec::new();
    for (name, p) in preds {
        let p: Vec<f64> = p.iter().map(|&v| cfg.transform.inverse(v)).collect();
        let met = compare(&p, &truth)?;
        scores.push(ModelScore {
            model: name.into(),
            rmse: met.rmse.unwrap_or(f64::NAN),
            ks_distance: met.ks_distance,
            mean_abs_error: met.mean_abs_error.unwrap_or(f64::NAN),
        });
        // a constant surrogate has no density
        if let Ok(density) = kde_pdf(&p, &grid) {
            densities.push(DensityCurve {
                model: name.into(),
                density,
            });
        }
    }
    Ok(StudyResult {
        problem: problem.name.clone(),
        counts: cfg.design.counts.clone(),
        seed: cfg.design.seed,
        scores,
        kde_grid: grid,
        densities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn study_is_reproducible() {
        let p = BenchmarkProblem::pedagogical();
        let mut cfg = StudyConfig::pedagogical(30, 8, 3);
        cfg.eval_points = 200;
        let a = run_study(&p, &cfg).unwrap();
        let b = run_study(&p, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.scores.len(), 3);
        assert_eq!(a.densities[0].model, "truth");
    }

    #[test]
    fn level_count_must_match() {
        let p = BenchmarkProblem::pedagogical();
        let mut cfg = StudyConfig::pedagogical(30, 8, 3);
        cfg.design.counts = vec![30, 8, 4];
        assert!(run_study(&p, &cfg).is_err());
    }
}
