//! Deep H-PCFE: a recursive multi-fidelity cascade.
//!
//! Stage `i` is an H-PCFE model over the original inputs augmented with the
//! mean predictions of every lower stage, in the order
//! `[x | f_{i-1}(x) | … | f_1(x)]`. Prediction composes the stages from the
//! bottom up, feeding each stage's mean forward; the variance reported at a
//! level is that stage's own predictive variance.
//!
//! Augmented columns are mapped to `[-1, 1]` like the original inputs, using
//! the range of the lower-stage predictions over all training inputs plus a
//! margin, so the Legendre basis sees well-scaled arguments regardless of
//! the response units.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::InputBounds;
use crate::error::{Error, Result};
use crate::hpcfe::{HpcfeConfig, HpcfeDocument, HpcfeModel, Prediction};

pub const CASCADE_FORMAT: &str = "deep-hpcfe-model";
pub const CASCADE_VERSION: u32 = 1;

/// Relative padding added to each side of an augmented column's range.
const AUGMENT_MARGIN: f64 = 0.1;

/// One fidelity level's training data.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelityLevel {
    /// Fidelity rank; higher is more accurate.
    pub level: u32,
    pub label: String,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl FidelityLevel {
    pub fn new(level: u32, x: DMatrix<f64>, y: DVector<f64>) -> Self {
        FidelityLevel {
            level,
            label: format!("level-{level}"),
            x,
            y,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Training data for every fidelity level, lowest fidelity first.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelityDataset {
    pub levels: Vec<FidelityLevel>,
    pub bounds: InputBounds,
}

impl FidelityDataset {
    pub fn new(levels: Vec<FidelityLevel>, bounds: InputBounds) -> Result<Self> {
        let ds = FidelityDataset { levels, bounds };
        ds.validate()?;
        Ok(ds)
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Checks shapes and that levels appear in strictly increasing fidelity.
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InsufficientData("dataset has no fidelity levels".into()));
        }
        let d = self.dim();
        for (i, lv) in self.levels.iter().enumerate() {
            if lv.x.nrows() == 0 {
                return Err(Error::InsufficientData(format!(
                    "fidelity level {} is empty",
                    lv.level
                )));
            }
            if lv.x.ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "level {} has {} input columns, bounds have {d}",
                    lv.level,
                    lv.x.ncols()
                )));
            }
            if lv.x.nrows() != lv.y.len() {
                return Err(Error::DimensionMismatch(format!(
                    "level {} has {} inputs and {} outputs",
                    lv.level,
                    lv.x.nrows(),
                    lv.y.len()
                )));
            }
            if i > 0 {
                let prev = &self.levels[i - 1];
                if lv.level <= prev.level {
                    return Err(Error::InvalidParameter(format!(
                        "fidelity levels must be ordered lowest to highest, found {} after {}",
                        lv.level, prev.level
                    )));
                }
                if lv.x.nrows() > prev.x.nrows() {
                    warn!(
                        "level {} has more samples ({}) than level {} ({})",
                        lv.level,
                        lv.x.nrows(),
                        prev.level,
                        prev.x.nrows()
                    );
                }
            }
        }
        Ok(())
    }
}

/// Per-stage configurations for a cascade.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    /// One config per level, or a single config used for every level.
    pub stages: Vec<HpcfeConfig>,
    /// Stages above the first are GP-only.
    #[serde(default)]
    pub modified: bool,
    /// Stages above the first build their polynomial trend on the appended
    /// lower-level predictions only; the GP still sees every input.
    #[serde(default)]
    pub appended_trend: bool,
}

impl CascadeConfig {
    pub fn uniform(config: HpcfeConfig) -> Self {
        CascadeConfig {
            stages: vec![config],
            modified: false,
            appended_trend: false,
        }
    }

    pub fn per_level(stages: Vec<HpcfeConfig>) -> Self {
        CascadeConfig {
            stages,
            modified: false,
            appended_trend: false,
        }
    }

    pub fn modified(mut self, modified: bool) -> Self {
        self.modified = modified;
        self
    }

    pub fn appended_trend(mut self, on: bool) -> Self {
        self.appended_trend = on;
        self
    }

    /// Effective configuration of stage `i` (0-based) in an `m`-level cascade
    /// over `d` original inputs.
    pub fn stage(&self, i: usize, m: usize, d: usize) -> Result<HpcfeConfig> {
        let mut cfg = match self.stages.len() {
            1 => self.stages[0].clone(),
            n if n == m => self.stages[i].clone(),
            n => {
                return Err(Error::InvalidParameter(format!(
                    "{n} stage configs supplied for {m} fidelity levels"
                )))
            }
        };
        if self.modified && i > 0 {
            cfg.zero_mean_trend = true;
        }
        if self.appended_trend && i > 0 {
            cfg.trend_skip = d;
        }
        Ok(cfg)
    }
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig::uniform(HpcfeConfig::default())
    }
}

#[derive(Clone, Debug)]
pub struct DeepHpcfeModel {
    stages: Vec<HpcfeModel>,
    levels: Vec<u32>,
    labels: Vec<String>,
    modified: bool,
    bounds: InputBounds,
}

/// Cascade prediction for every level; the last entry is the highest fidelity.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadePrediction {
    pub levels: Vec<Prediction>,
}

impl CascadePrediction {
    pub fn highest(&self) -> &Prediction {
        self.levels.last().expect("cascade has at least one level")
    }
}

/// Columns `[x | f_{k-1} | … | f_1]` from lower-level means `[f_1, …, f_{k-1}]`.
fn augment(x: &DMatrix<f64>, means: &[DVector<f64>]) -> DMatrix<f64> {
    let d = x.ncols();
    let mut out = DMatrix::zeros(x.nrows(), d + means.len());
    out.columns_mut(0, d).copy_from(x);
    for (k, m) in means.iter().rev().enumerate() {
        out.set_column(d + k, m);
    }
    out
}

fn padded_range(v: &DVector<f64>) -> (f64, f64) {
    let lo = v.min();
    let hi = v.max();
    let span = hi - lo;
    let pad = if span > 1e-12 * lo.abs().max(hi.abs()).max(1e-300) {
        AUGMENT_MARGIN * span
    } else {
        lo.abs().max(1.0)
    };
    (lo - pad, hi + pad)
}

impl DeepHpcfeModel {
    /// Train every stage bottom-up.
    pub fn train(config: &CascadeConfig, data: &FidelityDataset) -> Result<Self> {
        data.validate()?;
        let m = data.num_levels();
        let mut model = DeepHpcfeModel {
            stages: Vec::with_capacity(m),
            levels: data.levels.iter().map(|l| l.level).collect(),
            labels: data.levels.iter().map(|l| l.label.clone()).collect(),
            modified: config.modified,
            bounds: data.bounds.clone(),
        };
        for i in 0..m {
            let cfg = config.stage(i, m, data.dim()).map_err(|e| e.at_stage(i + 1))?;
            let lv = &data.levels[i];
            let stage = if i == 0 {
                HpcfeModel::train(&cfg, &data.bounds, &lv.x, &lv.y)
            } else {
                model.train_upper_stage(&cfg, data, i)
            }
            .map_err(|e| e.at_stage(i + 1))?;
            model.stages.push(stage);
        }
        Ok(model)
    }

    fn train_upper_stage(
        &self,
        cfg: &HpcfeConfig,
        data: &FidelityDataset,
        i: usize,
    ) -> Result<HpcfeModel> {
        let lv = &data.levels[i];
        let train_means = self.lower_means(&lv.x)?;
        // Range of each lower-stage output over every training input seen so far.
        let mut lower = data.bounds.lower.clone();
        let mut upper = data.bounds.upper.clone();
        let all_x = stack_rows(data.levels[..=i].iter().map(|l| &l.x));
        let all_means = self.lower_means(&all_x)?;
        for mean in all_means.iter().rev() {
            let (lo, hi) = padded_range(mean);
            lower.push(lo);
            upper.push(hi);
        }
        let bounds = InputBounds::new(lower, upper)?;
        HpcfeModel::train_with_floor(cfg, &bounds, &augment(&lv.x, &train_means), &lv.y, data.dim() + 2)
    }

    /// Mean predictions of all trained stages at `x`, lowest first.
    fn lower_means(&self, x: &DMatrix<f64>) -> Result<Vec<DVector<f64>>> {
        Ok(self
            .predict_levels(x, self.stages.len())?
            .into_iter()
            .map(|p| p.mean)
            .collect())
    }

    fn predict_levels(&self, x: &DMatrix<f64>, upto: usize) -> Result<Vec<Prediction>> {
        if x.ncols() != self.bounds.dim() {
            return Err(Error::DimensionMismatch(format!(
                "inputs have {} columns, model expects {}",
                x.ncols(),
                self.bounds.dim()
            )));
        }
        let mut preds: Vec<Prediction> = Vec::with_capacity(upto);
        let mut means: Vec<DVector<f64>> = Vec::with_capacity(upto);
        for (i, stage) in self.stages[..upto].iter().enumerate() {
            let p = if i == 0 {
                stage.predict(x)
            } else {
                stage.predict(&augment(x, &means))
            }
            .map_err(|e| e.at_stage(i + 1))?;
            means.push(p.mean.clone());
            preds.push(p);
        }
        Ok(preds)
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<CascadePrediction> {
        Ok(CascadePrediction {
            levels: self.predict_levels(x, self.stages.len())?,
        })
    }

    pub fn stages(&self) -> &[HpcfeModel] {
        &self.stages
    }
    pub fn num_levels(&self) -> usize {
        self.stages.len()
    }
    pub fn levels(&self) -> &[u32] {
        &self.levels
    }
    pub fn labels(&self) -> &[String] {
        &self.labels
    }
    pub fn is_modified(&self) -> bool {
        self.modified
    }
    pub fn bounds(&self) -> &InputBounds {
        &self.bounds
    }
    pub fn input_dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn to_document(&self) -> CascadeDocument {
        CascadeDocument {
            format: CASCADE_FORMAT.into(),
            version: CASCADE_VERSION,
            modified: self.modified,
            bounds: self.bounds.clone(),
            levels: self
                .levels
                .iter()
                .zip(&self.labels)
                .zip(&self.stages)
                .map(|((&level, label), s)| StageDocument {
                    level,
                    label: label.clone(),
                    model: s.to_document(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &CascadeDocument) -> Result<Self> {
        if doc.format != CASCADE_FORMAT {
            return Err(Error::Document(format!(
                "expected format {CASCADE_FORMAT:?}, found {:?}",
                doc.format
            )));
        }
        if doc.version != CASCADE_VERSION {
            return Err(Error::Document(format!(
                "unsupported cascade version {}",
                doc.version
            )));
        }
        if doc.levels.is_empty() {
            return Err(Error::Document("cascade has no stages".into()));
        }
        let d = doc.bounds.dim();
        let mut stages = Vec::with_capacity(doc.levels.len());
        for (i, s) in doc.levels.iter().enumerate() {
            let model = HpcfeModel::from_document(&s.model).map_err(|e| e.at_stage(i + 1))?;
            if model.input_dim() != d + i {
                return Err(Error::Document(format!(
                    "stage {} has input dimension {}, expected {}",
                    i + 1,
                    model.input_dim(),
                    d + i
                )));
            }
            if i > 0 && s.level <= doc.levels[i - 1].level {
                return Err(Error::Document("stage levels are not increasing".into()));
            }
            stages.push(model);
        }
        Ok(DeepHpcfeModel {
            stages,
            levels: doc.levels.iter().map(|s| s.level).collect(),
            labels: doc.levels.iter().map(|s| s.label.clone()).collect(),
            modified: doc.modified,
            bounds: doc.bounds.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(s)?)
    }
}

fn stack_rows<'a>(mats: impl Iterator<Item = &'a DMatrix<f64>>) -> DMatrix<f64> {
    let mats: Vec<&DMatrix<f64>> = mats.collect();
    let d = mats[0].ncols();
    let n: usize = mats.iter().map(|m| m.nrows()).sum();
    let mut out = DMatrix::zeros(n, d);
    let mut r = 0;
    for m in mats {
        out.rows_mut(r, m.nrows()).copy_from(m);
        r += m.nrows();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageDocument {
    pub level: u32,
    pub label: String,
    pub model: HpcfeDocument,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeDocument {
    pub format: String,
    pub version: u32,
    pub modified: bool,
    pub bounds: InputBounds,
    pub levels: Vec<StageDocument>,
}

pub fn train_cascade(config: &CascadeConfig, data: &FidelityDataset) -> Result<DeepHpcfeModel> {
    DeepHpcfeModel::train(config, data)
}

pub fn predict_cascade(model: &DeepHpcfeModel, x: &DMatrix<f64>) -> Result<CascadePrediction> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, 1, |i, _| i as f64 / (n - 1) as f64)
    }

    fn low(x: f64) -> f64 {
        (8.0 * std::f64::consts::PI * x).sin()
    }

    fn high(x: f64) -> f64 {
        (x - 2f64.sqrt()) * low(x).powi(2)
    }

    fn pedagogical() -> FidelityDataset {
        let x1 = grid(50);
        let y1 = x1.column(0).map(low);
        let x2 = grid(16);
        let y2 = x2.column(0).map(high);
        FidelityDataset::new(
            vec![FidelityLevel::new(1, x1, y1), FidelityLevel::new(2, x2, y2)],
            InputBounds::unit(1),
        )
        .unwrap()
    }

    #[test]
    fn single_level_matches_plain_model() {
        let x = grid(20);
        let y = x.column(0).map(|v| (3.0 * v).exp());
        let cfg = HpcfeConfig::default();
        let data =
            FidelityDataset::new(vec![FidelityLevel::new(1, x.clone(), y.clone())], InputBounds::unit(1))
                .unwrap();
        let mf = DeepHpcfeModel::train(&CascadeConfig::uniform(cfg.clone()), &data).unwrap();
        let sf = HpcfeModel::train(&cfg, &InputBounds::unit(1), &x, &y).unwrap();
        let probe = grid(41);
        assert_eq!(mf.predict(&probe).unwrap().highest(), &sf.predict(&probe).unwrap());
    }

    #[test]
    fn stage_dimensions_grow() {
        let mut data = pedagogical();
        let x3 = grid(6);
        let y3 = x3.column(0).map(high);
        data.levels.push(FidelityLevel::new(3, x3, y3));
        let cfg = CascadeConfig::per_level(vec![
            HpcfeConfig::default(),
            HpcfeConfig::default().with_basis(2, 2),
            HpcfeConfig::default().with_basis(1, 1),
        ]);
        let m = DeepHpcfeModel::train(&cfg, &data).unwrap();
        let dims: Vec<usize> = m.stages().iter().map(|s| s.input_dim()).collect();
        assert_eq!(dims, vec![1, 2, 3]);
        assert_eq!(m.predict(&grid(5)).unwrap().levels.len(), 3);
    }

    #[test]
    fn permuted_levels_are_rejected() {
        let mut data = pedagogical();
        data.levels.swap(0, 1);
        assert!(DeepHpcfeModel::train(&CascadeConfig::default(), &data).is_err());
    }

    #[test]
    fn wrong_number_of_configs() {
        let cfg = CascadeConfig::per_level(vec![HpcfeConfig::default(); 3]);
        assert!(matches!(
            DeepHpcfeModel::train(&cfg, &pedagogical()),
            Err(Error::Stage { stage: 1, .. })
        ));
    }

    #[test]
    fn identical_fidelities_agree() {
        let x1 = grid(30);
        let y1 = x1.column(0).map(|v| (4.0 * v).sin() + v);
        let idx: Vec<usize> = (0..30).step_by(3).collect();
        let x2 = x1.select_rows(&idx);
        let y2 = y1.select_rows(&idx);
        let data = FidelityDataset::new(
            vec![FidelityLevel::new(1, x1, y1), FidelityLevel::new(2, x2, y2)],
            InputBounds::unit(1),
        )
        .unwrap();
        // ten points cannot pin down a degree-5 trend in two inputs
        let cfg = CascadeConfig::per_level(vec![
            HpcfeConfig::default(),
            HpcfeConfig::default().with_basis(2, 2),
        ]);
        let m = DeepHpcfeModel::train(&cfg, &data).unwrap();
        let p = m.predict(&grid(200)).unwrap();
        for i in 0..200 {
            assert!((p.levels[1].mean[i] - p.levels[0].mean[i]).abs() <= 1e-3);
        }
    }

    #[test]
    fn pedagogical_point_values() {
        let data = pedagogical();
        let m = DeepHpcfeModel::train(&CascadeConfig::default(), &data).unwrap();
        assert_eq!(m.stages()[1].input_dim(), 2);
        let x = DMatrix::from_column_slice(2, 1, &[0.0, 1.0 / 16.0]);
        let p = m.predict(&x).unwrap();
        assert!(p.highest().mean[0].abs() <= 0.05);
        assert_abs_diff_eq!(p.highest().mean[1], 1.0 / 16.0 - 2f64.sqrt(), epsilon = 0.05);
    }

    #[test]
    fn cascade_document_round_trip() {
        let m = DeepHpcfeModel::train(&CascadeConfig::default(), &pedagogical()).unwrap();
        let s = m.to_json().unwrap();
        let m2 = DeepHpcfeModel::from_json(&s).unwrap();
        assert_eq!(s, m2.to_json().unwrap());
        let probe = grid(17);
        assert_eq!(m.predict(&probe).unwrap(), m2.predict(&probe).unwrap());
    }

    #[test]
    fn modified_upper_stages_are_gp_only() {
        let cfg = CascadeConfig::default().modified(true);
        let m = DeepHpcfeModel::train(&cfg, &pedagogical()).unwrap();
        assert!(!m.stages()[0].config().zero_mean_trend);
        assert!(m.stages()[1].config().zero_mean_trend);
        assert_eq!(m.stages()[1].f0(), 0.0);
    }
}
