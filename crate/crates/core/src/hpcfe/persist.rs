//! Versioned JSON document for trained models.
//!
//! Floats are written in shortest round-trip form and parsed with correct
//! rounding, so save → load reproduces every parameter bit for bit. The
//! Cholesky factor and derived matrices are not stored; they are recomputed
//! from the stored kernel and inputs on load.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Caches, HpcfeConfig, HpcfeModel};
use crate::basis::InputBounds;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

pub const MODEL_FORMAT: &str = "hpcfe-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HpcfeDocument {
    pub format: String,
    pub version: u32,
    pub config: HpcfeConfig,
    pub bounds: InputBounds,
    pub f0: f64,
    pub alpha: Vec<f64>,
    pub kernel: KernelSpec,
    pub sigma2: f64,
    pub iterations: usize,
    /// Training inputs in normalized coordinates, one row per sample.
    pub z_train: Vec<Vec<f64>>,
    /// `d − Ψα` at the training inputs.
    pub residuals: Vec<f64>,
}

impl HpcfeModel {
    pub fn to_document(&self) -> HpcfeDocument {
        HpcfeDocument {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            config: self.config.clone(),
            bounds: self.bounds.clone(),
            f0: self.f0,
            alpha: self.alpha.iter().cloned().collect(),
            kernel: self.kernel.clone(),
            sigma2: self.sigma2,
            iterations: self.iterations,
            z_train: self
                .z_train
                .row_iter()
                .map(|r| r.iter().cloned().collect())
                .collect(),
            residuals: self.resid.iter().cloned().collect(),
        }
    }

    pub fn from_document(doc: &HpcfeDocument) -> Result<Self> {
        if doc.format != MODEL_FORMAT {
            return Err(Error::Document(format!(
                "expected format '{MODEL_FORMAT}', found '{}'",
                doc.format
            )));
        }
        if doc.version != MODEL_VERSION {
            return Err(Error::Document(format!(
                "unsupported model version {}",
                doc.version
            )));
        }
        let d = doc.bounds.dim();
        let n = doc.z_train.len();
        if doc.z_train.iter().any(|r| r.len() != d) || doc.residuals.len() != n {
            return Err(Error::Document("training cache has inconsistent shape".into()));
        }
        if doc.kernel.dim() != d || doc.alpha.len() != doc.config.n_terms(d) {
            return Err(Error::Document(
                "kernel or coefficient length does not match the input dimension".into(),
            ));
        }
        let z = DMatrix::from_fn(n, d, |i, j| doc.z_train[i][j]);
        let resid = DVector::from_vec(doc.residuals.clone());
        let caches = Caches::build(&doc.config, &doc.kernel, &z, &resid)?;
        Ok(HpcfeModel {
            config: doc.config.clone(),
            bounds: doc.bounds.clone(),
            f0: doc.f0,
            alpha: DVector::from_vec(doc.alpha.clone()),
            kernel: doc.kernel.clone(),
            sigma2: doc.sigma2,
            z_train: z,
            resid,
            iterations: doc.iterations,
            caches,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: HpcfeDocument = serde_json::from_str(s)?;
        HpcfeModel::from_document(&doc)
    }
}
