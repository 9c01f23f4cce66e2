//! Multi-fidelity surrogate modelling with hybrid polynomial correlated
//! function expansions (H-PCFE), cascaded across fidelity levels, plus the
//! single-degree-of-freedom digital-twin tooling built on top of it.
//!
//! Module map:
//!
//! * [`basis`]: orthonormal Legendre design matrices
//! * [`kernel`]: squared-exponential correlation and likelihood fitting
//! * [`hpcfe`]: single-fidelity trend + GP surrogate
//! * [`mf`]: recursive multi-fidelity cascade
//! * [`uq`]: sampling, KDE, distribution metrics
//! * [`bench`]: analytical benchmark problems
//! * [`twin`]: SDOF degradation, identification and tracking
//! * [`datasets`]: experimental designs and file formats

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod bench;
pub mod datasets;
pub mod error;
pub mod hpcfe;
pub mod kernel;
pub mod linalg;
pub mod mf;
pub mod twin;
pub mod uq;

pub use basis::{build_design_matrix, normalize_inputs, BasisSpec, InputBounds};
pub use error::{Error, Result};
pub use hpcfe::{HpcfeConfig, HpcfeModel, Prediction};
pub use kernel::{KernelFitOptions, KernelSpec};
pub use mf::{CascadeConfig, DeepHpcfeModel, FidelityDataset, FidelityLevel};

