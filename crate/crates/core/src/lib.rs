//! Group factor analysis (GFA) over multiple data modalities, with native
//! missing-data support.
//!
//! The model couples M groups of variables observed on the same N subjects
//! through a shared K-dimensional latent space. Group-wise automatic relevance
//! determination (ARD) priors separate factors shared across groups from
//! group-specific ones, and per-variable noise precisions let inference run
//! directly on incomplete data: every update only touches observed entries.
//!
//! The crate is organised around the experiment flow:
//!
//! * [`dataset`] — multi-modality containers with missingness masks, plus
//!   preprocessing (standardisation, confound removal), splitting, masking and
//!   median imputation.
//! * [`synth`] — synthetic data generators drawn from the generative model.
//! * [`gfa`] — the variational EM core: posterior updates, evidence lower
//!   bound, fit loop and multi-restart selection.
//! * [`analysis`] — prediction of unobserved modalities and missing entries,
//!   error metrics, factor relevance/classification and factor matching.
//! * [`baselines`] — classical CCA with permutation inference and the
//!   median-imputation pipeline.
//!
//! All numerics are generic over the scalar type through [`Real`]; the
//! `*64` aliases at the crate root cover the common double-precision case.

pub mod analysis;
pub mod baselines;
pub mod dataset;
pub mod error;
pub mod gfa;
pub mod linalg;
pub mod scalar;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision aliases for the main public types.
pub type GroupedDataset64 = dataset::GroupedDataset<f64>;
pub type ModalityMatrix64 = dataset::ModalityMatrix<f64>;
pub type SynthSpec64 = synth::SynthSpec<f64>;
pub type Hyperparams64 = gfa::Hyperparams<f64>;
pub type VariationalState64 = gfa::VariationalState<f64>;
pub type FitResult64 = gfa::FitResult<f64>;
pub type FactorReport64 = analysis::FactorReport<f64>;
pub type CcaResult64 = baselines::CcaResult<f64>;
