//! Zero-calibration domain generalization for multichannel time series.
//!
//! The pipeline trains a *teacher* network on Fourier phase spectra, then a
//! *student* on raw signals with three terms: cross-entropy, feature
//! distillation towards the frozen teacher, and pairwise covariance alignment
//! across source domains. Training batches are augmented by swapping the
//! low-frequency amplitude spectrum between trials of different domains while
//! keeping each trial's phase.
//!
//! Module map:
//! - [`fourier`]: DFT, swap mask, spectral transfer, band-pass, Welch PSD
//! - [`diffengine`]: reverse-mode tape, SGD, parameter files
//! - [`model`]: conv feature extractor + dense classifier
//! - [`losses`]: cross-entropy, distillation MSE, covariance alignment
//! - [`data`]: trial files, synthetic domain-shift generator, preprocessing
//! - [`pipeline`]: teacher/student training and inference
//! - [`eval`]: accuracy, paired t-test, ablation runner, ERD/ERS report

pub mod data;
pub mod diffengine;
pub mod error;
pub mod eval;
pub mod fourier;
mod io;
pub mod losses;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod trial;

pub use error::{Error, Result};
pub use trial::TrialTensor;
