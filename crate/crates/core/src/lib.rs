//! Additive influence model for cross-sectional panels.
//!
//! Responses follow `Y = S K + E` where `S_{t,j} = g(x_{t,j})` is a per-entity
//! signal and `K` is a kernel Gram matrix over unobserved latent positions.
//! The crate provides a synthetic generator ([`synth`]), an estimator for `K`
//! from `Y` alone ([`kestim`]), two learners for `g` ([`gest`], [`pvel`]) and
//! an evaluation kit ([`evalkit`]).

pub mod error;
pub mod evalkit;
pub mod gest;
pub mod io;
pub mod kestim;
pub mod linalg;
pub mod pvel;
pub mod rng;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
pub use evalkit::{EvalConfig, EvalReport, ForecastSet};
pub use gest::{PartitionSpec, PiecewiseG};
pub use kestim::{GramEstimate, HintSet};
pub use linalg::Spectrum;
pub use pvel::{BoostedModel, LearnerForm, LinearLearner};
pub use synth::{KernelSpec, LatentModel, PanelData, SignalFn, SignalKind};

pub use nalgebra::{DMatrix, DVector};
