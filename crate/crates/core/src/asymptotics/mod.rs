//! Fits of level ladders in `1/m`: convergence rates, extrapolated limits
//! and star-product coefficients. Also hosts the experiment runner.

mod experiment;
mod extract;
mod fit;

pub use experiment::*;
pub use extract::{extract_c1, star_remainder, C1Extraction, PointC1, C1_ORDER};
pub use fit::{
    decay_rate, power_law_fit, richardson_fit, richardson_fit_complex, tail_rate, AsymptoticFit, FitForm, MAX_CONDITION,
};

use thiserror::Error;

use crate::coherent::CoherentError;
use crate::geometry::GeometryError;
use crate::hilbert::HilbertError;
use crate::numerics::NumericsError;
use crate::operators::OperatorsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample levels must be positive and strictly increasing")]
    LadderNotIncreasing,
    #[error("Vandermonde system ill-conditioned (condition {condition:e}); reduce the order")]
    IllConditioned { condition: f64 },
    #[error("sample at m = {m} is {value}, rates need positive samples")]
    NonPositiveSample { m: usize, value: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Operators(#[from] OperatorsError),
    #[error(transparent)]
    Coherent(#[from] CoherentError),
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
}
