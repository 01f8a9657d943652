use std::path::PathBuf;

use thiserror::Error;

use crate::asymptotics::AsymptoticsError;
use crate::coherent::CoherentError;
use crate::config::ConfigError;
use crate::geometry::GeometryError;
use crate::hilbert::HilbertError;
use crate::numerics::NumericsError;
use crate::operators::OperatorsError;

/// Crate-wide error; the display form names the module the failure came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("numerics: {0}")]
    Numerics(#[from] NumericsError),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("hilbert: {0}")]
    Hilbert(HilbertError),
    #[error("operators: {0}")]
    Operators(OperatorsError),
    #[error("coherent: {0}")]
    Coherent(#[from] CoherentError),
    #[error("asymptotics: {0}")]
    Asymptotics(AsymptoticsError),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("io: {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("report: {0}")]
    Report(String),
}

impl From<HilbertError> for Error {
    fn from(e: HilbertError) -> Self {
        match e {
            HilbertError::Geometry(e) => e.into(),
            HilbertError::Numerics(e) => e.into(),
            e => Error::Hilbert(e),
        }
    }
}

impl From<OperatorsError> for Error {
    fn from(e: OperatorsError) -> Self {
        match e {
            OperatorsError::Numerics(e) => e.into(),
            e => Error::Operators(e),
        }
    }
}

impl From<AsymptoticsError> for Error {
    fn from(e: AsymptoticsError) -> Self {
        match e {
            AsymptoticsError::Numerics(e) => e.into(),
            AsymptoticsError::Geometry(e) => e.into(),
            AsymptoticsError::Hilbert(e) => e.into(),
            AsymptoticsError::Operators(e) => e.into(),
            AsymptoticsError::Coherent(e) => e.into(),
            e => Error::Asymptotics(e),
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Module the error originated in.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Numerics(_) => "numerics",
            Error::Geometry(_) => "geometry",
            Error::Hilbert(_) => "hilbert",
            Error::Operators(_) => "operators",
            Error::Coherent(_) => "coherent",
            Error::Asymptotics(_) => "asymptotics",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Report(_) => "report",
        }
    }
}
