use thiserror::Error;

use crate::augment::AugmentError;
use crate::coords::CoordError;
use crate::harness::HarnessError;
use crate::ingest::IngestError;
use crate::model::ModelError;
use crate::topomap::TopomapError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Any pipeline failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Coord(#[from] CoordError),
    #[error(transparent)]
    Topomap(#[from] TopomapError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input, bad parameters or configuration.
    Input,
    /// Numerical failure such as a diverging loss.
    Numeric,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) => ErrorKind::Io,
            Error::Topomap(TopomapError::Io(_)) | Error::Model(ModelError::Io(_)) => ErrorKind::Io,
            Error::Coord(CoordError::NonConvergedBandwidth { .. }) => ErrorKind::Numeric,
            Error::Harness(h) => h.kind(),
            _ => ErrorKind::Input,
        }
    }
}
