use thiserror::Error;

use crate::complex_field::FieldError;
use crate::config::ConfigError;
use crate::deformation::DeformationError;
use crate::export::ExportError;
use crate::geometry::GeometryError;
use crate::labyrinth::LabyrinthError;
use crate::metric::MetricError;
use crate::runge::RungeError;
use crate::sequence::SequenceError;
use crate::weierstrass::WeierstrassError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Any failure raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Weierstrass(#[from] WeierstrassError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Labyrinth(#[from] LabyrinthError),
    #[error(transparent)]
    Runge(#[from] RungeError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Deformation(#[from] DeformationError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Export(#[from] ExportError),
}
