//! Simple symmetric polygons, parallel offsets and polygonal pairs.

mod pair;
mod polygon;

use thiserror::Error;

pub use pair::{make_polygonal_pair, offset_pair, PolygonSpec, PolygonalPair};
pub use polygon::{segment_segment_distance, segments_intersect, Polygon, MITER_LIMIT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate polygon: {0}")]
    Degenerate(String),
    #[error("polygon is not simple: edges {0} and {1} intersect")]
    NotSimple(usize, usize),
    #[error("polygon is not symmetric under z ↦ −z: no vertex matches −({0}, {1})")]
    Asymmetric(f64, f64),
    #[error("containment {clause} violated: {detail}")]
    Containment { clause: &'static str, detail: String },
    #[error("offset {xi} too large: {detail}")]
    OffsetTooLarge { xi: f64, detail: String },
    #[error("offset distance must be positive, got {0}")]
    NonPositiveOffset(f64),
    #[error("{0}")]
    Precondition(String),
}
