//! Numerical engine for bounded minimal annuli built from Weierstrass data.
//!
//! The crate follows the stages of an iterative construction: Laurent and
//! quadrature primitives ([`complex_field`]), the Weierstrass representation
//! ([`weierstrass`]), polygonal pairs and the labyrinth ([`geometry`],
//! [`labyrinth`]), Runge-type multipliers ([`runge`]), intrinsic distances
//! ([`metric`]), the deformation lemma ([`deformation`]) and the outer
//! sequence ([`sequence`]). [`config`] and [`export`] cover run
//! configuration and file formats.

pub mod complex_field;
pub mod config;
pub mod deformation;
pub mod error;
pub mod export;
pub mod geometry;
pub mod labyrinth;
pub mod metric;
pub mod runge;
pub mod sequence;
pub mod weierstrass;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Chapters of the guide, compiled so that their snippets run as doc-tests.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/laurent.md")]
    pub mod laurent {}
    #[doc = include_str!("../../../book/src/weierstrass.md")]
    pub mod weierstrass {}
    #[doc = include_str!("../../../book/src/polygons.md")]
    pub mod polygons {}
    #[doc = include_str!("../../../book/src/labyrinth.md")]
    pub mod labyrinth {}
    #[doc = include_str!("../../../book/src/runge.md")]
    pub mod runge {}
    #[doc = include_str!("../../../book/src/distance.md")]
    pub mod distance {}
    #[doc = include_str!("../../../book/src/deformation.md")]
    pub mod deformation {}
    #[doc = include_str!("../../../book/src/sequence.md")]
    pub mod sequence {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
