//! Laurent polynomials, least-squares fitting and adaptive path quadrature.

mod laurent;
mod lstsq;
mod ortho;
mod path;
mod quadrature;

use num_complex::Complex64;
use thiserror::Error;

pub use laurent::{laurent_fit, LaurentFit, LaurentPolynomial};
pub use lstsq::FitSolver;
pub use ortho::{OrthoLaurent, OrthoLaurentBasis, OrthoLaurentFit};
pub use path::{segment_distance, segment_distance_to_origin, PolylinePath};
pub use quadrature::{arc_integral, integrate, path_integral, GaussLegendre, Quadrature, INTERVAL_BUDGET};

/// A holomorphic function of one variable on the punctured plane, stored
/// either by monomial coefficients or in an orthogonalized Laurent basis.
#[derive(Clone, Debug)]
pub enum LaurentForm {
    Monomial(LaurentPolynomial),
    Orthogonal(OrthoLaurent),
}

impl LaurentForm {
    pub fn eval(&self, w: Complex64) -> Result<Complex64, FieldError> {
        match self {
            LaurentForm::Monomial(p) => p.eval(w),
            LaurentForm::Orthogonal(p) => p.eval(w),
        }
    }

    pub fn zero() -> Self {
        LaurentForm::Monomial(LaurentPolynomial::zero())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        match self {
            LaurentForm::Monomial(p) => LaurentForm::Monomial(p.scale(s)),
            LaurentForm::Orthogonal(p) => LaurentForm::Orthogonal(p.scale(s)),
        }
    }

    /// Largest exponent magnitude `m` of the span `{w^k : |k| ≤ m}` holding the function.
    pub fn degree(&self) -> usize {
        match self {
            LaurentForm::Monomial(p) if p.is_zero() => 0,
            LaurentForm::Monomial(p) => p.k_min().unsigned_abs().max(p.k_max().unsigned_abs()) as usize,
            LaurentForm::Orthogonal(p) => p.degree(),
        }
    }
}

impl From<LaurentPolynomial> for LaurentForm {
    fn from(p: LaurentPolynomial) -> Self {
        LaurentForm::Monomial(p)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("evaluation at z = 0 of a polynomial with exponent {k_min}")]
    Domain { k_min: i32 },
    #[error("empty exponent range [{k_min}, {k_max}]")]
    EmptyBasis { k_min: i32, k_max: i32 },
    #[error("{samples} samples for {basis} basis functions")]
    TooFewSamples { samples: usize, basis: usize },
    #[error("sample point at the origin")]
    ZeroSample,
    #[error("repeated sample point {point}")]
    DuplicateSample { point: Complex64 },
    #[error("ill-conditioned fit: condition {condition:.3e}, numerical rank {rank} of {basis}")]
    IllConditioned { condition: f64, rank: usize, basis: usize },
    #[error("nonzero residue {residue} has no Laurent primitive")]
    Residue { residue: Complex64 },
    #[error("invalid path: {0}")]
    Path(String),
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("quadrature did not converge: best estimate magnitude {estimate:.6e}, error {error:.3e}")]
    NonConvergence { estimate: f64, error: f64 },
    #[error("integrand not finite at {at}")]
    NonFinite { at: Complex64 },
}
