//! Nonvanishing multipliers `h(z) = exp(μ(z²))` close to 1 on one compact set
//! and close to `τ` on another.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::complex_field::{FieldError, LaurentForm, OrthoLaurent, OrthoLaurentBasis};

/// Smallest degree tried; the sweep doubles from here.
pub const FIRST_DEGREE: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RungeError {
    #[error("{0}")]
    Precondition(String),
    #[error(
        "no multiplier certified up to degree {degree} for τ = {tau}: best sup|h−1| = {sup_one:.3e}, sup|h−τ| = {sup_tau:.3e} (need < {bound:.3e})"
    )]
    NotCertified { tau: f64, degree: usize, sup_one: f64, sup_tau: f64, bound: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// A finite sample of a compact set, with a denser validation sample.
#[derive(Clone, Debug)]
pub struct CompactSetSample {
    points: Vec<Complex64>,
    validation: Vec<Complex64>,
    symmetric: bool,
}

/// Bit pattern with `−0.0` folded into `0.0`.
fn key(z: &Complex64) -> (u64, u64) {
    ((z.re + 0.0).to_bits(), (z.im + 0.0).to_bits())
}

fn closed_under_negation(points: &[Complex64]) -> bool {
    let set: HashSet<_> = points.iter().map(key).collect();
    points.iter().all(|z| set.contains(&key(&-z)))
}

/// `n` points on a circle, `n` rounded up to even so that the second half
/// is the exact negation of the first when the centre is 0.
fn circle_points(centre: Complex64, r: f64, spacing: f64) -> Vec<Complex64> {
    let n = ((2.0 * PI * r / spacing).ceil() as usize).max(8).next_multiple_of(2);
    let half: Vec<_> = (0..n / 2).map(|k| Complex64::from_polar(r, 2.0 * PI * k as f64 / n as f64)).collect();
    half.iter().map(|p| centre + p).chain(half.iter().map(|p| centre - p)).collect()
}

impl CompactSetSample {
    pub fn new(points: Vec<Complex64>, validation: Vec<Complex64>, symmetric: bool) -> Result<Self, RungeError> {
        if points.is_empty() || validation.is_empty() {
            return Err(RungeError::Precondition("empty sample".into()));
        }
        if points
            .iter()
            .chain(&validation)
            .any(|z| *z == Complex64::new(0.0, 0.0) || !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(RungeError::Precondition("sample contains 0 or a non-finite point".into()));
        }
        if symmetric && !(closed_under_negation(&points) && closed_under_negation(&validation)) {
            return Err(RungeError::Precondition("sample flagged symmetric is not closed under z ↦ −z".into()));
        }
        Ok(CompactSetSample { points, validation, symmetric })
    }

    /// Uses the fitting points for validation too.
    pub fn from_points(points: Vec<Complex64>, symmetric: bool) -> Result<Self, RungeError> {
        CompactSetSample::new(points.clone(), points, symmetric)
    }

    /// Closed annulus `r_in ≤ |z| ≤ r_out`: both circles at `spacing`, the
    /// interior at `4·spacing`. Validation quarters the boundary spacing.
    pub fn annulus(r_in: f64, r_out: f64, spacing: f64) -> Result<Self, RungeError> {
        if !(0.0 < r_in && r_in < r_out && spacing > 0.0) {
            return Err(RungeError::Precondition(format!("bad annulus {r_in}..{r_out}")));
        }
        let build = |h: f64, interior: f64| {
            let origin = Complex64::new(0.0, 0.0);
            let mut pts = circle_points(origin, r_in, h);
            pts.extend(circle_points(origin, r_out, h));
            let rings = ((r_out - r_in) / interior).ceil() as usize;
            for i in 1..rings {
                let r = r_in + (r_out - r_in) * i as f64 / rings as f64;
                pts.extend(circle_points(origin, r, interior));
            }
            pts
        };
        CompactSetSample::new(build(spacing, 4.0 * spacing), build(spacing / 4.0, 4.0 * spacing), true)
    }

    /// Closed disks of radius `r` around each centre (and around the negated
    /// centres when `symmetric`), sampled like [`CompactSetSample::annulus`].
    pub fn disks(centres: &[Complex64], r: f64, spacing: f64, symmetric: bool) -> Result<Self, RungeError> {
        let build = |h: f64, interior: f64| {
            let mut pts = Vec::new();
            for &c in centres {
                let mut one = circle_points(Complex64::new(0.0, 0.0), r, h);
                let rings = (r / interior).ceil() as usize;
                for i in 1..rings {
                    one.extend(circle_points(Complex64::new(0.0, 0.0), r * i as f64 / rings as f64, interior));
                }
                one.push(Complex64::new(0.0, 0.0));
                pts.extend(one.iter().map(|p| c + p));
                if symmetric {
                    pts.extend(one.iter().map(|p| -(c + p)));
                }
            }
            pts
        };
        CompactSetSample::new(build(spacing, 4.0 * spacing), build(spacing / 4.0, 4.0 * spacing), symmetric)
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn validation(&self) -> &[Complex64] {
        &self.validation
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Distinct squares of the fitting points.
    fn squares(&self) -> Vec<Complex64> {
        dedup_squares(&self.points)
    }
}

fn dedup_squares(points: &[Complex64]) -> Vec<Complex64> {
    let mut seen = HashSet::new();
    points.iter().map(|z| z * z).filter(|w| seen.insert(key(w))).collect()
}

/// Minimum distance between two finite point sets.
pub fn set_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut sorted: Vec<Complex64> = b.to_vec();
    sorted.sort_by(|p, q| p.re.total_cmp(&q.re));
    a.par_iter()
        .map(|p| {
            let mut best = f64::INFINITY;
            let start = sorted.partition_point(|q| q.re < p.re);
            for q in sorted[start..].iter() {
                if q.re - p.re >= best {
                    break;
                }
                best = best.min((p - q).norm());
            }
            for q in sorted[..start].iter().rev() {
                if p.re - q.re >= best {
                    break;
                }
                best = best.min((p - q).norm());
            }
            best
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// `h(z) = exp(μ(z²))` with its certification record.
#[derive(Clone, Debug)]
pub struct RungeMultiplier {
    mu: LaurentForm,
    tau: f64,
    /// Measured `sup |h − 1|` on the first set's validation sample.
    pub sup_one: f64,
    /// Measured `sup |h − τ|` on the second set's validation sample.
    pub sup_tau: f64,
    /// Least-squares sup residual of the `μ` fit on the squared nodes.
    pub fit_residual: f64,
}

impl RungeMultiplier {
    /// `h ≡ 1`.
    pub fn identity(tau: f64) -> Self {
        RungeMultiplier { mu: LaurentForm::zero(), tau, sup_one: 0.0, sup_tau: (tau - 1.0).abs(), fit_residual: 0.0 }
    }

    pub fn mu(&self) -> &LaurentForm {
        &self.mu
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn degree(&self) -> usize {
        self.mu.degree()
    }

    /// `μ(z²)`.
    pub fn log_h(&self, z: Complex64) -> Result<Complex64, FieldError> {
        self.mu.eval(z * z)
    }

    pub fn h(&self, z: Complex64) -> Result<Complex64, FieldError> {
        Ok(self.log_h(z)?.exp())
    }

    pub fn certified(&self) -> bool {
        self.sup_one < 1.0 / self.tau && self.sup_tau < 1.0 / self.tau
    }
}

/// Fits of the indicator of the second set at every sweep degree, reused for
/// any `τ` since `μ = ln τ · χ` is linear in `ln τ`.
#[derive(Clone, Debug)]
pub struct RungeFitter {
    fits: Vec<(OrthoLaurent, f64)>,
    one: Vec<Vec<Complex64>>,
    two: Vec<Vec<Complex64>>,
}

impl RungeFitter {
    pub fn new(e1: &CompactSetSample, e2: &CompactSetSample, basis_budget: usize) -> Result<Self, RungeError> {
        if !(e1.is_symmetric() && e2.is_symmetric()) {
            return Err(RungeError::Precondition("both sets must be symmetric".into()));
        }
        if set_distance(e1.points(), e2.points()) == 0.0 {
            return Err(RungeError::Precondition("the sets intersect".into()));
        }
        let w1 = e1.squares();
        let w2 = e2.squares();
        if set_distance(&w1, &w2) == 0.0 {
            return Err(RungeError::Precondition("the squared sets intersect".into()));
        }
        let nodes: Vec<Complex64> = w1.iter().chain(&w2).copied().collect();
        let targets: Vec<Complex64> =
            w1.iter().map(|_| Complex64::new(0.0, 0.0)).chain(w2.iter().map(|_| Complex64::new(1.0, 0.0))).collect();
        let mut degrees = Vec::new();
        let mut d = FIRST_DEGREE;
        while d <= basis_budget && 2 * d < nodes.len() {
            degrees.push(d);
            d *= 2;
        }
        let Some(&top) = degrees.last() else {
            return Ok(RungeFitter { fits: Vec::new(), one: Vec::new(), two: Vec::new() });
        };
        let basis = Arc::new(OrthoLaurentBasis::new(&nodes, top)?);
        let fits = degrees
            .iter()
            .map(|&d| basis.fit(&targets, d).map(|f| (f.poly, f.sup_residual)))
            .collect::<Result<Vec<_>, _>>()?;
        let evaluate = |pts: &[Complex64]| -> Result<Vec<Vec<Complex64>>, FieldError> {
            let per_point = dedup_squares(pts)
                .par_iter()
                .map(|w| {
                    let v = basis.values(*w)?;
                    Ok(fits.iter().map(|(p, _)| p.eval_from(&v)).collect::<Vec<_>>())
                })
                .collect::<Result<Vec<_>, FieldError>>()?;
            Ok((0..fits.len()).map(|i| per_point.iter().map(|row| row[i]).collect()).collect())
        };
        let one = evaluate(e1.validation())?;
        let two = evaluate(e2.validation())?;
        Ok(RungeFitter { fits, one, two })
    }

    /// Degrees of the sweep, in order.
    pub fn degrees(&self) -> Vec<usize> {
        self.fits.iter().map(|(p, _)| p.degree()).collect()
    }

    fn errors(&self, i: usize, a: f64, tau: f64) -> (f64, f64) {
        let sup = |vals: &[Complex64], target: f64| {
            vals.iter().map(|chi| ((chi * a).exp() - target).norm()).fold(0.0, f64::max)
        };
        (sup(&self.one[i], 1.0), sup(&self.two[i], tau))
    }

    /// The first certified multiplier of the sweep, or the failure with the
    /// best errors seen.
    pub fn multiplier(&self, tau: f64) -> Result<RungeMultiplier, RungeError> {
        if !(tau > 1.0) || !tau.is_finite() {
            return Err(RungeError::Precondition(format!("τ must exceed 1, got {tau}")));
        }
        let identity = RungeMultiplier::identity(tau);
        if identity.certified() {
            return Ok(identity);
        }
        let a = tau.ln();
        let bound = 1.0 / tau;
        let mut best = (f64::INFINITY, f64::INFINITY);
        for (i, (poly, residual)) in self.fits.iter().enumerate() {
            let (e1, e2) = self.errors(i, a, tau);
            if e1.max(e2) < best.0.max(best.1) {
                best = (e1, e2);
            }
            if e1 < bound && e2 < bound {
                return Ok(RungeMultiplier {
                    mu: LaurentForm::Orthogonal(poly.scale(Complex64::new(a, 0.0))),
                    tau,
                    sup_one: e1,
                    sup_tau: e2,
                    fit_residual: residual * a,
                });
            }
        }
        Err(RungeError::NotCertified {
            tau,
            degree: self.degrees().last().copied().unwrap_or(0),
            sup_one: best.0,
            sup_tau: best.1,
            bound,
        })
    }
}

/// Multiplier `h = exp(μ(z²))` with `|h − 1| < 1/τ` on `e1` and `|h − τ| < 1/τ`
/// on `e2`, measured on the validation samples, growing the Laurent degree
/// `4, 8, 16, …` up to `basis_budget`.
pub fn runge_h(
    e1: &CompactSetSample,
    e2: &CompactSetSample,
    tau: f64,
    basis_budget: usize,
) -> Result<RungeMultiplier, RungeError> {
    if !(tau > 1.0) || !tau.is_finite() {
        return Err(RungeError::Precondition(format!("τ must exceed 1, got {tau}")));
    }
    RungeFitter::new(e1, e2, basis_budget)?.multiplier(tau)
}

/// `ε = 1/(3τ(1+τ))`: a fit with `|μ| < ε` and `|μ − ln τ| < ε` implies both
/// certification inequalities.
pub fn fit_tolerance(tau: f64) -> f64 {
    1.0 / (3.0 * tau * (1.0 + tau))
}
