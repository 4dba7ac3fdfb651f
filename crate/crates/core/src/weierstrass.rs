//! Weierstrass representation: `(f, g) ↔ φ`, the immersion, the conformal
//! factor, the Gauss map, and the symmetry and period diagnostics.
//!
//! With `φ = (f(1−g²)/2, i f(1+g²)/2, f g)` the map
//! `X(z) = Re ∫_{z₀}^z φ(w) dw + c` is a conformal minimal immersion whose
//! metric is `λ²|dz|²` with `λ = |f|(1+|g|²)/2 = ‖φ‖/√2`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::complex_field::{integrate, FieldError, LaurentForm, LaurentPolynomial, PolylinePath};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Phi = [Complex64; 3];

pub const DEFAULT_BASE_POINT: f64 = 2.0 / 3.0;
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeierstrassError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("g has a pole at {z} (f vanishes there)")]
    PoleOfG { z: Complex64 },
    #[error("φ vanishes at {z}")]
    Degenerate { z: Complex64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

type WResult<T> = Result<T, WeierstrassError>;

/// One Runge deformation: in the orthonormal frame `R` (rows `e₁, e₂, e₃`)
/// the data change by `f ↦ f h`, `g ↦ g/h` with `h(z) = exp(μ(z²))`.
#[derive(Clone, Debug)]
pub struct Deformation {
    pub frame: Mat3,
    pub mu: LaurentForm,
}

impl Deformation {
    pub fn h(&self, z: Complex64) -> WResult<Complex64> {
        Ok(self.mu.eval(z * z)?.exp())
    }

    /// Applies the deformation to world-coordinate `φ` at `z`.
    ///
    /// In frame coordinates `A = φ₁ − iφ₂ = f` and `C = φ₁ + iφ₂ = −f g²`
    /// become `hA` and `C/h`, leaving `φ₃ = fg` untouched.
    pub fn apply(&self, phi: &Phi, z: Complex64) -> WResult<Phi> {
        let h = self.h(z)?;
        let p = rotate(&self.frame, phi);
        let a = (p[0] - I * p[1]) * h;
        let c = (p[0] + I * p[1]) / h;
        let q = [(a + c) * 0.5, I * (a - c) * 0.5, p[2]];
        Ok(rotate(&self.frame.transpose(), &q))
    }
}

pub fn rotate(r: &Mat3, v: &Phi) -> Phi {
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i] += v[j] * r[(i, j)];
        }
    }
    out
}

pub fn phi_norm(phi: &Phi) -> f64 {
    phi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn phi_re(phi: &Phi) -> Vec3 {
    Vec3::new(phi[0].re, phi[1].re, phi[2].re)
}

pub fn phi_im(phi: &Phi) -> Vec3 {
    Vec3::new(phi[0].im, phi[1].im, phi[2].im)
}

/// Weierstrass data of an immersion of the punctured disk.
///
/// A seed `φ⁰` given by Laurent polynomials is followed by a chain of
/// [`Deformation`]s (all in world coordinates); the result is finally
/// expressed in an output frame. The immersion is anchored by
/// `X(base_point) = translation`.
#[derive(Clone, Debug)]
pub struct WeierstrassData {
    seed: Arc<[LaurentPolynomial; 3]>,
    steps: Vec<Arc<Deformation>>,
    output: Mat3,
    base_point: Complex64,
    translation: Vec3,
}

impl WeierstrassData {
    /// Data from `(f, g)` given as Laurent polynomials.
    pub fn from_fg(f: &LaurentPolynomial, g: &LaurentPolynomial) -> Self {
        Self::from_phi(phi_from_fg(f, g))
    }

    pub fn from_phi(seed: [LaurentPolynomial; 3]) -> Self {
        WeierstrassData {
            seed: Arc::new(seed),
            steps: Vec::new(),
            output: Mat3::identity(),
            base_point: Complex64::new(DEFAULT_BASE_POINT, 0.0),
            translation: Vec3::zeros(),
        }
    }

    pub fn with_translation(mut self, c: Vec3) -> Self {
        self.translation = c;
        self
    }

    pub fn with_base_point(mut self, z0: Complex64) -> Self {
        self.base_point = z0;
        self
    }

    /// The same immersion shifted by `v`.
    pub fn translated(&self, v: Vec3) -> Self {
        let mut out = self.clone();
        out.translation += v;
        out
    }

    /// The same immersion expressed in the orthonormal frame `r` (rows are
    /// the new axes in current output coordinates).
    pub fn in_frame(&self, r: &Mat3) -> Self {
        let mut out = self.clone();
        out.output = r * self.output;
        out.translation = r * self.translation;
        out
    }

    /// Applies `f ↦ f h`, `g ↦ g/h` in the world frame `frame`, keeping the
    /// base point and `X(base_point)`.
    pub fn deformed(&self, frame: Mat3, mu: LaurentForm) -> Self {
        let mut out = self.clone();
        out.steps.push(Arc::new(Deformation { frame, mu }));
        out
    }

    pub fn seed(&self) -> &[LaurentPolynomial; 3] {
        &self.seed
    }

    pub fn steps(&self) -> &[Arc<Deformation>] {
        &self.steps
    }

    pub fn output_frame(&self) -> &Mat3 {
        &self.output
    }

    pub fn base_point(&self) -> Complex64 {
        self.base_point
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    /// True when the seed is even and every deformation is built on `z²`,
    /// which holds by construction for [`WeierstrassData::deformed`].
    pub fn is_z2_by_construction(&self) -> bool {
        self.seed.iter().all(|p| p.is_even())
    }

    pub fn phi(&self, z: Complex64) -> WResult<Phi> {
        let mut phi = [self.seed[0].eval(z)?, self.seed[1].eval(z)?, self.seed[2].eval(z)?];
        for step in &self.steps {
            phi = step.apply(&phi, z)?;
        }
        Ok(rotate(&self.output, &phi))
    }

    pub fn f(&self, z: Complex64) -> WResult<Complex64> {
        let phi = self.phi(z)?;
        Ok(phi[0] - I * phi[1])
    }

    /// `g = φ₃ / f`; a zero of `f` is reported as a pole of `g`.
    pub fn g(&self, z: Complex64) -> WResult<Complex64> {
        fg_from_phi(&self.phi(z)?).map(|(_, g)| g).map_err(|_| WeierstrassError::PoleOfG { z })
    }

    pub fn conformal_factor(&self, z: Complex64) -> WResult<f64> {
        Ok(phi_norm(&self.phi(z)?) * FRAC_1_SQRT_2)
    }

    /// `|f|(1+|g|²)/2`, the classical formula; fails at poles of `g`.
    pub fn conformal_factor_fg(&self, z: Complex64) -> WResult<f64> {
        let f = self.f(z)?;
        let g = self.g(z)?;
        Ok(0.5 * f.norm() * (1.0 + g.norm_sqr()))
    }

    /// Unit normal `X_u × X_v / |X_u × X_v|`, with `X_u = Re φ`, `X_v = −Im φ`.
    /// Agrees with the inverse stereographic image of `g`.
    pub fn gauss_map(&self, z: Complex64) -> WResult<Vec3> {
        let phi = self.phi(z)?;
        let n = phi_re(&phi).cross(&(-phi_im(&phi)));
        let norm = n.norm();
        if norm == 0.0 {
            return Err(WeierstrassError::Degenerate { z });
        }
        Ok(n / norm)
    }

    /// `Re ∫_path φ(w) dw`.
    pub fn integral(&self, path: &PolylinePath, tol: f64) -> WResult<Vec3> {
        let q = integrate(|w| self.phi(w).unwrap_or([Complex64::new(f64::NAN, 0.0); 3]), path, tol)?;
        Ok(Vec3::new(q.value[0].re, q.value[1].re, q.value[2].re))
    }

    /// `X(z)` along the default route from the base point.
    pub fn immerse(&self, z: Complex64, tol: f64) -> WResult<Vec3> {
        if z == self.base_point {
            return Ok(self.translation);
        }
        let path = PolylinePath::route(self.base_point, z)?;
        self.immerse_along(&path, tol)
    }

    /// `X` at the end of `path`, which must start at the base point.
    pub fn immerse_along(&self, path: &PolylinePath, tol: f64) -> WResult<Vec3> {
        if path.start() != self.base_point {
            return Err(WeierstrassError::Precondition(format!(
                "path starts at {} instead of the base point {}",
                path.start(),
                self.base_point
            )));
        }
        Ok(self.integral(path, tol)? + self.translation)
    }
}

/// Handle on a triple `φ = (φ₁, φ₂, φ₃)`.
#[derive(Clone, Debug)]
pub enum PhiTriple {
    Laurent([LaurentPolynomial; 3]),
    Data(WeierstrassData),
}

impl PhiTriple {
    pub fn eval(&self, z: Complex64) -> WResult<Phi> {
        match self {
            PhiTriple::Laurent(p) => Ok([p[0].eval(z)?, p[1].eval(z)?, p[2].eval(z)?]),
            PhiTriple::Data(d) => d.phi(z),
        }
    }
}

impl From<WeierstrassData> for PhiTriple {
    fn from(d: WeierstrassData) -> Self {
        PhiTriple::Data(d)
    }
}

/// `φ₁ = f(1−g²)/2`, `φ₂ = i f(1+g²)/2`, `φ₃ = f g`, exactly in Laurent arithmetic.
pub fn phi_from_fg(f: &LaurentPolynomial, g: &LaurentPolynomial) -> [LaurentPolynomial; 3] {
    let one = LaurentPolynomial::constant(1.0);
    let g2 = g * g;
    let half = Complex64::new(0.5, 0.0);
    [(f * &(&one - &g2)).scale(half), (f * &(&one + &g2)).scale(I * 0.5), f * g]
}

/// `(f, g) = (φ₁ − iφ₂, φ₃/(φ₁ − iφ₂))` at one point.
pub fn fg_from_phi(phi: &Phi) -> WResult<(Complex64, Complex64)> {
    let f = phi[0] - I * phi[1];
    if f == Complex64::new(0.0, 0.0) {
        return Err(WeierstrassError::PoleOfG { z: Complex64::new(f64::NAN, f64::NAN) });
    }
    Ok((f, phi[2] / f))
}

/// Inverse stereographic projection from the north pole; `None` is the pole of `g`.
pub fn stereographic(g: Option<Complex64>) -> Vec3 {
    match g {
        None => Vec3::new(0.0, 0.0, 1.0),
        Some(g) => {
            let m = g.norm_sqr();
            Vec3::new(2.0 * g.re, 2.0 * g.im, m - 1.0) / (m + 1.0)
        }
    }
}

/// Geodesic distance on the unit sphere.
pub fn sphere_distance(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// `|φ₁² + φ₂² + φ₃²| / ‖φ‖²`.
pub fn conformality_residual(phi: &Phi) -> f64 {
    let q: Complex64 = phi.iter().map(|c| c * c).sum();
    q.norm() / phi.iter().map(|c| c.norm_sqr()).sum::<f64>()
}

pub fn immerse(data: &WeierstrassData, z: Complex64, tol: f64) -> WResult<Vec3> {
    data.immerse(z, tol)
}

pub fn conformal_factor(data: &WeierstrassData, z: Complex64) -> WResult<f64> {
    data.conformal_factor(z)
}

pub fn gauss_map(data: &WeierstrassData, z: Complex64) -> WResult<Vec3> {
    data.gauss_map(z)
}

/// Checks `‖φ(z) − φ(−z)‖ ≤ tol (1 + ‖φ(z)‖)` on `probes`, which must be
/// closed under negation.
pub fn is_z2_type(phi: &PhiTriple, probes: &[Complex64], tol: f64) -> WResult<bool> {
    require_symmetric(probes)?;
    for &z in probes {
        let a = phi.eval(z)?;
        let b = phi.eval(-z)?;
        let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        if d > tol * (1.0 + phi_norm(&a)) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn require_symmetric(probes: &[Complex64]) -> WResult<()> {
    let key = |z: &Complex64| ((z.re + 0.0).to_bits(), (z.im + 0.0).to_bits());
    let mut keys: Vec<_> = probes.iter().map(key).collect();
    keys.sort_unstable();
    for z in probes {
        if keys.binary_search(&key(&-z)).is_err() {
            return Err(WeierstrassError::Precondition(format!("probe set lacks −({z})")));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SymmetryDefect {
    /// Mean of `X(z) + X(−z)` over the probes.
    pub mean: [f64; 3],
    /// Largest deviation from the mean.
    pub spread: f64,
}

/// `S(X) = X(z) + X(−z)` averaged over `probes`, with its spread.
pub fn symmetry_defect(data: &WeierstrassData, probes: &[Complex64], tol: f64) -> WResult<SymmetryDefect> {
    if probes.is_empty() {
        return Err(WeierstrassError::Precondition("no probes".into()));
    }
    let values =
        probes.iter().map(|&z| Ok(data.immerse(z, tol)? + data.immerse(-z, tol)?)).collect::<WResult<Vec<Vec3>>>()?;
    let mean = values.iter().sum::<Vec3>() / values.len() as f64;
    let spread = values.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max);
    Ok(SymmetryDefect { mean: [mean.x, mean.y, mean.z], spread })
}

/// `S(X)` from a single pair of points: for z²-type data it is constant, and
/// `X(z₀) + X(−z₀) = 2c + Re ∫_{z₀}^{−z₀} φ`.
pub fn symmetry_value(data: &WeierstrassData, tol: f64) -> WResult<Vec3> {
    let z0 = data.base_point();
    Ok(data.translation() * 2.0 + data.integral(&PolylinePath::route(z0, -z0)?, tol)?)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PeriodDefect {
    /// `Re ∮ φ`; vanishes for well-defined immersions.
    pub real: [f64; 3],
    /// `Im ∮ φ`, reported as a diagnostic.
    pub imag: [f64; 3],
}

impl PeriodDefect {
    pub fn max_real(&self) -> f64 {
        self.real.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// `∮ φ` over a closed loop winding once about the origin.
pub fn period_defect(phi: &PhiTriple, lp: &PolylinePath, tol: f64) -> WResult<PeriodDefect> {
    match lp.winding_number() {
        None => return Err(WeierstrassError::Precondition("loop is not closed".into())),
        Some(w) if w.abs() != 1 => return Err(WeierstrassError::Precondition(format!("loop winds {w} times about 0"))),
        Some(_) => {}
    }
    let q = integrate(|w| phi.eval(w).unwrap_or([Complex64::new(f64::NAN, 0.0); 3]), lp, tol)?;
    Ok(PeriodDefect {
        real: [q.value[0].re, q.value[1].re, q.value[2].re],
        imag: [q.value[0].im, q.value[1].im, q.value[2].im],
    })
}

pub const PROBE_RADII: usize = 64;
pub const PROBE_ANGLES: usize = 64;

/// `64 × 64` polar grid on `1/3 < |z| < 1`, exactly closed under `z ↦ −z`.
pub fn probe_grid() -> Vec<Complex64> {
    polar_grid(1.0 / 3.0, 1.0, PROBE_RADII, PROBE_ANGLES)
}

/// Cell-centred polar grid with `radii × angles` points (`angles` even);
/// the second half of the angles is the exact negation of the first.
pub fn polar_grid(r_in: f64, r_out: f64, radii: usize, angles: usize) -> Vec<Complex64> {
    let half = angles / 2;
    let mut out = Vec::with_capacity(radii * 2 * half);
    for i in 0..radii {
        let r = r_in + (r_out - r_in) * (i as f64 + 0.5) / radii as f64;
        let first: Vec<Complex64> =
            (0..half).map(|k| Complex64::from_polar(r, PI * (k as f64 + 0.5) / half as f64)).collect();
        out.extend(first.iter().copied());
        out.extend(first.iter().map(|z| -z));
    }
    out
}

/// Largest conformality residual and largest `|λ_fg − λ_φ|` over `probes`
/// (the second skips poles of `g`).
pub fn identity_residuals(data: &WeierstrassData, probes: &[Complex64]) -> WResult<(f64, f64)> {
    let mut conf: f64 = 0.0;
    let mut lam: f64 = 0.0;
    for &z in probes {
        let phi = data.phi(z)?;
        conf = conf.max(conformality_residual(&phi));
        if let Ok(l) = data.conformal_factor_fg(z) {
            let l2 = phi_norm(&phi) * FRAC_1_SQRT_2;
            lam = lam.max((l - l2).abs() / l2.max(1.0));
        }
    }
    Ok((conf, lam))
}
