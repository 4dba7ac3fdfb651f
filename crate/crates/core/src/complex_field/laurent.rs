use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lstsq::{solve_normal_or_qr, FitSolver, LeastSquares};
use super::FieldError;

/// A finite sum `Σ c_k z^k` with `k_min ≤ k ≤ k_max`, negative exponents allowed.
///
/// Coefficients are stored densely from `k_min` upward. The zero polynomial
/// has no coefficients.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct LaurentPolynomial {
    k_min: i32,
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for LaurentPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut map = f.debug_map();
        for (k, c) in self.terms() {
            map.entry(&k, &c);
        }
        map.finish()
    }
}

impl LaurentPolynomial {
    pub fn new(k_min: i32, coeffs: Vec<Complex64>) -> Self {
        LaurentPolynomial { k_min, coeffs }.trimmed()
    }

    pub fn zero() -> Self {
        LaurentPolynomial { k_min: 0, coeffs: Vec::new() }
    }

    pub fn constant(c: impl Into<Complex64>) -> Self {
        Self::new(0, vec![c.into()])
    }

    pub fn monomial(k: i32, c: impl Into<Complex64>) -> Self {
        Self::new(k, vec![c.into()])
    }

    /// Builds a polynomial from `(exponent, coefficient)` pairs; repeated exponents add up.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (i32, Complex64)>,
    {
        let mut map: BTreeMap<i32, Complex64> = BTreeMap::new();
        for (k, c) in terms {
            *map.entry(k).or_default() += c;
        }
        let Some((&lo, _)) = map.first_key_value() else {
            return Self::zero();
        };
        let hi = *map.last_key_value().unwrap().0;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); (hi - lo + 1) as usize];
        for (k, c) in map {
            coeffs[(k - lo) as usize] = c;
        }
        Self::new(lo, coeffs)
    }

    fn trimmed(mut self) -> Self {
        while self.coeffs.last().is_some_and(|c| *c == Complex64::new(0.0, 0.0)) {
            self.coeffs.pop();
        }
        let lead = self.coeffs.iter().take_while(|c| **c == Complex64::new(0.0, 0.0)).count();
        if lead == self.coeffs.len() {
            return Self::zero();
        }
        self.coeffs.drain(..lead);
        self.k_min += lead as i32;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn k_min(&self) -> i32 {
        self.k_min
    }

    pub fn k_max(&self) -> i32 {
        self.k_min + self.coeffs.len() as i32 - 1
    }

    pub fn coeff(&self, k: i32) -> Complex64 {
        let i = k - self.k_min;
        if i < 0 {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs.get(i as usize).copied().unwrap_or_default()
    }

    /// Nonzero terms in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != Complex64::new(0.0, 0.0))
            .map(move |(i, c)| (self.k_min + i as i32, *c))
    }

    pub fn has_negative_powers(&self) -> bool {
        !self.is_zero() && self.k_min < 0
    }

    /// True when every exponent is even, so `p(z) = p̂(z²)`.
    pub fn is_even(&self) -> bool {
        self.terms().all(|(k, _)| k % 2 == 0)
    }

    /// Evaluates by Horner's rule on the nonnegative part in `z` and the
    /// negative part in `1/z`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64, FieldError> {
        if self.is_zero() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if self.k_min < 0 && z == Complex64::new(0.0, 0.0) {
            return Err(FieldError::Domain { k_min: self.k_min });
        }
        let k_max = self.k_max();
        let mut acc = Complex64::new(0.0, 0.0);
        if k_max >= 0 {
            let lo = self.k_min.max(0);
            for k in (lo..=k_max).rev() {
                acc = acc * z + self.coeff(k);
            }
            for _ in 0..lo {
                acc *= z;
            }
        }
        if self.k_min < 0 {
            let w = z.inv();
            let hi = k_max.min(-1);
            let mut neg = Complex64::new(0.0, 0.0);
            for k in self.k_min..=hi {
                neg = neg * w + self.coeff(k);
            }
            for _ in 0..(-hi) {
                neg *= w;
            }
            acc += neg;
        }
        Ok(acc)
    }

    /// `z ↦ p(z²)`.
    pub fn compose_square(&self) -> Self {
        Self::from_terms(self.terms().map(|(k, c)| (2 * k, c)))
    }

    pub fn derivative(&self) -> Self {
        Self::from_terms(self.terms().map(|(k, c)| (k - 1, c * k as f64)))
    }

    /// Termwise primitive; fails when the `z⁻¹` coefficient is nonzero.
    pub fn antiderivative(&self) -> Result<Self, FieldError> {
        let residue = self.coeff(-1);
        if residue != Complex64::new(0.0, 0.0) {
            return Err(FieldError::Residue { residue });
        }
        Ok(Self::from_terms(self.terms().map(|(k, c)| (k + 1, c / (k + 1) as f64))))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.k_min, self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

impl Add for &LaurentPolynomial {
    type Output = LaurentPolynomial;
    fn add(self, rhs: &LaurentPolynomial) -> LaurentPolynomial {
        LaurentPolynomial::from_terms(self.terms().chain(rhs.terms()))
    }
}

impl Sub for &LaurentPolynomial {
    type Output = LaurentPolynomial;
    fn sub(self, rhs: &LaurentPolynomial) -> LaurentPolynomial {
        LaurentPolynomial::from_terms(self.terms().chain(rhs.terms().map(|(k, c)| (k, -c))))
    }
}

impl Mul for &LaurentPolynomial {
    type Output = LaurentPolynomial;
    fn mul(self, rhs: &LaurentPolynomial) -> LaurentPolynomial {
        if self.is_zero() || rhs.is_zero() {
            return LaurentPolynomial::zero();
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        LaurentPolynomial::new(self.k_min + rhs.k_min, out)
    }
}

impl Neg for &LaurentPolynomial {
    type Output = LaurentPolynomial;
    fn neg(self) -> LaurentPolynomial {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for LaurentPolynomial {
            type Output = LaurentPolynomial;
            fn $m(self, rhs: LaurentPolynomial) -> LaurentPolynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// Result of [`laurent_fit`].
#[derive(Clone, Debug)]
pub struct LaurentFit {
    pub poly: LaurentPolynomial,
    /// `sqrt(Σ |p(z_i) − t_i|²)`.
    pub residual: f64,
    pub sup_residual: f64,
    /// Condition estimate of the column-scaled normal matrix.
    pub condition: f64,
    pub solver: FitSolver,
}

/// Least-squares fit of `samples` in the span of `z^k`, `k_min ≤ k ≤ k_max`.
///
/// Columns are scaled to unit norm. The normal equations are solved by
/// Cholesky while their condition estimate stays below `1e8`; beyond that a
/// column-pivoted QR of the design matrix takes over and reports rank loss.
pub fn laurent_fit(samples: &[(Complex64, Complex64)], k_min: i32, k_max: i32) -> Result<LaurentFit, FieldError> {
    if k_max < k_min {
        return Err(FieldError::EmptyBasis { k_min, k_max });
    }
    let n = (k_max - k_min + 1) as usize;
    if samples.len() < n {
        return Err(FieldError::TooFewSamples { samples: samples.len(), basis: n });
    }
    check_points(samples.iter().map(|s| s.0))?;

    let m = samples.len();
    let r_max = samples.iter().map(|s| s.0.norm()).fold(0.0, f64::max);
    let r_min = samples.iter().map(|s| s.0.norm()).fold(f64::INFINITY, f64::min);
    let mut a = DMatrix::<Complex64>::zeros(m, n);
    for (i, (z, _)) in samples.iter().enumerate() {
        let up = z / r_max;
        let down = r_min / z;
        for j in 0..n {
            let k = k_min + j as i32;
            a[(i, j)] = if k >= 0 { up.powi(k) } else { down.powi(-k) };
        }
    }
    let mut col_scale = vec![0.0; n];
    for j in 0..n {
        let norm = a.column(j).norm();
        col_scale[j] = if norm > 0.0 { norm } else { 1.0 };
        let s = col_scale[j];
        a.column_mut(j).iter_mut().for_each(|v| *v /= s);
    }
    let b = DVector::from_iterator(m, samples.iter().map(|s| s.1));
    let gram = a.adjoint() * &a;
    let atb = a.adjoint() * &b;
    let LeastSquares { solution: y, condition, solver } = solve_normal_or_qr(gram, atb, || (a, b))?;

    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        let k = k_min + j as i32;
        let unscale = if k >= 0 { r_max.powi(-k) } else { r_min.powi(-k) };
        coeffs[j] = y[j] / col_scale[j] * unscale;
    }
    let poly = LaurentPolynomial::new(k_min, coeffs);
    let (residual, sup_residual) = residuals(&poly, samples)?;
    Ok(LaurentFit { poly, residual, sup_residual, condition, solver })
}

pub(crate) fn check_points(points: impl Iterator<Item = Complex64>) -> Result<(), FieldError> {
    let mut keys: Vec<(u64, u64)> = Vec::new();
    for z in points {
        if z == Complex64::new(0.0, 0.0) {
            return Err(FieldError::ZeroSample);
        }
        keys.push(((z.re + 0.0).to_bits(), (z.im + 0.0).to_bits()));
    }
    keys.sort_unstable();
    if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
        let z = Complex64::new(f64::from_bits(w[0].0), f64::from_bits(w[0].1));
        return Err(FieldError::DuplicateSample { point: z });
    }
    Ok(())
}

fn residuals(p: &LaurentPolynomial, samples: &[(Complex64, Complex64)]) -> Result<(f64, f64), FieldError> {
    let mut sq = 0.0;
    let mut sup: f64 = 0.0;
    for (z, t) in samples {
        let r = (p.eval(*z)? - t).norm();
        sq += r * r;
        sup = sup.max(r);
    }
    Ok((sq.sqrt(), sup))
}
