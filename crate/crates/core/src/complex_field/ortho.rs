use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::laurent::{check_points, LaurentPolynomial};
use super::lstsq::{solve_normal_or_qr, FitSolver, LeastSquares};
use super::FieldError;

/// Polynomials `q_0, …, q_m` in one variable, discretely orthonormal on the
/// nodes they were built from (Arnoldi iteration on the multiplication
/// operator). Stored as the Hessenberg recurrence so that evaluation at new
/// points stays stable at degrees where monomial coefficients are useless.
#[derive(Clone, Debug)]
struct ArnoldiChain {
    /// `h[k][j]` for `j ≤ k + 1`.
    h: Vec<Vec<Complex64>>,
}

impl ArnoldiChain {
    /// Returns the chain and the basis matrix (`nodes × (degree + 1)`),
    /// columns normalized to `‖q‖ = √M`.
    fn build(nodes: &[Complex64], degree: usize) -> (Self, DMatrix<Complex64>) {
        let m = nodes.len();
        let sqrt_m = (m as f64).sqrt();
        let mut q = DMatrix::<Complex64>::zeros(m, degree + 1);
        q.column_mut(0).fill(Complex64::new(1.0, 0.0));
        let mut h = Vec::with_capacity(degree);
        for k in 0..degree {
            let mut v: DVector<Complex64> = DVector::from_iterator(m, (0..m).map(|i| nodes[i] * q[(i, k)]));
            let mut hk = vec![Complex64::new(0.0, 0.0); k + 2];
            for _pass in 0..2 {
                for j in 0..=k {
                    let c = q.column(j).dotc(&v) / m as f64;
                    hk[j] += c;
                    v.axpy(-c, &q.column(j), Complex64::new(1.0, 0.0));
                }
            }
            let norm = v.norm() / sqrt_m;
            hk[k + 1] = Complex64::new(norm, 0.0);
            q.column_mut(k + 1).copy_from(&(v / Complex64::new(norm, 0.0)));
            h.push(hk);
        }
        (ArnoldiChain { h }, q)
    }

    fn degree(&self) -> usize {
        self.h.len()
    }

    fn eval_into(&self, x: Complex64, degree: usize, out: &mut Vec<Complex64>) {
        out.clear();
        out.push(Complex64::new(1.0, 0.0));
        for k in 0..degree {
            let hk = &self.h[k];
            let mut v = x * out[k];
            for j in 0..=k {
                v -= hk[j] * out[j];
            }
            out.push(v / hk[k + 1]);
        }
    }

    /// Monomial coefficients of `q_0..=q_degree` (ill-conditioned for large degree).
    fn monomials(&self, degree: usize) -> Vec<Vec<Complex64>> {
        let mut polys: Vec<Vec<Complex64>> = vec![vec![Complex64::new(1.0, 0.0)]];
        for k in 0..degree {
            let hk = &self.h[k];
            let mut next = vec![Complex64::new(0.0, 0.0); k + 2];
            for (i, c) in polys[k].iter().enumerate() {
                next[i + 1] += c;
            }
            for j in 0..=k {
                for (i, c) in polys[j].iter().enumerate() {
                    next[i] -= hk[j] * c;
                }
            }
            next.iter_mut().for_each(|c| *c /= hk[k + 1]);
            polys.push(next);
        }
        polys
    }
}

/// Laurent basis `{w^k : |k| ≤ m}` orthogonalized separately on the
/// nonnegative and negative sides over a fixed node set.
///
/// Nested: the first `d + 1` functions of each side span `{w^k : |k| ≤ d}`, so
/// fits of every degree up to `m` share one construction.
#[derive(Clone, Debug)]
pub struct OrthoLaurentBasis {
    pos: ArnoldiChain,
    neg: ArnoldiChain,
    design: DMatrix<Complex64>,
    gram: DMatrix<Complex64>,
}

impl OrthoLaurentBasis {
    /// Builds the basis up to degree `m` on `nodes` (nonzero, pairwise distinct).
    pub fn new(nodes: &[Complex64], m: usize) -> Result<Self, FieldError> {
        let basis = 2 * m + 1;
        if nodes.len() < basis {
            return Err(FieldError::TooFewSamples { samples: nodes.len(), basis });
        }
        check_points(nodes.iter().copied())?;
        let inv: Vec<Complex64> = nodes.iter().map(|z| z.inv()).collect();
        let (pos, qp) = ArnoldiChain::build(nodes, m);
        let (neg, qn) = ArnoldiChain::build(&inv, m);
        let mut design = DMatrix::<Complex64>::zeros(nodes.len(), basis);
        design.columns_mut(0, m + 1).copy_from(&qp);
        design.columns_mut(m + 1, m).copy_from(&qn.columns(1, m));
        let gram = design.adjoint() * &design;
        Ok(OrthoLaurentBasis { pos, neg, design, gram })
    }

    pub fn max_degree(&self) -> usize {
        self.pos.degree()
    }

    pub fn nodes(&self) -> usize {
        self.design.nrows()
    }

    /// `[q⁺_0(w) … q⁺_m(w), q⁻_1(1/w) … q⁻_m(1/w)]` at the full degree `m`;
    /// fits of any degree are evaluated from it with [`OrthoLaurent::eval_from`].
    pub fn values(&self, w: Complex64) -> Result<Vec<Complex64>, FieldError> {
        if w == Complex64::new(0.0, 0.0) {
            return Err(FieldError::Domain { k_min: -(self.max_degree() as i32) });
        }
        let m = self.max_degree();
        let mut out = Vec::with_capacity(2 * m + 1);
        self.pos.eval_into(w, m, &mut out);
        let mut neg = Vec::with_capacity(m + 1);
        self.neg.eval_into(w.inv(), m, &mut neg);
        out.extend_from_slice(&neg[1..]);
        Ok(out)
    }

    fn columns(&self, degree: usize) -> Vec<usize> {
        let m = self.max_degree();
        (0..=degree).chain((m + 1)..(m + 1 + degree)).collect()
    }

    /// Least-squares fit of `targets` (one per node) in the degree-`degree` subspace.
    pub fn fit(self: &Arc<Self>, targets: &[Complex64], degree: usize) -> Result<OrthoLaurentFit, FieldError> {
        if degree > self.max_degree() {
            return Err(FieldError::EmptyBasis { k_min: -(degree as i32), k_max: degree as i32 });
        }
        if targets.len() != self.nodes() {
            return Err(FieldError::TooFewSamples { samples: targets.len(), basis: self.nodes() });
        }
        let cols = self.columns(degree);
        let b = DVector::from_column_slice(targets);
        let gram = self.gram.select_rows(&cols).select_columns(&cols);
        let sub = self.design.select_columns(&cols);
        let atb = sub.adjoint() * &b;
        let LeastSquares { solution, condition, solver } = solve_normal_or_qr(gram, atb, || (sub.clone(), b.clone()))?;
        let fitted = &sub * &solution;
        let mut sq = 0.0;
        let mut sup: f64 = 0.0;
        for (f, t) in fitted.iter().zip(targets) {
            let r = (f - t).norm();
            sq += r * r;
            sup = sup.max(r);
        }
        let poly = OrthoLaurent { basis: Arc::clone(self), degree, coeffs: solution.iter().copied().collect() };
        Ok(OrthoLaurentFit { poly, residual: sq.sqrt(), sup_residual: sup, condition, solver })
    }
}

/// A Laurent polynomial of symmetric degree `d` stored in an
/// [`OrthoLaurentBasis`]: `Σ a_k q⁺_k(w) + Σ b_k q⁻_k(1/w)`.
#[derive(Clone, Debug)]
pub struct OrthoLaurent {
    basis: Arc<OrthoLaurentBasis>,
    degree: usize,
    /// `[a_0..=a_d, b_1..=b_d]`.
    coeffs: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct OrthoLaurentFit {
    pub poly: OrthoLaurent,
    pub residual: f64,
    pub sup_residual: f64,
    pub condition: f64,
    pub solver: FitSolver,
}

impl OrthoLaurent {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn scale(&self, s: Complex64) -> Self {
        OrthoLaurent {
            basis: Arc::clone(&self.basis),
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn eval(&self, w: Complex64) -> Result<Complex64, FieldError> {
        if w == Complex64::new(0.0, 0.0) && self.degree > 0 {
            return Err(FieldError::Domain { k_min: -(self.degree as i32) });
        }
        let d = self.degree;
        let mut buf = Vec::with_capacity(d + 1);
        self.basis.pos.eval_into(w, d, &mut buf);
        let mut acc: Complex64 = buf.iter().zip(&self.coeffs[..=d]).map(|(q, a)| q * a).sum();
        if d > 0 {
            self.basis.neg.eval_into(w.inv(), d, &mut buf);
            acc += buf[1..].iter().zip(&self.coeffs[d + 1..]).map(|(q, b)| q * b).sum::<Complex64>();
        }
        Ok(acc)
    }

    /// Value from the basis values produced by [`OrthoLaurentBasis::values`].
    pub fn eval_from(&self, values: &[Complex64]) -> Complex64 {
        let d = self.degree;
        let m = self.basis.max_degree();
        let pos: Complex64 = values[..=d].iter().zip(&self.coeffs[..=d]).map(|(q, a)| q * a).sum();
        let neg: Complex64 = values[m + 1..m + 1 + d].iter().zip(&self.coeffs[d + 1..]).map(|(q, b)| q * b).sum();
        pos + neg
    }

    /// Expands into monomial coefficients. Exact in exact arithmetic; in
    /// floating point only meaningful for small degrees.
    pub fn to_laurent(&self) -> LaurentPolynomial {
        let d = self.degree;
        let pos = self.basis.pos.monomials(d);
        let neg = self.basis.neg.monomials(d);
        let mut terms = Vec::new();
        for (k, a) in self.coeffs[..=d].iter().enumerate() {
            terms.extend(pos[k].iter().enumerate().map(|(i, c)| (i as i32, a * c)));
        }
        for (k, b) in self.coeffs[d + 1..].iter().enumerate() {
            terms.extend(neg[k + 1].iter().enumerate().map(|(i, c)| (-(i as i32), b * c)));
        }
        LaurentPolynomial::from_terms(terms)
    }
}
