use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::FieldError;

const NORMAL_EQUATIONS_LIMIT: f64 = 1e8;
const RANK_TOLERANCE: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FitSolver {
    NormalEquations,
    PivotedQr,
}

pub(crate) struct LeastSquares {
    pub solution: DVector<Complex64>,
    pub condition: f64,
    pub solver: FitSolver,
}

/// Solves `min ‖Ay − b‖` from the Gram system `AᴴA y = Aᴴb`, switching to a
/// column-pivoted QR of `A` (built lazily by `design`) when the Gram matrix
/// is too ill-conditioned for Cholesky.
pub(crate) fn solve_normal_or_qr<F>(
    gram: DMatrix<Complex64>,
    atb: DVector<Complex64>,
    design: F,
) -> Result<LeastSquares, FieldError>
where
    F: FnOnce() -> (DMatrix<Complex64>, DVector<Complex64>),
{
    let eig = gram.clone().symmetric_eigenvalues();
    let lmax = eig.iter().cloned().fold(0.0, f64::max);
    let lmin = eig.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if condition <= NORMAL_EQUATIONS_LIMIT {
        if let Some(chol) = Cholesky::new(gram) {
            return Ok(LeastSquares { solution: chol.solve(&atb), condition, solver: FitSolver::NormalEquations });
        }
    }
    let (a, b) = design();
    let solution = pivoted_qr_solve(a, &b, condition)?;
    Ok(LeastSquares { solution, condition, solver: FitSolver::PivotedQr })
}

fn pivoted_qr_solve(
    a: DMatrix<Complex64>,
    b: &DVector<Complex64>,
    condition: f64,
) -> Result<DVector<Complex64>, FieldError> {
    let n = a.ncols();
    let qr = a.col_piv_qr();
    let r = qr.r();
    let r00 = r[(0, 0)].norm();
    for j in 0..n {
        if r[(j, j)].norm() <= RANK_TOLERANCE * r00 {
            return Err(FieldError::IllConditioned { condition, rank: j, basis: n });
        }
    }
    let qtb = qr.q().adjoint() * b;
    let mut y = DVector::<Complex64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = qtb[i];
        for j in i + 1..n {
            s -= r[(i, j)] * y[j];
        }
        y[i] = s / r[(i, i)];
    }
    qr.p().inv_permute_rows(&mut y);
    Ok(y)
}
