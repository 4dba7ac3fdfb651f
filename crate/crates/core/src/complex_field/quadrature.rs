use std::sync::OnceLock;

use num_complex::Complex64;

use super::path::PolylinePath;
use super::FieldError;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from the Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn rule(order: usize) -> &'static GaussLegendre {
    static G8: OnceLock<GaussLegendre> = OnceLock::new();
    static G16: OnceLock<GaussLegendre> = OnceLock::new();
    match order {
        8 => G8.get_or_init(|| GaussLegendre::new(8)),
        16 => G16.get_or_init(|| GaussLegendre::new(16)),
        _ => unreachable!("only orders 8 and 16 are cached"),
    }
}

/// Outcome of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Quadrature<const D: usize> {
    pub value: [Complex64; D],
    /// Sum of local `|I₁₆ − I₈|` estimates.
    pub error: f64,
    /// `∫ ‖f‖_∞ |dw|`, the scale the tolerance is measured against.
    pub scale: f64,
    pub intervals: usize,
}

/// Maximum number of accepted plus pending subintervals.
pub const INTERVAL_BUDGET: usize = 1 << 14;

/// `∫_path f(w) dw` for a vector-valued integrand.
///
/// Each segment is integrated with 16-point Gauss–Legendre and bisected
/// while the 8-point estimate disagrees by more than its share of
/// `tol·(1 + scale)`, where the share is proportional to parameter length.
pub fn integrate<const D: usize, F>(f: F, path: &PolylinePath, tol: f64) -> Result<Quadrature<D>, FieldError>
where
    F: Fn(Complex64) -> [Complex64; D],
{
    if !(tol > 0.0) {
        return Err(FieldError::Tolerance(tol));
    }
    let total_len = path.length();
    let zero = [Complex64::new(0.0, 0.0); D];
    if total_len == 0.0 {
        return Ok(Quadrature { value: zero, error: 0.0, scale: 0.0, intervals: 0 });
    }

    let mut scale = 0.0;
    for (a, b) in path.segments() {
        let (_, _, s) = panel(&f, a, b, 0.0, 1.0)?;
        scale += s;
    }
    let budget_tol = tol * (1.0 + scale);

    let mut value = zero;
    let mut error = 0.0;
    let mut intervals = 0usize;
    for (a, b) in path.segments() {
        let seg_len = (b - a).norm();
        let mut stack = vec![(0.0f64, 1.0f64)];
        while let Some((t0, t1)) = stack.pop() {
            intervals += 1;
            if intervals + stack.len() > INTERVAL_BUDGET {
                return Err(FieldError::NonConvergence {
                    estimate: value.iter().map(|c| c.norm()).fold(0.0, f64::max),
                    error,
                });
            }
            let (i16, i8, _) = panel(&f, a, b, t0, t1)?;
            let err = (0..D).map(|d| (i16[d] - i8[d]).norm()).fold(0.0, f64::max);
            let share = budget_tol * seg_len * (t1 - t0) / total_len;
            if err <= share || t1 - t0 < 1e-12 {
                for d in 0..D {
                    value[d] += i16[d];
                }
                error += err;
            } else {
                let mid = 0.5 * (t0 + t1);
                stack.push((mid, t1));
                stack.push((t0, mid));
            }
        }
    }
    Ok(Quadrature { value, error, scale, intervals })
}

/// Order-16 and order-8 estimates on the parameter interval `[t0, t1]` of
/// the segment `[a, b]`, plus the order-16 estimate of `∫ ‖f‖_∞ |dw|`.
fn panel<const D: usize, F>(
    f: &F,
    a: Complex64,
    b: Complex64,
    t0: f64,
    t1: f64,
) -> Result<([Complex64; D], [Complex64; D], f64), FieldError>
where
    F: Fn(Complex64) -> [Complex64; D],
{
    let d = b - a;
    let half = 0.5 * (t1 - t0);
    let mid = 0.5 * (t0 + t1);
    let jac = d * half;
    let mut hi = [Complex64::new(0.0, 0.0); D];
    let mut lo = [Complex64::new(0.0, 0.0); D];
    let mut mag = 0.0;
    let g16 = rule(16);
    for (x, w) in g16.nodes.iter().zip(&g16.weights) {
        let v = f(a + d * (mid + half * x));
        let m = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if !m.is_finite() {
            return Err(FieldError::NonFinite { at: a + d * (mid + half * x) });
        }
        mag += w * m;
        for k in 0..D {
            hi[k] += v[k] * *w;
        }
    }
    let g8 = rule(8);
    for (x, w) in g8.nodes.iter().zip(&g8.weights) {
        let v = f(a + d * (mid + half * x));
        for k in 0..D {
            lo[k] += v[k] * *w;
        }
    }
    for k in 0..D {
        hi[k] *= jac;
        lo[k] *= jac;
    }
    Ok((hi, lo, mag * jac.norm()))
}

/// `∫_path f(w) dw` per component for a triple-valued integrand.
pub fn path_integral<F>(f: F, path: &PolylinePath, tol: f64) -> Result<[Complex64; 3], FieldError>
where
    F: Fn(Complex64) -> [Complex64; 3],
{
    integrate(f, path, tol).map(|q| q.value)
}

/// `∫_path ρ(w) |dw|` for a real density.
pub fn arc_integral<F>(rho: F, path: &PolylinePath, tol: f64) -> Result<Quadrature<1>, FieldError>
where
    F: Fn(Complex64) -> f64,
{
    // |dw| = dw · conj(u) for the unit tangent u of each segment; integrate
    // segment by segment so the tangent is constant.
    let mut out = Quadrature { value: [Complex64::new(0.0, 0.0)], error: 0.0, scale: 0.0, intervals: 0 };
    for (a, b) in path.segments() {
        let u = (b - a) / (b - a).norm();
        let seg = PolylinePath::segment(a, b)?;
        let q = integrate(|w| [Complex64::new(rho(w), 0.0) * u.conj()], &seg, tol)?;
        out.value[0] += Complex64::new(q.value[0].re, 0.0);
        out.error += q.error;
        out.scale += q.scale;
        out.intervals += q.intervals;
    }
    Ok(out)
}
