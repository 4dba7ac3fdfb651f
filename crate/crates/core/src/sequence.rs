//! The outer recursion `χ₁, χ₂, …`: each term is an immersion on a polygonal
//! pair together with the scalars `εₙ, ξₙ, kₙ`. The next term comes from one
//! lemma run on the current one. Only finitely many terms are computed, and
//! every property of a term is measured on meshes.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::complex_field::LaurentPolynomial;
use crate::deformation::{
    boundary_distances, run_lemma, Check, DeformationError, LemmaConfig, LemmaParams, LemmaRun, Report, StepConfig,
    StepRecord,
};
use crate::geometry::{offset_pair, GeometryError, PolygonalPair};
use crate::metric::{build_mesh, immerse_nodes, MeshDomain, MetricError};
use crate::weierstrass::{is_z2_type, probe_grid, symmetry_value, PhiTriple, Vec3, WeierstrassData, WeierstrassError};

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("seed does not satisfy the first-term properties: {0}")]
    Seed(String),
    #[error("no admissible ξ for term {n}: {detail}")]
    Schedule { n: usize, detail: String },
    #[error("term {n} cannot be advanced: {detail}")]
    Advance { n: usize, detail: String, attempts: Box<Vec<LemmaAttempt>> },
    #[error(transparent)]
    Deformation(#[from] DeformationError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Weierstrass(#[from] WeierstrassError),
}

type SResult<T> = Result<T, SequenceError>;

/// `α₁ = e^{1/2}/2` and `αₙ = e^{−1/2ⁿ}`; the partial products are
/// `e^{1/2ⁿ}/2`.
pub fn alpha(n: usize) -> f64 {
    assert!(n >= 1, "α is indexed from 1");
    if n == 1 {
        0.5f64.exp() / 2.0
    } else {
        (-(0.5f64).powi(n as i32)).exp()
    }
}

/// `∏_{i=1}^n αᵢ` in closed form.
pub fn alpha_product(n: usize) -> f64 {
    0.5 * (0.5f64).powi(n as i32).exp()
}

/// `ρₙ = Σ_{i≤n} 1/i`.
pub fn rho(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

/// Knobs of the outer loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SequenceConfig {
    pub lemma: LemmaConfig,
    /// Number of `(ε̂_m, ξ̂_m)` pairs tried per term.
    pub m_budget: u32,
    pub bisection_steps: u32,
    /// Upper end of the first `ξ` search.
    pub xi_start: f64,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig {
            lemma: LemmaConfig { n: 16, resolution: 0.01, step: StepConfig::default() },
            m_budget: 8,
            bisection_steps: 20,
            xi_start: 0.25,
        }
    }
}

/// One term `χₙ`.
#[derive(Clone, Debug, Serialize)]
pub struct ChiState {
    pub n: usize,
    #[serde(skip)]
    pub x: WeierstrassData,
    pub pair: PolygonalPair,
    pub epsilon: f64,
    pub xi: f64,
    pub k: f64,
    pub rho: f64,
    pub r: f64,
    pub alpha: f64,
    /// Measured `max ‖Xₙ − X_{n−1}‖` on `T_{n−1}^{ξₙ}`; zero for the seed.
    pub drift: f64,
    /// Properties `(A)`–`(K)` as measured for this term.
    pub properties: Report,
}

/// The seed `X₁(u + iv) = 5/2 (u, −v, 0)`.
pub fn seed_immersion() -> WeierstrassData {
    let base = crate::weierstrass::DEFAULT_BASE_POINT;
    WeierstrassData::from_fg(&LaurentPolynomial::constant(5.0), &LaurentPolynomial::zero()).with_translation(Vec3::new(
        2.5 * base,
        0.0,
        0.0,
    ))
}

fn sup_norm(x: &WeierstrassData, pair: &PolygonalPair, cfg: &LemmaConfig) -> SResult<f64> {
    let g = build_mesh(MeshDomain::Pair(pair), cfg.resolution)?;
    let v = immerse_nodes(&g, x, cfg.step.quad_tol)?;
    Ok(v.iter().map(|p| p.norm()).fold(0.0, f64::max))
}

/// Band checks `(1−k)ρ < dist < ρ` on the boundary of `pair`.
fn band_checks(
    tag: &str,
    x: &WeierstrassData,
    pair: &PolygonalPair,
    k: f64,
    rho: f64,
    res: f64,
) -> SResult<[Check; 2]> {
    let (lo, hi) = boundary_distances(x, pair, res)?;
    Ok([Check::at_least(format!("{tag} lower"), lo, (1.0 - k) * rho), Check::at_most(format!("{tag} upper"), hi, rho)])
}

/// Largest `ξ ∈ (0, cap]` found by bisection with `accept(ξ)`; the result
/// is always an accepted value.
fn bisect(cap: f64, steps: u32, mut accept: impl FnMut(f64) -> bool) -> Option<f64> {
    if accept(cap) {
        return Some(cap);
    }
    let (mut lo, mut hi) = (0.0, cap);
    let mut found = None;
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if accept(mid) {
            lo = mid;
            found = Some(mid);
        } else {
            hi = mid;
        }
    }
    found
}

/// `χ₁` on `pair`: `ε₁ = 1/2`, `k₁ = 1/3`, `ρ₁ = 1`, `r₁` the measured
/// `sup ‖X₁‖` on `T₁` plus 10% (and above 1), and `ξ₁` the largest offset for
/// which the distance band still holds on `T₁^{ξ₁}`.
pub fn init_chi1(pair: &PolygonalPair, cfg: &SequenceConfig) -> SResult<ChiState> {
    let x = seed_immersion();
    let res = cfg.lemma.resolution;
    let (k, rho) = (1.0 / 3.0, 1.0);
    let mut props = Report::default();
    for c in band_checks("A", &x, pair, k, rho, res)? {
        props.push(c);
    }
    let sup = sup_norm(&x, pair, &cfg.lemma)?;
    let r = (1.1 * sup).max(1.0 + 1e-9);
    props.push(Check::at_most("C", sup, r));
    props.push(Check::within("D", symmetry_value(&x, cfg.lemma.step.quad_tol)?.norm(), 1e-10));
    props.push(Check::holds("E", is_z2_type(&PhiTriple::Data(x.clone()), &probe_grid(), 1e-12)?));
    let epsilon = 0.5;
    props.push(Check::holds("F", 0.0 < k && k < 1.0 && rho * k < 0.5 && epsilon < 1.0));
    if let Some(c) = props.failures().next() {
        return Err(SequenceError::Seed(format!("{} = {:.6} against {:.6}", c.name, c.value, c.bound)));
    }
    let xi = bisect(cfg.xi_start, cfg.bisection_steps, |xi| {
        offset_pair(pair, xi)
            .ok()
            .and_then(|o| band_checks("A", &x, &o, k, rho, res).ok())
            .is_some_and(|cs| cs.iter().all(|c| c.pass))
    })
    .ok_or_else(|| SequenceError::Schedule { n: 1, detail: "no offset keeps the first band".into() })?;
    Ok(ChiState { n: 1, x, pair: pair.clone(), epsilon, xi, k, rho, r, alpha: alpha(1), drift: 0.0, properties: props })
}

/// Parameters for producing `χ_{n+1}` from `χₙ`.
#[derive(Clone, Debug, Serialize)]
pub struct Schedule {
    pub n: usize,
    pub k_next: f64,
    pub xi_next: f64,
    pub rho_next: f64,
    /// `ε̂_m = min(εₙ, 1/(n+1)²)/2^m`, `m = 1 …`.
    pub eps_hat: Vec<f64>,
    /// `ξ̂_m = ξ_{n+1}/2^{m+1}`.
    pub xi_hat: Vec<f64>,
    /// `(B_{n+1})` and `(J_{n+1})` at the chosen `ξ_{n+1}`.
    pub report: Report,
}

/// `k_{n+1} = min(kₙ/2, 0.9/((n+2) ρ_{n+1}))`.
pub fn next_k(k: f64, n: usize) -> f64 {
    (k / 2.0).min(0.9 / ((n + 2) as f64 * rho(n + 1)))
}

/// Chooses `k_{n+1}`, `ξ_{n+1}` and the trial sequences for the last term of
/// `history`. `ξ_{n+1}` is the largest value below `ξₙ` found by bisection
/// for which `(B_{n+1})` holds and, from the second term on, `(J_{n+1})`.
pub fn schedule_params(history: &[ChiState], cfg: &SequenceConfig) -> SResult<Schedule> {
    let cur = history.last().expect("non-empty history");
    let prev = history.len().checked_sub(2).map(|i| &history[i]);
    let n = cur.n;
    let res = cfg.lemma.resolution;
    let previous_inner = match prev {
        Some(p) => Some(offset_pair(&p.pair, cur.xi)?),
        None => None,
    };
    let report_at = |xi: f64| -> Option<Report> {
        let inner = offset_pair(&cur.pair, xi).ok()?;
        let mut r = Report::default();
        for c in band_checks("B", &cur.x, &inner, cur.k, cur.rho, res).ok()? {
            r.push(c);
        }
        if let Some(pi) = &previous_inner {
            r.push(Check::holds("J", inner.encloses(pi)));
        }
        Some(r)
    };
    let cap = cur.xi * 0.9;
    let xi_next =
        bisect(cap, cfg.bisection_steps, |xi| report_at(xi).is_some_and(|r| r.passed())).ok_or_else(|| {
            SequenceError::Schedule { n: n + 1, detail: format!("bisection below {cap:.3e} found nothing") }
        })?;
    let report = report_at(xi_next).expect("accepted ξ has a report");
    let base = cur.epsilon.min(1.0 / ((n + 1) * (n + 1)) as f64);
    let m = cfg.m_budget as i32;
    Ok(Schedule {
        n,
        k_next: next_k(cur.k, n),
        xi_next,
        rho_next: rho(n + 1),
        eps_hat: (1..=m).map(|i| base / 2f64.powi(i)).collect(),
        xi_hat: (1..=m).map(|i| xi_next / 2f64.powi(i + 1)).collect(),
        report,
    })
}

/// Lemma inputs for trial `m` (1-based) of the schedule from `state`.
pub fn lemma_params(state: &ChiState, schedule: &Schedule, m: usize) -> LemmaParams {
    LemmaParams {
        rho: state.rho,
        r: state.r,
        k: state.k,
        k_prime: schedule.k_next,
        s: 1.0 / (state.n + 1) as f64,
        epsilon: schedule.eps_hat[m - 1],
        xi: schedule.xi_hat[m - 1],
    }
}

/// Record of one lemma call inside [`advance`].
#[derive(Clone, Debug, Serialize)]
pub struct LemmaAttempt {
    pub m: usize,
    pub epsilon: f64,
    pub xi: f64,
    pub passed: bool,
    pub detail: String,
    pub steps: Vec<StepRecord>,
    pub run: Option<LemmaRun>,
}

/// `λ_Y ≥ α λ_X` at every node of a mesh of `pair`: the smallest ratio.
pub fn factor_ratio(y: &WeierstrassData, x: &WeierstrassData, pair: &PolygonalPair, res: f64) -> SResult<f64> {
    let g = build_mesh(MeshDomain::Pair(pair), res)?;
    let ratios = g
        .nodes()
        .par_iter()
        .map(|z| Ok(y.conformal_factor(*z)? / x.conformal_factor(*z)?))
        .collect::<Result<Vec<f64>, WeierstrassError>>()?;
    Ok(ratios.into_iter().fold(f64::INFINITY, f64::min))
}

fn drift(y: &WeierstrassData, x: &WeierstrassData, pair: &PolygonalPair, cfg: &LemmaConfig) -> SResult<f64> {
    let g = build_mesh(MeshDomain::Pair(pair), cfg.resolution)?;
    let a = immerse_nodes(&g, y, cfg.step.quad_tol)?;
    let b = immerse_nodes(&g, x, cfg.step.quad_tol)?;
    Ok(a.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max))
}

/// Builds `χ_{n+1}`. Lemma runs are tried for `m = 1, 2, …` until the
/// output satisfies `λ_Y ≥ α_{n+1} λ_X` on `Tₙ^{ξ_{n+1}}`. A failure inside the labyrinth
/// steps does not depend on `m` and ends the search at once.
pub fn advance(
    history: &[ChiState],
    schedule: &Schedule,
    cfg: &SequenceConfig,
) -> SResult<(ChiState, Vec<LemmaAttempt>)> {
    let cur = history.last().expect("non-empty history");
    let n = cur.n;
    let s = 1.0 / (n + 1) as f64;
    let alpha_next = alpha(n + 1);
    let inner = offset_pair(&cur.pair, schedule.xi_next)?;
    let mut attempts = Vec::new();
    for m in 1..=schedule.eps_hat.len() {
        let params = lemma_params(cur, schedule, m);
        let (eps, xi) = (params.epsilon, params.xi);
        let run = match run_lemma(&cur.x, &cur.pair, &params, &cfg.lemma) {
            Ok(run) => run,
            Err(DeformationError::Lemma(f)) => {
                let fatal = matches!(f.assertion.as_str(), "step" | "frame" | "hypothesis");
                attempts.push(LemmaAttempt {
                    m,
                    epsilon: eps,
                    xi,
                    passed: false,
                    detail: format!("{}: {}", f.assertion, f.detail),
                    steps: f.run.steps.clone(),
                    run: Some(f.run),
                });
                if fatal {
                    let detail = attempts.last().unwrap().detail.clone();
                    return Err(SequenceError::Advance { n, detail, attempts: Box::new(attempts) });
                }
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let y = run.output.clone().expect("a passing run has an output");
        let ratio = factor_ratio(&y, &cur.x, &inner, cfg.lemma.resolution)?;
        let ok = ratio >= alpha_next;
        attempts.push(LemmaAttempt {
            m,
            epsilon: eps,
            xi,
            passed: ok,
            detail: format!("min λ_Y/λ_X = {ratio:.6} against α = {alpha_next:.6}"),
            steps: run.steps.clone(),
            run: Some(run.clone()),
        });
        if !ok {
            continue;
        }
        let pair = run.pair.clone().expect("a passing run has a pair");
        let rho_next = schedule.rho_next;
        let r_next = (cur.r * cur.r + 4.0 * s * s).sqrt() + eps;
        let res = cfg.lemma.resolution;
        let mut props = Report::default();
        for c in band_checks("A", &y, &pair, schedule.k_next, rho_next, res)? {
            props.push(c);
        }
        props.extend(schedule.report.clone());
        props.push(Check::at_most("C", sup_norm(&y, &pair, &cfg.lemma)?, r_next));
        props.push(Check::within("D", symmetry_value(&y, cfg.lemma.step.quad_tol)?.norm(), 1e-10));
        props.push(Check::holds("E", is_z2_type(&PhiTriple::Data(y.clone()), &probe_grid(), 1e-12)?));
        let k = schedule.k_next;
        let n1 = (n + 1) as f64;
        props.push(Check::holds("F", 0.0 < k && k < 1.0 && rho_next * k < 1.0 / (n1 + 1.0) && eps < 1.0 / (n1 * n1)));
        let d = drift(&y, &cur.x, &inner, &cfg.lemma)?;
        props.push(Check::at_most("G", d, eps));
        props.push(Check::at_least("H", ratio, alpha_next));
        props.push(Check::holds("I", cur.pair.encloses(&pair)));
        props.push(Check::holds("K", pair.encloses(&inner)));
        let state = ChiState {
            n: n + 1,
            x: y,
            pair,
            epsilon: eps,
            xi: schedule.xi_next,
            k,
            rho: rho_next,
            r: r_next,
            alpha: alpha_next,
            drift: d,
            properties: props,
        };
        return Ok((state, attempts));
    }
    let detail = format!("no m ≤ {} satisfies the factor comparison", schedule.eps_hat.len());
    Err(SequenceError::Advance { n, detail, attempts: Box::new(attempts) })
}

/// A finished (or stopped) outer run.
#[derive(Clone, Debug, Serialize)]
pub struct SequenceRun {
    pub history: Vec<ChiState>,
    pub schedules: Vec<Schedule>,
    pub attempts: Vec<Vec<LemmaAttempt>>,
    /// Why the run stopped before the requested number of terms.
    pub stopped: Option<String>,
}

/// Runs the recursion until `terms` terms exist or a step fails.
pub fn run_sequence(pair: &PolygonalPair, terms: usize, cfg: &SequenceConfig) -> SResult<SequenceRun> {
    let mut run = SequenceRun {
        history: vec![init_chi1(pair, cfg)?],
        schedules: Vec::new(),
        attempts: Vec::new(),
        stopped: None,
    };
    while run.history.len() < terms {
        let schedule = match schedule_params(&run.history, cfg) {
            Ok(s) => s,
            Err(e) => {
                run.stopped = Some(e.to_string());
                break;
            }
        };
        let result = advance(&run.history, &schedule, cfg);
        run.schedules.push(schedule);
        match result {
            Ok((state, attempts)) => {
                run.attempts.push(attempts);
                run.history.push(state);
            }
            Err(SequenceError::Advance { n, detail, attempts }) => {
                run.attempts.push(*attempts);
                run.stopped = Some(format!("term {n}: {detail}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(run)
}

/// What a finite history says about the limit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitReport {
    pub r: Vec<f64>,
    /// `r₁ + Σ_{n≥2} 3/n²`, a bound on `sup rₙ`.
    pub r_bound: f64,
    /// `½(1−kₙ)ρₙ`.
    pub completeness: Vec<f64>,
    pub completeness_increasing: bool,
    /// `(max ‖Xₙ − X_{n−1}‖, Σ_{i≥n} 1/i²)` for `n ≥ 2`.
    pub cauchy: Vec<(f64, f64)>,
    /// `∏ αᵢ`, closed form.
    pub alpha_floor: f64,
    /// `min λ_{Xₙ}/λ_{X₁}` on `T₁^{ξ₂}` against `∏_{i=2}^n αᵢ`, per `n ≥ 2`.
    pub factor_chain: Vec<(f64, f64)>,
    /// `ln(inradius P / circumradius Q)/2π` for the last pair, a heuristic.
    pub modulus: f64,
}

fn inradius(pair: &PolygonalPair) -> f64 {
    pair.p().boundary_distance(num_complex::Complex64::new(0.0, 0.0))
}

/// `Σ_{i≥n} 1/i²`.
fn inverse_square_tail(n: usize) -> f64 {
    PI * PI / 6.0 - (1..n).map(|i| 1.0 / (i * i) as f64).sum::<f64>()
}

pub fn report_limit(history: &[ChiState], resolution: f64) -> SResult<LimitReport> {
    let r: Vec<f64> = history.iter().map(|s| s.r).collect();
    let r_bound = history.first().map_or(0.0, |s| s.r) + 3.0 * (PI * PI / 6.0 - 1.0);
    let completeness: Vec<f64> = history.iter().map(|s| 0.5 * (1.0 - s.k) * s.rho).collect();
    let completeness_increasing = completeness.windows(2).all(|w| w[1] > w[0]);
    let cauchy = history.iter().skip(1).map(|s| (s.drift, inverse_square_tail(s.n))).collect();
    let mut factor_chain = Vec::new();
    if history.len() >= 2 {
        let chain_domain = offset_pair(&history[0].pair, history[1].xi)?;
        for s in &history[1..] {
            let ratio = factor_ratio(&s.x, &history[0].x, &chain_domain, resolution)?;
            let bound: f64 = (2..=s.n).map(alpha).product();
            factor_chain.push((ratio, bound));
        }
    }
    let last = history.last().expect("non-empty history");
    let modulus = (inradius(&last.pair) / last.pair.q().max_vertex_norm()).ln() / (2.0 * PI);
    Ok(LimitReport {
        r,
        r_bound,
        completeness,
        completeness_increasing,
        cauchy,
        alpha_floor: alpha_product(history.len()),
        factor_chain,
        modulus,
    })
}
