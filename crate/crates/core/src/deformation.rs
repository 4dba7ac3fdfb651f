//! One step of the construction deforms the immersion over a single labyrinth
//! set. This module covers that step, the 2N-step run over the whole
//! labyrinth, and the extraction of the next polygonal pair.
//!
//! In step `j` an orthonormal frame is picked first. Its third axis avoids
//! the Gauss image of `ϖ_j` and points along the image of `ϖ_j` under the
//! current immersion. In that frame the data change by `f ↦ f h` and
//! `g ↦ g/h`. The multiplier `h` is close to 1 away from `ϖ_j` and close to
//! `τ` on `ω_j`. Every claimed inequality is measured on samples and must
//! hold with a relative margin of [`REQUIRED_MARGIN`].

use std::collections::{BTreeSet, HashMap, HashSet};
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex_field::segment_distance;
use crate::geometry::{offset_pair, GeometryError, Polygon, PolygonalPair};
use crate::labyrinth::{Labyrinth, LabyrinthError, Region, Sheet, Side};
use crate::metric::{
    build_mesh, circle_distance_field, immerse_nodes, resolution_bound, DistanceField, MeshDomain, MetricError,
    MetricGraph,
};
use crate::runge::{CompactSetSample, RungeError, RungeFitter, RungeMultiplier};
use crate::weierstrass::{
    conformality_residual, is_z2_type, phi_im, phi_norm, phi_re, probe_grid, rotate, sphere_distance, symmetry_value,
    Deformation, Mat3, Phi, PhiTriple, Vec3, WeierstrassData, WeierstrassError, I,
};

/// Relative slack every certified inequality must keep.
pub const REQUIRED_MARGIN: f64 = 0.05;
/// Slack added to the computed `r₁₀`.
pub const R10_SLACK: f64 = 0.1;
/// Points kept when a check needs immersion values (one quadrature each).
const IMMERSION_SAMPLES: usize = 48;
/// Points kept per sheet for Gauss-image diameters.
const GAUSS_SAMPLES: usize = 400;

#[derive(Debug, Error)]
pub enum DeformationError {
    #[error("no admissible frame: {0}")]
    Frame(String),
    #[error("step {}: {} fails ({})", .0.index, .0.binding, .0.detail)]
    Step(Box<StepFailure>),
    #[error("lemma assertion {} fails: {}", .0.assertion, .0.detail)]
    Lemma(Box<LemmaFailure>),
    #[error("pair extraction failed: {0}")]
    Extraction(String),
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Runge(#[from] RungeError),
    #[error(transparent)]
    Weierstrass(#[from] WeierstrassError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Labyrinth(#[from] LabyrinthError),
}

type DResult<T> = Result<T, DeformationError>;

/// One measured inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// Relative slack, positive when the inequality holds.
    pub margin: f64,
    pub pass: bool,
}

/// Keeps margins representable in JSON.
fn finite(m: f64) -> f64 {
    if m.is_nan() {
        0.0
    } else {
        m.clamp(-f64::MAX, f64::MAX)
    }
}

impl Check {
    /// `value ≤ bound` with [`REQUIRED_MARGIN`] to spare.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Check {
        let margin = finite((bound - value) / bound.abs());
        Check { name: name.into(), value, bound, margin, pass: margin >= REQUIRED_MARGIN }
    }

    /// `value ≥ bound` with [`REQUIRED_MARGIN`] to spare.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Check {
        let margin = finite((value - bound) / bound.abs());
        Check { name: name.into(), value, bound, margin, pass: margin >= REQUIRED_MARGIN }
    }

    /// `value ≤ tol` for quantities that vanish in exact arithmetic.
    pub fn within(name: impl Into<String>, value: f64, tol: f64) -> Check {
        Check { name: name.into(), value, bound: tol, margin: finite((tol - value) / tol), pass: value <= tol }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Check {
        let v = if ok { 1.0 } else { 0.0 };
        Check { name: name.into(), value: v, bound: 1.0, margin: v - 1.0, pass: ok }
    }
}

/// Ordered list of checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }
}

fn key(z: &Complex64) -> (u64, u64) {
    ((z.re + 0.0).to_bits(), (z.im + 0.0).to_bits())
}

/// Evenly spaced subset of at most `max` points, always including the ends.
pub fn thin(points: &[Complex64], max: usize) -> Vec<Complex64> {
    if points.len() <= max || max < 2 {
        return points.to_vec();
    }
    (0..max).map(|i| points[i * (points.len() - 1) / (max - 1)]).collect()
}

/// Symmetric thinning: a subset of sheet-One-like points and their negatives.
fn thin_symmetric(points: &[Complex64], max: usize) -> Vec<Complex64> {
    let half: Vec<Complex64> = points.iter().copied().filter(|z| z.im > 0.0 || (z.im == 0.0 && z.re > 0.0)).collect();
    let kept = thin(&half, max / 2);
    kept.iter().copied().chain(kept.iter().map(|z| -z)).collect()
}

/// Samples of the sets a step works with, closed under `z ↦ −z`.
#[derive(Clone, Debug, Default)]
pub struct StepSamples {
    /// `T̄ ∖ ϖ_j`.
    pub outside: Vec<Complex64>,
    /// `ϖ_j ∖ ω_j`, by sheet.
    pub varpi: [Vec<Complex64>; 2],
    /// `ω_j`, by sheet.
    pub omega: [Vec<Complex64>; 2],
}

#[derive(Default)]
struct Buckets {
    seen: HashSet<(u64, u64)>,
    s: StepSamples,
}

impl Buckets {
    fn add(&mut self, lab: &Labyrinth, j: usize, z: Complex64) {
        if !self.seen.insert(key(&z)) {
            return;
        }
        self.seen.insert(key(&-z));
        let region = lab.classify(z);
        self.route(j, z, region);
        self.route(j, -z, region.mirror());
    }

    fn route(&mut self, j: usize, z: Complex64, region: Region) {
        let sheet = |s: Sheet| if s == Sheet::One { 0 } else { 1 };
        match region {
            Region::Outside => {}
            Region::Omega { index, sheet: s } if index == j => self.s.omega[sheet(s)].push(z),
            Region::Varpi { index, sheet: s } if index == j => self.s.varpi[sheet(s)].push(z),
            _ => self.s.outside.push(z),
        }
    }

    fn add_outside(&mut self, z: Complex64) {
        if self.seen.insert(key(&z)) {
            self.seen.insert(key(&-z));
            self.s.outside.push(z);
            self.s.outside.push(-z);
        }
    }
}

fn param_point(lab: &Labyrinth, side: Side, u: f64, zeta: f64) -> Complex64 {
    let s = lab.sides(side);
    let u = u.rem_euclid(s as f64);
    let edge = (u.floor() as usize).min(s - 1);
    lab.band_point(side, edge, u - edge as f64, zeta)
}

fn edge_length(lab: &Labyrinth, side: Side, u: f64, zeta: f64) -> f64 {
    let s = lab.sides(side);
    let edge = (u.rem_euclid(s as f64).floor() as usize).min(s - 1);
    (lab.band_point(side, edge, 1.0, zeta) - lab.band_point(side, edge, 0.0, zeta)).norm()
}

impl StepSamples {
    /// Samples for step `j`: level lines across every cell of `ω_j¹` and
    /// across the wall pieces of `L_j`, refined to `δ/2` near the walls, the
    /// segment itself, `∂T` away from `L_j`, and a grid over `T` at
    /// `4·spacing`. Sheet two is the negation of sheet one.
    pub fn build(lab: &Labyrinth, j: usize, spacing: f64) -> StepSamples {
        let n = lab.n();
        let h = lab.spacing();
        let (m, delta) = (lab.margin(), lab.delta());
        let side = if j > n { Side::Q } else { Side::P };
        let seg = (j - 1) % n;
        let s = lab.sides(side) as f64;
        let offsets =
            [0.0, m - 1.5 * delta, m - 0.5 * delta, m, 0.5 * h, h - m, h - m + 0.5 * delta, h - m + 1.5 * delta];
        let window = m + 2.0 * delta;
        let fine = delta / 2.0;
        let mut b = Buckets::default();

        for z in lab.omega_samples(j, Sheet::One, spacing) {
            b.add(lab, j, z);
        }
        let u_of = |mm: usize| {
            let (e, t) = lab.division(side, mm);
            e as f64 + t
        };
        let sweep = |b: &mut Buckets, u0: f64, u1: f64, strip: usize| {
            for off in offsets {
                let zeta = strip as f64 * h + off;
                let len0 = edge_length(lab, side, u0, zeta);
                let len1 = edge_length(lab, side, u1, zeta);
                let coarse = ((param_point(lab, side, u1, zeta) - param_point(lab, side, u0, zeta)).norm() / spacing)
                    .ceil()
                    .max(2.0) as usize;
                for i in 0..=coarse {
                    b.add(lab, j, param_point(lab, side, u0 + (u1 - u0) * i as f64 / coarse as f64, zeta));
                }
                let k = (window / fine).ceil() as usize;
                for i in 0..=k {
                    let d = i as f64 * fine;
                    b.add(lab, j, param_point(lab, side, u0 + d / len0, zeta));
                    b.add(lab, j, param_point(lab, side, u1 - d / len1, zeta));
                }
            }
        };
        let cells = lab.cells(j, Sheet::One);
        let open: BTreeSet<usize> = cells.iter().map(|c| c.strip).collect();
        for cell in &cells {
            let u0 = u_of(cell.walls.0);
            let mut u1 = u_of(cell.walls.1);
            if u1 < u0 {
                u1 += s;
            }
            sweep(&mut b, u0, u1, cell.strip);
        }
        // wall strips of L_j: a window around the segment on each level
        let um = u_of(seg);
        for strip in (0..2 * n * n).filter(|st| !open.contains(st)) {
            for off in offsets {
                let zeta = strip as f64 * h + off;
                let len = edge_length(lab, side, um, zeta);
                let k = (window / fine).ceil() as usize;
                for i in -(k as i64)..=(k as i64) {
                    b.add(lab, j, param_point(lab, side, um + i as f64 * fine / len, zeta));
                }
            }
        }
        // ∂T, away from the δ-tube around L_j and −L_j
        let (a, c) = lab.segments(side)[seg];
        let pair = lab.pair();
        for z in pair.p().sample_boundary(spacing).into_iter().chain(pair.q().sample_boundary(spacing)) {
            if segment_distance(z, a, c) >= delta && segment_distance(-z, a, c) >= delta {
                b.add_outside(z);
            }
        }
        let step = 4.0 * spacing;
        let k = (1.0 / step).ceil() as i64;
        for x in -k..=k {
            for y in 0..=k {
                let z = Complex64::new(x as f64 * step, y as f64 * step);
                if y == 0 && x <= 0 {
                    continue;
                }
                b.add(lab, j, z);
            }
        }
        b.s
    }

    pub fn varpi_all(&self) -> Vec<Complex64> {
        self.varpi.iter().chain(&self.omega).flatten().copied().collect()
    }

    pub fn omega_all(&self) -> Vec<Complex64> {
        self.omega.iter().flatten().copied().collect()
    }

    /// `ϖ_j^i` including `ω_j^i`, for one sheet.
    pub fn sheet(&self, i: usize) -> Vec<Complex64> {
        self.varpi[i].iter().chain(&self.omega[i]).copied().collect()
    }
}

/// Constants `r₅ … r₉` measured before step `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub j: usize,
    /// `sup ‖φ^{j−1}‖` off the earlier `ϖ`.
    pub r5: f64,
    /// `inf ‖φ^{j−1}‖` off the earlier `ϖ`.
    pub r6: f64,
    /// `N · max diam F_{j−1}(ϖ_j^i)`.
    pub r7: f64,
    /// `√N · max diam G_{j−1}(ϖ_j^i)` on the sphere.
    pub r8: f64,
    /// `N · ‖S(F_{j−1})‖`.
    pub r9: f64,
}

fn normal(phi: &Phi) -> Option<Vec3> {
    let nrm = phi_re(phi).cross(&(-phi_im(phi)));
    let l = nrm.norm();
    (l > 0.0).then(|| nrm / l)
}

fn gauss_diameter(data: &WeierstrassData, pts: &[Complex64]) -> DResult<f64> {
    let g = pts.par_iter().map(|z| data.gauss_map(*z)).collect::<Result<Vec<_>, _>>()?;
    Ok((0..g.len())
        .into_par_iter()
        .map(|a| (a + 1..g.len()).map(|b| sphere_distance(&g[a], &g[b])).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max))
}

fn immerse_all(data: &WeierstrassData, pts: &[Complex64], tol: f64) -> DResult<Vec<Vec3>> {
    Ok(pts.par_iter().map(|z| data.immerse(*z, tol)).collect::<Result<Vec<_>, _>>()?)
}

fn diameter(v: &[Vec3]) -> f64 {
    let mut d: f64 = 0.0;
    for a in v {
        for b in v {
            d = d.max((a - b).norm());
        }
    }
    d
}

/// Measures `r₅ … r₉` for `F_{j−1} = data`. `away` samples `T ∖ ⋃_{k<j} ϖ_k`.
pub fn check_properties(
    data: &WeierstrassData,
    n: usize,
    j: usize,
    away: &[Complex64],
    samples: &StepSamples,
    tol: f64,
) -> DResult<Constants> {
    let norms = away.par_iter().map(|z| data.phi(*z).map(|p| phi_norm(&p))).collect::<Result<Vec<_>, _>>()?;
    let r5 = norms.iter().copied().fold(0.0, f64::max);
    let r6 = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let nf = n as f64;
    let mut r7: f64 = 0.0;
    let mut r8: f64 = 0.0;
    for i in 0..2 {
        let sheet = samples.sheet(i);
        r7 = r7.max(diameter(&immerse_all(data, &thin(&sheet, IMMERSION_SAMPLES), tol)?));
        r8 = r8.max(gauss_diameter(data, &thin(&sheet, GAUSS_SAMPLES))?);
    }
    let r9 = symmetry_value(data, tol)?.norm() * nf;
    Ok(Constants { j, r5, r6, r7: r7 * nf, r8: r8 * nf.sqrt(), r9 })
}

/// Which branch of the frame construction produced `e₃`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameCase {
    /// `e₃` is a direction of the image of `ϖ_j¹` outside the cones.
    ImageOutsideCones,
    /// Every image direction is inside the cones; `e₃` is a nearby direction outside.
    ImageInsideCones,
    /// No image point is far enough from the origin; (D1) is vacuous.
    Vacuous,
}

/// Orthonormal frame `S_j` with the record of how it was chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub e1: [f64; 3],
    pub e2: [f64; 3],
    pub e3: [f64; 3],
    pub case: FrameCase,
    pub g1: [f64; 3],
    pub g2: [f64; 3],
    pub nu: f64,
    /// Radius `(r₈ + ν)/√N` of the cones around `±g₁, ±g₂`.
    pub cone_radius: f64,
    pub r10: f64,
    /// Largest angle from `±e₃` to `F_{j−1}(z)` over the audited samples.
    pub d1_angle: f64,
    /// Smallest angle from `±e₃` to `G_{j−1}(z)` over the audited samples.
    pub d2_angle: f64,
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn vec(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Angle between the line through `a` and `b`: `min ∠(±a, b)`.
fn line_angle(a: &Vec3, b: &Vec3) -> f64 {
    let t = sphere_distance(a, b);
    t.min(PI - t)
}

impl Frame {
    /// Rows `e₁, e₂, e₃`: world to frame coordinates.
    pub fn matrix(&self) -> Mat3 {
        Mat3::from_rows(&[vec(&self.e1).transpose(), vec(&self.e2).transpose(), vec(&self.e3).transpose()])
    }

    /// Completes `e₃` with `e₁` from a fixed reference axis (`x`, or `y` when
    /// `e₃` is within about 25° of `±x`) and `e₂ = e₃ × e₁`.
    pub fn complete(e3: Vec3) -> (Vec3, Vec3, Vec3) {
        let e3 = e3.normalize();
        let reference = if e3.x.abs() > 0.9 { Vec3::y() } else { Vec3::x() };
        let e1 = (reference - e3 * reference.dot(&e3)).normalize();
        let e2 = e3.cross(&e1);
        (e1, e2, e3)
    }

    /// Largest deviation from orthonormality, and the orientation `det`.
    pub fn orthonormality_defect(&self) -> (f64, f64) {
        let r = self.matrix();
        ((r * r.transpose() - Mat3::identity()).abs().max(), r.determinant())
    }

    /// The identity frame, for tests and degenerate steps.
    pub fn identity() -> Frame {
        Frame {
            e1: [1.0, 0.0, 0.0],
            e2: [0.0, 1.0, 0.0],
            e3: [0.0, 0.0, 1.0],
            case: FrameCase::Vacuous,
            g1: [0.0, 0.0, 1.0],
            g2: [0.0, 0.0, 1.0],
            nu: 0.0,
            cone_radius: 0.0,
            r10: 0.0,
            d1_angle: 0.0,
            d2_angle: 0.0,
        }
    }
}

fn fibonacci_sphere(count: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - y * y).sqrt();
            let t = golden * i as f64;
            Vec3::new(r * t.cos(), y, r * t.sin())
        })
        .collect()
}

/// Chooses `S_j` for step `j`.
///
/// `g₁, g₂` are the Gauss map at the samples nearest the centroids of
/// `ϖ_j¹, ϖ_j²`. The frame is audited on all `ϖ_j` samples given.
pub fn select_frame(
    data: &WeierstrassData,
    n: usize,
    samples: &StepSamples,
    constants: &Constants,
    nu: f64,
    tol: f64,
) -> DResult<Frame> {
    if !(nu > 1.0 / constants.r6) {
        return Err(DeformationError::Precondition(format!("ν = {nu} must exceed 1/r₆ = {}", 1.0 / constants.r6)));
    }
    let sn = (n as f64).sqrt();
    let nf = n as f64;
    if sn <= constants.r9 {
        return Err(DeformationError::Precondition(format!("√N = {sn} must exceed r₉ = {}", constants.r9)));
    }
    let centroid_gauss = |pts: &[Complex64]| -> DResult<Vec3> {
        if pts.is_empty() {
            return Err(DeformationError::Precondition("empty ϖ sample".into()));
        }
        let c = pts.iter().sum::<Complex64>() / pts.len() as f64;
        let z = pts.iter().copied().min_by(|a, b| (a - c).norm().total_cmp(&(b - c).norm())).unwrap();
        Ok(data.gauss_map(z)?)
    };
    let sheets = [samples.sheet(0), samples.sheet(1)];
    let g1 = centroid_gauss(&sheets[0])?;
    let g2 = centroid_gauss(&sheets[1])?;
    let cone = (constants.r8 + nu) / sn;
    if cone >= PI / 4.0 {
        return Err(DeformationError::Frame(format!("cone radius {cone} is not below π/4")));
    }
    let clearance = |x: &Vec3| line_angle(&g1, x).min(line_angle(&g2, x)) - cone;
    let r10 = (1.0 + R10_SLACK)
        * sn
        * (2.0 * cone + 2.0 * constants.r7 / (sn - constants.r9) + 2.0 * constants.r9 / (sn - constants.r9));

    let one = thin(&sheets[0], IMMERSION_SAMPLES);
    let images = immerse_all(data, &one, tol)?;
    let threshold = 1.0 / sn - constants.r9 / nf;
    let dirs: Vec<Vec3> = images.iter().filter(|p| p.norm() >= threshold).map(|p| p.normalize()).collect();

    let best = |cands: &mut dyn Iterator<Item = Vec3>| {
        cands.map(|x| (clearance(&x), x)).filter(|(c, _)| *c > 0.0).max_by(|a, b| a.0.total_cmp(&b.0)).map(|(_, x)| x)
    };
    let (e3, case) = if dirs.is_empty() {
        let e = best(&mut fibonacci_sphere(4096).into_iter())
            .ok_or_else(|| DeformationError::Frame("the cones cover the sampled sphere".into()))?;
        (e, FrameCase::Vacuous)
    } else if let Some(e) = best(&mut dirs.iter().copied()) {
        (e, FrameCase::ImageOutsideCones)
    } else {
        let reach = 2.0 * cone;
        let mut found = None;
        for q in &dirs {
            let (u, v, _) = Frame::complete(*q);
            let mut ring = (1..64).flat_map(|a| {
                let theta = reach * a as f64 / 64.0;
                (0..64).map(move |b| {
                    let psi = 2.0 * PI * b as f64 / 64.0;
                    *q * theta.cos() + (u * psi.cos() + v * psi.sin()) * theta.sin()
                })
            });
            if let Some(e) = best(&mut ring) {
                found = Some(e);
                break;
            }
        }
        (
            found.ok_or_else(|| DeformationError::Frame("no direction near the image avoids the cones".into()))?,
            FrameCase::ImageInsideCones,
        )
    };
    let (e1, e2, e3) = Frame::complete(e3);

    let all = samples.varpi_all();
    let gauss = all.par_iter().map(|z| data.gauss_map(*z)).collect::<Result<Vec<_>, _>>()?;
    let d2_angle = gauss.iter().map(|g| line_angle(&e3, g)).fold(f64::INFINITY, f64::min);
    let audit = thin_symmetric(&all, 2 * IMMERSION_SAMPLES);
    let d1_angle = immerse_all(data, &audit, tol)?
        .iter()
        .filter(|p| p.norm() >= 1.0 / sn)
        .map(|p| line_angle(&e3, p))
        .fold(0.0, f64::max);
    Ok(Frame {
        e1: arr(&e1),
        e2: arr(&e2),
        e3: arr(&e3),
        case,
        g1: arr(&g1),
        g2: arr(&g2),
        nu,
        cone_radius: cone,
        r10,
        d1_angle,
        d2_angle,
    })
}

/// Tuning of a single step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    /// Largest Laurent degree tried by the Runge fit.
    pub basis_budget: usize,
    /// `τ` runs over `τ₀·2^k` for `k = 0..=tau_doublings`.
    pub tau_doublings: u32,
    /// Construction sampling spacing; checks use a quarter of it.
    pub sample_spacing: f64,
    /// Quadrature tolerance for immersion values.
    pub quad_tol: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig { basis_budget: 128, tau_doublings: 10, sample_spacing: 0.01, quad_tol: 1e-10 }
    }
}

/// The outcome of `F_{j−1} → F_j`.
#[derive(Clone, Debug)]
pub struct DeformationStep {
    pub index: usize,
    pub input: WeierstrassData,
    pub output: WeierstrassData,
    pub frame: Frame,
    pub multiplier: RungeMultiplier,
    pub report: Report,
    /// `max ‖F_j − F_{j−1}‖` over the thinned samples of `T ∖ ϖ_j`.
    pub displacement: f64,
}

/// Serializable summary of a step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub tau: f64,
    pub degree: usize,
    pub sup_one: f64,
    pub sup_tau: f64,
    pub frame: Frame,
    pub report: Report,
    pub displacement: f64,
}

impl DeformationStep {
    pub fn record(&self) -> StepRecord {
        StepRecord {
            index: self.index,
            tau: self.multiplier.tau(),
            degree: self.multiplier.degree(),
            sup_one: self.multiplier.sup_one,
            sup_tau: self.multiplier.sup_tau,
            frame: self.frame.clone(),
            report: self.report.clone(),
            displacement: self.displacement,
        }
    }
}

/// One `τ` of the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauAttempt {
    pub tau: f64,
    pub degree: usize,
    pub sup_one: f64,
    pub sup_tau: f64,
    pub certified: bool,
    /// Failing properties, when the multiplier certified.
    pub failing: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFailure {
    pub index: usize,
    /// The constraint that could not be met.
    pub binding: String,
    pub detail: String,
    pub tau0: f64,
    pub attempts: Vec<TauAttempt>,
}

fn phi_frame_f(frame: &Mat3, phi: &Phi) -> Complex64 {
    let p = rotate(frame, phi);
    p[0] - I * p[1]
}

/// Applies a given multiplier in `frame` and measures (P1)–(P6) on
/// `checks`.
pub fn apply_multiplier(
    prev: &WeierstrassData,
    n: usize,
    j: usize,
    frame: &Frame,
    h: &RungeMultiplier,
    checks: &StepSamples,
    tol: f64,
) -> DResult<DeformationStep> {
    let r = frame.matrix();
    let output = prev.deformed(r, h.mu().clone());
    let step = Deformation { frame: r, mu: h.mu().clone() };
    let nf = n as f64;
    let sn = nf.sqrt();
    let pair_at = |z: Complex64| -> Result<(Phi, Phi), WeierstrassError> {
        let a = prev.phi(z)?;
        let b = step.apply(&a, z)?;
        Ok((a, b))
    };
    let mut report = Report::default();

    let probes = probe_grid();
    let z2 = is_z2_type(&PhiTriple::Data(output.clone()), &probes, 1e-12)?;
    report.push(Check::holds("P1 z2-type", z2));
    let conf = probes
        .par_iter()
        .map(|z| output.phi(*z).map(|p| conformality_residual(&p)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    report.push(Check::within("P1 conformality", conf, 1e-10));
    let base = output.base_point();
    report.push(Check::within("P1 anchor", (output.immerse(base, tol)? - prev.immerse(base, tol)?).norm(), 1e-12));

    let outside = checks.outside.par_iter().map(|z| pair_at(*z)).collect::<Result<Vec<_>, _>>()?;
    let p2 = outside
        .iter()
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    report.push(Check::at_most("P2", p2, 1.0 / (nf * nf)));
    let omega = checks.omega_all();
    let p3 = omega
        .par_iter()
        .map(|z| pair_at(*z).map(|(_, b)| phi_norm(&b)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    report.push(Check::at_least("P3", p3, nf.powf(3.5)));
    let varpi = checks.varpi_all();
    let p4 = varpi
        .par_iter()
        .map(|z| pair_at(*z).map(|(_, b)| phi_norm(&b)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    report.push(Check::at_least("P4", p4, 1.0 / sn));
    let p5 = outside
        .iter()
        .map(|(a, b)| match (normal(a), normal(b)) {
            (Some(x), Some(y)) => sphere_distance(&x, &y),
            _ => PI,
        })
        .fold(0.0, f64::max);
    report.push(Check::at_most("P5", p5, 1.0 / (nf * sn)));

    // (P6.1) on the image of ϖ_j under F_{j−1}, in frame coordinates
    let audit = thin_symmetric(&varpi, 2 * IMMERSION_SAMPLES);
    let before = immerse_all(prev, &audit, tol)?;
    let ratio = before
        .iter()
        .filter(|p| p.norm() >= 1.0 / sn)
        .map(|p| {
            let q = r * p;
            (q.x * q.x + q.y * q.y).sqrt() / p.norm()
        })
        .fold(0.0, f64::max);
    report.push(Check::at_most("P6.1", ratio, frame.r10 / sn));
    let third = varpi
        .iter()
        .chain(&checks.outside)
        .step_by(7)
        .map(|z| {
            let (a, b) = pair_at(*z)?;
            let (a3, b3) = (rotate(&r, &a)[2], rotate(&r, &b)[2]);
            Ok((a3 - b3).norm() / (1.0 + a3.norm()))
        })
        .collect::<Result<Vec<f64>, WeierstrassError>>()?
        .into_iter()
        .fold(0.0, f64::max);
    report.push(Check::within("P6.2", third, 1e-12));
    let after = immerse_all(&output, &audit, tol)?;
    let third_x = before.iter().zip(&after).map(|(a, b)| ((r * a).z - (r * b).z).abs()).fold(0.0, f64::max);
    let scale = 1.0 + before.iter().chain(&after).map(|p| p.norm()).fold(0.0, f64::max);
    report.push(Check::within("P6.2 immersion", third_x, 100.0 * tol * scale));

    let probe = thin_symmetric(&checks.outside, IMMERSION_SAMPLES);
    let a = immerse_all(prev, &probe, tol)?;
    let b = immerse_all(&output, &probe, tol)?;
    let displacement = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);

    Ok(DeformationStep {
        index: j,
        input: prev.clone(),
        output,
        frame: frame.clone(),
        multiplier: h.clone(),
        report,
        displacement,
    })
}

/// `τ₀ = max(N⁴, √2 N^{7/2} / inf_{ω_j} |f| + 1)` with `f` in frame coordinates.
pub fn initial_tau(prev: &WeierstrassData, n: usize, frame: &Frame, omega: &[Complex64]) -> DResult<f64> {
    let r = frame.matrix();
    let inf_f = omega
        .par_iter()
        .map(|z| prev.phi(*z).map(|p| phi_frame_f(&r, &p).norm()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if !(inf_f > 0.0) {
        return Err(DeformationError::Precondition(format!("inf |f| over ω is {inf_f}")));
    }
    let nf = n as f64;
    Ok(nf.powi(4).max(SQRT_2 * nf.powf(3.5) / inf_f + 1.0))
}

/// The Runge step: `h` for `E₁ = T̄ ∖ ϖ_j`, `E₂ = ω_j`, with `τ` doubled from
/// [`initial_tau`] until (P1)–(P6) all certify.
pub fn deform_step(
    prev: &WeierstrassData,
    n: usize,
    j: usize,
    frame: &Frame,
    fit: &StepSamples,
    checks: &StepSamples,
    cfg: &StepConfig,
) -> DResult<DeformationStep> {
    let e1 = CompactSetSample::new(fit.outside.clone(), checks.outside.clone(), true)?;
    let e2 = CompactSetSample::new(fit.omega_all(), checks.omega_all(), true)?;
    let tau0 = initial_tau(prev, n, frame, &fit.omega_all())?;
    let fitter = RungeFitter::new(&e1, &e2, cfg.basis_budget)?;
    let mut attempts = Vec::new();
    for k in 0..=cfg.tau_doublings {
        let tau = tau0 * 2f64.powi(k as i32);
        match fitter.multiplier(tau) {
            Ok(h) => {
                let step = apply_multiplier(prev, n, j, frame, &h, checks, cfg.quad_tol)?;
                let failing: Vec<String> = step.report.failures().map(|c| c.name.clone()).collect();
                if failing.is_empty() {
                    return Ok(step);
                }
                attempts.push(TauAttempt {
                    tau,
                    degree: h.degree(),
                    sup_one: h.sup_one,
                    sup_tau: h.sup_tau,
                    certified: true,
                    failing,
                });
            }
            Err(RungeError::NotCertified { degree, sup_one, sup_tau, .. }) => attempts.push(TauAttempt {
                tau,
                degree,
                sup_one,
                sup_tau,
                certified: false,
                failing: vec!["Runge certification".into()],
            }),
            Err(e) => return Err(e.into()),
        }
    }
    let certified = attempts.iter().filter(|a| a.certified).min_by_key(|a| a.failing.len());
    let (binding, detail) = match certified {
        Some(a) => (a.failing[0].clone(), format!("τ = {:.3e} certifies h but fails {:?}", a.tau, a.failing)),
        None => {
            let a =
                attempts.iter().min_by(|x, y| x.sup_one.max(x.sup_tau).total_cmp(&y.sup_one.max(y.sup_tau))).unwrap();
            (
                "Runge certification".to_string(),
                format!(
                    "best at τ = {:.3e}: sup|h−1| = {:.3e}, sup|h−τ| = {:.3e} against 1/τ = {:.3e} (degree ≤ {})",
                    a.tau,
                    a.sup_one,
                    a.sup_tau,
                    1.0 / a.tau,
                    a.degree
                ),
            )
        }
    };
    Err(DeformationError::Step(Box::new(StepFailure { index: j, binding, detail, tau0, attempts })))
}

/// Scalars of the deformation lemma.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaParams {
    pub rho: f64,
    pub r: f64,
    pub k: f64,
    pub k_prime: f64,
    pub s: f64,
    pub epsilon: f64,
    pub xi: f64,
}

impl LemmaParams {
    /// `R = √(r² + (2s)²) + ε`.
    pub fn big_r(&self) -> f64 {
        (self.r * self.r + 4.0 * self.s * self.s).sqrt() + self.epsilon
    }

    /// The band `((1−k′)(ρ+s), ρ+s)` the new boundary lives in.
    pub fn band(&self) -> (f64, f64) {
        ((1.0 - self.k_prime) * (self.rho + self.s), self.rho + self.s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaConfig {
    pub n: usize,
    /// Mesh resolution for distance fields on pairs; the labyrinth mesh uses
    /// the smaller of this and the labyrinth bound.
    pub resolution: f64,
    pub step: StepConfig,
}

/// Everything a lemma run measured. Fields after the hypotheses are filled
/// as far as the run got.
#[derive(Clone, Debug, Default, Serialize)]
pub struct LemmaRun {
    pub params: Option<LemmaParams>,
    pub n: usize,
    pub hypotheses: Report,
    pub constants: Vec<Constants>,
    pub steps: Vec<StepRecord>,
    pub step_failure: Option<StepFailure>,
    /// `r₁₁ = N² · max_j max ‖F_j − F_{j−1}‖` off `ϖ_j`.
    pub r11: f64,
    /// `4r₁₁ + 2(ρ+s)/r₆`, a diagnostic.
    pub r12: f64,
    pub assertions: Report,
    pub conclusions: Report,
    #[serde(skip)]
    pub output: Option<WeierstrassData>,
    pub pair: Option<PolygonalPair>,
}

impl LemmaRun {
    pub fn passed(&self) -> bool {
        self.output.is_some() && self.hypotheses.passed() && self.assertions.passed() && self.conclusions.passed()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaFailure {
    pub assertion: String,
    pub detail: String,
    pub run: LemmaRun,
}

fn fail(run: LemmaRun, assertion: &str, detail: String) -> DeformationError {
    DeformationError::Lemma(Box::new(LemmaFailure { assertion: assertion.into(), detail, run }))
}

fn first_failure(r: &Report) -> Option<String> {
    r.failures().next().map(|c| format!("{}: {:.6e} against {:.6e} (margin {:.3})", c.name, c.value, c.bound, c.margin))
}

/// Boundary distance extremes from `S_{2/3}` for `data` on `pair`.
pub fn boundary_distances(data: &WeierstrassData, pair: &PolygonalPair, resolution: f64) -> DResult<(f64, f64)> {
    let g = build_mesh(MeshDomain::Pair(pair), resolution)?.with_data(data)?;
    let field = circle_distance_field(&g)?;
    let b = g.boundary();
    Ok((field.min_over(&b), field.max_over(&b)))
}

fn max_norm(v: &[Vec3]) -> f64 {
    v.iter().map(|p| p.norm()).fold(0.0, f64::max)
}

/// The lemma's hypotheses for `x` on `pair`: the distance band on `T` and
/// on `T^ξ`, `ρ < (1−k′)(ρ+s)` and `ρk < s`.
pub fn lemma_hypotheses(
    x: &WeierstrassData,
    pair: &PolygonalPair,
    p: &LemmaParams,
    cfg: &LemmaConfig,
) -> DResult<Report> {
    let mut rep = Report::default();
    let (lo, hi) = boundary_distances(x, pair, cfg.resolution)?;
    rep.push(Check::at_least("H1 lower", lo, (1.0 - p.k) * p.rho));
    rep.push(Check::at_most("H1 upper", hi, p.rho));
    let g = build_mesh(MeshDomain::Pair(pair), cfg.resolution)?;
    rep.push(Check::at_most("H2", max_norm(&immerse_nodes(&g, x, cfg.step.quad_tol)?), p.r));
    rep.push(Check::holds("H3", is_z2_type(&PhiTriple::Data(x.clone()), &probe_grid(), 1e-12)?));
    rep.push(Check::within("H4", symmetry_value(x, cfg.step.quad_tol)?.norm(), 1e-10));
    let inner = offset_pair(pair, p.xi)?;
    let (lo, hi) = boundary_distances(x, &inner, cfg.resolution)?;
    rep.push(Check::at_least("H5 lower", lo, (1.0 - p.k) * p.rho));
    rep.push(Check::at_most("H5 upper", hi, p.rho));
    rep.push(Check::at_most("H6", p.rho, (1.0 - p.k_prime) * (p.rho + p.s)));
    rep.push(Check::at_most("H7", p.rho * p.k, p.s));
    Ok(rep)
}

/// Runs the `2N` steps on `x` over the labyrinth of `pair`, checks the
/// step assertions on `F_{2N}`, extracts `(P̃, Q̃)` and returns
/// `Y = F_{2N} − S(F_{2N})/2` with the lemma's conclusions.
pub fn run_lemma(x: &WeierstrassData, pair: &PolygonalPair, p: &LemmaParams, cfg: &LemmaConfig) -> DResult<LemmaRun> {
    let n = cfg.n;
    let mut run = LemmaRun { params: Some(*p), n, ..LemmaRun::default() };
    run.hypotheses = lemma_hypotheses(x, pair, p, cfg)?;
    if let Some(d) = first_failure(&run.hypotheses) {
        return Err(fail(run, "hypothesis", d));
    }
    let lab = Labyrinth::build(pair, n)?;
    let tol = cfg.step.quad_tol;
    let spacing = cfg.step.sample_spacing;

    // T ∖ ⋃ϖ_k, grown as steps complete
    let grid = {
        let h = spacing;
        let k = (1.0 / h).ceil() as i64;
        let mut g: Vec<Complex64> = (-k..=k)
            .flat_map(|a| (-k..=k).map(move |b| Complex64::new(a as f64 * h, b as f64 * h)))
            .filter(|z| pair.contains(*z))
            .collect();
        g.extend(pair.p().sample_boundary(spacing));
        g.extend(pair.q().sample_boundary(spacing));
        g
    };
    let mut away: Vec<Complex64> = grid.clone();
    let mut current = x.clone();
    let mut r6_first = f64::NAN;
    for j in 1..=2 * n {
        let fit = StepSamples::build(&lab, j, spacing);
        let checks = StepSamples::build(&lab, j, spacing / 4.0);
        let consts = check_properties(&current, n, j, &away, &fit, tol)?;
        if j == 1 {
            r6_first = consts.r6;
        }
        let nu = 2.0 / consts.r6;
        run.constants.push(consts.clone());
        let frame = match select_frame(&current, n, &fit, &consts, nu, tol) {
            Ok(f) => f,
            Err(e) => return Err(fail(run, "frame", e.to_string())),
        };
        match deform_step(&current, n, j, &frame, &fit, &checks, &cfg.step) {
            Ok(step) => {
                run.r11 = run.r11.max(step.displacement * (n * n) as f64);
                run.steps.push(step.record());
                current = step.output;
            }
            Err(DeformationError::Step(f)) => {
                let detail = format!("step {j}: {} ({})", f.binding, f.detail);
                run.step_failure = Some(*f);
                return Err(fail(run, "step", detail));
            }
            Err(e) => return Err(e),
        }
        away.retain(|z| lab.classify(*z).varpi().is_none_or(|(i, _)| i != j));
        away.extend(thin(&fit.outside, fit.outside.len() / 4));
        away.retain(|z| lab.classify(*z).varpi().is_none_or(|(i, _)| i > j));
    }
    let f2n = current;
    run.r12 = 4.0 * run.r11 + 2.0 * (p.rho + p.s) / r6_first;
    let (lo, hi) = p.band();
    let nf = n as f64;
    let sn = nf.sqrt();
    let mut prop = Report::default();

    // (i) on the labyrinth mesh, with the metric floors
    let res_lab = cfg.resolution.min(resolution_bound(&lab));
    let lg = build_mesh(MeshDomain::Labyrinth(&lab), res_lab)?.with_data(&f2n)?;
    let lfield = circle_distance_field(&lg)?;
    prop.push(Check::at_least("(i)", lfield.min_over(&lg.boundary()), hi));
    let mut floors = [f64::INFINITY; 3];
    for (z, l) in lg.nodes().iter().zip(lg.lambda()) {
        let slot = match lab.classify(*z) {
            Region::Omega { .. } => 2,
            Region::Varpi { .. } => 1,
            _ => 0,
        };
        floors[slot] = floors[slot].min(*l);
    }
    prop.push(Check::at_least("(i) floor off ϖ", floors[0], 0.5 / sn));
    if floors[1].is_finite() {
        prop.push(Check::at_least("(i) floor on ϖ", floors[1], 0.5 / sn));
    }
    if floors[2].is_finite() {
        prop.push(Check::at_least("(i) floor on ω", floors[2], nf.powi(4) * 0.5 / sn));
    }
    // (ii)
    let inner = offset_pair(pair, p.xi)?;
    let (_, hi_xi) = boundary_distances(&f2n, &inner, cfg.resolution)?;
    prop.push(Check::at_most("(ii)", hi_xi, lo));
    // (iv)
    let off = thin_symmetric(&away, 4 * IMMERSION_SAMPLES);
    let fx = immerse_all(&f2n, &off, tol)?;
    let xx = immerse_all(x, &off, tol)?;
    let drift = fx.iter().zip(&xx).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    prop.push(Check::at_most("(iv)", drift, (2.0 * run.r11 / nf).max(f64::MIN_POSITIVE)));
    // (v)
    let tilde = match extract_pair(&lg, &lfield, lo, hi) {
        Ok(t) => t,
        Err(e) => {
            prop.push(Check::holds("(v)", false));
            run.assertions = prop;
            return Err(fail(run, "(v)", e.to_string()));
        }
    };
    let (tlo, thi) = boundary_distances(&f2n, &tilde, cfg.resolution)?;
    prop.push(Check::at_least("(v) lower", tlo, lo));
    prop.push(Check::at_most("(v) upper", thi, hi));
    // (vi)
    prop.push(Check::holds("(vi) T̃ ⊂ I(T)", pair.encloses(&tilde)));
    prop.push(Check::holds("(vi) T^ξ ⊂ I(T̃)", tilde.encloses(&inner)));
    // (vii): boundary, then the interior as a safety net
    let rr = p.big_r();
    let tg = build_mesh(MeshDomain::Pair(&tilde), cfg.resolution)?;
    let images = immerse_nodes(&tg, &f2n, tol)?;
    let boundary_max = tg.boundary().iter().map(|&i| images[i].norm()).fold(0.0, f64::max);
    prop.push(Check::at_most("(vii)", boundary_max, rr - p.epsilon / 2.0));
    prop.push(Check::at_most("(vii) interior", max_norm(&images), rr - p.epsilon / 2.0));
    run.assertions = prop;
    run.pair = Some(tilde.clone());
    if let Some(d) = first_failure(&run.assertions) {
        return Err(fail(run, "assertions", d));
    }

    let s = symmetry_value(&f2n, tol)?;
    let y = f2n.translated(-s * 0.5);
    run.conclusions = lemma_conclusions(x, &y, pair, &tilde, p, cfg)?;
    run.output = Some(y);
    if let Some(d) = first_failure(&run.conclusions) {
        return Err(fail(run, "conclusion", d));
    }
    Ok(run)
}

/// Conclusions 1–6 of the lemma for `y` on the extracted pair.
pub fn lemma_conclusions(
    x: &WeierstrassData,
    y: &WeierstrassData,
    pair: &PolygonalPair,
    tilde: &PolygonalPair,
    p: &LemmaParams,
    cfg: &LemmaConfig,
) -> DResult<Report> {
    let tol = cfg.step.quad_tol;
    let (lo, hi) = p.band();
    let mut rep = Report::default();
    let (a, b) = boundary_distances(y, tilde, cfg.resolution)?;
    rep.push(Check::at_least("1 lower", a, lo));
    rep.push(Check::at_most("1 upper", b, hi));
    let tg = build_mesh(MeshDomain::Pair(tilde), cfg.resolution)?;
    rep.push(Check::at_most("2", max_norm(&immerse_nodes(&tg, y, tol)?), p.big_r()));
    rep.push(Check::holds("3", is_z2_type(&PhiTriple::Data(y.clone()), &probe_grid(), 1e-12)?));
    rep.push(Check::within("4", symmetry_value(y, tol)?.norm(), 1e-10));
    let inner = offset_pair(pair, p.xi)?;
    let xg = build_mesh(MeshDomain::Pair(&inner), cfg.resolution)?;
    let yx = immerse_nodes(&xg, y, tol)?;
    let xx = immerse_nodes(&xg, x, tol)?;
    let drift = yx.iter().zip(&xx).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    rep.push(Check::at_most("5", drift, p.epsilon));
    rep.push(Check::holds("6", tilde.encloses(&inner) && pair.encloses(tilde)));
    Ok(rep)
}

/// Crossing of level `zeta` on the mesh edge `(a, b)`, `a < b`.
fn crossing(graph: &MetricGraph, field: &DistanceField, a: usize, b: usize, zeta: f64) -> Complex64 {
    let (va, vb) = (field.values[a], field.values[b]);
    let t = (zeta - va) / (vb - va);
    graph.node(a) + (graph.node(b) - graph.node(a)) * t
}

fn winding(vertices: &[Complex64]) -> f64 {
    let mut total = 0.0;
    for i in 0..vertices.len() {
        let (a, b) = (vertices[i], vertices[(i + 1) % vertices.len()]);
        total += (b / a).arg();
    }
    total / (2.0 * PI)
}

fn shoelace(v: &[Complex64]) -> f64 {
    (0..v.len()).map(|i| (v[i].conj() * v[(i + 1) % v.len()]).im).sum::<f64>() / 2.0
}

/// The closed level curves `{field = ζ}` of the piecewise-linear field on the
/// mesh triangles, as loops of crossed edges.
fn level_loops(graph: &MetricGraph, field: &DistanceField, zeta: f64) -> Vec<Vec<(usize, usize)>> {
    let above = |i: usize| field.values[i] >= zeta;
    let edge = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
    let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let tris = graph.triangles();
    let mut crossed_tris = Vec::new();
    for (t, tri) in tris.iter().enumerate() {
        let ups = tri.iter().filter(|&&i| above(i)).count();
        if ups == 0 || ups == 3 {
            continue;
        }
        let mut es = Vec::with_capacity(2);
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if above(a) != above(b) {
                es.push(edge(a, b));
            }
        }
        for e in &es {
            by_edge.entry(*e).or_default().push(t);
        }
        crossed_tris.push((t, [es[0], es[1]]));
    }
    let tri_edges: HashMap<usize, [(usize, usize); 2]> = crossed_tris.into_iter().collect();
    let mut used: HashSet<usize> = HashSet::new();
    let mut loops = Vec::new();
    let mut starts: Vec<usize> = tri_edges.keys().copied().collect();
    starts.sort_unstable();
    for start in starts {
        if used.contains(&start) {
            continue;
        }
        let mut chain = Vec::new();
        let mut t = start;
        let mut e = tri_edges[&start][0];
        let closed = loop {
            used.insert(t);
            let [a, b] = tri_edges[&t];
            let next_e = if a == e { b } else { a };
            chain.push(next_e);
            match by_edge[&next_e].iter().copied().find(|&u| u != t) {
                Some(u) if u == start => break true,
                Some(u) if !used.contains(&u) => {
                    t = u;
                    e = next_e;
                }
                _ => break false,
            }
        };
        if closed {
            loops.push(chain);
        }
    }
    loops
}

/// The pair `(P̃, Q̃)` from the level `ζ = (lo+hi)/2` of `field`.
///
/// On each side of the circle the loop kept is the one bounding the
/// component of `{field < ζ}` that contains the circle. Each vertex is
/// averaged with the negative of the vertex on the mirrored edge, which
/// makes the polygons exactly symmetric.
pub fn extract_pair(graph: &MetricGraph, field: &DistanceField, lo: f64, hi: f64) -> DResult<PolygonalPair> {
    if !(lo < hi) {
        return Err(DeformationError::Precondition(format!("empty band ({lo}, {hi})")));
    }
    let zeta = 0.5 * (lo + hi);
    let loops = level_loops(graph, field, zeta);
    let r = crate::metric::MIDDLE_RADIUS;
    let mut outer: Option<(f64, Vec<(usize, usize)>)> = None;
    let mut inner: Option<(f64, Vec<(usize, usize)>)> = None;
    for lp in loops {
        let pts: Vec<Complex64> = lp.iter().map(|&(a, b)| crossing(graph, field, a, b, zeta)).collect();
        if winding(&pts).abs().round() != 1.0 {
            continue;
        }
        let area = shoelace(&pts).abs();
        if pts.iter().all(|z| z.norm() > r) {
            if outer.as_ref().is_none_or(|(a, _)| area < *a) {
                outer = Some((area, lp));
            }
        } else if pts.iter().all(|z| z.norm() < r) && inner.as_ref().is_none_or(|(a, _)| area > *a) {
            inner = Some((area, lp));
        }
    }
    let (Some((_, outer)), Some((_, inner))) = (outer, inner) else {
        return Err(DeformationError::Extraction(format!(
            "no level curve at ζ = {zeta} separates the circle from ∂T on both sides"
        )));
    };
    let polygon = |lp: &[(usize, usize)]| -> DResult<Polygon> {
        let mut bracket = (f64::INFINITY, f64::NEG_INFINITY);
        let mut verts = Vec::with_capacity(lp.len());
        for &(a, b) in lp {
            let (ma, mb) = (graph.mirror(a), graph.mirror(b));
            let (ma, mb) = if ma < mb { (ma, mb) } else { (mb, ma) };
            let (fa, fb) = (field.values[ma], field.values[mb]);
            if (fa >= zeta) == (fb >= zeta) {
                return Err(DeformationError::Extraction("level curve is not symmetric".into()));
            }
            let v = crossing(graph, field, a, b, zeta);
            let w = crossing(graph, field, ma, mb, zeta);
            verts.push((v - w) * 0.5);
            for i in [a, b] {
                bracket.0 = bracket.0.min(field.values[i]);
                bracket.1 = bracket.1.max(field.values[i]);
            }
        }
        if !(bracket.0 > lo && bracket.1 < hi) {
            return Err(DeformationError::Extraction(format!(
                "field around the curve spans [{:.6}, {:.6}], outside ({lo:.6}, {hi:.6}): mesh too coarse",
                bracket.0, bracket.1
            )));
        }
        verts.dedup();
        if verts.len() > 1 && verts.first() == verts.last() {
            verts.pop();
        }
        Polygon::new(verts).map_err(|e| DeformationError::Extraction(e.to_string()))
    };
    let p = polygon(&outer)?;
    let q = polygon(&inner)?;
    PolygonalPair::new(p, q).map_err(|e| DeformationError::Extraction(e.to_string()))
}

/// Lower bound on `λ` off the cells, `r₆/√2`.
pub fn metric_floor(r6: f64) -> f64 {
    r6 * FRAC_1_SQRT_2
}
