//! The labyrinth: `2N² + 1` nested parallel copies of each polygon, cut by
//! `2N` transversal segments whose pieces alternate between even and odd
//! strips. The cells left over are where the metric gets amplified.
//!
//! Indexing follows the construction: segments `L_1 … L_{2N}` on each side,
//! sets `ω_1 … ω_N` from `P` and `ω_{N+1} … ω_{2N}` from `Q`, each split in two
//! sheets exchanged by `z ↦ −z`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex_field::segment_distance;
use crate::geometry::{offset_pair, segment_segment_distance, GeometryError, Polygon, PolygonalPair, MITER_LIMIT};

/// Points this close to a segment count as lying on it.
const ON_SEGMENT: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabyrinthError {
    #[error("N = {n} must be a positive multiple of the side counts {p_sides} and {q_sides}")]
    NotMultiple { n: usize, p_sides: usize, q_sides: usize },
    #[error("the labyrinth needs convex polygons; {0} is not convex")]
    NonConvex(&'static str),
    #[error("N = {n} is too small for this pair: {detail}")]
    TooSmall { n: usize, detail: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    P,
    Q,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::P, Side::Q];
}

/// The two halves `ω_i¹`, `ω_i²` of a set, swapped by `z ↦ −z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sheet {
    One,
    Two,
}

impl Sheet {
    pub fn other(self) -> Sheet {
        match self {
            Sheet::One => Sheet::Two,
            Sheet::Two => Sheet::One,
        }
    }
}

/// Where a point sits relative to the labyrinth. Indices are `1..=2N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// In `ω_index^sheet`.
    Omega { index: usize, sheet: Sheet },
    /// In `ϖ_index^sheet ∖ ω_index^sheet`.
    Varpi { index: usize, sheet: Sheet },
    /// In `Ω_N` but in no `ω`. Every cell meets its middle segment, so this
    /// never happens for the layout built here.
    OmegaN,
    /// In `T ∖ (Ω_N ∪ ⋃ϖ)`.
    Corridor,
    /// Not in `T`.
    Outside,
}

impl Region {
    /// The tag `−z` receives when `z` has this one.
    pub fn mirror(self) -> Region {
        match self {
            Region::Omega { index, sheet } => Region::Omega { index, sheet: sheet.other() },
            Region::Varpi { index, sheet } => Region::Varpi { index, sheet: sheet.other() },
            other => other,
        }
    }

    /// `(index, sheet)` if the point is in some `ϖ` (which contains `ω`).
    pub fn varpi(self) -> Option<(usize, Sheet)> {
        match self {
            Region::Omega { index, sheet } | Region::Varpi { index, sheet } => Some((index, sheet)),
            _ => None,
        }
    }

    pub fn is_omega(self) -> bool {
        matches!(self, Region::Omega { .. } | Region::OmegaN)
    }
}

/// Position of a point in the band of one side: the offset level `zeta` and
/// the parameter `(edge, t)` of its foot on the offset polygon at that level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandLocation {
    pub zeta: f64,
    pub edge: usize,
    pub t: f64,
}

/// One connected component of `Ω_N`: strip `strip` between the walls
/// `walls.0` and `walls.1`, crossed by segment `middle` (0-based indices).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub side: Side,
    pub strip: usize,
    pub middle: usize,
    pub walls: (usize, usize),
}

#[derive(Clone, Debug)]
struct Band {
    base: Polygon,
    /// Vertex velocities of the offset family, pointing into the band.
    miters: Vec<Complex64>,
    /// Unit edge normals pointing into the band.
    normals: Vec<Complex64>,
    layers: Vec<Polygon>,
    segments: Vec<(Complex64, Complex64)>,
    outward: bool,
}

impl Band {
    fn new(base: &Polygon, n: usize, outward: bool) -> Result<Band, LabyrinthError> {
        let sign = if outward { -1.0 } else { 1.0 };
        let miters: Vec<_> = base.miters().into_iter().map(|m| m * sign).collect();
        let normals = (0..base.len()).map(|k| base.inward_normal(k) * sign).collect();
        let n3 = (n * n * n) as f64;
        let layers = (0..=2 * n * n)
            .map(|i| {
                let zeta = i as f64 / n3;
                if i == 0 {
                    Ok(base.clone())
                } else {
                    base.offset(sign * zeta)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut band = Band { base: base.clone(), miters, normals, layers, segments: Vec::new(), outward };
        let depth = 2.0 / n as f64;
        band.segments = (0..2 * n)
            .map(|m| {
                let (edge, t) = division(base.len(), n, m);
                (band.point(edge, t, 0.0), band.point(edge, t, depth))
            })
            .collect();
        Ok(band)
    }

    fn point(&self, edge: usize, t: f64, zeta: f64) -> Complex64 {
        let s = self.base.len();
        let (k0, k1) = (edge % s, (edge + 1) % s);
        let a = self.base.vertex(k0) + self.miters[k0] * zeta;
        let b = self.base.vertex(k1) + self.miters[k1] * zeta;
        a * (1.0 - t) + b * t
    }

    fn signed(&self, k: usize, z: Complex64) -> f64 {
        let d = z - self.base.vertex(k);
        self.normals[k].re * d.re + self.normals[k].im * d.im
    }

    /// Offset level of `z`: inward distance for `P`, outward distance for `Q`.
    fn coordinate(&self, z: Complex64) -> (f64, usize) {
        let mut best = (self.signed(0, z), 0);
        for k in 1..self.base.len() {
            let v = self.signed(k, z);
            if (self.outward && v > best.0) || (!self.outward && v < best.0) {
                best = (v, k);
            }
        }
        best
    }

    fn locate(&self, z: Complex64) -> BandLocation {
        let (zeta, edge) = self.coordinate(z);
        let a = self.point(edge, 0.0, zeta);
        let b = self.point(edge, 1.0, zeta);
        let d = b - a;
        let t = (((z - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
        BandLocation { zeta, edge, t }
    }
}

/// Division point `m` (0-based) of a polygon with `sides` sides cut into
/// `2N/sides` equal parts per side, as `(edge, fraction)`.
fn division(sides: usize, n: usize, m: usize) -> (usize, f64) {
    let q = 2 * n / sides;
    let m = m % (2 * n);
    (m / q, (m % q) as f64 / q as f64)
}

/// Per-ring lower bounds on the length of any curve crossing the band.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationReport {
    pub n: usize,
    /// Minimum side length over all offsets used.
    pub r1: f64,
    /// For each ring `P_{2i} … P_{2i+2}`, the certified cost at `c = 1`.
    pub per_ring_p: Vec<f64>,
    pub per_ring_q: Vec<f64>,
    /// Cost of crossing one cell of `Ω_N` at `c = 1` when `λ = N⁴` there.
    pub cell_crossing: f64,
    /// `min(Σ per_ring_p, Σ per_ring_q)`.
    pub total: f64,
}

impl SeparationReport {
    /// Certified lower bound on the `S_{2/3}`-to-`∂T` distance for a metric
    /// with `λ ≥ c` on `T` and `λ ≥ cN⁴` on `Ω_N`.
    pub fn certified(&self, c: f64) -> f64 {
        c * self.total
    }

    /// The bound `c·r₁·N/2`.
    pub fn reference(&self, c: f64) -> f64 {
        c * self.r1 * self.n as f64 / 2.0
    }
}

/// The labyrinth built on a polygonal pair.
#[derive(Clone, Debug)]
pub struct Labyrinth {
    pair: PolygonalPair,
    n: usize,
    bands: [Band; 2],
    margin: f64,
    delta: f64,
    r1: f64,
    r2: f64,
    r3: f64,
}

impl Labyrinth {
    pub fn build(pair: &PolygonalPair, n: usize) -> Result<Labyrinth, LabyrinthError> {
        let (s, s2) = (pair.p().len(), pair.q().len());
        if n == 0 || !n.is_multiple_of(s) || !n.is_multiple_of(s2) {
            return Err(LabyrinthError::NotMultiple { n, p_sides: s, q_sides: s2 });
        }
        if !pair.p().is_convex() {
            return Err(LabyrinthError::NonConvex("P"));
        }
        if !pair.q().is_convex() {
            return Err(LabyrinthError::NonConvex("Q"));
        }
        for poly in [pair.p(), pair.q()] {
            if poly.miters().iter().any(|m| m.norm() > MITER_LIMIT) {
                return Err(GeometryError::Precondition("corner too sharp for mitred offsets".into()).into());
            }
        }
        let depth = 2.0 / n as f64;
        offset_pair(pair, depth).map_err(|e| LabyrinthError::TooSmall { n, detail: e.to_string() })?;
        let bands = [Band::new(pair.p(), n, false)?, Band::new(pair.q(), n, true)?];

        let sides = |b: &Band| {
            let first = b.layers.first().unwrap().side_lengths();
            let last = b.layers.last().unwrap().side_lengths();
            first.into_iter().chain(last)
        };
        let r1 = bands.iter().flat_map(sides).fold(f64::INFINITY, f64::min);
        let r2 = bands.iter().flat_map(sides).fold(0.0, f64::max);
        let n3 = (n * n * n) as f64;
        let margin = (0.25 / n3).min(r1 / (n * n) as f64);

        let mut gap = margin;
        for band in &bands {
            for m in 0..2 * n {
                let (a, b) = band.segments[m];
                let (c, d) = band.segments[(m + 1) % (2 * n)];
                gap = gap.min(segment_segment_distance(a, b, c, d));
            }
        }
        let delta = (gap / 2.0).min(0.125 / n3);

        let mut lab = Labyrinth { pair: pair.clone(), n, bands, margin, delta, r1, r2, r3: 0.0 };
        let diam = (1..=2 * n)
            .flat_map(|i| [Sheet::One, Sheet::Two].map(|sh| lab.varpi_diameter_bound(i, sh)))
            .fold(0.0, f64::max);
        lab.r3 = diam * n as f64;
        Ok(lab)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pair(&self) -> &PolygonalPair {
        &self.pair
    }

    /// Offset step `1/N³` between consecutive polygons.
    pub fn spacing(&self) -> f64 {
        1.0 / (self.n * self.n * self.n) as f64
    }

    /// Total band depth `2/N`.
    pub fn depth(&self) -> f64 {
        2.0 / self.n as f64
    }

    /// `min(1/(4N³), r₁/N²)`: the distance to `H` defining `Ω_N`.
    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Fattening radius of the `ϖ` sets.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    pub fn r3(&self) -> f64 {
        self.r3
    }

    fn band(&self, side: Side) -> &Band {
        match side {
            Side::P => &self.bands[0],
            Side::Q => &self.bands[1],
        }
    }

    /// `P_0 … P_{2N²}` or `Q_0 … Q_{2N²}`.
    pub fn polygons(&self, side: Side) -> &[Polygon] {
        &self.band(side).layers
    }

    /// `L_1 … L_{2N}` as `(v_i, v'_i)`.
    pub fn segments(&self, side: Side) -> &[(Complex64, Complex64)] {
        &self.band(side).segments
    }

    /// Parameter `(edge, t)` of the division point behind `L_{m+1}`.
    pub fn division(&self, side: Side, m: usize) -> (usize, f64) {
        division(self.band(side).base.len(), self.n, m)
    }

    /// Point at parameter `(edge, t)` of the offset at level `zeta`.
    pub fn band_point(&self, side: Side, edge: usize, t: f64, zeta: f64) -> Complex64 {
        self.band(side).point(edge, t, zeta)
    }

    pub fn sides(&self, side: Side) -> usize {
        self.band(side).base.len()
    }

    pub fn locate(&self, side: Side, z: Complex64) -> BandLocation {
        self.band(side).locate(z)
    }

    /// 0-based index of the segment pair `(L_m, L_{m+1})` bracketing `loc`.
    fn sector(&self, side: Side, loc: &BandLocation) -> usize {
        let q = 2 * self.n / self.sides(side);
        let within = ((loc.t * q as f64).floor() as usize).min(q - 1);
        loc.edge * q + within
    }

    fn is_wall(m: usize, strip: usize) -> bool {
        !m.is_multiple_of(2) == strip.is_multiple_of(2)
    }

    fn label(&self, side: Side, m: usize) -> (usize, Sheet) {
        let n = self.n;
        let (i, sheet) = if m < n { (m + 1, Sheet::One) } else { (m + 1 - n, Sheet::Two) };
        match side {
            Side::P => (i, sheet),
            Side::Q => (i + n, sheet),
        }
    }

    fn unlabel(&self, index: usize, sheet: Sheet) -> (Side, usize) {
        let n = self.n;
        let (side, i) = if index > n { (Side::Q, index - n) } else { (Side::P, index) };
        let m = match sheet {
            Sheet::One => i - 1,
            Sheet::Two => i - 1 + n,
        };
        (side, m)
    }

    /// Walls and middle segment of the cell of strip `strip` in sector `m`.
    fn cell_at(&self, side: Side, strip: usize, m: usize) -> Cell {
        let l = 2 * self.n;
        if Self::is_wall(m, strip) {
            Cell { side, strip, middle: (m + 1) % l, walls: (m, (m + 2) % l) }
        } else {
            Cell { side, strip, middle: m, walls: ((m + l - 1) % l, (m + 1) % l) }
        }
    }

    /// `dist(z, H)` for `z` in the strip of `cell`.
    fn distance_to_h(&self, cell: &Cell, z: Complex64) -> f64 {
        let band = self.band(cell.side);
        let (a, b) = band.segments[cell.walls.0];
        let (c, d) = band.segments[cell.walls.1];
        band.layers[cell.strip]
            .boundary_distance(z)
            .min(band.layers[cell.strip + 1].boundary_distance(z))
            .min(segment_distance(z, a, b))
            .min(segment_distance(z, c, d))
    }

    /// The cells of `Ω_N` making up `ω_index^sheet`.
    pub fn cells(&self, index: usize, sheet: Sheet) -> Vec<Cell> {
        let (side, m) = self.unlabel(index, sheet);
        (0..2 * self.n * self.n).filter(|&j| !Self::is_wall(m, j)).map(|j| self.cell_at(side, j, m)).collect()
    }

    pub fn classify(&self, z: Complex64) -> Region {
        if !self.pair.contains(z) {
            return Region::Outside;
        }
        let depth = self.depth();
        let strips = 2 * self.n * self.n;
        let mut varpi = None;
        for side in Side::BOTH {
            let band = self.band(side);
            let loc = band.locate(z);
            if loc.zeta < 0.0 || loc.zeta > depth + 2.0 * self.delta {
                continue;
            }
            let m = self.sector(side, &loc);
            for l in [m, (m + 1) % (2 * self.n)] {
                let (a, b) = band.segments[l];
                let d = segment_distance(z, a, b);
                if d <= ON_SEGMENT {
                    let (index, sheet) = self.label(side, l);
                    return Region::Omega { index, sheet };
                }
                if d < self.delta {
                    varpi = Some(self.label(side, l));
                }
            }
            if loc.zeta <= depth {
                let strip = ((loc.zeta * (self.n * self.n * self.n) as f64) as usize).min(strips - 1);
                let cell = self.cell_at(side, strip, m);
                let dh = self.distance_to_h(&cell, z);
                if dh >= self.margin {
                    let (index, sheet) = self.label(side, cell.middle);
                    return Region::Omega { index, sheet };
                }
                if dh > self.margin - self.delta {
                    varpi = Some(self.label(side, cell.middle));
                }
            }
        }
        match varpi {
            Some((index, sheet)) => Region::Varpi { index, sheet },
            None => Region::Corridor,
        }
    }

    /// `dist(z, H)` on the band of either side, `None` off both bands.
    pub fn distance_to_walls(&self, z: Complex64) -> Option<f64> {
        let strips = 2 * self.n * self.n;
        Side::BOTH
            .into_iter()
            .filter_map(|side| {
                let loc = self.band(side).locate(z);
                if !(0.0..=self.depth()).contains(&loc.zeta) {
                    return None;
                }
                let strip = ((loc.zeta * (self.n * self.n * self.n) as f64) as usize).min(strips - 1);
                let cell = self.cell_at(side, strip, self.sector(side, &loc));
                Some(self.distance_to_h(&cell, z))
            })
            .reduce(f64::min)
    }

    /// `z ∈ Ω_N`: inside a band at distance at least the margin from `H`.
    /// Unlike [`Labyrinth::classify`] this excludes the wall pieces of the
    /// segments, which belong to `H`.
    pub fn in_omega_n(&self, z: Complex64) -> bool {
        self.pair.contains(z) && self.distance_to_walls(z).is_some_and(|d| d >= self.margin)
    }

    /// Points of `ω_index^sheet` inside `T`: its segment at the given spacing
    /// plus three levels across every cell.
    pub fn omega_samples(&self, index: usize, sheet: Sheet, spacing: f64) -> Vec<Complex64> {
        let (side, m) = self.unlabel(index, sheet);
        let band = self.band(side);
        let (a, b) = band.segments[m];
        let k = ((b - a).norm() / spacing).ceil().max(1.0) as usize;
        let mut out: Vec<_> = (1..=k).map(|i| a + (b - a) * (i as f64 / k as f64)).collect();
        let h = self.spacing();
        for cell in self.cells(index, sheet) {
            let (e0, t0) = self.division(side, cell.walls.0);
            let (e1, t1) = self.division(side, cell.walls.1);
            let s = self.sides(side) as f64;
            let u0 = e0 as f64 + t0;
            let mut u1 = e1 as f64 + t1;
            if u1 < u0 {
                u1 += s;
            }
            for level in [0.26, 0.5, 0.74] {
                let zeta = (cell.strip as f64 + level) * h;
                let p0 = band.point(e0, t0, zeta);
                let p1 = band.point(e1, t1, zeta);
                let steps = (((p1 - p0).norm()) / spacing).ceil().max(2.0) as usize;
                for i in 0..=steps {
                    let u = (u0 + (u1 - u0) * i as f64 / steps as f64).rem_euclid(s);
                    let edge = (u.floor() as usize).min(self.sides(side) - 1);
                    let z = band.point(edge, u - edge as f64, zeta);
                    if self.distance_to_h(&cell, z) >= self.margin {
                        out.push(z);
                    }
                }
            }
        }
        out
    }

    /// Upper bound on `diam ϖ_index^sheet`: the band sector between the
    /// neighbouring segments is the convex hull of their endpoints and the
    /// middle segment's, then fattened by `δ`.
    pub fn varpi_diameter_bound(&self, index: usize, sheet: Sheet) -> f64 {
        let (side, m) = self.unlabel(index, sheet);
        let band = self.band(side);
        let l = 2 * self.n;
        let pts: Vec<_> =
            [(m + l - 1) % l, m, (m + 1) % l].iter().flat_map(|&i| [band.segments[i].0, band.segments[i].1]).collect();
        let mut d: f64 = 0.0;
        for a in &pts {
            for b in &pts {
                d = d.max((a - b).norm());
            }
        }
        d + 2.0 * self.delta
    }

    /// Certifies, ring by ring, that a curve crossing the band either travels
    /// laterally between two differently placed walls or crosses a cell.
    pub fn verify_separation(&self) -> SeparationReport {
        let n = self.n;
        let h = self.spacing();
        let n4 = (n as f64).powi(4);
        let cell_crossing = n4 * (h - 2.0 * self.margin);
        let l = 2 * n;
        let ring = |side: Side, i: usize| {
            let band = self.band(side);
            let piece = |m: usize, strip: usize| {
                let (e, t) = self.division(side, m);
                (band.point(e, t, strip as f64 * h), band.point(e, t, (strip + 1) as f64 * h))
            };
            let (even, odd) = (2 * i, 2 * i + 1);
            let mut gap = f64::INFINITY;
            for m in (0..l).filter(|&m| Self::is_wall(m, even)) {
                let (a, b) = piece(m, even);
                for m2 in [(m + 1) % l, (m + l - 1) % l] {
                    let (c, d) = piece(m2, odd);
                    gap = gap.min(segment_segment_distance(a, b, c, d));
                }
            }
            (gap - 2.0 * self.margin).max(0.0).min(cell_crossing)
        };
        let per_ring_p: Vec<f64> = (0..n * n).map(|i| ring(Side::P, i)).collect();
        let per_ring_q: Vec<f64> = (0..n * n).map(|i| ring(Side::Q, i)).collect();
        let total = per_ring_p.iter().sum::<f64>().min(per_ring_q.iter().sum());
        SeparationReport { n, r1: self.r1, per_ring_p, per_ring_q, cell_crossing, total }
    }
}

/// Builds the labyrinth of `pair` at level `n`.
pub fn build_labyrinth(pair: &PolygonalPair, n: usize) -> Result<Labyrinth, LabyrinthError> {
    Labyrinth::build(pair, n)
}
