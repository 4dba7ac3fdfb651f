//! Intrinsic distances for a conformal metric `λ²|dz|²` on a planar annulus.
//!
//! The domain is discretized by a structured mesh of fibres: every fibre runs
//! from the inner polygon `Q` through the circle of radius `2/3` to the outer
//! polygon `P`, and all fibres carry the same number of levels, so nodes form
//! a periodic grid `(fibre, level)`. Each node is joined to its eight grid
//! neighbours. When a labyrinth is present the fibres follow the offset
//! family inside its bands, every dividing segment is a fibre, and each strip
//! carries three levels (on the inner polygon and at 0.3, 0.7 of its depth).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::complex_field::{arc_integral, FieldError, PolylinePath};
use crate::geometry::{Polygon, PolygonalPair};
use crate::labyrinth::{Labyrinth, Side};
use crate::weierstrass::{Vec3, WeierstrassData, WeierstrassError};

/// Radius of the circle the distances are measured from.
pub const MIDDLE_RADIUS: f64 = 2.0 / 3.0;

/// Levels per labyrinth strip, as fractions of the strip depth.
const STRIP_LEVELS: [f64; 3] = [0.0, 0.3, 0.7];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("resolution {resolution} is too coarse for the labyrinth (needs ≤ {bound})")]
    Resolution { resolution: f64, bound: f64 },
    #[error("resolution must be positive and finite, got {0}")]
    BadResolution(f64),
    #[error("node {node} at {at} is unreachable from the sources")]
    Disconnected { node: usize, at: Complex64 },
    #[error("conformal factor {value} at {at} is not positive and finite")]
    Factor { value: f64, at: Complex64 },
    #[error("ray at angle {angle} misses the polygon")]
    Ray { angle: f64 },
    #[error("polygons are not symmetric under z ↦ −z")]
    Asymmetric,
    #[error("empty source or target set")]
    Empty,
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Weierstrass(#[from] WeierstrassError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

type MResult<T> = Result<T, MetricError>;

/// Region the mesh covers: `T = Int(P) ∖ Q̄`, optionally resolving a labyrinth.
#[derive(Clone, Copy, Debug)]
pub enum MeshDomain<'a> {
    Pair(&'a PolygonalPair),
    Labyrinth(&'a Labyrinth),
}

impl MeshDomain<'_> {
    fn pair(&self) -> &PolygonalPair {
        match self {
            MeshDomain::Pair(p) => p,
            MeshDomain::Labyrinth(l) => l.pair(),
        }
    }
}

/// Largest resolution accepted with a labyrinth: a quarter of the smallest
/// distance between consecutive dividing segments.
pub fn resolution_bound(lab: &Labyrinth) -> f64 {
    let s = lab.sides(Side::P).min(lab.sides(Side::Q)) as f64;
    lab.r1() * s / (2.0 * lab.n() as f64) / 4.0
}

/// Position of one fibre: parameters `edge + t` of its feet on `P` and `Q`.
#[derive(Clone, Copy, Debug)]
struct Fibre {
    angle: f64,
    u_p: f64,
    u_q: f64,
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn lerp_edge(poly: &Polygon, u: f64) -> Complex64 {
    let s = poly.len();
    let e = (u.floor() as usize).min(s - 1);
    let t = u - e as f64;
    poly.vertex(e) * (1.0 - t) + poly.vertex((e + 1) % s) * t
}

/// Parameter `edge + t` where the ray at `angle` leaves the polygon.
fn param_at_angle(poly: &Polygon, angle: f64) -> MResult<f64> {
    let dir = Complex64::from_polar(1.0, angle);
    let s = poly.len();
    for e in 0..s {
        let a = poly.vertex(e);
        let d = poly.vertex((e + 1) % s) - a;
        let den = cross(dir, d);
        if den.abs() < 1e-300 {
            continue;
        }
        let t = -cross(dir, a) / den;
        if (-1e-12..=1.0 + 1e-12).contains(&t) {
            let p = a + d * t;
            if p.re * dir.re + p.im * dir.im > 0.0 {
                return Ok(e as f64 + t.clamp(0.0, 1.0 - f64::EPSILON));
            }
        }
    }
    Err(MetricError::Ray { angle })
}

/// Angle of `z` measured from `start`, in `[0, 2π)`, with angles within
/// rounding of a full turn folded to 0.
fn angle_from(z: Complex64, start: f64) -> f64 {
    let a = (z.arg() - start).rem_euclid(2.0 * PI);
    if a > 2.0 * PI - 1e-12 {
        0.0
    } else {
        a
    }
}

fn check_half_turn(poly: &Polygon) -> MResult<()> {
    let s = poly.len();
    if !s.is_multiple_of(2) {
        return Err(MetricError::Asymmetric);
    }
    let scale = poly.max_vertex_norm();
    for k in 0..s / 2 {
        if (poly.vertex(k) + poly.vertex(k + s / 2)).norm() > 1e-9 * scale {
            return Err(MetricError::Asymmetric);
        }
    }
    Ok(())
}

/// Lateral positions of the fibres over half a turn. Vertices (and
/// divisions, with a labyrinth) of both polygons are hit exactly; gaps are
/// filled so that neighbouring feet are at most `resolution` apart.
fn fibres(domain: &MeshDomain, resolution: f64) -> MResult<Vec<Fibre>> {
    let pair = domain.pair();
    let (p, q) = (pair.p(), pair.q());
    check_half_turn(p)?;
    check_half_turn(q)?;
    let start = p.vertex(0).arg();
    // (angle, exact u_p, exact u_q)
    let mut marks: Vec<(f64, Option<f64>, Option<f64>)> = Vec::new();
    for k in 0..p.len() / 2 {
        marks.push((angle_from(p.vertex(k), start), Some(k as f64), None));
    }
    for k in 0..q.len() {
        let a = angle_from(q.vertex(k), start);
        if a < PI - 1e-12 {
            marks.push((a, None, Some(k as f64)));
        }
    }
    if let MeshDomain::Labyrinth(lab) = domain {
        for m in 0..lab.n() {
            let (e, t) = lab.division(Side::P, m);
            marks.push((angle_from(lerp_edge(p, e as f64 + t), start), Some(e as f64 + t), None));
        }
        for m in 0..2 * lab.n() {
            let (e, t) = lab.division(Side::Q, m);
            let a = angle_from(lerp_edge(q, e as f64 + t), start);
            if a < PI - 1e-12 {
                marks.push((a, None, Some(e as f64 + t)));
            }
        }
    }
    marks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, Option<f64>, Option<f64>)> = Vec::new();
    for m in marks {
        match merged.last_mut() {
            Some(last) if (m.0 - last.0).abs() < 1e-12 => {
                last.1 = last.1.or(m.1);
                last.2 = last.2.or(m.2);
            }
            _ => merged.push(m),
        }
    }
    let resolve = |(angle, up, uq): (f64, Option<f64>, Option<f64>)| -> MResult<Fibre> {
        let abs = angle + start;
        Ok(Fibre {
            angle: abs,
            u_p: match up {
                Some(u) => u,
                None => param_at_angle(p, abs)?,
            },
            u_q: match uq {
                Some(u) => u,
                None => param_at_angle(q, abs)?,
            },
        })
    };
    let exact: Vec<Fibre> = merged.into_iter().map(resolve).collect::<MResult<_>>()?;
    let mut out = Vec::new();
    for (i, f) in exact.iter().enumerate() {
        out.push(*f);
        let next_angle = exact.get(i + 1).map_or(exact[0].angle + PI, |g| g.angle);
        let gap_p = (lerp_edge(p, param_at_angle(p, next_angle)?) - lerp_edge(p, f.u_p)).norm();
        let pieces = (gap_p / resolution).ceil().max(1.0) as usize;
        for j in 1..pieces {
            let a = f.angle + (next_angle - f.angle) * j as f64 / pieces as f64;
            out.push(Fibre { angle: a, u_p: param_at_angle(p, a)?, u_q: param_at_angle(q, a)? });
        }
    }
    Ok(out)
}

/// Structured mesh of an annular domain with a conformal factor per node.
#[derive(Clone, Debug)]
pub struct MetricGraph {
    nodes: Vec<Complex64>,
    fibres: usize,
    levels: usize,
    circle_level: usize,
    lambda: Vec<f64>,
    resolution: f64,
}

impl MetricGraph {
    /// Meshes `domain` with lateral spacing at most `resolution` and radial
    /// spacing at most `resolution / 2` outside labyrinth bands. The factor
    /// starts as `λ ≡ 1`.
    pub fn build(domain: MeshDomain, resolution: f64) -> MResult<MetricGraph> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MetricError::BadResolution(resolution));
        }
        if let MeshDomain::Labyrinth(lab) = domain {
            let bound = resolution_bound(lab);
            if resolution > bound {
                return Err(MetricError::Resolution { resolution, bound });
            }
        }
        let half = fibres(&domain, resolution)?;
        let pair = domain.pair();
        let (p, q) = (pair.p(), pair.q());
        let zetas: Vec<f64> = match domain {
            MeshDomain::Pair(_) => vec![0.0],
            MeshDomain::Labyrinth(lab) => {
                let h = lab.spacing();
                let strips = 2 * lab.n() * lab.n();
                let mut z: Vec<f64> = (0..strips).flat_map(|j| STRIP_LEVELS.map(|s| (j as f64 + s) * h)).collect();
                z.push(lab.depth());
                z
            }
        };
        let foot = |side: Side, u: f64, zeta: f64| -> Complex64 {
            match domain {
                MeshDomain::Pair(_) => lerp_edge(if side == Side::P { p } else { q }, u),
                MeshDomain::Labyrinth(lab) => {
                    let s = lab.sides(side);
                    let e = (u.floor() as usize).min(s - 1);
                    lab.band_point(side, e, u - e as f64, zeta)
                }
            }
        };
        let depth = *zetas.last().unwrap();
        let radial = resolution / 2.0;
        let mut inner = 0.0f64;
        let mut outer = 0.0f64;
        for f in &half {
            let c = Complex64::from_polar(MIDDLE_RADIUS, f.angle);
            let a = foot(Side::Q, f.u_q, depth);
            let b = foot(Side::P, f.u_p, depth);
            if a.norm() >= MIDDLE_RADIUS || b.norm() <= MIDDLE_RADIUS {
                return Err(MetricError::Precondition(format!(
                    "fibre at angle {} does not cross the middle circle",
                    f.angle
                )));
            }
            inner = inner.max((c - a).norm());
            outer = outer.max((b - c).norm());
        }
        let n_in = (inner / radial).ceil().max(1.0) as usize;
        let n_out = (outer / radial).ceil().max(1.0) as usize;
        let band = zetas.len() - 1;
        let levels = 2 * band + n_in + n_out + 1;
        let circle_level = band + n_in;
        let fibre_nodes = |f: &Fibre| -> Vec<Complex64> {
            let mut out = Vec::with_capacity(levels);
            for &z in &zetas[..band] {
                out.push(foot(Side::Q, f.u_q, z));
            }
            let a = foot(Side::Q, f.u_q, depth);
            let b = foot(Side::P, f.u_p, depth);
            let c = Complex64::from_polar(MIDDLE_RADIUS, f.angle);
            for i in 0..n_in {
                out.push(a + (c - a) * (i as f64 / n_in as f64));
            }
            out.push(c);
            for i in 1..=n_out {
                out.push(if i == n_out { b } else { c + (b - c) * (i as f64 / n_out as f64) });
            }
            for &z in zetas[..band].iter().rev() {
                out.push(foot(Side::P, f.u_p, z));
            }
            out
        };
        let first: Vec<Vec<Complex64>> = half.par_iter().map(fibre_nodes).collect();
        let k = half.len();
        let mut nodes = Vec::with_capacity(2 * k * levels);
        for f in &first {
            nodes.extend_from_slice(f);
        }
        for f in &first {
            nodes.extend(f.iter().map(|z| -z));
        }
        let lambda = vec![1.0; nodes.len()];
        Ok(MetricGraph { nodes, fibres: 2 * k, levels, circle_level, lambda, resolution })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn fibres(&self) -> usize {
        self.fibres
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Complex64 {
        self.nodes[i]
    }

    pub fn index(&self, fibre: usize, level: usize) -> usize {
        fibre * self.levels + level
    }

    /// Index of `−node(i)`.
    pub fn mirror(&self, i: usize) -> usize {
        let (k, l) = (i / self.levels, i % self.levels);
        self.index((k + self.fibres / 2) % self.fibres, l)
    }

    pub fn circle_level(&self) -> usize {
        self.circle_level
    }

    /// Nodes on the circle `|z| = 2/3`.
    pub fn circle_nodes(&self) -> Vec<usize> {
        (0..self.fibres).map(|k| self.index(k, self.circle_level)).collect()
    }

    /// Nodes on `Q` (level 0) or `P` (last level).
    pub fn boundary_nodes(&self, side: Side) -> Vec<usize> {
        let l = match side {
            Side::Q => 0,
            Side::P => self.levels - 1,
        };
        (0..self.fibres).map(|k| self.index(k, l)).collect()
    }

    /// Both boundary components of `T`.
    pub fn boundary(&self) -> Vec<usize> {
        let mut b = self.boundary_nodes(Side::Q);
        b.extend(self.boundary_nodes(Side::P));
        b
    }

    pub fn nearest_node(&self, z: Complex64) -> usize {
        (0..self.nodes.len())
            .min_by(|&a, &b| (self.nodes[a] - z).norm_sqr().total_cmp(&(self.nodes[b] - z).norm_sqr()))
            .unwrap_or(0)
    }

    /// The up to eight grid neighbours of node `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let (k, l) = (i / self.levels, i % self.levels);
        let kk = self.fibres;
        [(kk - 1, 0i64), (1, 0)]
            .into_iter()
            .chain([(0, -1), (0, 1)])
            .chain([(kk - 1, -1), (kk - 1, 1), (1, -1), (1, 1)])
            .filter_map(move |(dk, dl)| {
                let l2 = l as i64 + dl;
                if l2 < 0 || l2 >= self.levels as i64 {
                    return None;
                }
                Some(self.index((k + dk) % kk, l2 as usize))
            })
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        let (k, l) = (self.fibres, self.levels);
        // lateral + radial + two diagonals per quad
        k * l + k * (l - 1) + 2 * k * (l - 1)
    }

    /// Two triangles per grid quad, counter-clockwise for a positively
    /// oriented mesh.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::with_capacity(2 * self.fibres * (self.levels - 1));
        for k in 0..self.fibres {
            let k1 = (k + 1) % self.fibres;
            for l in 0..self.levels - 1 {
                let (a, b) = (self.index(k, l), self.index(k1, l));
                let (c, d) = (self.index(k1, l + 1), self.index(k, l + 1));
                out.push([a, b, c]);
                out.push([a, c, d]);
            }
        }
        out
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Replaces the factor by per-node values.
    pub fn with_factor_values(mut self, values: Vec<f64>) -> MResult<MetricGraph> {
        if values.len() != self.nodes.len() {
            return Err(MetricError::Precondition(format!(
                "{} factor values for {} nodes",
                values.len(),
                self.nodes.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(MetricError::Factor { value: values[i], at: self.nodes[i] });
        }
        self.lambda = values;
        Ok(self)
    }

    /// Samples `lambda` at every node.
    pub fn with_factor<F>(self, lambda: F) -> MResult<MetricGraph>
    where
        F: Fn(Complex64) -> f64 + Sync,
    {
        let values = self.nodes.par_iter().map(|z| lambda(*z)).collect();
        self.with_factor_values(values)
    }

    /// The conformal factor of `data` at every node.
    pub fn with_data(self, data: &WeierstrassData) -> MResult<MetricGraph> {
        let values = self.nodes.par_iter().map(|z| data.conformal_factor(*z)).collect::<Result<Vec<_>, _>>()?;
        self.with_factor_values(values)
    }

    /// Weighted length of the edge `a–b`: Euclidean length times the mean of
    /// the endpoint factors.
    pub fn edge_weight(&self, a: usize, b: usize) -> f64 {
        (self.nodes[a] - self.nodes[b]).norm() * 0.5 * (self.lambda[a] + self.lambda[b])
    }
}

/// Builds the mesh of `domain` at `resolution`.
pub fn build_mesh(domain: MeshDomain, resolution: f64) -> MResult<MetricGraph> {
    MetricGraph::build(domain, resolution)
}

/// `∫ λ |dz|` along `path`, with error at most `tol` times the result.
pub fn curve_length(data: &WeierstrassData, path: &PolylinePath, tol: f64) -> MResult<f64> {
    let lambda = |w: Complex64| data.conformal_factor(w).unwrap_or(f64::NAN);
    let first = arc_integral(lambda, path, tol)?;
    let value = first.value[0].re;
    if value == 0.0 || first.error <= tol * value {
        return Ok(value);
    }
    let second = arc_integral(lambda, path, tol * value / (1.0 + first.scale))?;
    Ok(second.value[0].re)
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| self.node.cmp(&other.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Graph distance from a node set to every node.
#[derive(Clone, Debug, Serialize)]
pub struct DistanceField {
    pub values: Vec<f64>,
}

impl DistanceField {
    pub fn min_over(&self, nodes: &[usize]) -> f64 {
        nodes.iter().map(|&i| self.values[i]).fold(f64::INFINITY, f64::min)
    }

    pub fn max_over(&self, nodes: &[usize]) -> f64 {
        nodes.iter().map(|&i| self.values[i]).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn dijkstra(graph: &MetricGraph, sources: &[usize], stop: Option<&[bool]>) -> MResult<Vec<f64>> {
    if sources.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut dist = vec![f64::INFINITY; graph.len()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(Entry { dist: 0.0, node: s });
    }
    while let Some(Entry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        if stop.is_some_and(|t| t[node]) {
            break;
        }
        for nb in graph.neighbors(node) {
            let nd = d + graph.edge_weight(node, nb);
            if nd < dist[nb] {
                dist[nb] = nd;
                heap.push(Entry { dist: nd, node: nb });
            }
        }
    }
    Ok(dist)
}

/// Multi-source Dijkstra distance from `sources` to the nearest of `targets`.
pub fn intrinsic_distance(graph: &MetricGraph, sources: &[usize], targets: &[usize]) -> MResult<f64> {
    if targets.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut is_target = vec![false; graph.len()];
    for &t in targets {
        is_target[t] = true;
    }
    let dist = dijkstra(graph, sources, Some(&is_target))?;
    let best = targets.iter().map(|&t| dist[t]).fold(f64::INFINITY, f64::min);
    if best.is_finite() {
        Ok(best)
    } else {
        Err(MetricError::Disconnected { node: targets[0], at: graph.node(targets[0]) })
    }
}

/// Full Dijkstra field from `sources`.
pub fn distance_field(graph: &MetricGraph, sources: &[usize]) -> MResult<DistanceField> {
    let values = dijkstra(graph, sources, None)?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(MetricError::Disconnected { node: i, at: graph.node(i) });
    }
    Ok(DistanceField { values })
}

/// Distance field from the circle `|z| = 2/3`.
pub fn circle_distance_field(graph: &MetricGraph) -> MResult<DistanceField> {
    distance_field(graph, &graph.circle_nodes())
}

/// `X` at every node: the circle nodes by chaining chords from the first one,
/// then each fibre outwards and inwards from its circle node.
pub fn immerse_nodes(graph: &MetricGraph, data: &WeierstrassData, tol: f64) -> MResult<Vec<Vec3>> {
    let step = |a: Complex64, b: Complex64| -> MResult<Vec3> {
        if a == b {
            return Ok(Vec3::zeros());
        }
        Ok(data.integral(&PolylinePath::segment(a, b)?, tol)?)
    };
    let cl = graph.circle_level;
    let mut circle = Vec::with_capacity(graph.fibres);
    circle.push(data.immerse(graph.node(graph.index(0, cl)), tol)?);
    for k in 1..graph.fibres {
        let (a, b) = (graph.node(graph.index(k - 1, cl)), graph.node(graph.index(k, cl)));
        let next = circle[k - 1] + step(a, b)?;
        circle.push(next);
    }
    let per_fibre = (0..graph.fibres)
        .into_par_iter()
        .map(|k| {
            let mut col = vec![Vec3::zeros(); graph.levels];
            col[cl] = circle[k];
            for l in cl + 1..graph.levels {
                col[l] = col[l - 1] + step(graph.node(graph.index(k, l - 1)), graph.node(graph.index(k, l)))?;
            }
            for l in (0..cl).rev() {
                col[l] = col[l + 1] + step(graph.node(graph.index(k, l + 1)), graph.node(graph.index(k, l)))?;
            }
            Ok(col)
        })
        .collect::<MResult<Vec<_>>>()?;
    Ok(per_fibre.into_iter().flatten().collect())
}
