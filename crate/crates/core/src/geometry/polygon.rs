use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::complex_field::segment_distance;

/// Joins whose miter would exceed this multiple of the offset are bevelled.
pub const MITER_LIMIT: f64 = 4.0;

/// Closed simple polygon with counterclockwise vertex order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Complex64>,
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn orient(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    cross(b - a, c - a)
}

/// Euclidean distance between the segments `[a, b]` and `[c, d]`.
pub fn segment_segment_distance(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    segment_distance(a, c, d)
        .min(segment_distance(b, c, d))
        .min(segment_distance(c, a, b))
        .min(segment_distance(d, a, b))
}

/// Closed-segment intersection test.
pub fn segments_intersect(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: Complex64, q: Complex64, r: Complex64| {
        r.re >= p.re.min(q.re) && r.re <= p.re.max(q.re) && r.im >= p.im.min(q.im) && r.im <= p.im.max(q.im)
    };
    (d1 == 0.0 && on(c, d, a)) || (d2 == 0.0 && on(c, d, b)) || (d3 == 0.0 && on(a, b, c)) || (d4 == 0.0 && on(a, b, d))
}

impl Polygon {
    /// Validates and normalizes to counterclockwise order (vertex 0 is kept first).
    pub fn new(mut vertices: Vec<Complex64>) -> Result<Self, GeometryError> {
        if vertices.len() >= 2 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(GeometryError::Degenerate(format!("{} vertices", vertices.len())));
        }
        if vertices.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(GeometryError::Degenerate("non-finite vertex".into()));
        }
        let n = vertices.len();
        for i in 0..n {
            if vertices[i] == vertices[(i + 1) % n] {
                return Err(GeometryError::Degenerate(format!("vertices {i} and {} coincide", (i + 1) % n)));
            }
        }
        let mut p = Polygon { vertices };
        if p.signed_area() < 0.0 {
            p.vertices[1..].reverse();
        }
        if p.signed_area() == 0.0 {
            return Err(GeometryError::Degenerate("zero area".into()));
        }
        p.check_simple()?;
        Ok(p)
    }

    /// Regular polygon with vertex `k` at `R e^{i(phase + 2πk/sides)}`. For an
    /// even number of sides the second half of the vertices is the exact
    /// negation of the first.
    pub fn regular(sides: usize, circumradius: f64, phase: f64) -> Result<Self, GeometryError> {
        if sides < 3 || !(circumradius > 0.0) {
            return Err(GeometryError::Degenerate(format!("{sides} sides, radius {circumradius}")));
        }
        let vertex = |k: usize| Complex64::from_polar(circumradius, phase + 2.0 * PI * k as f64 / sides as f64);
        let vertices = if sides.is_multiple_of(2) {
            let first: Vec<_> = (0..sides / 2).map(vertex).collect();
            first.iter().copied().chain(first.iter().map(|v| -v)).collect()
        } else {
            (0..sides).map(vertex).collect()
        };
        Self::new(vertices)
    }

    pub fn vertices(&self) -> &[Complex64] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, k: usize) -> Complex64 {
        self.vertices[k % self.len()]
    }

    pub fn edges(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        let n = self.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| cross(a, b)).sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn side_lengths(&self) -> Vec<f64> {
        self.edges().map(|(a, b)| (b - a).norm()).collect()
    }

    /// Strict interior test by the crossing rule; boundary points count as outside.
    pub fn contains(&self, z: Complex64) -> bool {
        if self.boundary_distance(z) == 0.0 {
            return false;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.im > z.im) != (b.im > z.im) {
                let x = a.re + (z.im - a.im) / (b.im - a.im) * (b.re - a.re);
                if z.re < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        self.edges().map(|(a, b)| segment_distance(z, a, b)).fold(f64::INFINITY, f64::min)
    }

    pub fn max_vertex_norm(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_convex(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| orient(self.vertex(i), self.vertex(i + 1), self.vertex(i + 2)) > 0.0)
    }

    fn check_simple(&self) -> Result<(), GeometryError> {
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        let lo = |i: usize| self.vertex(i).re.min(self.vertex(i + 1).re);
        let hi = |i: usize| self.vertex(i).re.max(self.vertex(i + 1).re);
        order.sort_by(|&a, &b| lo(a).total_cmp(&lo(b)));
        for (oi, &i) in order.iter().enumerate() {
            for &j in &order[oi + 1..] {
                if lo(j) > hi(i) {
                    break;
                }
                let adjacent = (i + 1) % n == j || (j + 1) % n == i;
                if adjacent {
                    // Neighbouring edges share exactly one vertex unless they fold back.
                    let (s, t) = if (i + 1) % n == j { (i, j) } else { (j, i) };
                    let a = self.vertex(s);
                    let v = self.vertex(t);
                    let b = self.vertex(t + 1);
                    if orient(a, v, b) == 0.0 && (a - v).re * (b - v).re + (a - v).im * (b - v).im > 0.0 {
                        return Err(GeometryError::NotSimple(i.min(j), i.max(j)));
                    }
                    continue;
                }
                if segments_intersect(self.vertex(i), self.vertex(i + 1), self.vertex(j), self.vertex(j + 1)) {
                    return Err(GeometryError::NotSimple(i.min(j), i.max(j)));
                }
            }
        }
        Ok(())
    }

    /// Checks that `−v` is a vertex (within `tol`) for every vertex `v`.
    pub fn check_symmetric(&self, tol: f64) -> Result<(), GeometryError> {
        let n = self.len();
        let antipode_by_index =
            n.is_multiple_of(2) && (0..n).all(|i| (self.vertex(i) + self.vertex(i + n / 2)).norm() <= tol);
        if antipode_by_index {
            return Ok(());
        }
        for v in &self.vertices {
            if !self.vertices.iter().any(|w| (v + w).norm() <= tol) {
                return Err(GeometryError::Asymmetric(v.re, v.im));
            }
        }
        Ok(())
    }

    /// Unit inward normal of edge `k` (from vertex `k` to `k + 1`).
    pub fn inward_normal(&self, k: usize) -> Complex64 {
        let d = self.vertex(k + 1) - self.vertex(k);
        Complex64::new(-d.im, d.re) / d.norm()
    }

    /// Miter vectors: offsetting inward by `ξ` moves vertex `k` to
    /// `v_k + ξ m_k` for a convex polygon.
    pub fn miters(&self) -> Vec<Complex64> {
        let n = self.len();
        (0..n)
            .map(|k| {
                let n1 = self.inward_normal(k + n - 1);
                let n2 = self.inward_normal(k);
                (n1 + n2) / (1.0 + n1.re * n2.re + n1.im * n2.im)
            })
            .collect()
    }

    /// Parallel offset by `xi` (inward for `xi > 0`, outward for `xi < 0`)
    /// with miter joins, bevelled beyond [`MITER_LIMIT`].
    pub fn offset(&self, xi: f64) -> Result<Polygon, GeometryError> {
        let n = self.len();
        let too_large = |detail: String| GeometryError::OffsetTooLarge { xi, detail };
        let mut out = Vec::with_capacity(n);
        // At vertex k: index of the image of the end of edge k−1 and of the start of edge k.
        let mut joins = Vec::with_capacity(n);
        for k in 0..n {
            let n1 = self.inward_normal(k + n - 1);
            let n2 = self.inward_normal(k);
            let v = self.vertex(k);
            let miter = (n1 + n2) / (1.0 + n1.re * n2.re + n1.im * n2.im);
            if miter.norm() > MITER_LIMIT {
                out.push(v + n1 * xi);
                out.push(v + n2 * xi);
                joins.push((out.len() - 2, out.len() - 1));
            } else {
                out.push(v + miter * xi);
                joins.push((out.len() - 1, out.len() - 1));
            }
        }
        for k in 0..n {
            let d0 = self.vertex(k + 1) - self.vertex(k);
            let d1 = out[joins[(k + 1) % n].0] - out[joins[k].1];
            if d1.re * d0.re + d1.im * d0.im <= 0.0 {
                return Err(too_large(format!("edge {k} collapses")));
            }
        }
        Polygon::new(out).map_err(|e| too_large(e.to_string()))
    }

    /// Point at parameter `u ∈ [0, n)`: vertex `⌊u⌋` plus a fraction of the next edge.
    pub fn point_at(&self, u: f64) -> Complex64 {
        let n = self.len() as f64;
        let u = u.rem_euclid(n);
        let k = u.floor() as usize;
        let t = u - k as f64;
        self.vertex(k) * (1.0 - t) + self.vertex(k + 1) * t
    }

    /// Boundary points with spacing at most `spacing`, vertices included.
    pub fn sample_boundary(&self, spacing: f64) -> Vec<Complex64> {
        let mut out = Vec::new();
        for (a, b) in self.edges() {
            let m = ((b - a).norm() / spacing).ceil().max(1.0) as usize;
            out.extend((0..m).map(|i| a + (b - a) * (i as f64 / m as f64)));
        }
        out
    }
}
