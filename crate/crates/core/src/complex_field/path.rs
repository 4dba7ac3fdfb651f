use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::FieldError;

/// Polyline in the punctured plane; no segment may touch the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolylinePath {
    vertices: Vec<Complex64>,
}

/// Distance from the origin to the segment `[a, b]`.
pub fn segment_distance_to_origin(a: Complex64, b: Complex64) -> f64 {
    segment_distance(Complex64::new(0.0, 0.0), a, b)
}

/// Euclidean distance from `p` to the segment `[a, b]`.
pub fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

impl PolylinePath {
    pub fn new(vertices: Vec<Complex64>) -> Result<Self, FieldError> {
        if vertices.len() < 2 {
            return Err(FieldError::Path("a path needs at least two vertices".into()));
        }
        for (i, w) in vertices.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(FieldError::Path(format!("vertices {i} and {} coincide", i + 1)));
            }
            if segment_distance_to_origin(w[0], w[1]) == 0.0 {
                return Err(FieldError::Path(format!("segment {i} passes through the origin")));
            }
        }
        Ok(PolylinePath { vertices })
    }

    pub fn segment(a: Complex64, b: Complex64) -> Result<Self, FieldError> {
        Self::new(vec![a, b])
    }

    /// Closed loop through `vertices` (the first vertex is repeated at the end).
    pub fn closed(mut vertices: Vec<Complex64>) -> Result<Self, FieldError> {
        if let Some(&first) = vertices.first() {
            vertices.push(first);
        }
        Self::new(vertices)
    }

    /// Counterclockwise axis-aligned square loop of half side `h`, starting at `h`.
    pub fn square_loop(h: f64) -> Result<Self, FieldError> {
        let c = |re, im| Complex64::new(re, im);
        Self::new(vec![c(h, 0.0), c(h, h), c(-h, h), c(-h, -h), c(h, -h), c(h, 0.0)])
    }

    /// Counterclockwise inscribed regular `n`-gon loop of circumradius `r`.
    pub fn circle_loop(r: f64, n: usize) -> Result<Self, FieldError> {
        let pts = (0..n).map(|k| Complex64::from_polar(r, 2.0 * PI * k as f64 / n as f64)).collect();
        Self::closed(pts)
    }

    /// Route from `from` to `to` avoiding the origin: vertices interpolate
    /// modulus geometrically and argument linearly (short way round), with
    /// steps of at most π/8 in argument. Degenerates to a straight segment
    /// when the arguments agree.
    pub fn route(from: Complex64, to: Complex64) -> Result<Self, FieldError> {
        if from == Complex64::new(0.0, 0.0) || to == Complex64::new(0.0, 0.0) {
            return Err(FieldError::Path("route endpoint at the origin".into()));
        }
        if from == to {
            return Err(FieldError::Path("route endpoints coincide".into()));
        }
        let (r0, t0) = from.to_polar();
        let (r1, t1) = to.to_polar();
        let mut dt = t1 - t0;
        while dt > PI {
            dt -= 2.0 * PI;
        }
        while dt <= -PI {
            dt += 2.0 * PI;
        }
        if segment_distance_to_origin(from, to) > 0.5 * r0.min(r1) {
            return Self::segment(from, to);
        }
        let steps = ((dt.abs() / (PI / 8.0)).ceil() as usize).max(1);
        let mut v = vec![from];
        for i in 1..steps {
            let s = i as f64 / steps as f64;
            v.push(Complex64::from_polar(r0.powf(1.0 - s) * r1.powf(s), t0 + s * dt));
        }
        v.push(to);
        Self::new(v)
    }

    pub fn vertices(&self) -> &[Complex64] {
        &self.vertices
    }

    pub fn start(&self) -> Complex64 {
        self.vertices[0]
    }

    pub fn end(&self) -> Complex64 {
        *self.vertices.last().unwrap()
    }

    pub fn segments(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn is_closed(&self) -> bool {
        self.start() == self.end()
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        PolylinePath { vertices: v }
    }

    /// Joins `self` and `other`; `other` must start where `self` ends.
    pub fn concat(&self, other: &PolylinePath) -> Result<Self, FieldError> {
        if self.end() != other.start() {
            return Err(FieldError::Path("paths do not join".into()));
        }
        let mut v = self.vertices.clone();
        v.extend_from_slice(&other.vertices[1..]);
        Self::new(v)
    }

    /// Winding number of a closed path about the origin.
    pub fn winding_number(&self) -> Option<i64> {
        if !self.is_closed() {
            return None;
        }
        let total: f64 = self.segments().map(|(a, b)| (b / a).arg()).sum();
        Some((total / (2.0 * PI)).round() as i64)
    }
}
