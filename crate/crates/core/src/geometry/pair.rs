use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Polygon};

/// Symmetry tolerance for vertex matching.
const SYMMETRY_TOL: f64 = 1e-12;

/// Description of one polygon of a pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolygonSpec {
    Regular {
        sides: usize,
        circumradius: f64,
        #[serde(default)]
        phase: f64,
    },
    Vertices {
        points: Vec<[f64; 2]>,
    },
}

impl PolygonSpec {
    pub fn build(&self) -> Result<Polygon, GeometryError> {
        match self {
            PolygonSpec::Regular { sides, circumradius, phase } => Polygon::regular(*sides, *circumradius, *phase),
            PolygonSpec::Vertices { points } => {
                Polygon::new(points.iter().map(|p| Complex64::new(p[0], p[1])).collect())
            }
        }
    }
}

/// Curves `(P, Q)` with `D̄_{1/3} ⊂ Int Q`, `cl Int Q ⊂ D_{2/3}`,
/// `D̄_{2/3} ⊂ Int P` and `cl Int P ⊂ D_1`, both symmetric under `z ↦ −z`.
/// The working annulus is `T = Int P ∖ cl Int Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonalPair {
    p: Polygon,
    q: Polygon,
}

impl PolygonalPair {
    pub fn new(p: Polygon, q: Polygon) -> Result<Self, GeometryError> {
        p.check_symmetric(SYMMETRY_TOL)?;
        q.check_symmetric(SYMMETRY_TOL)?;
        let origin = Complex64::new(0.0, 0.0);
        let disk_inside = |poly: &Polygon, r: f64, clause: &'static str| {
            let d = poly.boundary_distance(origin);
            if poly.contains(origin) && d > r {
                Ok(())
            } else {
                Err(GeometryError::Containment {
                    clause,
                    detail: format!("distance from 0 to the polygon is {d:.6} (needs > {r:.6})"),
                })
            }
        };
        let inside_disk = |poly: &Polygon, r: f64, clause: &'static str| {
            let m = poly.max_vertex_norm();
            if m < r {
                Ok(())
            } else {
                Err(GeometryError::Containment {
                    clause,
                    detail: format!("largest vertex modulus is {m:.6} (needs < {r:.6})"),
                })
            }
        };
        disk_inside(&q, 1.0 / 3.0, "closed D(1/3) inside Int Q")?;
        inside_disk(&q, 2.0 / 3.0, "closure of Int Q inside D(2/3)")?;
        disk_inside(&p, 2.0 / 3.0, "closed D(2/3) inside Int P")?;
        inside_disk(&p, 1.0, "closure of Int P inside D(1)")?;
        Ok(PolygonalPair { p, q })
    }

    pub fn p(&self) -> &Polygon {
        &self.p
    }

    pub fn q(&self) -> &Polygon {
        &self.q
    }

    /// `z ∈ T`.
    pub fn contains(&self, z: Complex64) -> bool {
        self.p.contains(z) && !self.q.contains(z) && self.q.boundary_distance(z) > 0.0
    }

    /// `z ∈ T ∪ ∂T`.
    pub fn contains_closed(&self, z: Complex64) -> bool {
        self.contains(z) || self.p.boundary_distance(z) == 0.0 || self.q.boundary_distance(z) == 0.0
    }

    /// `T' ⊂ I(T)`: `P'` inside `Int P` and `Q'` outside `cl Int Q`, checked on
    /// vertices and on the polygons' mutual boundary distance.
    pub fn encloses(&self, inner: &PolygonalPair) -> bool {
        let p_ok = inner.p.vertices().iter().all(|v| self.p.contains(*v))
            && self.p.vertices().iter().all(|v| !inner.p.contains(*v));
        let q_ok = self.q.vertices().iter().all(|v| inner.q.contains(*v))
            && inner.q.vertices().iter().all(|v| !self.q.contains(*v) && self.q.boundary_distance(*v) > 0.0);
        p_ok && q_ok && boundaries_disjoint(&self.p, &inner.p) && boundaries_disjoint(&self.q, &inner.q)
    }
}

fn boundaries_disjoint(a: &Polygon, b: &Polygon) -> bool {
    a.edges().all(|(p, q)| b.edges().all(|(r, s)| !super::segments_intersect(p, q, r, s)))
}

/// Builds and validates a pair, naming the violated clause on failure.
pub fn make_polygonal_pair(p: &PolygonSpec, q: &PolygonSpec) -> Result<PolygonalPair, GeometryError> {
    PolygonalPair::new(p.build()?, q.build()?)
}

/// `(P^ξ, Q^ξ)`: `P` offset inward and `Q` outward by `ξ`.
pub fn offset_pair(pair: &PolygonalPair, xi: f64) -> Result<PolygonalPair, GeometryError> {
    if !(xi > 0.0) {
        return Err(GeometryError::NonPositiveOffset(xi));
    }
    let p = pair.p.offset(xi)?;
    let q = pair.q.offset(-xi)?;
    let too_large = |detail: String| GeometryError::OffsetTooLarge { xi, detail };
    let out = PolygonalPair::new(p, q).map_err(|e| too_large(e.to_string()))?;
    if !out.q.vertices().iter().all(|v| out.p.contains(*v)) || !boundaries_disjoint(&out.p, &out.q) {
        return Err(too_large("offset curves meet".into()));
    }
    Ok(out)
}
