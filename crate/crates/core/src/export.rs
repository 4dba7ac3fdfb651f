//! Writers for meshes, distance fields, labyrinth geometry and JSON reports.
//! Output is a pure function of its inputs, so identical runs produce
//! identical bytes.

use std::io::{self, Write};

use serde::Serialize;

use crate::config::RunConfig;
use crate::labyrinth::{Labyrinth, Side};
use crate::metric::{immerse_nodes, DistanceField, MetricGraph};
use crate::weierstrass::WeierstrassData;

/// Bumped whenever the report layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Metric(#[from] crate::metric::MetricError),
}

type EResult<T> = Result<T, ExportError>;

/// Mesh of `X(T)`: `#` header lines, then `v x y z` per node and `f a b c`
/// per triangle with 1-based indices.
pub fn export_mesh<W: Write>(
    out: &mut W,
    data: &WeierstrassData,
    graph: &MetricGraph,
    header: &[(&str, String)],
    tol: f64,
) -> EResult<()> {
    let points = immerse_nodes(graph, data, tol)?;
    writeln!(out, "# minimal-annulus mesh")?;
    for (k, v) in header {
        writeln!(out, "# {k}: {v}")?;
    }
    writeln!(out, "# vertices: {}", points.len())?;
    for p in &points {
        writeln!(out, "v {:.15e} {:.15e} {:.15e}", p.x, p.y, p.z)?;
    }
    for [a, b, c] in graph.triangles() {
        writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1)?;
    }
    Ok(())
}

/// `node,re,im,lambda,distance` rows.
pub fn export_field<W: Write>(out: &mut W, graph: &MetricGraph, field: &DistanceField) -> EResult<()> {
    writeln!(out, "node,re,im,lambda,distance")?;
    for (i, (z, l)) in graph.nodes().iter().zip(graph.lambda()).enumerate() {
        writeln!(out, "{i},{:.15e},{:.15e},{:.15e},{:.15e}", z.re, z.im, l, field.values[i])?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Band {
    polygons: Vec<Vec<[f64; 2]>>,
    segments: Vec<[[f64; 2]; 2]>,
}

#[derive(Serialize)]
struct Geometry {
    schema_version: u32,
    n: usize,
    spacing: f64,
    depth: f64,
    margin: f64,
    delta: f64,
    r1: f64,
    r2: f64,
    r3: f64,
    p: Band,
    q: Band,
}

/// Labyrinth polygons, segments and constants as JSON.
pub fn export_geometry<W: Write>(out: &mut W, lab: &Labyrinth) -> EResult<()> {
    let band = |side| Band {
        polygons: lab.polygons(side).iter().map(|p| p.vertices().iter().map(|z| [z.re, z.im]).collect()).collect(),
        segments: lab.segments(side).iter().map(|(a, b)| [[a.re, a.im], [b.re, b.im]]).collect(),
    };
    let g = Geometry {
        schema_version: SCHEMA_VERSION,
        n: lab.n(),
        spacing: lab.spacing(),
        depth: lab.depth(),
        margin: lab.margin(),
        delta: lab.delta(),
        r1: lab.r1(),
        r2: lab.r2(),
        r3: lab.r3(),
        p: band(Side::P),
        q: band(Side::Q),
    };
    serde_json::to_writer_pretty(&mut *out, &g)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    config_hash: String,
    config: &'a RunConfig,
    passed: bool,
    body: &'a T,
}

/// JSON report with the schema version, the configuration and its hash.
pub fn export_report<W: Write, T: Serialize>(
    out: &mut W,
    kind: &str,
    config: &RunConfig,
    passed: bool,
    body: &T,
) -> EResult<()> {
    let env = Envelope { schema_version: SCHEMA_VERSION, kind, config_hash: config.hash(), config, passed, body };
    serde_json::to_writer_pretty(&mut *out, &env)?;
    writeln!(out)?;
    Ok(())
}
