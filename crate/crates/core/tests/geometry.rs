use std::f64::consts::PI;

use minimal_annulus::complex_field::segment_distance;
use minimal_annulus::geometry::{make_polygonal_pair, offset_pair, GeometryError, Polygon, PolygonSpec, PolygonalPair};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn octagon(r: f64) -> PolygonSpec {
    PolygonSpec::Regular { sides: 8, circumradius: r, phase: 0.0 }
}

fn line_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    ((p - a).re * d.im - (p - a).im * d.re).abs() / d.norm()
}

#[test]
fn octagon_pair_is_valid() {
    let pair = make_polygonal_pair(&octagon(0.95), &octagon(0.45)).unwrap();
    let inradius = pair.p().boundary_distance(c(0.0, 0.0));
    assert!((inradius - 0.95 * (PI / 8.0).cos()).abs() < 1e-12);
    assert!((pair.q().boundary_distance(c(0.0, 0.0)) - 0.45 * (PI / 8.0).cos()).abs() < 1e-12);
    assert!(pair.contains(c(0.7, 0.0)));
    assert!(!pair.contains(c(0.3, 0.0)));
    assert!(!pair.contains(c(0.96, 0.0)));
}

#[test]
fn small_q_violates_inner_disk() {
    let err = make_polygonal_pair(&octagon(0.95), &octagon(0.30)).unwrap_err();
    match err {
        GeometryError::Containment { clause, .. } => assert!(clause.contains("D(1/3)")),
        other => panic!("{other:?}"),
    }
    let err = make_polygonal_pair(&octagon(1.05), &octagon(0.45)).unwrap_err();
    assert!(matches!(err, GeometryError::Containment { clause, .. } if clause.contains("D(1)")));
}

#[test]
fn asymmetric_polygon_rejected() {
    let p = PolygonSpec::Vertices { points: vec![[0.9, 0.0], [0.0, 0.9], [-0.9, 0.0], [0.0, -0.95]] };
    assert!(matches!(make_polygonal_pair(&p, &octagon(0.45)), Err(GeometryError::Asymmetric(..))));
}

#[test]
fn clockwise_input_is_reoriented() {
    let p = Polygon::new(vec![c(1.0, 0.0), c(0.0, -1.0), c(-1.0, 0.0), c(0.0, 1.0)]).unwrap();
    assert!(p.signed_area() > 0.0);
    p.check_symmetric(1e-15).unwrap();
}

#[test]
fn self_intersection_detected() {
    let bow = vec![c(0.0, 0.0), c(2.0, 2.0), c(2.0, 0.0), c(0.0, 1.0)];
    assert!(matches!(Polygon::new(bow), Err(GeometryError::NotSimple(..))));
}

#[test]
fn regular_offset_matches_inradius_oracle() {
    let r = 0.95;
    let xi = 0.05;
    let p = Polygon::regular(8, r, 0.0).unwrap();
    let inner = p.offset(xi).unwrap();
    let expected = r - xi / (PI / 8.0).cos();
    for v in inner.vertices() {
        assert!((v.norm() - expected).abs() < 1e-14);
    }
    let outer = p.offset(-xi).unwrap();
    for v in outer.vertices() {
        assert!((v.norm() - (r + xi / (PI / 8.0).cos())).abs() < 1e-14);
    }
}

#[test]
fn offset_edges_are_parallel_at_distance_xi() {
    let pair = make_polygonal_pair(&octagon(0.95), &octagon(0.45)).unwrap();
    let xi = 0.03;
    let off = offset_pair(&pair, xi).unwrap();
    for (orig, img) in [(pair.p(), off.p()), (pair.q(), off.q())] {
        for ((a, b), (p, q)) in orig.edges().zip(img.edges()) {
            assert!((line_distance(p, a, b) - xi).abs() < 1e-12);
            assert!((line_distance(q, a, b) - xi).abs() < 1e-12);
        }
    }
    off.p().check_symmetric(1e-15).unwrap();
    off.q().check_symmetric(1e-15).unwrap();
    for (v, w) in off.p().vertices().iter().zip(off.p().vertices().iter().skip(4)) {
        assert_eq!(*v, -*w);
    }
    assert!(pair.encloses(&off));
}

#[test]
fn offset_rejects_bad_distances() {
    let pair = make_polygonal_pair(&octagon(0.95), &octagon(0.45)).unwrap();
    assert_eq!(offset_pair(&pair, 0.0).unwrap_err(), GeometryError::NonPositiveOffset(0.0));
    assert!(matches!(offset_pair(&pair, 0.3), Err(GeometryError::OffsetTooLarge { .. })));
    let tri = Polygon::regular(3, 1.0, 0.0).unwrap();
    assert!(matches!(tri.offset(0.6), Err(GeometryError::OffsetTooLarge { .. })));
}

#[test]
fn sharp_corner_is_bevelled() {
    let spike = Polygon::new(vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.1), c(0.2, 0.1), c(0.0, 2.0)]).unwrap();
    let v = spike.vertices().len();
    let off = spike.offset(-0.01).unwrap();
    assert!(off.vertices().len() > v);
}

#[test]
fn nonconvex_offset_keeps_edge_distance() {
    let star: Vec<Complex64> =
        (0..12).map(|k| Complex64::from_polar(if k % 2 == 0 { 0.9 } else { 0.75 }, PI * k as f64 / 6.0)).collect();
    let p = Polygon::new(star).unwrap();
    assert!(!p.is_convex());
    let off = p.offset(0.01).unwrap();
    for ((a, b), (q, r)) in p.edges().zip(off.edges()) {
        assert!((line_distance(q, a, b) - 0.01).abs() < 1e-12);
        assert!((line_distance(r, a, b) - 0.01).abs() < 1e-12);
    }
}

#[test]
fn pair_with_sixteen_gons() {
    let p = PolygonSpec::Regular { sides: 16, circumradius: 0.985, phase: 0.0 };
    let q = PolygonSpec::Regular { sides: 16, circumradius: 0.37, phase: 0.0 };
    let pair = make_polygonal_pair(&p, &q).unwrap();
    assert!(pair.p().is_convex());
    let _: PolygonalPair = pair;
}

#[test]
fn point_at_walks_the_boundary() {
    let p = Polygon::regular(4, 1.0, 0.0).unwrap();
    assert_eq!(p.point_at(0.0), p.vertex(0));
    assert!((p.point_at(1.5) - (p.vertex(1) + p.vertex(2)) * 0.5).norm() < 1e-15);
    let samples = p.sample_boundary(0.1);
    for s in samples {
        let d = p.edges().map(|(a, b)| segment_distance(s, a, b)).fold(f64::INFINITY, f64::min);
        assert!(d < 1e-15);
    }
}

proptest! {
    #[test]
    fn offset_commutes_with_reflection(sides in 2usize..10, r in 0.5f64..0.99, xi in 0.001f64..0.05,
                                       phase in 0.0f64..1.0) {
        let p = Polygon::regular(2 * sides, r, phase).unwrap();
        let off = p.offset(xi).unwrap();
        let n = off.len();
        for i in 0..n {
            prop_assert_eq!(off.vertex(i), -off.vertex(i + n / 2));
        }
    }

    #[test]
    fn contains_agrees_with_disk_for_regular(r in 0.5f64..0.99, t in 0.0f64..std::f64::consts::TAU, s in 0.0f64..1.2) {
        let p = Polygon::regular(16, r, 0.0).unwrap();
        let z = Complex64::from_polar(s, t);
        if s < r * (PI / 16.0).cos() - 1e-12 {
            prop_assert!(p.contains(z));
        }
        if s > r + 1e-12 {
            prop_assert!(!p.contains(z));
        }
    }
}
