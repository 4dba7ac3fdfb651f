use minimal_annulus::geometry::{make_polygonal_pair, segment_segment_distance, PolygonSpec, PolygonalPair};
use minimal_annulus::labyrinth::{build_labyrinth, Labyrinth, LabyrinthError, Region, Sheet, Side};
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::OnceLock;

fn octagons(p: f64, q: f64) -> PolygonalPair {
    let spec = |r| PolygonSpec::Regular { sides: 8, circumradius: r, phase: 0.0 };
    make_polygonal_pair(&spec(p), &spec(q)).unwrap()
}

fn default_octagons() -> &'static Labyrinth {
    static LAB: OnceLock<Labyrinth> = OnceLock::new();
    LAB.get_or_init(|| build_labyrinth(&octagons(0.95, 0.45), 16).unwrap())
}

fn wide(n: usize) -> Labyrinth {
    build_labyrinth(&octagons(0.999, 0.361), n).unwrap()
}

#[test]
fn counts_follow_the_construction() {
    let lab = default_octagons();
    for side in Side::BOTH {
        assert_eq!(lab.polygons(side).len(), 513);
        assert_eq!(lab.segments(side).len(), 32);
    }
    assert_eq!(lab.spacing(), 1.0 / 4096.0);
    assert_eq!(lab.depth(), 0.125);
    assert_eq!(lab.margin(), 1.0 / (4.0 * 4096.0));
    assert_eq!(lab.delta(), 1.0 / (8.0 * 4096.0));
}

#[test]
fn n_must_be_a_multiple_of_the_side_counts() {
    let err = build_labyrinth(&octagons(0.95, 0.45), 12).unwrap_err();
    assert!(matches!(err, LabyrinthError::NotMultiple { n: 12, .. }));
}

#[test]
fn band_must_stay_outside_the_middle_circle() {
    let err = build_labyrinth(&octagons(0.95, 0.45), 8).unwrap_err();
    assert!(matches!(err, LabyrinthError::TooSmall { n: 8, .. }));
    wide(8);
}

#[test]
fn nested_polygons_are_strictly_nested() {
    let lab = default_octagons();
    for side in Side::BOTH {
        let polys = lab.polygons(side);
        for w in polys.windows(2) {
            let (outer, inner) = match side {
                Side::P => (&w[0], &w[1]),
                Side::Q => (&w[1], &w[0]),
            };
            assert!(inner.vertices().iter().all(|v| outer.contains(*v)));
            let gap = inner
                .edges()
                .flat_map(|(a, b)| outer.edges().map(move |(c, d)| segment_segment_distance(a, b, c, d)))
                .fold(f64::INFINITY, f64::min);
            assert!((gap - lab.spacing()).abs() < 1e-12, "{gap}");
        }
    }
}

#[test]
fn segment_midpoint_lies_in_its_own_set() {
    let lab = default_octagons();
    let (a, b) = lab.segments(Side::P)[1];
    assert_eq!(lab.classify((a + b) * 0.5), Region::Omega { index: 2, sheet: Sheet::One });
    let (a, b) = lab.segments(Side::Q)[20];
    assert_eq!(lab.classify((a + b) * 0.5), Region::Omega { index: 21, sheet: Sheet::Two });
}

#[test]
fn base_point_is_in_the_corridor() {
    let lab = default_octagons();
    assert_eq!(lab.classify(Complex64::new(2.0 / 3.0, 0.0)), Region::Corridor);
    assert_eq!(lab.classify(Complex64::new(0.2, 0.0)), Region::Outside);
    assert_eq!(lab.classify(Complex64::new(0.99, 0.0)), Region::Outside);
}

#[test]
fn cell_centres_are_in_omega() {
    let lab = default_octagons();
    for (index, sheet) in [(1, Sheet::One), (7, Sheet::Two), (20, Sheet::One), (32, Sheet::Two)] {
        let samples = lab.omega_samples(index, sheet, 0.01);
        assert!(samples.len() > 256);
        for z in samples {
            assert_eq!(lab.classify(z), Region::Omega { index, sheet }, "{z}");
        }
    }
}

#[test]
fn varpi_rim_surrounds_cells() {
    let lab = default_octagons();
    let h = lab.spacing();
    // A point in strip 0 at the cell's edge level: inside ϖ, outside ω.
    let (e, t) = lab.division(Side::P, 0);
    let z = lab.band_point(Side::P, e, t + 0.01, 0.2 * h);
    assert_eq!(lab.classify(z), Region::Varpi { index: 1, sheet: Sheet::One });
    let z = lab.band_point(Side::P, e, t + 0.01, 0.1 * h);
    assert_eq!(lab.classify(z), Region::Corridor);
}

fn diameter(points: &[Complex64]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|z| (z.re, z.im)).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    let mut d: f64 = 0.0;
    for a in &hull {
        for b in &hull {
            d = d.max((a.0 - b.0).hypot(a.1 - b.1));
        }
    }
    d
}

#[test]
fn diameters_are_bounded_by_r3_over_n() {
    let lab = default_octagons();
    let bound = lab.r3() / 16.0;
    assert!(bound.is_finite() && bound > 0.0);
    for index in 1..=32 {
        for sheet in [Sheet::One, Sheet::Two] {
            let diam = diameter(&lab.omega_samples(index, sheet, 0.01));
            assert!(diam + 2.0 * lab.delta() <= bound, "{index} {diam} {bound}");
        }
    }
}

#[test]
fn fattened_sets_are_disjoint() {
    let lab = wide(8);
    let delta = lab.delta();
    assert!(delta > 0.0);
    for side in Side::BOTH {
        let segs = lab.segments(side);
        for (i, &(a, b)) in segs.iter().enumerate() {
            for &(c, d) in &segs[i + 1..] {
                assert!(segment_segment_distance(a, b, c, d) >= 2.0 * delta);
            }
        }
    }
    let sets: Vec<Vec<Complex64>> =
        (1..=16).flat_map(|i| [Sheet::One, Sheet::Two].map(|s| lab.omega_samples(i, s, 0.02))).collect();
    let bbox = |s: &[Complex64]| {
        s.iter().fold([f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY], |b, z| {
            [b[0].min(z.re), b[1].min(z.im), b[2].max(z.re), b[3].max(z.im)]
        })
    };
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            let (ba, bb) = (bbox(a), bbox(b));
            let gap = (ba[0] - bb[2]).max(bb[0] - ba[2]).max(ba[1] - bb[3]).max(bb[1] - ba[3]);
            if gap > 2.0 * delta {
                continue;
            }
            let d = a.iter().flat_map(|p| b.iter().map(move |q| (p - q).norm())).fold(f64::INFINITY, f64::min);
            assert!(d >= 2.0 * delta * (1.0 - 1e-9), "{d}");
        }
    }
}

#[test]
fn constants_do_not_drift_with_n() {
    let labs: Vec<_> = [8, 16, 24].map(wide).into_iter().collect();
    for pick in [Labyrinth::r1, Labyrinth::r2, Labyrinth::r3] {
        let values: Vec<f64> = labs.iter().map(pick).collect();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(0.0, f64::max);
        assert!(hi <= 1.2 * lo, "{values:?}");
    }
}

#[test]
fn separation_beats_the_reference_bound() {
    let r8 = wide(8).verify_separation();
    let r16 = wide(16).verify_separation();
    for r in [&r8, &r16] {
        assert_eq!(r.per_ring_p.len(), r.n * r.n);
        assert!(r.certified(1.0) > r.reference(1.0), "{} {}", r.certified(1.0), r.reference(1.0));
        assert!((r.certified(2.5) - 2.5 * r.total).abs() < 1e-12);
    }
    // The Q band is twice as deep at N = 8, so its cuts sit further apart.
    assert!(r16.total >= 1.7 * r8.total, "{} {}", r8.total, r16.total);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tags_are_mirrored(r in 0.35f64..0.96, t in 0.0f64..std::f64::consts::TAU) {
        let lab = default_octagons();
        let z = Complex64::from_polar(r, t);
        prop_assert_eq!(lab.classify(-z), lab.classify(z).mirror());
        prop_assert_eq!(lab.distance_to_walls(-z), lab.distance_to_walls(z));
    }

    #[test]
    fn band_tags_are_mirrored(side in 0usize..2, u in 0.0f64..8.0, s in 0.0f64..1.0) {
        let lab = default_octagons();
        let side = Side::BOTH[side];
        let edge = (u.floor() as usize).min(7);
        let z = lab.band_point(side, edge, u - edge as f64, s * lab.depth());
        prop_assert_eq!(lab.classify(-z), lab.classify(z).mirror());
        let loc = lab.locate(side, z);
        prop_assert!((loc.zeta - s * lab.depth()).abs() < 1e-12);
    }
}
