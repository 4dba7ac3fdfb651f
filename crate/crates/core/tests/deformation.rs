use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::sync::OnceLock;

use minimal_annulus::complex_field::{LaurentForm, LaurentPolynomial};
use minimal_annulus::deformation::{
    apply_multiplier, check_properties, deform_step, extract_pair, initial_tau, select_frame, thin, Check, Constants,
    DeformationError, Frame, LemmaParams, Report, StepConfig, StepSamples,
};
use minimal_annulus::geometry::{make_polygonal_pair, PolygonSpec, PolygonalPair};
use minimal_annulus::labyrinth::{Labyrinth, Region};
use minimal_annulus::metric::{build_mesh, circle_distance_field, MeshDomain, MIDDLE_RADIUS};
use minimal_annulus::runge::RungeMultiplier;
use minimal_annulus::weierstrass::{conformality_residual, rotate, Mat3, Phi, Vec3, WeierstrassData, I};
use num_complex::Complex64;
use proptest::prelude::*;

const TOL: f64 = 1e-10;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn octagons(p: f64, q: f64) -> PolygonalPair {
    let spec = |r| PolygonSpec::Regular { sides: 8, circumradius: r, phase: 0.0 };
    make_polygonal_pair(&spec(p), &spec(q)).unwrap()
}

fn x1() -> WeierstrassData {
    WeierstrassData::from_fg(&LaurentPolynomial::constant(5.0), &LaurentPolynomial::zero()).with_translation(Vec3::new(
        5.0 / 3.0,
        0.0,
        0.0,
    ))
}

struct Fixture {
    lab: Labyrinth,
    fit: StepSamples,
    checks: StepSamples,
    constants: Constants,
    frame: Frame,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let lab = Labyrinth::build(&octagons(0.999, 0.361), 8).unwrap();
        let fit = StepSamples::build(&lab, 1, 0.01);
        let checks = StepSamples::build(&lab, 1, 0.0025);
        let constants = check_properties(&x1(), 8, 1, &fit.outside, &fit, TOL).unwrap();
        let frame = select_frame(&x1(), 8, &fit, &constants, 2.0 / constants.r6, TOL).unwrap();
        Fixture { lab, fit, checks, constants, frame }
    })
}

fn diameter(points: &[Complex64]) -> f64 {
    let mut d: f64 = 0.0;
    for a in points {
        for b in points {
            d = d.max((a - b).norm());
        }
    }
    d
}

/// `φ` from `(f, g)` in frame coordinates, rotated back to the world.
fn phi_from_frame_fg(r: &Mat3, f: Complex64, g: Complex64) -> Phi {
    let local = [f * (1.0 - g * g) * 0.5, I * f * (1.0 + g * g) * 0.5, f * g];
    rotate(&r.transpose(), &local)
}

fn rotation(axis: Vec3, angle: f64) -> Mat3 {
    *nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).matrix()
}

#[test]
fn checks_measure_relative_margins() {
    let a = Check::at_most("a", 0.9, 1.0);
    assert!((a.margin - 0.1).abs() < 1e-15 && a.pass);
    assert!(!Check::at_most("b", 0.97, 1.0).pass);
    assert!(Check::at_least("c", 2.1, 2.0).pass);
    assert!(!Check::at_least("d", 2.05, 2.0).pass);
    assert!(Check::within("e", 0.0, 1e-12).pass);
    assert!(!Check::holds("f", false).pass);
    let r = Report { checks: vec![a, Check::holds("f", false)] };
    assert!(!r.passed());
    assert_eq!(r.failures().count(), 1);
    assert_eq!(r.get("f").unwrap().name, "f");
}

#[test]
fn samples_are_symmetric_and_correctly_routed() {
    let fx = fixture();
    let all: Vec<Complex64> = fx
        .fit
        .outside
        .iter()
        .chain(fx.fit.varpi.iter().flatten())
        .chain(fx.fit.omega.iter().flatten())
        .copied()
        .collect();
    let keys: HashSet<(u64, u64)> = all.iter().map(|z| ((z.re + 0.0).to_bits(), (z.im + 0.0).to_bits())).collect();
    for z in &all {
        let m = -z;
        assert!(keys.contains(&((m.re + 0.0).to_bits(), (m.im + 0.0).to_bits())), "{z}");
    }
    for z in fx.fit.omega[0].iter().step_by(37) {
        assert!(matches!(fx.lab.classify(*z), Region::Omega { index: 1, .. }));
    }
    for z in fx.fit.varpi[1].iter().step_by(37) {
        assert!(matches!(fx.lab.classify(*z), Region::Varpi { index: 1, .. }));
    }
    // every sheet-two point is the negative of a sheet-one point
    assert_eq!(fx.fit.omega[0].len(), fx.fit.omega[1].len());
    assert!(fx.checks.omega[0].len() > 2 * fx.fit.omega[0].len());
}

#[test]
fn constants_of_the_flat_seed() {
    let fx = fixture();
    let k = &fx.constants;
    let norm = 5.0 / SQRT_2;
    assert!((k.r5 - norm).abs() < 1e-12 && (k.r6 - norm).abs() < 1e-12);
    assert!(k.r8 < 1e-12, "{}", k.r8);
    assert!(k.r9 < 1e-12, "{}", k.r9);
    // X₁ scales the plane by 5/2
    let expected = (0..2).map(|i| 2.5 * diameter(&thin(&fx.fit.sheet(i), 48))).fold(0.0, f64::max) * 8.0;
    assert!((k.r7 - expected).abs() < 1e-8 * expected, "{} {expected}", k.r7);
}

#[test]
fn frame_is_a_rotation_avoiding_the_gauss_image() {
    let fx = fixture();
    let (defect, det) = fx.frame.orthonormality_defect();
    assert!(defect < 1e-14 && (det - 1.0).abs() < 1e-14);
    // X₁ is horizontal: its normal is vertical and e₃ is horizontal
    assert!(fx.frame.e3[2].abs() < 1e-14);
    assert!((fx.frame.d2_angle - FRAC_PI_2).abs() < 1e-12);
    assert!((fx.frame.nu - 2.0 / fx.constants.r6).abs() < 1e-15);
    assert!(fx.frame.d1_angle <= fx.frame.r10 / 8f64.sqrt());
}

#[test]
fn frame_selection_requires_large_nu() {
    let fx = fixture();
    let err = select_frame(&x1(), 8, &fx.fit, &fx.constants, 0.5 / fx.constants.r6, TOL).unwrap_err();
    assert!(matches!(err, DeformationError::Precondition(_)));
}

#[test]
fn frame_f_of_the_seed_has_modulus_five_halves() {
    let fx = fixture();
    // |f| in a frame with horizontal e₃ is 5/2 for X₁, so τ₀ = N⁴ here
    let tau = initial_tau(&x1(), 8, &fx.frame, &fx.fit.omega_all()).unwrap();
    assert_eq!(tau, 4096.0);
    let r = fx.frame.matrix();
    let p = rotate(&r, &x1().phi(c(0.8, 0.1)).unwrap());
    assert!(((p[0] - I * p[1]).norm() - 2.5).abs() < 1e-12);
}

#[test]
fn identity_multiplier_keeps_the_surface_and_misses_the_blow_up() {
    let fx = fixture();
    let h = RungeMultiplier::identity(4096.0);
    let step = apply_multiplier(&x1(), 8, 1, &fx.frame, &h, &fx.checks, TOL).unwrap();
    let r = &step.report;
    for name in ["P1 z2-type", "P1 conformality", "P2", "P5", "P6.2", "P6.2 immersion"] {
        assert!(r.get(name).unwrap().pass, "{name}: {:?}", r.get(name));
    }
    assert!(!r.get("P3").unwrap().pass);
    assert!(r.get("P2").unwrap().value < 1e-14);
    assert!(step.displacement < 1e-12);
}

#[test]
fn deformation_matches_the_fg_formula_and_keeps_the_third_axis() {
    let fx = fixture();
    let r = fx.frame.matrix();
    let mu = LaurentPolynomial::from_terms([(0, c(0.2, -0.1)), (1, c(0.3, 0.05)), (-1, c(0.01, 0.02))]);
    let out = x1().deformed(r, LaurentForm::Monomial(mu.clone()));
    for z in [c(0.8, 0.1), c(-0.5, 0.6), c(0.0, -0.9), c(0.41, 0.3)] {
        let before = rotate(&r, &x1().phi(z).unwrap());
        let f = before[0] - I * before[1];
        let g = before[2] / f;
        let h = mu.eval(z * z).unwrap().exp();
        let oracle = phi_from_frame_fg(&r, f * h, g / h);
        let got = out.phi(z).unwrap();
        for k in 0..3 {
            assert!((got[k] - oracle[k]).norm() < 1e-12 * (1.0 + oracle[k].norm()), "{z} {k}");
        }
        assert!((rotate(&r, &got)[2] - before[2]).norm() < 1e-12);
        assert!(conformality_residual(&got) < 1e-12);
    }
    assert!(
        out.immerse(out.base_point(), TOL).unwrap().metric_distance(&x1().immerse(out.base_point(), TOL).unwrap())
            < 1e-15
    );
}

#[test]
fn constants_are_rotation_invariant() {
    let fx = fixture();
    let r = rotation(Vec3::new(0.3, -1.0, 0.7), 1.1);
    let turned = x1().in_frame(&r);
    let k = check_properties(&turned, 8, 1, &fx.fit.outside, &fx.fit, TOL).unwrap();
    let base = &fx.constants;
    for (a, b) in [(k.r5, base.r5), (k.r6, base.r6), (k.r7, base.r7)] {
        assert!((a - b).abs() < 1e-9 * b, "{a} {b}");
    }
    assert!(k.r8 < 1e-9 && k.r9 < 1e-9);
}

#[test]
fn step_at_small_n_fails_runge_certification() {
    let fx = fixture();
    let cfg = StepConfig { tau_doublings: 2, ..StepConfig::default() };
    match deform_step(&x1(), 8, 1, &fx.frame, &fx.fit, &fx.checks, &cfg) {
        Err(DeformationError::Step(f)) => {
            assert_eq!(f.binding, "Runge certification");
            assert_eq!(f.tau0, 4096.0);
            assert_eq!(f.attempts.len(), 3);
            for (k, a) in f.attempts.iter().enumerate() {
                assert_eq!(a.tau, 4096.0 * 2f64.powi(k as i32));
                assert!(!a.certified);
                assert!(a.sup_one.max(a.sup_tau) >= 1.0 / a.tau);
            }
        }
        other => panic!("{:?}", other.map(|s| s.record())),
    }
}

fn flat_mesh() -> (minimal_annulus::metric::MetricGraph, PolygonalPair) {
    let pair = octagons(0.95, 0.45);
    let g = build_mesh(MeshDomain::Pair(&pair), 0.01).unwrap().with_factor(|_| 2.5).unwrap();
    (g, pair)
}

#[test]
fn extracted_pair_of_a_flat_field_is_a_pair_of_circles() {
    let (g, pair) = flat_mesh();
    let field = circle_distance_field(&g).unwrap();
    let tilde = extract_pair(&g, &field, 0.4, 0.5).unwrap();
    let offset = 0.45 / 2.5;
    for (poly, radius) in [(tilde.p(), MIDDLE_RADIUS + offset), (tilde.q(), MIDDLE_RADIUS - offset)] {
        let worst = poly.vertices().iter().map(|v| (v.norm() - radius).abs()).fold(0.0, f64::max);
        assert!(worst < 0.02, "{worst}");
        for v in poly.vertices() {
            assert!(poly.vertices().contains(&-v), "{v}");
        }
    }
    assert!(pair.encloses(&tilde));
}

#[test]
fn extraction_rejects_levels_the_field_never_reaches() {
    let (g, _) = flat_mesh();
    let field = circle_distance_field(&g).unwrap();
    assert!(matches!(extract_pair(&g, &field, 10.0, 11.0), Err(DeformationError::Extraction(_))));
    assert!(matches!(extract_pair(&g, &field, 0.5, 0.4), Err(DeformationError::Precondition(_))));
}

#[test]
fn lemma_band_and_radius() {
    let p = LemmaParams { rho: 1.0, r: 3.0, k: 1.0 / 3.0, k_prime: 0.1, s: 0.5, epsilon: 0.25, xi: 0.01 };
    let (lo, hi) = p.band();
    assert!((hi - 1.5).abs() < 1e-15 && (lo - 1.35).abs() < 1e-15);
    assert!((p.big_r() - (9.0f64 + 1.0).sqrt() - 0.25).abs() < 1e-15);
}

proptest! {
    #[test]
    fn completion_is_a_right_handed_frame(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
        let v = Vec3::new(x, y, z);
        prop_assume!(v.norm() > 1e-3);
        let (e1, e2, e3) = Frame::complete(v);
        let m = Mat3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()]);
        prop_assert!((m * m.transpose() - Mat3::identity()).abs().max() < 1e-14);
        prop_assert!((m.determinant() - 1.0).abs() < 1e-14);
        prop_assert!((e3 - v.normalize()).norm() < 1e-15);
    }
}
