use std::sync::OnceLock;

use minimal_annulus::complex_field::LaurentPolynomial;
use minimal_annulus::config::RunConfig;
use minimal_annulus::deformation::{boundary_distances, Report};
use minimal_annulus::geometry::{offset_pair, PolygonalPair};
use minimal_annulus::sequence::{
    alpha, alpha_product, factor_ratio, init_chi1, next_k, report_limit, rho, schedule_params, seed_immersion,
    ChiState, Schedule, SequenceConfig,
};
use minimal_annulus::weierstrass::{symmetry_value, WeierstrassData};
use num_complex::Complex64;
use proptest::prelude::*;

fn default_pair() -> PolygonalPair {
    RunConfig::default().build_pair().unwrap()
}

fn first() -> &'static (ChiState, Schedule) {
    static S: OnceLock<(ChiState, Schedule)> = OnceLock::new();
    S.get_or_init(|| {
        let cfg = SequenceConfig::default();
        let chi1 = init_chi1(&default_pair(), &cfg).unwrap();
        let schedule = schedule_params(std::slice::from_ref(&chi1), &cfg).unwrap();
        (chi1, schedule)
    })
}

#[test]
fn alpha_values() {
    assert!((alpha(1) - 0.824361).abs() < 1e-6);
    assert_eq!(alpha(1), 0.5f64.exp() / 2.0);
    assert_eq!(alpha(3), (-0.125f64).exp());
    let mut product = 1.0;
    for n in 1..=20 {
        product *= alpha(n);
        assert!(alpha(n) > 0.0 && alpha(n) < 1.0);
    }
    assert!((product - 0.5 * (0.5f64).powi(20).exp()).abs() < 1e-14);
    assert!((alpha_product(20) - product).abs() < 1e-14);
    assert!((alpha_product(60) - 0.5).abs() < 1e-15);
}

#[test]
fn harmonic_numbers_and_k_schedule() {
    assert_eq!(rho(1), 1.0);
    assert!((rho(4) - 25.0 / 12.0).abs() < 1e-15);
    assert_eq!(next_k(1.0 / 3.0, 1), 1.0 / 6.0);
    let mut k = 1.0 / 3.0;
    let mut proxy = vec![0.5 * (1.0 - k) * rho(1)];
    for n in 1..30 {
        let next = next_k(k, n);
        assert!(next < k && next > 0.0);
        assert!(rho(n + 1) * next < 1.0 / (n + 2) as f64);
        k = next;
        proxy.push(0.5 * (1.0 - k) * rho(n + 1));
    }
    assert!(proxy.windows(2).all(|w| w[1] > w[0]), "{proxy:?}");
    // n = 4: ½(1 − 1/24)·25/12
    assert!((proxy[3] - 0.5 * (23.0 / 24.0) * (25.0 / 12.0)).abs() < 1e-15);
}

#[test]
fn seed_is_the_scaled_plane() {
    let x = seed_immersion();
    for z in [Complex64::new(0.5, 0.2), Complex64::new(-0.8, 0.3)] {
        let phi = x.phi(z).unwrap();
        assert!((phi[0] - Complex64::new(2.5, 0.0)).norm() < 1e-15);
        assert!((phi[1] - Complex64::new(0.0, 2.5)).norm() < 1e-15);
        assert_eq!(phi[2], Complex64::new(0.0, 0.0));
        let p = x.immerse(z, 1e-12).unwrap();
        assert!((p.x - 2.5 * z.re).abs() < 1e-12 && (p.y + 2.5 * z.im).abs() < 1e-12 && p.z == 0.0);
    }
    assert!(symmetry_value(&x, 1e-12).unwrap().norm() < 1e-12);
}

#[test]
fn first_term_certifies() {
    let (chi1, _) = first();
    assert!(chi1.properties.passed(), "{:?}", chi1.properties);
    assert!(chi1.r > 1.0);
    assert_eq!((chi1.epsilon, chi1.k, chi1.rho), (0.5, 1.0 / 3.0, 1.0));
    assert!(chi1.xi > 0.0);
    let inner = offset_pair(&chi1.pair, chi1.xi).unwrap();
    let (lo, hi) = boundary_distances(&chi1.x, &inner, 0.01).unwrap();
    assert!(lo > 2.0 / 3.0 && hi < 1.0);
}

#[test]
fn second_schedule() {
    let (chi1, s) = first();
    assert_eq!(s.k_next, 1.0 / 6.0);
    assert!(s.xi_next < chi1.xi && s.xi_next > 0.0);
    assert!(s.report.passed(), "{:?}", s.report);
    assert_eq!(s.eps_hat.len(), 8);
    assert_eq!(s.eps_hat[0], 0.125);
    assert!(s.eps_hat.windows(2).all(|w| w[1] < w[0]));
    assert!(s.xi_hat.windows(2).all(|w| w[1] < w[0]));
    assert!(s.xi_hat[0] < s.xi_next);
    assert!((s.rho_next - 1.5).abs() < 1e-15);
}

#[test]
fn factor_ratio_of_scaled_data() {
    let x = seed_immersion();
    let y = WeierstrassData::from_fg(&LaurentPolynomial::constant(10.0), &LaurentPolynomial::zero());
    let pair = default_pair();
    assert!((factor_ratio(&x, &x, &pair, 0.02).unwrap() - 1.0).abs() < 1e-15);
    assert!((factor_ratio(&y, &x, &pair, 0.02).unwrap() - 2.0).abs() < 1e-14);
}

fn synthetic_history(terms: usize) -> Vec<ChiState> {
    let pair = default_pair();
    let mut out = Vec::new();
    let (mut k, mut r, mut eps, mut xi): (f64, f64, f64, f64) = (1.0 / 3.0, 2.0, 0.5, 0.02);
    for n in 1..=terms {
        if n > 1 {
            k = next_k(k, n - 1);
            eps = eps.min(1.0 / (n * n) as f64) / 2.0;
            r = (r * r + (2.0 / n as f64).powi(2)).sqrt() + eps;
            xi *= 0.5;
        }
        out.push(ChiState {
            n,
            x: seed_immersion(),
            pair: pair.clone(),
            epsilon: eps,
            xi,
            k,
            rho: rho(n),
            r,
            alpha: alpha(n),
            drift: 0.0,
            properties: Report::default(),
        });
    }
    out
}

#[test]
fn limit_report_on_a_synthetic_history() {
    let h = synthetic_history(4);
    let rep = report_limit(&h, 0.02).unwrap();
    assert!(rep.completeness_increasing);
    assert!(rep.r.iter().all(|r| *r <= rep.r_bound));
    for (n, (_, tail)) in rep.cauchy.iter().enumerate() {
        let n = n + 2;
        assert!(*tail < 1.0 / (n - 1) as f64);
    }
    assert_eq!(rep.factor_chain.len(), 3);
    for (ratio, bound) in &rep.factor_chain {
        assert!(ratio >= bound);
    }
    assert!((rep.alpha_floor - alpha_product(4)).abs() < 1e-15 && rep.alpha_floor >= 0.5);
    assert!(rep.modulus > 0.0);
}

proptest! {
    #[test]
    fn r_recurrence_stays_below_the_concavity_bound(r1 in 1.0f64..5.0, terms in 2usize..60) {
        let mut r = r1;
        let mut eps: f64 = 0.5;
        for n in 2..=terms {
            eps = eps.min(1.0 / (n * n) as f64) / 2.0;
            r = (r * r + (2.0 / n as f64).powi(2)).sqrt() + eps;
        }
        let bound = r1 + (2..=terms).map(|n| 2.0 / (n * n) as f64 + 1.0 / (n * n) as f64).sum::<f64>();
        prop_assert!(r <= bound);
    }
}
