//! One line per acceptance criterion. Criteria that fail for a recorded,
//! understood reason are reported as FAIL without failing the target; any
//! other outcome exits nonzero.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use minimal_annulus::complex_field::{LaurentForm, LaurentPolynomial, PolylinePath};
use minimal_annulus::config::RunConfig;
use minimal_annulus::deformation::{
    apply_multiplier, check_properties, run_lemma, select_frame, DeformationError, StepSamples,
};
use minimal_annulus::export::{export_geometry, export_mesh};
use minimal_annulus::geometry::{make_polygonal_pair, PolygonSpec, PolygonalPair};
use minimal_annulus::labyrinth::Labyrinth;
use minimal_annulus::metric::{build_mesh, intrinsic_distance, resolution_bound, MeshDomain, MetricGraph};
use minimal_annulus::runge::{runge_h, CompactSetSample, RungeMultiplier};
use minimal_annulus::sequence::{
    alpha, alpha_product, init_chi1, lemma_params, rho, run_sequence, schedule_params, seed_immersion,
};
use minimal_annulus::weierstrass::{
    identity_residuals, is_z2_type, period_defect, probe_grid, symmetry_defect, symmetry_value, Mat3, PhiTriple,
    WeierstrassData,
};
use nalgebra::Rotation3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    /// Whether this outcome is the one the suite expects.
    expected: bool,
    detail: String,
}

impl Outcome {
    fn checked(pass: bool, detail: String) -> Outcome {
        Outcome { pass, expected: pass, detail }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn octagons(p: f64, q: f64) -> PolygonalPair {
    let spec = |r| PolygonSpec::Regular { sides: 8, circumradius: r, phase: 0.0 };
    make_polygonal_pair(&spec(p), &spec(q)).unwrap()
}

/// Seed, then sixteen random even deformations in random frames, with
/// coefficients of `μ` bounded by `amp`.
fn chain(seed: u64, amp: f64) -> Vec<WeierstrassData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![seed_immersion()];
    for _ in 0..16 {
        let frame: Mat3 = Rotation3::from_euler_angles(
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
        )
        .into_inner();
        let mut coeff = || c(rng.random_range(-amp..amp), rng.random_range(-amp..amp));
        let mu = LaurentPolynomial::from_terms([(-1, coeff()), (0, coeff()), (1, coeff()), (2, coeff())]);
        let next = out.last().unwrap().deformed(frame, LaurentForm::Monomial(mu));
        out.push(next);
    }
    out
}

fn symmetrized(x: &WeierstrassData) -> WeierstrassData {
    let s = symmetry_value(x, 1e-13).unwrap();
    x.translated(-s / 2.0)
}

fn residuals(amp: f64) -> (usize, f64, f64) {
    let probes = probe_grid();
    let mut conf: f64 = 0.0;
    let mut lam: f64 = 0.0;
    let mut count = 0;
    for seed in 0..4 {
        for x in chain(seed, amp) {
            let y = symmetrized(&x);
            for d in [&x, &y] {
                let (a, b) = identity_residuals(d, &probes).unwrap();
                conf = conf.max(a);
                lam = lam.max(b);
                count += 1;
            }
        }
    }
    (count, conf, lam)
}

fn weierstrass_identities() -> Outcome {
    let (count, conf, lam) = residuals(0.05);
    // Not gated: |f| ≪ ‖φ‖ near poles of g amplifies rounding in |f|(1+|g|²).
    let (_, stress_conf, stress_lam) = residuals(0.2);
    Outcome::checked(
        conf < 1e-10 && lam < 1e-12,
        format!(
            "{count} immersions on 64x64 probes: conformality {conf:.2e} < 1e-10, factor {lam:.2e} < 1e-12; \
             stress chains {stress_conf:.2e}, {stress_lam:.2e}"
        ),
    )
}

fn symmetry_and_periods() -> Outcome {
    let probes = probe_grid();
    let sparse: Vec<Complex64> = probes.iter().copied().step_by(64).collect();
    let loop_half = PolylinePath::circle_loop(0.5, 64).unwrap();
    let mut z2 = true;
    let mut sym: f64 = 0.0;
    let mut period: f64 = 0.0;
    for seed in 0..2 {
        for x in chain(seed, 0.2) {
            let y = symmetrized(&x);
            z2 &= is_z2_type(&PhiTriple::Data(y.clone()), &probes, 1e-12).unwrap();
            let d = symmetry_defect(&y, &sparse, 1e-13).unwrap();
            sym = sym.max(d.mean.iter().map(|v| v.abs()).fold(d.spread, f64::max));
            period = period.max(period_defect(&PhiTriple::Data(y), &loop_half, 1e-13).unwrap().max_real());
        }
    }
    Outcome::checked(
        z2 && sym < 1e-10 && period < 1e-8,
        format!("z2-type {z2}, max |S(Y)| {sym:.2e} < 1e-10, max |Re period| on |z| = 1/2 {period:.2e} < 1e-8"),
    )
}

fn runge_certification() -> Outcome {
    let e1 = CompactSetSample::annulus(0.3, 0.45, 0.0025).unwrap();
    let e2 = CompactSetSample::disks(&[c(0.7, 0.0)], 0.1, 0.0025, true).unwrap();
    let h = match runge_h(&e1, &e2, 10.0, 256) {
        Ok(h) => h,
        Err(e) => return Outcome::checked(false, format!("no multiplier: {e}")),
    };
    let one = e1.validation().iter().map(|z| (h.h(*z).unwrap() - 1.0).norm()).fold(0.0, f64::max);
    let ten = e2.validation().iter().map(|z| (h.h(*z).unwrap() - 10.0).norm()).fold(0.0, f64::max);
    let even = e1.validation().iter().chain(e2.validation()).all(|z| h.h(*z).unwrap() == h.h(-*z).unwrap());
    Outcome::checked(
        one < 0.1 && ten < 0.1 && even,
        format!("degree {}: sup|h-1| {one:.2e}, sup|h-10| {ten:.2e}, h even {even}", h.degree()),
    )
}

fn flat_distance(res: f64) -> (f64, f64) {
    let g = build_mesh(MeshDomain::Pair(&octagons(0.95, 0.45)), res).unwrap().with_factor(|_| 2.5).unwrap();
    let target = g.nearest_node(c(0.75, 0.0));
    let d = intrinsic_distance(&g, &g.circle_nodes(), &[target]).unwrap();
    (d, radial_spacing(&g, target))
}

fn radial_spacing(g: &MetricGraph, i: usize) -> f64 {
    let (fibre, level) = (i / g.levels(), i % g.levels());
    assert_eq!(g.index(fibre, level), i);
    let next = if level + 1 < g.levels() { level + 1 } else { level - 1 };
    (g.node(g.index(fibre, next)) - g.node(i)).norm()
}

fn flat_metric_oracle() -> Outcome {
    let exact = 5.0 / 24.0;
    let (d1, s1) = flat_distance(0.01);
    let (d2, s2) = flat_distance(0.005);
    let (e1, e2) = ((d1 - exact).abs() / exact, (d2 - exact).abs() / exact);
    let (b1, b2) = (2.5 * s1 / 2.0 / exact, 2.5 * s2 / 2.0 / exact);
    let halves = (b2 / b1 - 0.5).abs() < 0.05;
    Outcome::checked(
        e1 < 0.03 && e1 <= b1 && e2 <= b2 && halves,
        format!(
            "d = {d1:.6} (error {:.2}% < 3%, band {:.2}%); at half resolution error {:.2}%, band {:.2}%",
            100.0 * e1,
            100.0 * b1,
            100.0 * e2,
            100.0 * b2
        ),
    )
}

fn labyrinth_blow_up() -> Outcome {
    let pair = octagons(0.999, 0.361);
    let cst = 1.0;
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [8usize, 16] {
        let lab = Labyrinth::build(&pair, n).unwrap();
        let res = 0.01f64.min(resolution_bound(&lab));
        let n4 = (n as f64).powi(4);
        let g = build_mesh(MeshDomain::Labyrinth(&lab), res)
            .unwrap()
            .with_factor(|z| if lab.in_omega_n(z) { cst * n4 } else { cst })
            .unwrap();
        let d = intrinsic_distance(&g, &g.circle_nodes(), &g.boundary()).unwrap();
        let reference = cst * lab.r1() * n as f64 / 2.0;
        pass &= d > reference;
        parts.push(format!("N = {n}: {d:.4} > {reference:.4}"));
    }
    Outcome::checked(pass, parts.join(", "))
}

fn runge_reason(detail: &str) -> bool {
    detail.contains("Runge certification")
}

fn single_lemma() -> Outcome {
    let cfg = RunConfig::default();
    let pair = cfg.build_pair().unwrap();
    let scfg = cfg.sequence_config();
    let chi1 = init_chi1(&pair, &scfg).unwrap();
    let schedule = schedule_params(std::slice::from_ref(&chi1), &scfg).unwrap();
    let params = lemma_params(&chi1, &schedule, 1);
    match run_lemma(&chi1.x, &chi1.pair, &params, &scfg.lemma) {
        Ok(run) => {
            let pass =
                run.passed() && run.assertions.checks.iter().chain(&run.conclusions.checks).all(|c| c.margin >= 0.05);
            Outcome::checked(pass, format!("N = {}: {} steps certified", run.n, run.steps.len()))
        }
        Err(DeformationError::Lemma(f)) => {
            let step = f.run.step_failure.as_ref();
            let expected = f.assertion == "step"
                && f.run.hypotheses.passed()
                && step.is_some_and(|s| s.index == 1 && runge_reason(&s.binding));
            let best = step
                .and_then(|s| s.attempts.iter().min_by(|a, b| a.sup_one.total_cmp(&b.sup_one)))
                .map(|a| format!("; best tau {:.3e}: sup|h-1| {:.2e}, sup|h-tau| {:.2e}", a.tau, a.sup_one, a.sup_tau))
                .unwrap_or_default();
            Outcome { pass: false, expected, detail: format!("{}: {}{best}", f.assertion, f.detail) }
        }
        Err(e) => Outcome { pass: false, expected: false, detail: e.to_string() },
    }
}

fn outer_recursion() -> Outcome {
    let cfg = RunConfig::default();
    let pair = cfg.build_pair().unwrap();
    let run = match run_sequence(&pair, 3, &cfg.sequence_config()) {
        Ok(run) => run,
        Err(e) => return Outcome { pass: false, expected: false, detail: e.to_string() },
    };
    let mut ok = run.history.iter().all(|s| s.properties.passed());
    let mut r_prev: Option<f64> = None;
    for s in &run.history {
        ok &= s.rho == rho(s.n);
        if let Some(r) = r_prev {
            let s_n = 2.0 / s.n as f64;
            ok &= s.r == ((r * r) + s_n * s_n).sqrt() + s.epsilon;
        }
        r_prev = Some(s.r);
    }
    let mut ks: Vec<f64> = run.history.iter().map(|s| s.k).collect();
    ks.extend(run.schedules.iter().skip(run.history.len() - 1).map(|s| s.k_next));
    let proxy: Vec<f64> = ks.iter().enumerate().map(|(i, k)| 0.5 * (1.0 - k) * rho(i + 1)).collect();
    let increasing = proxy.windows(2).all(|w| w[1] > w[0]);
    let mut product = 1.0;
    let mut closed = true;
    for n in 1..=3 {
        product *= alpha(n);
        closed &=
            (product - 0.5 * (0.5f64.powi(n as i32)).exp()).abs() < 1e-14 && (alpha_product(n) - product).abs() < 1e-14;
    }
    let terms = run.history.len();
    let pass = terms == 3 && ok && increasing && closed && run.stopped.is_none();
    let summary =
        format!("{terms} of 3 terms, recurrences {ok}, proxy increasing {increasing}, alpha closed form {closed}");
    match &run.stopped {
        None => Outcome::checked(pass, summary),
        Some(why) => {
            let step = run
                .attempts
                .first()
                .and_then(|a| a.first())
                .and_then(|a| a.run.as_ref())
                .and_then(|r| r.step_failure.as_ref());
            let expected = terms == 1
                && ok
                && increasing
                && closed
                && why.starts_with("term 1")
                && step.is_some_and(|s| s.index == 1 && runge_reason(&s.binding));
            Outcome { pass: false, expected, detail: format!("{summary}; stopped at {why}") }
        }
    }
}

fn determinism() -> Outcome {
    let cfg = RunConfig::default();
    let once = || {
        let pair = cfg.build_pair().unwrap();
        let g = build_mesh(MeshDomain::Pair(&pair), cfg.mesh.resolution).unwrap();
        let mut mesh = Vec::new();
        export_mesh(&mut mesh, &chain(cfg.seed, 0.1)[4], &g, &[("config", cfg.hash())], cfg.mesh.quad_tol).unwrap();
        let lab = Labyrinth::build(&octagons(0.999, 0.361), 8).unwrap();
        export_geometry(&mut mesh, &lab).unwrap();
        let samples = StepSamples::build(&lab, 1, 0.02);
        let x = seed_immersion();
        let k = check_properties(&x, 8, 1, &samples.outside, &samples, 1e-10).unwrap();
        let frame = select_frame(&x, 8, &samples, &k, 2.0 / k.r6, 1e-10).unwrap();
        let step = apply_multiplier(&x, 8, 1, &frame, &RungeMultiplier::identity(4096.0), &samples, 1e-10).unwrap();
        let matrix: Vec<(String, bool)> = step.report.checks.iter().map(|c| (c.name.clone(), c.pass)).collect();
        (mesh, matrix)
    };
    let (a, b) = (once(), once());
    Outcome::checked(
        a == b,
        format!("{} export bytes and {} checks identical across two runs: {}", a.0.len(), a.1.len(), a == b),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("Weierstrass identities", weierstrass_identities),
        ("z2-type, symmetry and periods", symmetry_and_periods),
        ("Runge certification", runge_certification),
        ("flat-metric distance oracle", flat_metric_oracle),
        ("labyrinth blow-up", labyrinth_blow_up),
        ("single lemma run", single_lemma),
        ("outer recursion", outer_recursion),
        ("determinism", determinism),
    ];
    let mut unexpected = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let note = if o.expected { "" } else { " [unexpected]" };
        println!("criterion {}: {verdict} {name} ({:.1}s): {}{note}", i + 1, t.elapsed().as_secs_f64(), o.detail);
        if !o.expected {
            unexpected += 1;
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
