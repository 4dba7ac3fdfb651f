use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use minimal_annulus::config::RunConfig;
use minimal_annulus::deformation::{
    check_properties, deform_step, run_lemma, select_frame, DeformationError, StepSamples,
};
use minimal_annulus::export::{export_field, export_geometry, export_mesh, export_report};
use minimal_annulus::metric::{build_mesh, circle_distance_field, MeshDomain};
use minimal_annulus::sequence::{init_chi1, lemma_params, report_limit, run_sequence, schedule_params, seed_immersion};
use minimal_annulus::weierstrass::{conformality_residual, is_z2_type, probe_grid, PhiTriple};
use serde_json::{json, Value};

/// Finite stages of a complete bounded minimal annulus.
#[derive(Parser)]
#[command(name = "annulus", version)]
struct Cli {
    /// TOML configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of sequence terms to build.
    #[arg(long, global = true)]
    n_outer: Option<usize>,
    #[arg(long, global = true)]
    labyrinth_n: Option<usize>,
    #[arg(long, global = true)]
    resolution: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifacts to write besides the report.
    #[arg(long, global = true, value_enum)]
    export: Vec<Artifact>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Artifact {
    Mesh,
    Field,
    Geometry,
    Report,
}

#[derive(Subcommand)]
enum Command {
    /// Build the labyrinth and certify its separation bound.
    BuildLabyrinth,
    /// One deformation step on the seed immersion.
    RunStep {
        #[arg(long, default_value_t = 1)]
        step: usize,
    },
    /// One full lemma run on the first sequence term.
    RunLemma,
    /// The outer recursion.
    RunSequence,
    /// Cheap identities and first-term properties, or re-run a saved report.
    Verify { report: Option<PathBuf> },
    /// Write the selected artifacts for the seed immersion.
    Export,
}

impl Command {
    fn kind(&self) -> &'static str {
        match self {
            Command::BuildLabyrinth => "build-labyrinth",
            Command::RunStep { .. } => "run-step",
            Command::RunLemma => "run-lemma",
            Command::RunSequence => "run-sequence",
            Command::Verify { .. } => "verify",
            Command::Export => "export",
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = &cli.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = cli.n_outer {
        cfg.sequence.terms = v;
    }
    if let Some(v) = cli.labyrinth_n {
        cfg.labyrinth_n = v;
    }
    if let Some(v) = cli.resolution {
        cfg.mesh.resolution = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn build_labyrinth(cfg: &RunConfig, export: &[Artifact]) -> Result<(bool, Value)> {
    let lab = cfg.build_labyrinth()?;
    let sep = lab.verify_separation();
    if export.contains(&Artifact::Geometry) {
        let mut w = create(&cfg.out_dir, "geometry.json")?;
        export_geometry(&mut w, &lab)?;
        w.flush()?;
    }
    println!(
        "N = {}, r1 = {:.6}, r2 = {:.6}, r3 = {:.6}, delta = {:.3e}",
        lab.n(),
        lab.r1(),
        lab.r2(),
        lab.r3(),
        lab.delta()
    );
    println!("certified crossing cost {:.6} against c r1 N / 2 = {:.6}", sep.certified(1.0), sep.reference(1.0));
    let passed = sep.certified(1.0) > sep.reference(1.0);
    Ok((
        passed,
        json!({ "n": lab.n(), "r1": lab.r1(), "r2": lab.r2(), "r3": lab.r3(), "delta": lab.delta(),
                "margin": lab.margin(), "separation": sep }),
    ))
}

fn run_step(cfg: &RunConfig, step: usize) -> Result<(bool, Value)> {
    let n = cfg.labyrinth_n;
    if step != 1 {
        bail!("only the first step acts on the seed; later steps run inside run-lemma");
    }
    let lab = cfg.build_labyrinth()?;
    let x = seed_immersion();
    let sc = cfg.step_config();
    let fit = StepSamples::build(&lab, step, sc.sample_spacing);
    let checks = StepSamples::build(&lab, step, sc.sample_spacing / 4.0);
    let constants = check_properties(&x, n, step, &fit.outside, &fit, sc.quad_tol)?;
    let frame = select_frame(&x, n, &fit, &constants, 2.0 / constants.r6, sc.quad_tol)?;
    match deform_step(&x, n, step, &frame, &fit, &checks, &sc) {
        Ok(s) => {
            for c in &s.report.checks {
                println!("{:<16} {:>12.4e} bound {:>12.4e} margin {:>8.3}", c.name, c.value, c.bound, c.margin);
            }
            Ok((s.report.passed(), json!({ "constants": constants, "step": s.record() })))
        }
        Err(DeformationError::Step(f)) => {
            println!("step {step} fails: {} ({})", f.binding, f.detail);
            Ok((false, json!({ "constants": constants, "frame": frame, "failure": f })))
        }
        Err(e) => Err(e.into()),
    }
}

fn run_lemma_cmd(cfg: &RunConfig) -> Result<(bool, Value)> {
    let scfg = cfg.sequence_config();
    let pair = cfg.build_pair()?;
    let chi1 = init_chi1(&pair, &scfg)?;
    let schedule = schedule_params(std::slice::from_ref(&chi1), &scfg)?;
    let params = lemma_params(&chi1, &schedule, 1);
    match run_lemma(&chi1.x, &pair, &params, &cfg.lemma_config()) {
        Ok(run) => {
            println!("lemma run passed");
            Ok((run.passed(), json!({ "schedule": schedule, "run": run })))
        }
        Err(DeformationError::Lemma(f)) => {
            println!("lemma run fails at {}: {}", f.assertion, f.detail);
            Ok((false, json!({ "schedule": schedule, "failure": f })))
        }
        Err(e) => Err(e.into()),
    }
}

fn run_sequence_cmd(cfg: &RunConfig) -> Result<(bool, Value)> {
    let run = run_sequence(&cfg.build_pair()?, cfg.sequence.terms, &cfg.sequence_config())?;
    for s in &run.history {
        println!(
            "term {}: rho = {:.6}, r = {:.6}, k = {:.6}, eps = {:.3e}, xi = {:.3e}",
            s.n, s.rho, s.r, s.k, s.epsilon, s.xi
        );
    }
    if let Some(why) = &run.stopped {
        println!("stopped: {why}");
    }
    let limit = if run.history.len() >= 2 { Some(report_limit(&run.history, cfg.mesh.resolution)?) } else { None };
    let passed = run.stopped.is_none() && run.history.iter().all(|s| s.properties.passed());
    Ok((passed, json!({ "run": run, "limit": limit })))
}

fn verify_seed(cfg: &RunConfig) -> Result<(bool, Value)> {
    let chi1 = init_chi1(&cfg.build_pair()?, &cfg.sequence_config())?;
    let probes = probe_grid();
    let mut conf: f64 = 0.0;
    let mut lam: f64 = 0.0;
    for z in &probes {
        let phi = chi1.x.phi(*z)?;
        conf = conf.max(conformality_residual(&phi));
        lam = lam.max((chi1.x.conformal_factor_fg(*z)? - chi1.x.conformal_factor(*z)?).abs());
    }
    let z2 = is_z2_type(&PhiTriple::Data(chi1.x.clone()), &probes, 1e-12)?;
    let lines = [
        ("conformality", conf < 1e-10, conf),
        ("conformal factor identity", lam < 1e-12, lam),
        ("z2-type", z2, 0.0),
        ("first term", chi1.properties.passed(), chi1.xi),
    ];
    for (name, ok, v) in &lines {
        println!("{} {name} ({v:.3e})", if *ok { "PASS" } else { "FAIL" });
    }
    let passed = lines.iter().all(|l| l.1);
    Ok((
        passed,
        json!({ "checks": lines.iter().map(|(n, ok, v)| json!({"name": n, "pass": ok, "value": v})).collect::<Vec<_>>(),
                       "first_term": chi1 }),
    ))
}

/// Every `{name, pass}` object in a report body, in document order.
fn pass_matrix(v: &Value, out: &mut Vec<(String, bool)>) {
    match v {
        Value::Object(map) => {
            if let (Some(Value::String(n)), Some(Value::Bool(p))) = (map.get("name"), map.get("pass")) {
                out.push((n.clone(), *p));
            }
            for x in map.values() {
                pass_matrix(x, out);
            }
        }
        Value::Array(items) => items.iter().for_each(|x| pass_matrix(x, out)),
        _ => {}
    }
}

fn execute(kind: &str, cfg: &RunConfig, cli_step: usize, export: &[Artifact]) -> Result<(bool, Value)> {
    match kind {
        "build-labyrinth" => build_labyrinth(cfg, export),
        "run-step" => run_step(cfg, cli_step),
        "run-lemma" => run_lemma_cmd(cfg),
        "run-sequence" => run_sequence_cmd(cfg),
        "verify" => verify_seed(cfg),
        other => bail!("reports of kind {other} cannot be re-run"),
    }
}

fn export_seed(cfg: &RunConfig, export: &[Artifact]) -> Result<(bool, Value)> {
    if export.is_empty() {
        bail!("choose at least one --export artifact");
    }
    let pair = cfg.build_pair()?;
    let chi1 = init_chi1(&pair, &cfg.sequence_config())?;
    let graph = build_mesh(MeshDomain::Pair(&pair), cfg.mesh.resolution)?.with_data(&chi1.x)?;
    let mut written = Vec::new();
    for a in export {
        match a {
            Artifact::Mesh => {
                let mut w = create(&cfg.out_dir, "mesh.obj")?;
                let header = [("config", cfg.hash()), ("seed", cfg.seed.to_string())];
                export_mesh(&mut w, &chi1.x, &graph, &header, cfg.mesh.quad_tol)?;
                w.flush()?;
                written.push("mesh.obj");
            }
            Artifact::Field => {
                let mut w = create(&cfg.out_dir, "field.csv")?;
                export_field(&mut w, &graph, &circle_distance_field(&graph)?)?;
                w.flush()?;
                written.push("field.csv");
            }
            Artifact::Geometry => {
                let mut w = create(&cfg.out_dir, "geometry.json")?;
                export_geometry(&mut w, &cfg.build_labyrinth()?)?;
                w.flush()?;
                written.push("geometry.json");
            }
            Artifact::Report => {}
        }
    }
    for f in &written {
        println!("wrote {}", cfg.out_dir.join(f).display());
    }
    Ok((true, json!({ "written": written, "first_term": chi1 })))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let kind = cli.command.kind();
    let (cfg, passed, body) = match &cli.command {
        Command::Verify { report: Some(path) } => {
            let saved: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
            let mut cfg: RunConfig = serde_json::from_value(saved["config"].clone()).context("report has no config")?;
            if let Some(out) = &cli.out {
                cfg.out_dir = out.clone();
            }
            let saved_kind = saved["kind"].as_str().context("report has no kind")?;
            let step = saved["body"]["step"]["index"].as_u64().unwrap_or(1) as usize;
            let (passed, body) = execute(saved_kind, &cfg, step, &[])?;
            let (mut old, mut new) = (Vec::new(), Vec::new());
            pass_matrix(&saved["body"], &mut old);
            pass_matrix(&body, &mut new);
            let same = old == new && saved["passed"].as_bool() == Some(passed);
            println!(
                "{} re-run of {} reproduces the pass/fail matrix",
                if same { "PASS" } else { "FAIL" },
                path.display()
            );
            (cfg, same, json!({ "source": path, "reproduced": same, "rerun": body }))
        }
        Command::Export => {
            let cfg = load_config(&cli)?;
            let (p, b) = export_seed(&cfg, &cli.export)?;
            (cfg, p, b)
        }
        Command::RunStep { step } => {
            let cfg = load_config(&cli)?;
            let (p, b) = execute(kind, &cfg, *step, &cli.export)?;
            (cfg, p, b)
        }
        _ => {
            let cfg = load_config(&cli)?;
            let (p, b) = execute(kind, &cfg, 1, &cli.export)?;
            (cfg, p, b)
        }
    };
    let mut w = create(&cfg.out_dir, &format!("{kind}.json"))?;
    export_report(&mut w, kind, &cfg, passed, &body)?;
    w.flush()?;
    println!(
        "{} {kind}; report in {}",
        if passed { "PASS" } else { "FAIL" },
        cfg.out_dir.join(format!("{kind}.json")).display()
    );
    if !passed {
        std::process::exit(2);
    }
    Ok(())
}
