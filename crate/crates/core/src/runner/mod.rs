//! Config-driven commands behind the `cylres` binary.
//!
//! Every command reads one JSON [`RunConfig`], writes `report.json` to the
//! output directory plus command-specific artifacts, and maps failures to
//! exit code 2 (configuration) or 3 (numerics).

mod config;
pub mod selftest;
pub mod svg;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::{json, Value};

pub use config::{
    Command, EigenConfig, EigenMethodConfig, LambdaSpec, RunConfig, ScalingConfig, ThresholdConfig,
    ThresholdMethodConfig, Tolerances, TraceConfig,
};

use crate::cross_section::{thresholds_with, ThresholdSet};
use crate::discretization::{assemble_form, AssembledOperator, Grid, GridSpec};
use crate::eigen::{solve_dense_with, solve_shift_invert_with, ArnoldiOptions, EigenResult};
use crate::error::{Error, Result};
use crate::geometry::EndMetric;
use crate::resolvent::{compare_traces, detect_poles, matrix_element_trace, poles_json, MatrixElementTrace};
use crate::scaling::ScalingProfile;
use crate::spectral::{
    classify, predict_rays, ray_angle, sector_check_auto, sweep_lambda, sweep_profile, ClassifyTolerances,
    EigenClass, SpectralPortrait, SweepJob,
};

type C = Complex64;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides `output` from the config.
    pub out: Option<PathBuf>,
    /// Omit wall-clock and thread data from the report.
    pub reproducible: bool,
}

/// Result of a command before anything touches the disk.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub results: Value,
    /// Extra artifacts by file name.
    pub files: BTreeMap<String, String>,
    /// `false` when the command ran but a check it performs failed
    /// (selftest only).
    pub pass: bool,
}

impl RunOutput {
    fn new(results: Value) -> Self {
        Self { results, files: BTreeMap::new(), pass: true }
    }
}

fn arnoldi(cfg: &RunConfig) -> ArnoldiOptions {
    ArnoldiOptions {
        tol: cfg.eigen.tol,
        max_restarts: cfg.eigen.max_iter,
        seed: 0x5eed ^ cfg.seed,
        ..Default::default()
    }
}

fn classify_tol(cfg: &RunConfig) -> ClassifyTolerances {
    ClassifyTolerances { ray_tol: cfg.tolerances.ray_tol, thresh_tol: cfg.tolerances.thresh_tol }
}

fn cplx(z: C) -> Value {
    json!([z.re, z.im])
}

fn section_thresholds(cfg: &RunConfig) -> Result<ThresholdSet> {
    thresholds_with(&cfg.cross_section, cfg.thresholds.count, cfg.thresholds.grid_n, cfg.thresholds.method())
}

fn build(cfg: &RunConfig, geom: &EndMetric, lambda: C, spec: &GridSpec) -> Result<AssembledOperator> {
    let grid = Grid::new(spec, &cfg.cross_section)?;
    assemble_form(geom, &cfg.scaling()?.profile(), lambda, &grid)
}

fn default_shift(nu: f64, lambda: C) -> C {
    nu + 2.0 * C::from_polar(1.0, ray_angle(lambda))
}

fn eigensolve(cfg: &RunConfig, op: &AssembledOperator, shift: C) -> Result<EigenResult> {
    match cfg.eigen.method {
        EigenMethodConfig::Dense => solve_dense_with(op, false),
        EigenMethodConfig::ShiftInvert => solve_shift_invert_with(op, shift, cfg.eigen.count, &arnoldi(cfg)),
    }
}

struct Portrait {
    op: AssembledOperator,
    portrait: SpectralPortrait,
    eig: EigenResult,
}

fn compute_portrait(cfg: &RunConfig, geom: &EndMetric, ts: &ThresholdSet, lambda: C) -> Result<Portrait> {
    let op = build(cfg, geom, lambda, cfg.grid()?)?;
    let shift = cfg.eigen.shift.map_or_else(|| default_shift(ts.first(), lambda), |s| C::new(s[0], s[1]));
    let eig = eigensolve(cfg, &op, shift)?;
    let portrait = classify(&ts.values, lambda, &eig, classify_tol(cfg));
    Ok(Portrait { op, portrait, eig })
}

fn cmd_thresholds(cfg: &RunConfig) -> Result<RunOutput> {
    let ts = section_thresholds(cfg)?;
    Ok(RunOutput::new(json!({
        "nu": ts.values,
        "multiplicities": ts.multiplicities,
        "modes": ts.modes.len(),
    })))
}

fn cmd_portrait(cfg: &RunConfig, geom: &EndMetric, with_resonances: bool) -> Result<RunOutput> {
    let ts = section_thresholds(cfg)?;
    let lambda = cfg.lambdas()?[0];
    let Portrait { op, portrait, eig } = compute_portrait(cfg, geom, &ts, lambda)?;
    let sector = sector_check_auto(&op, cfg.tolerances.sector_samples, cfg.seed)?;
    let mut results = json!({
        "portrait": portrait.to_json(),
        "method": eig.method,
        "shift": eig.shift.map(cplx),
        "max_backward_error": eig.max_backward_error(),
        "operator": op.meta,
        "assembly": op.stats,
        "sector": {"report": sector, "pass": sector.pass()},
    });
    if with_resonances {
        results["resonances"] = Value::Array(resonances(cfg, geom, &portrait)?);
    }
    let mut out = RunOutput::new(results);
    out.files.insert("eigs.csv".into(), portrait.to_csv());
    out.files.insert("portrait.svg".into(), svg::portrait_svg(&portrait));
    Ok(out)
}

/// Discrete candidates in the window (all of them without a window), each
/// re-solved on a box of twice the length at the same mesh size.
fn resonances(cfg: &RunConfig, geom: &EndMetric, portrait: &SpectralPortrait) -> Result<Vec<Value>> {
    let spec = cfg.grid()?;
    let doubled = GridSpec { x_max: 2.0 * spec.x_max, nx: 2 * spec.nx, ..spec.clone() };
    let mut out = Vec::new();
    let candidates: Vec<_> = portrait
        .of_class(EigenClass::DiscreteCandidate)
        .filter(|e| cfg.window.is_none_or(|w| w.contains(e.mu)))
        .collect();
    if candidates.is_empty() {
        return Ok(out);
    }
    let op2 = build(cfg, geom, portrait.lambda, &doubled)?;
    for e in candidates {
        let eig = solve_shift_invert_with(&op2, e.mu, 4.min(op2.dofs() - 1), &arnoldi(cfg))?;
        let nearest = eig
            .values()
            .into_iter()
            .min_by(|a, b| (a - e.mu).norm().total_cmp(&(b - e.mu).norm()))
            .expect("at least one eigenvalue");
        out.push(json!({
            "mu": cplx(e.mu),
            "residual": e.residual,
            "backward_error": e.backward_error,
            "xmax_doubled": cplx(nearest),
            "xmax_drift": (nearest - e.mu).norm(),
        }));
    }
    Ok(out)
}

fn sweep_job(cfg: &RunConfig, geom: &EndMetric, ts: &ThresholdSet) -> Result<SweepJob> {
    Ok(SweepJob {
        geometry: geom.clone(),
        section: cfg.cross_section.clone(),
        nu: ts.values.clone(),
        grid: cfg.grid()?.clone(),
        count: cfg.eigen.count,
        drift_tol: cfg.tolerances.drift_tol,
        richardson: true,
        arnoldi: arnoldi(cfg),
    })
}

fn cmd_sweep(cfg: &RunConfig, geom: &EndMetric, over_profiles: bool) -> Result<RunOutput> {
    let ts = section_thresholds(cfg)?;
    let job = sweep_job(cfg, geom, &ts)?;
    let window = cfg.window()?;
    let scaling = cfg.scaling()?;
    let report = if over_profiles {
        sweep_profile(&job, &scaling.sweep_profiles(), cfg.lambdas()?[0], window)?
    } else {
        sweep_lambda(&job, &scaling.profile(), &cfg.lambdas()?, window)?
    };
    Ok(RunOutput::new(json!({
        "stable": report.stable(),
        "stability": report,
    })))
}

fn check_ray_margin(cfg: &RunConfig, ts: &ThresholdSet, lambda: C, points: &[C]) -> Result<()> {
    let margin = cfg.tolerances.ray_margin;
    for r in predict_rays(&ts.values, lambda) {
        if let Some(z) = points.iter().find(|z| r.distance(**z) < margin) {
            return Err(Error::Config(format!(
                "trace.mu_grid point {z} is within tolerances.ray_margin = {margin} of the ray from {} at lambda = {lambda}",
                r.origin
            )));
        }
    }
    Ok(())
}

struct TraceRun {
    trace: MatrixElementTrace,
    fine: Option<MatrixElementTrace>,
    portrait: SpectralPortrait,
}

fn trace_at(cfg: &RunConfig, geom: &EndMetric, ts: &ThresholdSet, lambda: C, spec: &GridSpec) -> Result<(MatrixElementTrace, SpectralPortrait)> {
    let tr = cfg.trace()?;
    let profile = cfg.scaling()?.profile();
    let op = build(cfg, geom, lambda, spec)?;
    let center = C::new(0.5 * (tr.mu_grid.re[0] + tr.mu_grid.re[1]), 0.5 * (tr.mu_grid.im[0] + tr.mu_grid.im[1]));
    let count = tr.eig_count.min(op.dofs() - 1);
    let eig = solve_shift_invert_with(&op, center, count, &arnoldi(cfg))?;
    let portrait = classify(&ts.values, lambda, &eig, classify_tol(cfg));
    let trace = matrix_element_trace(geom, &profile, &op, ts, &tr.f, &tr.g, &tr.mu_grid, &eig.values())?;
    Ok((trace, portrait))
}

fn relative_gap(a: &MatrixElementTrace, b: &MatrixElementTrace) -> Option<f64> {
    compare_traces(a, b).ok()
}

fn cmd_trace(cfg: &RunConfig, geom: &EndMetric) -> Result<RunOutput> {
    let ts = section_thresholds(cfg)?;
    let tr = cfg.trace()?;
    let lambdas = cfg.lambdas()?;
    let points = tr.mu_grid.points();
    for &l in &lambdas {
        check_ray_margin(cfg, &ts, l, &points)?;
    }
    let spec = cfg.grid()?;
    let mut runs = Vec::with_capacity(lambdas.len());
    for &l in &lambdas {
        let (trace, portrait) = trace_at(cfg, geom, &ts, l, spec)?;
        let fine = if tr.refine { Some(trace_at(cfg, geom, &ts, l, &spec.refined(2))?.0) } else { None };
        runs.push(TraceRun { trace, fine, portrait });
    }
    let mut out = RunOutput::new(Value::Null);
    let mut per_lambda = Vec::new();
    let mut poles = Vec::new();
    for (i, r) in runs.iter().enumerate() {
        let candidates: Vec<C> = r.portrait.of_class(EigenClass::DiscreteCandidate).map(|e| e.mu).collect();
        let report = detect_poles(&r.trace, &candidates, cfg.tolerances.match_tol);
        let estimate = r.fine.as_ref().and_then(|f| relative_gap(&r.trace, f)).map(|d| 4.0 / 3.0 * d);
        let valid = r.trace.values.iter().filter(|v| v.is_some()).count();
        per_lambda.push(json!({
            "lambda": cplx(r.trace.lambda),
            "valid_points": valid,
            "discretization_estimate": estimate,
            "bound_constant": r.trace.bound_constant(&r.portrait.eigs.iter().map(|e| e.mu).collect::<Vec<_>>()),
            "discrete_candidates": candidates.iter().map(|z| cplx(*z)).collect::<Vec<_>>(),
        }));
        let mut pj = poles_json(&report);
        pj["lambda"] = cplx(r.trace.lambda);
        poles.push(pj);
        let name = if i == 0 { "trace.csv".to_string() } else { format!("trace_{i}.csv") };
        out.files.insert(name, r.trace.to_csv());
    }
    let agreement: Vec<Value> = runs
        .iter()
        .skip(1)
        .map(|r| json!({"lambda": cplx(r.trace.lambda), "max_relative_gap": relative_gap(&runs[0].trace, &r.trace)}))
        .collect();
    out.files.insert("poles.json".into(), serde_json::to_string_pretty(&poles)? + "\n");
    out.results = json!({
        "traces": per_lambda,
        "agreement_with_first": agreement,
        "poles": poles,
    });
    Ok(out)
}

/// Runs `command` on a parsed config without touching the disk.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<RunOutput> {
    let geom = cfg.validate(command)?;
    match command {
        Command::Thresholds => cmd_thresholds(cfg),
        Command::Portrait => cmd_portrait(cfg, &geom, false),
        Command::Resonances => cmd_portrait(cfg, &geom, true),
        Command::SweepLambda => cmd_sweep(cfg, &geom, false),
        Command::SweepProfile => cmd_sweep(cfg, &geom, true),
        Command::Trace => cmd_trace(cfg, &geom),
        Command::Selftest => selftest::run(cfg),
    }
}

fn provenance(command: Command, cfg: &RunConfig, geom_id: Option<String>, opts: &RunOptions) -> Value {
    let mut p = json!({
        "crate": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.name(),
        "geometry": geom_id,
        "seed": cfg.seed,
        "reproducible": opts.reproducible,
    });
    if !opts.reproducible {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        p["timestamp_unix"] = json!(now);
        p["threads"] = json!(rayon::current_num_threads());
    }
    p
}

fn error_json(e: &Error) -> Value {
    let mut v = json!({"message": e.to_string(), "exit_code": e.exit_code()});
    if let Error::NoConvergence { partial, .. } = e {
        v["partial"] = json!(partial.pairs);
    }
    v
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

/// Output directory: `--out`, else `output` from the config, else `out`.
pub fn output_dir(cfg: Option<&RunConfig>, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Loads the config, runs the command and writes every artifact. Returns the
/// process exit code.
pub fn run(command: Command, config: &Path, opts: &RunOptions) -> i32 {
    let cfg = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => {
            let dir = output_dir(None, opts);
            let report = json!({"status": "error", "command": command.name(), "error": error_json(&e)});
            report_error(&dir, &report, &e);
            return e.exit_code();
        }
    };
    let dir = output_dir(Some(&cfg), opts);
    let geom_id = cfg.geometry.build(&cfg.cross_section).ok().map(|g| g.id().to_string());
    let mut report = json!({
        "command": command.name(),
        "config": serde_json::to_value(&cfg).unwrap_or(Value::Null),
        "provenance": provenance(command, &cfg, geom_id, opts),
    });
    let outcome = execute(command, &cfg).and_then(|out| {
        std::fs::create_dir_all(&dir)?;
        for (name, text) in &out.files {
            write_file(&dir, name, text)?;
        }
        if cfg.dump_matrices && cfg.scaling.is_some() && cfg.grid.is_some() {
            dump_matrices(&cfg, &dir)?;
        }
        Ok(out)
    });
    match outcome {
        Ok(out) => {
            report["status"] = json!(if out.pass { "ok" } else { "fail" });
            report["results"] = out.results;
            let code = if out.pass { 0 } else { 3 };
            match serde_json::to_string_pretty(&report) {
                Ok(text) => {
                    if let Err(e) = write_file(&dir, "report.json", &(text + "\n")) {
                        eprintln!("error: {e}");
                        return e.exit_code();
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return 3;
                }
            }
            log::info!("wrote {}", dir.join("report.json").display());
            code
        }
        Err(e) => {
            report["status"] = json!("error");
            report["error"] = error_json(&e);
            report_error(&dir, &report, &e);
            e.exit_code()
        }
    }
}

fn report_error(dir: &Path, report: &Value, e: &Error) {
    eprintln!("error: {e}");
    let written = std::fs::create_dir_all(dir)
        .map_err(Error::from)
        .and_then(|_| Ok(serde_json::to_string_pretty(report)?))
        .and_then(|text| write_file(dir, "report.json", &(text + "\n")));
    if let Err(w) = written {
        eprintln!("could not write report: {w}");
    }
}

fn dump_matrices(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let geom = cfg.geometry.build(&cfg.cross_section)?;
    let profile: ScalingProfile = cfg.scaling()?.profile();
    for (i, l) in cfg.lambdas()?.into_iter().enumerate() {
        let grid = Grid::new(cfg.grid()?, &cfg.cross_section)?;
        assemble_form(&geom, &profile, l, &grid)?.dump(dir, &format!("lambda{i}"))?;
    }
    Ok(())
}
