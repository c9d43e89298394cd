//! Small derived-oracle checks, cheap enough to run on every install.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::{RunConfig, RunOutput};
use crate::cross_section::{thresholds, thresholds_with, CrossSection, SideBc, ThresholdMethod};
use crate::discretization::{assemble_form, assemble_modal, AssembledOperator, Grid, GridSpec};
use crate::eigen::{solve_dense_with, solve_shift_invert, Resolvent};
use crate::error::Result;
use crate::geometry::EndMetric;
use crate::scaling::ScalingProfile;
use crate::spectral::sector_check_auto;

type C = Complex64;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: &'static str, value: f64, tol: f64) -> Self {
        Self { name, value, tol, pass: value.is_finite() && value <= tol }
    }
}

/// Q1 eigenvalue of `-d²/dx²` on a uniform mesh, `6/h² (1 − cos θ)/(2 + cos θ)`.
pub fn q1_eigenvalue(h: f64, theta: f64) -> f64 {
    6.0 / (h * h) * (1.0 - theta.cos()) / (2.0 + theta.cos())
}

fn nearest(z: C, set: &[C]) -> f64 {
    set.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min)
}

fn small_op(lambda: C, x_max: f64, nx: usize, ny: usize) -> Result<(EndMetric, ScalingProfile, AssembledOperator)> {
    let cs = CrossSection::interval(PI, SideBc::Dirichlet)?;
    let geom = EndMetric::product(&cs, 0.7)?;
    let profile = ScalingProfile::quintic(10.0, 2.0)?;
    let grid = Grid::new(&GridSpec::new(x_max, nx, ny), &cs)?;
    let op = assemble_form(&geom, &profile, lambda, &grid)?;
    Ok((geom, profile, op))
}

fn thresholds_fd() -> Result<Check> {
    let mut worst = 0.0f64;
    for cs in [CrossSection::interval(PI, SideBc::Dirichlet)?, CrossSection::circle(2.0 * PI)?] {
        let exact = thresholds(&cs, 3, 400)?;
        let fd = thresholds_with(&cs, 3, 400, ThresholdMethod::FiniteDifference)?;
        for (a, b) in exact.values.iter().zip(&fd.values) {
            worst = worst.max((a - b).abs() / (1.0 + a));
        }
    }
    Ok(Check::below("thresholds_fd_vs_closed_form", worst, 1e-3))
}

fn separable_exact() -> Result<Check> {
    let (nx, ny, x_max) = (24, 8, 8.0);
    let (_, _, op) = small_op(C::new(0.0, 0.0), x_max, nx, ny)?;
    let eig = solve_dense_with(&op, false)?;
    let mut expect = Vec::new();
    for k in 1..nx {
        for j in 1..ny {
            expect.push(
                q1_eigenvalue(x_max / nx as f64, k as f64 * PI / nx as f64)
                    + q1_eigenvalue(PI / ny as f64, j as f64 * PI / ny as f64),
            );
        }
    }
    expect.sort_by(f64::total_cmp);
    let worst = eig
        .values()
        .iter()
        .zip(&expect)
        .map(|(m, e)| (m - e).norm() / e)
        .fold(0.0, f64::max);
    Ok(Check::below("separable_q1_exact", worst, 1e-9))
}

fn modal_and_dense(checks: &mut Vec<Check>) -> Result<()> {
    let lambda = C::new(0.0, 0.3);
    let (nx, ny, x_max) = (96, 8, 24.0);
    let (geom, profile, op) = small_op(lambda, x_max, nx, ny)?;
    let sigma = C::new(3.0, -0.5);
    let si = solve_shift_invert(&op, sigma, 8, 1e-11, 80)?;

    let mut modal = Vec::new();
    let spec = GridSpec::new(x_max, nx, ny);
    for j in 1..=3 {
        let nu = q1_eigenvalue(PI / ny as f64, j as f64 * PI / ny as f64);
        modal.extend(solve_dense_with(&assemble_modal(&geom, &profile, lambda, nu, &spec)?, false)?.values());
    }
    let worst = si.values().iter().map(|m| nearest(*m, &modal) / (1.0 + m.norm())).fold(0.0, f64::max);
    checks.push(Check::below("modal_reduction_matches_2d", worst, 1e-8));

    let dense = solve_dense_with(&op, false)?.values();
    let worst = si.values().iter().map(|m| nearest(*m, &dense) / (1.0 + m.norm())).fold(0.0, f64::max);
    checks.push(Check::below("dense_vs_shift_invert", worst, 1e-8));
    checks.push(Check::below("shift_invert_backward_error", si.max_backward_error(), 1e-10));

    let sector = sector_check_auto(&op, 200, 7)?;
    checks.push(Check::below("numerical_range_sector", sector.max_arg, PI / 2.0 - 1e-12));

    let f: Vec<C> = {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        (0..op.dofs()).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    };
    let mu = C::new(-1.0, 0.0);
    let u = Resolvent::new(&op, mu)?.apply(&op, &f)?;
    let mf = op.m.matvec(&f);
    let au = op.a.add_scaled(-mu, &op.m).matvec(&u);
    let r = au.iter().zip(&mf).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
        / mf.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    checks.push(Check::below("resolvent_residual", r, 1e-9));
    Ok(())
}

fn symmetries(checks: &mut Vec<Check>) -> Result<()> {
    let (_, _, op0) = small_op(C::new(0.0, 0.0), 24.0, 48, 8)?;
    checks.push(Check::below("hermitian_at_zero", op0.a.hermitian_defect().max(op0.m.hermitian_defect()), 1e-12));
    let l = C::new(0.05, 0.3);
    let (_, _, a) = small_op(l, 24.0, 48, 8)?;
    let (_, _, b) = small_op(l.conj(), 24.0, 48, 8)?;
    let d = a.a.conj().add_scaled(C::new(-1.0, 0.0), &b.a).max_abs() / a.a.max_abs();
    checks.push(Check::below("conjugate_lambda_symmetry", d, 1e-12));
    Ok(())
}

pub fn checks() -> Result<Vec<Check>> {
    let mut out = vec![thresholds_fd()?, separable_exact()?];
    modal_and_dense(&mut out)?;
    symmetries(&mut out)?;
    Ok(out)
}

/// Runs every check, printing one PASS/FAIL line each.
pub fn run(_cfg: &RunConfig) -> Result<RunOutput> {
    let checks = checks()?;
    for c in &checks {
        println!("{} {} (value {:.3e}, tol {:.1e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.tol);
    }
    let pass = checks.iter().all(|c| c.pass);
    let mut out = RunOutput::new(json!({"pass": pass, "checks": checks}));
    out.pass = pass;
    Ok(out)
}
