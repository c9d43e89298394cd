//! Analytic vectors and the continued matrix elements
//! `m(μ) = ((Δ_λ − μ)⁻¹ F∘κ_λ, G∘κ_λ̄)_λ` of the resolvent.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cross_section::{mode_values, ThresholdSet};
use crate::discretization::{AssembledOperator, Grid};
use crate::eigen::Resolvent;
use crate::error::{Error, Result};
use crate::geometry::EndMetric;
use crate::scaling::{DeformedMetricField, ScalingProfile};

type C = Complex64;

/// `F(x, y) = χ(x) e^{−γx²} P(x) Φ_j(y)` with `χ` a quintic cutoff rising
/// from 0 at `x = 0` to 1 at `x = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticVector {
    pub gamma: f64,
    /// Coefficients of `P`, lowest degree first, as `[re, im]`.
    #[serde(default = "unit_poly")]
    pub poly: Vec<[f64; 2]>,
    /// 0-based index into the cross-section modes.
    #[serde(default)]
    pub mode: usize,
}

fn unit_poly() -> Vec<[f64; 2]> {
    vec![[1.0, 0.0]]
}

impl AnalyticVector {
    /// Lowest-mode Gaussian with `P = 1`.
    pub fn gaussian(gamma: f64) -> Self {
        Self { gamma, poly: unit_poly(), mode: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::Config(format!("analytic vector gamma must be > 0, got {}", self.gamma)));
        }
        if self.poly.is_empty() {
            return Err(Error::Config("analytic vector poly must be nonempty".into()));
        }
        Ok(())
    }

    pub fn id(&self) -> String {
        format!("gauss(gamma={},deg={},mode={})", self.gamma, self.poly.len() - 1, self.mode)
    }

    /// The entire function `e^{−γz²} P(z)`.
    pub fn axial(&self, z: C) -> C {
        let p = self.poly.iter().rev().fold(C::new(0.0, 0.0), |acc, c| acc * z + C::new(c[0], c[1]));
        (-self.gamma * z * z).exp() * p
    }

    /// `|F(r)| r⁶` strictly decreases over `r = 10, 20, 40` and ends below 1e-6.
    pub fn decays(&self) -> bool {
        let v: Vec<f64> = [10.0f64, 20.0, 40.0].iter().map(|&r| self.axial(C::new(r, 0.0)).norm() * r.powi(6)).collect();
        v[1] < v[0] && v[2] < v[1] && v[2] < 1e-6
    }
}

/// Quintic cutoff: 0 for `x ≤ 0`, 1 for `x ≥ 1`.
pub fn cutoff(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (x * (6.0 * x - 15.0) + 10.0)
    }
}

/// Samples `F∘κ_λ(x, y) = χ(x) f(x + λ s_R(x)) Φ_j(y)` at the grid dofs.
pub fn scaled_vector(
    f: &AnalyticVector,
    ts: &ThresholdSet,
    profile: &ScalingProfile,
    lambda: C,
    grid: &Grid,
) -> Result<Vec<C>> {
    f.validate()?;
    if !(lambda.norm() < std::f64::consts::FRAC_1_SQRT_2) {
        return Err(Error::Config(format!("|lambda| = {} must be < 1/sqrt(2)", lambda.norm())));
    }
    let phi = mode_values(ts, f.mode, &grid.y_nodes)?;
    Ok(grid.sample(|x, y| {
        let iy = ((y / grid.hy()).round() as usize).min(grid.ny());
        let (s, _) = profile.value(x);
        cutoff(x) * f.axial(x + lambda * s) * phi[iy]
    }))
}

/// Trapezoid weight of each dof.
pub fn trapezoid_weights(grid: &Grid) -> Vec<f64> {
    let (hx, hy) = (grid.hx(), grid.hy());
    let (nx, ny) = (grid.nx(), grid.ny());
    let periodic = grid.is_periodic();
    (0..grid.dofs())
        .map(|d| {
            let (ix, iy) = grid.node(d);
            let wx = if ix == 0 || ix == nx { 0.5 * hx } else { hx };
            let wy = if !periodic && (iy == 0 || iy == ny) { 0.5 * hy } else { hy };
            wx * wy
        })
        .collect()
}

/// `(u, v)_λ = Σ w u conj(v) ρ_λ⁻¹ sqrt(det g₀)` with trapezoid weights.
pub fn deformed_inner(u: &[C], v: &[C], field: &DeformedMetricField<'_>, grid: &Grid) -> Result<C> {
    if u.len() != grid.dofs() || v.len() != grid.dofs() {
        return Err(Error::Config("vectors must live on the grid".into()));
    }
    let w = trapezoid_weights(grid);
    let mut acc = C::new(0.0, 0.0);
    for d in 0..grid.dofs() {
        let (x, y) = grid.point(d);
        let p = field.at(x, y)?;
        acc += u[d] * v[d].conj() / p.rho * (w[d] * p.det0.sqrt());
    }
    Ok(acc)
}

/// Rectangular `μ` lattice, `n_re × n_im` points including the corners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuGrid {
    pub re: [f64; 2],
    pub im: [f64; 2],
    pub n_re: usize,
    pub n_im: usize,
}

impl MuGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_re < 1 || self.n_im < 1 || self.re[0] > self.re[1] || self.im[0] > self.im[1] {
            return Err(Error::Config("mu_grid needs ascending bounds and positive counts".into()));
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![lo];
        }
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    }

    /// Points, real index fastest.
    pub fn points(&self) -> Vec<C> {
        let re = Self::axis(self.re[0], self.re[1], self.n_re);
        let im = Self::axis(self.im[0], self.im[1], self.n_im);
        im.iter().flat_map(|&b| re.iter().map(move |&a| C::new(a, b))).collect()
    }

    pub fn single(mu: C) -> Self {
        Self { re: [mu.re, mu.re], im: [mu.im, mu.im], n_re: 1, n_im: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFlag {
    Ok,
    /// Within the exclusion distance of a computed eigenvalue; skipped.
    NearSpectrum,
    /// The solve broke down.
    Singular,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixElementTrace {
    pub mu_grid: MuGrid,
    pub mu: Vec<C>,
    pub values: Vec<Option<C>>,
    pub flags: Vec<TraceFlag>,
    pub lambda: C,
    pub f_id: String,
    pub g_id: String,
}

/// Points closer than this to a listed eigenvalue are skipped.
pub const SPECTRUM_EXCLUSION: f64 = 1e-3;

/// Evaluates `m(μ)` on the lattice. `op` must be assembled at the same `λ`
/// and on the same grid; `spectrum` lists eigenvalues of `(A, M)` to stay
/// away from.
#[allow(clippy::too_many_arguments)]
pub fn matrix_element_trace(
    geom: &EndMetric,
    profile: &ScalingProfile,
    op: &AssembledOperator,
    ts: &ThresholdSet,
    f: &AnalyticVector,
    g: &AnalyticVector,
    mu_grid: &MuGrid,
    spectrum: &[C],
) -> Result<MatrixElementTrace> {
    mu_grid.validate()?;
    let grid = op.grid()?;
    let lambda = op.lambda();
    let field = DeformedMetricField::new(geom, profile, lambda, *grid.x_nodes.last().unwrap())?;
    let fv = scaled_vector(f, ts, profile, lambda, grid)?;
    let gv = scaled_vector(g, ts, profile, lambda.conj(), grid)?;
    // weights folded into the test vector once
    let w = trapezoid_weights(grid);
    let mut test = Vec::with_capacity(grid.dofs());
    for d in 0..grid.dofs() {
        let (x, y) = grid.point(d);
        let p = field.at(x, y)?;
        test.push(gv[d].conj() / p.rho * (w[d] * p.det0.sqrt()));
    }
    let mu = mu_grid.points();
    let results: Vec<(Option<C>, TraceFlag)> = mu
        .par_iter()
        .map(|&z| {
            if spectrum.iter().any(|e| (e - z).norm() <= SPECTRUM_EXCLUSION) {
                return (None, TraceFlag::NearSpectrum);
            }
            let solved = Resolvent::new(op, z).and_then(|r| r.apply(op, &fv));
            match solved {
                Ok(u) => (Some(u.iter().zip(&test).map(|(a, b)| a * b).sum()), TraceFlag::Ok),
                Err(_) => (None, TraceFlag::Singular),
            }
        })
        .collect();
    let (values, flags) = results.into_iter().unzip();
    Ok(MatrixElementTrace { mu_grid: mu_grid.clone(), mu, values, flags, lambda, f_id: f.id(), g_id: g.id() })
}

impl MatrixElementTrace {
    pub fn value_at(&self, mu: C) -> Option<C> {
        self.mu.iter().position(|z| (z - mu).norm() < 1e-14).and_then(|k| self.values[k])
    }

    /// CSV with columns `re_mu,im_mu,re_m,im_m,flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re_mu,im_mu,re_m,im_m,flag\n");
        for ((z, v), f) in self.mu.iter().zip(&self.values).zip(&self.flags) {
            let v = v.unwrap_or(C::new(f64::NAN, f64::NAN));
            let flag = match f {
                TraceFlag::Ok => "ok",
                TraceFlag::NearSpectrum => "near_spectrum",
                TraceFlag::Singular => "singular",
            };
            out.push_str(&format!("{:.10e},{:.10e},{:.12e},{:.12e},{flag}\n", z.re, z.im, v.re, v.im));
        }
        out
    }

    /// `max |m(μ)| · dist(μ, spectrum)` over valid points.
    pub fn bound_constant(&self, spectrum: &[C]) -> f64 {
        self.mu
            .iter()
            .zip(&self.values)
            .filter_map(|(z, v)| {
                let d = spectrum.iter().map(|e| (e - z).norm()).fold(f64::INFINITY, f64::min);
                v.map(|v| v.norm() * d)
            })
            .filter(|c| c.is_finite())
            .fold(0.0, f64::max)
    }
}

/// `max |m₁ − m₂| / (1 + |m₁|)` over points valid in both traces.
pub fn compare_traces(t1: &MatrixElementTrace, t2: &MatrixElementTrace) -> Result<f64> {
    if t1.mu_grid != t2.mu_grid {
        return Err(Error::Config("traces live on different mu grids".into()));
    }
    let mut worst: Option<f64> = None;
    for (a, b) in t1.values.iter().zip(&t2.values) {
        if let (Some(a), Some(b)) = (a, b) {
            let d = (a - b).norm() / (1.0 + a.norm());
            worst = Some(worst.map_or(d, |w: f64| w.max(d)));
        }
    }
    worst.ok_or(Error::EmptyValidity)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoleMatch {
    #[serde(serialize_with = "crate::ser_complex")]
    pub pole: C,
    #[serde(serialize_with = "crate::ser_complex")]
    pub eigenvalue: C,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoleReport {
    pub matched: Vec<PoleMatch>,
    pub unmatched: Vec<[f64; 2]>,
    pub median: f64,
    pub threshold: f64,
}

/// Interior local maxima of `|m|` above 10× the median, each refined by a
/// least-squares fit `1/m ≈ a + bμ` on its 3×3 neighbourhood and paired with
/// the nearest candidate eigenvalue within `match_tol`. Peaks whose refined
/// poles coincide (within one lattice step) are reported once.
pub fn detect_poles(trace: &MatrixElementTrace, candidates: &[C], match_tol: f64) -> PoleReport {
    let (nr, ni) = (trace.mu_grid.n_re, trace.mu_grid.n_im);
    let abs: Vec<Option<f64>> = trace.values.iter().map(|v| v.map(|v| v.norm())).collect();
    let mut valid: Vec<f64> = abs.iter().flatten().copied().collect();
    valid.sort_by(f64::total_cmp);
    let median = if valid.is_empty() { 0.0 } else { valid[valid.len() / 2] };
    let threshold = 10.0 * median;
    let at = |i: usize, j: usize| abs[j * nr + i];
    let step_re = if nr > 1 { (trace.mu_grid.re[1] - trace.mu_grid.re[0]) / (nr - 1) as f64 } else { 0.0 };
    let step_im = if ni > 1 { (trace.mu_grid.im[1] - trace.mu_grid.im[0]) / (ni - 1) as f64 } else { 0.0 };
    let merge_radius = step_re.max(step_im) * 1.5;

    let mut poles: Vec<C> = Vec::new();
    for j in 0..ni {
        for i in 0..nr {
            let Some(v) = at(i, j) else { continue };
            if v <= threshold || i == 0 || i + 1 == nr || (ni > 1 && (j == 0 || j + 1 == ni)) {
                continue;
            }
            let mut is_max = true;
            let mut fit = Vec::new();
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= nr as i64 || jj >= ni as i64 {
                        continue;
                    }
                    let k = jj as usize * nr + ii as usize;
                    if let Some(m) = trace.values[k] {
                        if (di, dj) != (0, 0) && m.norm() > v {
                            is_max = false;
                        }
                        fit.push((trace.mu[k], C::new(1.0, 0.0) / m));
                    }
                }
            }
            if !is_max {
                continue;
            }
            let pole = linear_zero(&fit).unwrap_or(trace.mu[j * nr + i]);
            if !poles.iter().any(|p| (p - pole).norm() < merge_radius) {
                poles.push(pole);
            }
        }
    }
    let mut matched = Vec::new();
    let mut unmatched = Vec::new();
    for pole in poles {
        let best = candidates
            .iter()
            .map(|&e| (e, (e - pole).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .filter(|(_, d)| *d <= match_tol);
        match best {
            Some((eigenvalue, distance)) => matched.push(PoleMatch { pole, eigenvalue, distance }),
            None => unmatched.push([pole.re, pole.im]),
        }
    }
    PoleReport { matched, unmatched, median, threshold }
}

/// Zero `−a/b` of the least-squares line `w ≈ a + b z`.
fn linear_zero(points: &[(C, C)]) -> Option<C> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mz: C = points.iter().map(|p| p.0).sum::<C>() / n;
    let mw: C = points.iter().map(|p| p.1).sum::<C>() / n;
    let mut szz = 0.0;
    let mut szw = C::new(0.0, 0.0);
    for (z, w) in points {
        let dz = z - mz;
        szz += dz.norm_sqr();
        szw += dz.conj() * (w - mw);
    }
    if szz == 0.0 {
        return None;
    }
    let b = szw / szz;
    if b.norm() == 0.0 {
        return None;
    }
    let a = mw - b * mz;
    Some(-a / b)
}

/// Pole report as JSON.
pub fn poles_json(report: &PoleReport) -> serde_json::Value {
    serde_json::to_value(report).expect("pole report serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_is_smooth_step() {
        assert_eq!(cutoff(-1.0), 0.0);
        assert_eq!(cutoff(0.5), 0.5);
        assert_eq!(cutoff(2.0), 1.0);
    }

    #[test]
    fn axial_matches_exp_series() {
        let f = AnalyticVector { gamma: 0.1, poly: vec![[1.0, 0.0], [0.0, 0.5]], mode: 0 };
        let z = C::new(3.0, 0.9);
        let arg = -0.1 * z * z;
        let mut term = C::new(1.0, 0.0);
        let mut sum = term;
        for k in 1..200 {
            term *= arg / k as f64;
            sum += term;
        }
        let want = sum * (1.0 + C::new(0.0, 0.5) * z);
        assert!((f.axial(z) - want).norm() <= 1e-11 * want.norm());
        assert!(f.decays());
    }

    #[test]
    fn linear_zero_recovers_pole() {
        let pole = C::new(0.85, -0.01);
        let pts: Vec<(C, C)> = [C::new(0.8, 0.0), C::new(0.9, 0.02), C::new(0.86, -0.03)]
            .iter()
            .map(|&z| (z, (z - pole) * C::new(2.0, 1.0)))
            .collect();
        assert!((linear_zero(&pts).unwrap() - pole).norm() < 1e-12);
    }

    #[test]
    fn mu_grid_points() {
        let g = MuGrid { re: [0.0, 1.0], im: [-1.0, 1.0], n_re: 3, n_im: 2 };
        let p = g.points();
        assert_eq!(p.len(), 6);
        assert_eq!(p[1], C::new(0.5, -1.0));
        assert_eq!(p[5], C::new(1.0, 1.0));
    }
}
