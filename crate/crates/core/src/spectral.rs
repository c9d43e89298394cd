//! Essential-spectrum rays, eigenvalue classification, parameter sweeps and
//! numerical-range sampling.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cross_section::{CrossSection, ThresholdSet};
use crate::discretization::{assemble_form, AssembledOperator, Grid, GridSpec};
use crate::eigen::{solve_shift_invert_with, ArnoldiOptions, EigenResult};
use crate::error::{Error, Result};
use crate::geometry::EndMetric;
use crate::scaling::ScalingProfile;

type C = Complex64;

/// Angle `−2 arg(1 + λ)` of every essential-spectrum ray.
pub fn ray_angle(lambda: C) -> f64 {
    -2.0 * (1.0 + lambda).arg()
}

/// Half-line `{ν + t e^{i angle} : t ≥ 0}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: f64,
    pub angle: f64,
}

impl Ray {
    pub fn direction(&self) -> C {
        C::from_polar(1.0, self.angle)
    }

    pub fn distance(&self, mu: C) -> f64 {
        let d = mu - self.origin;
        let dir = self.direction();
        let t = (d * dir.conj()).re;
        if t <= 0.0 {
            d.norm()
        } else {
            (d - dir * t).norm()
        }
    }

    /// Whether the ray meets the closed rectangle.
    pub fn hits(&self, w: &Window) -> bool {
        // Liang–Barsky clipping of t ∈ [0, ∞)
        let dir = self.direction();
        let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
        for (p, d, lo, hi) in [(self.origin, dir.re, w.re[0], w.re[1]), (0.0, dir.im, w.im[0], w.im[1])] {
            if d.abs() < 1e-15 {
                if p < lo || p > hi {
                    return false;
                }
            } else {
                let (a, b) = ((lo - p) / d, (hi - p) / d);
                t0 = t0.max(a.min(b));
                t1 = t1.min(a.max(b));
            }
        }
        t0 <= t1
    }
}

pub fn predict_rays(nu: &[f64], lambda: C) -> Vec<Ray> {
    let angle = ray_angle(lambda);
    nu.iter().map(|&origin| Ray { origin, angle }).collect()
}

/// One ray per threshold.
pub fn predict_essential(ts: &ThresholdSet, lambda: C) -> Vec<Ray> {
    predict_rays(&ts.values, lambda)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenClass {
    RayArtifact,
    DiscreteCandidate,
    ThresholdAdjacent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyTolerances {
    /// Relative ray tolerance: artifact if distance `< ray_tol (1 + |μ|)`.
    pub ray_tol: f64,
    pub thresh_tol: f64,
}

impl Default for ClassifyTolerances {
    fn default() -> Self {
        Self { ray_tol: 0.05, thresh_tol: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifiedEigen {
    pub mu: C,
    pub class: EigenClass,
    pub residual: f64,
    pub backward_error: f64,
    pub ray_distance: f64,
    pub nearest_ray: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralPortrait {
    pub nu: Vec<f64>,
    pub lambda: C,
    pub rays: Vec<Ray>,
    pub eigs: Vec<ClassifiedEigen>,
    pub tolerances: ClassifyTolerances,
}

/// Sorts computed eigenvalues into classes. A value within `thresh_tol` of a
/// threshold is `threshold_adjacent` even when it also lies near a ray.
pub fn classify(nu: &[f64], lambda: C, eig: &EigenResult, tol: ClassifyTolerances) -> SpectralPortrait {
    let rays = predict_rays(nu, lambda);
    let eigs = eig
        .pairs
        .iter()
        .map(|p| {
            let (nearest_ray, ray_distance) = rays
                .iter()
                .enumerate()
                .map(|(i, r)| (i, r.distance(p.mu)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap_or((0, f64::INFINITY));
            let class = if nu.iter().any(|&v| (p.mu - v).norm() < tol.thresh_tol) {
                EigenClass::ThresholdAdjacent
            } else if ray_distance < tol.ray_tol * (1.0 + p.mu.norm()) {
                EigenClass::RayArtifact
            } else {
                EigenClass::DiscreteCandidate
            };
            ClassifiedEigen {
                mu: p.mu,
                class,
                residual: p.residual,
                backward_error: p.backward_error,
                ray_distance,
                nearest_ray,
            }
        })
        .collect();
    SpectralPortrait { nu: nu.to_vec(), lambda, rays, eigs, tolerances: tol }
}

impl SpectralPortrait {
    pub fn of_class(&self, class: EigenClass) -> impl Iterator<Item = &ClassifiedEigen> {
        self.eigs.iter().filter(move |e| e.class == class)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "nu": self.nu,
            "lambda": [self.lambda.re, self.lambda.im],
            "rays": self.rays.iter().map(|r| json!({"origin": r.origin, "angle": r.angle})).collect::<Vec<_>>(),
            "eigs": self.eigs.iter().map(|e| json!({
                "mu": [e.mu.re, e.mu.im],
                "class": e.class,
                "res": e.residual,
                "backward_error": e.backward_error,
                "ray_distance": e.ray_distance,
            })).collect::<Vec<_>>(),
            "tolerances": self.tolerances,
        })
    }

    /// One row per eigenvalue.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re_mu,im_mu,class,residual,backward_error,ray_distance\n");
        for e in &self.eigs {
            let class = match e.class {
                EigenClass::RayArtifact => "ray_artifact",
                EigenClass::DiscreteCandidate => "discrete_candidate",
                EigenClass::ThresholdAdjacent => "threshold_adjacent",
            };
            out.push_str(&format!(
                "{:.12e},{:.12e},{class},{:.3e},{:.3e},{:.6e}\n",
                e.mu.re, e.mu.im, e.residual, e.backward_error, e.ray_distance
            ));
        }
        out
    }
}

/// Angle of the least-squares line through `(origin, 0)` fitted to `points`
/// (principal axis of the scatter about the origin), in `(−π/2, π/2]`.
pub fn fit_ray_angle(points: &[C], origin: f64) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = p - origin;
        sxx += d.re * d.re;
        sxy += d.re * d.im;
        syy += d.im * d.im;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Some(angle)
}

/// Rectangle in the `μ` plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub re: [f64; 2],
    pub im: [f64; 2],
}

impl Window {
    pub fn contains(&self, mu: C) -> bool {
        mu.re >= self.re[0] && mu.re <= self.re[1] && mu.im >= self.im[0] && mu.im <= self.im[1]
    }

    pub fn center(&self) -> C {
        C::new(0.5 * (self.re[0] + self.re[1]), 0.5 * (self.im[0] + self.im[1]))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.re[0] < self.re[1] && self.im[0] <= self.im[1]) {
            return Err(Error::Config("window bounds must be ascending".into()));
        }
        Ok(())
    }
}

/// Fixed part of a sweep: geometry, grid and solver settings.
#[derive(Clone, Debug)]
pub struct SweepJob {
    pub geometry: EndMetric,
    pub section: CrossSection,
    /// Thresholds used for the window/ray check.
    pub nu: Vec<f64>,
    pub grid: GridSpec,
    /// Eigenvalues requested per run, nearest the window center.
    pub count: usize,
    /// Matching tolerance; tracks further than 10× this are lost.
    pub drift_tol: f64,
    /// Also solve on the twice-refined grid to get a discretization estimate.
    pub richardson: bool,
    pub arnoldi: ArnoldiOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRun {
    pub lambda: [f64; 2],
    pub profile: String,
    pub grid: String,
    pub value: Option<[f64; 2]>,
    pub in_window: usize,
    pub max_backward_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub tracked: Option<[f64; 2]>,
    pub runs: Vec<SweepRun>,
    /// Largest pairwise distance between tracked values.
    pub max_drift: f64,
    /// `|μ_h − μ_{h/2}|` for the first run.
    pub grid_drift: Option<f64>,
    /// Richardson estimate of the coarse-grid error, `(4/3)|μ_h − μ_{h/2}|`.
    pub discretization_estimate: Option<f64>,
    pub lost: bool,
}

impl StabilityReport {
    /// Drift is within the discretization estimate and no run lost track.
    pub fn stable(&self) -> bool {
        !self.lost && self.discretization_estimate.is_none_or(|e| self.max_drift <= e)
    }
}

fn solve_window(
    job: &SweepJob,
    lambda: C,
    profile: &ScalingProfile,
    spec: &GridSpec,
    window: &Window,
) -> Result<(Vec<C>, f64)> {
    let grid = Grid::new(spec, &job.section)?;
    let op = assemble_form(&job.geometry, profile, lambda, &grid)?;
    let eig = solve_shift_invert_with(&op, window.center(), job.count, &job.arnoldi)?;
    let inside: Vec<C> = eig.values().into_iter().filter(|m| window.contains(*m)).collect();
    Ok((inside, eig.max_backward_error()))
}

fn sweep(job: &SweepJob, runs: &[(C, ScalingProfile)], window: &Window) -> Result<StabilityReport> {
    window.validate()?;
    if runs.is_empty() {
        return Err(Error::Config("a sweep needs at least one run".into()));
    }
    for (lambda, profile) in runs {
        profile.validate()?;
        if let Some(r) = predict_rays(&job.nu, *lambda).iter().find(|r| r.hits(window)) {
            return Err(Error::Config(format!(
                "window {:?}x{:?} meets the ray from {} at lambda = {lambda}",
                window.re, window.im, r.origin
            )));
        }
    }
    let solved: Vec<Result<(Vec<C>, f64)>> =
        runs.par_iter().map(|(l, p)| solve_window(job, *l, p, &job.grid, window)).collect();
    let solved: Vec<(Vec<C>, f64)> = solved.into_iter().collect::<Result<_>>()?;

    let center = window.center();
    let reference = solved[0].0.iter().copied().min_by(|a, b| (a - center).norm().total_cmp(&(b - center).norm()));
    let mut lost = reference.is_none();
    let mut values = Vec::with_capacity(runs.len());
    let mut out_runs = Vec::with_capacity(runs.len());
    for ((lambda, profile), (inside, be)) in runs.iter().zip(&solved) {
        let value = reference.and_then(|r| {
            inside
                .iter()
                .copied()
                .min_by(|a, b| (a - r).norm().total_cmp(&(b - r).norm()))
                .filter(|m| (m - r).norm() <= 10.0 * job.drift_tol)
        });
        if value.is_none() {
            lost = true;
        }
        values.extend(value);
        out_runs.push(SweepRun {
            lambda: [lambda.re, lambda.im],
            profile: profile.id(),
            grid: format!("{}x{}@{}", job.grid.nx, job.grid.ny, job.grid.x_max),
            value: value.map(|v| [v.re, v.im]),
            in_window: inside.len(),
            max_backward_error: *be,
        });
    }
    let mut max_drift = 0.0f64;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            max_drift = max_drift.max((values[i] - values[j]).norm());
        }
    }
    let (mut grid_drift, mut estimate) = (None, None);
    if job.richardson {
        if let Some(r) = reference {
            let fine = job.grid.refined(2);
            let (inside, _) = solve_window(job, runs[0].0, &runs[0].1, &fine, window)?;
            if let Some(f) = inside.iter().copied().min_by(|a, b| (a - r).norm().total_cmp(&(b - r).norm())) {
                let d = (f - r).norm();
                grid_drift = Some(d);
                estimate = Some(4.0 / 3.0 * d);
            } else {
                lost = true;
            }
        }
    }
    Ok(StabilityReport {
        tracked: reference.map(|r| [r.re, r.im]),
        runs: out_runs,
        max_drift,
        grid_drift,
        discretization_estimate: estimate,
        lost,
    })
}

/// Tracks the eigenvalue nearest the window center across `λ` values.
pub fn sweep_lambda(
    job: &SweepJob,
    profile: &ScalingProfile,
    lambdas: &[C],
    window: &Window,
) -> Result<StabilityReport> {
    let runs: Vec<(C, ScalingProfile)> = lambdas.iter().map(|&l| (l, profile.clone())).collect();
    sweep(job, &runs, window)
}

/// Tracks the eigenvalue nearest the window center across scaling profiles.
pub fn sweep_profile(
    job: &SweepJob,
    profiles: &[ScalingProfile],
    lambda: C,
    window: &Window,
) -> Result<StabilityReport> {
    let runs: Vec<(C, ScalingProfile)> = profiles.iter().map(|p| (lambda, p.clone())).collect();
    sweep(job, &runs, window)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SectorReport {
    pub gamma: f64,
    pub samples: usize,
    /// `max |arg(uᴴAu + γ uᴴMu)|`.
    pub max_arg: f64,
    /// Range of `Re(uᴴAu) / uᴴMu`.
    pub re_min: f64,
    pub re_max: f64,
}

impl SectorReport {
    pub fn pass(&self) -> bool {
        self.max_arg < std::f64::consts::FRAC_PI_2
    }
}

/// Samples the shifted numerical range on random `M`-normalized vectors.
pub fn sector_check(op: &AssembledOperator, gamma: f64, samples: usize, seed: u64) -> Result<SectorReport> {
    if !(gamma >= 0.0) {
        return Err(Error::Config(format!("gamma_shift must be >= 0, got {gamma}")));
    }
    let n = op.dofs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_arg = 0.0f64;
    let (mut re_min, mut re_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..samples {
        let u: Vec<C> = (0..n).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let mn = op.m_norm(&u);
        let u: Vec<C> = u.iter().map(|a| a / mn).collect();
        let au = op.a.matvec(&u);
        let q: C = u.iter().zip(&au).map(|(a, b)| a.conj() * b).sum();
        let w = q + gamma;
        max_arg = max_arg.max(w.arg().abs());
        re_min = re_min.min(q.re);
        re_max = re_max.max(q.re);
    }
    Ok(SectorReport { gamma, samples, max_arg, re_min, re_max })
}

/// `sector_check` with the shift chosen from the assembly's coefficient bounds.
pub fn sector_check_auto(op: &AssembledOperator, samples: usize, seed: u64) -> Result<SectorReport> {
    sector_check(op, op.stats.coercivity_shift(), samples, seed)
}
