//! Complex scaling `x ↦ x + λ s_R(x)` of the cylindrical end.
//!
//! Provides the ramp profile `s_R`, the deformed metric
//! `g_λ = diag(1+λs', 1) g(x + λ s, y) diag(1+λs', 1)`, and the density
//! `ρ_λ = sqrt(det g₀ / det g_λ)` relating deformed and Riemannian volumes.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{EndMetric, Sym2};

type C = Complex64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ramp {
    /// `s' = 6t⁵ − 15t⁴ + 10t³` on `t = (x − R − 1)/w`.
    Quintic,
    /// Nondecreasing samples of `s'` on a uniform grid of `t ∈ [0, 1]`,
    /// starting at 0 and ending at 1, linearly interpolated.
    Table { values: Vec<f64> },
    /// `s(x) = x` everywhere; a test mode that scales the whole axis.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingProfile {
    #[serde(rename = "R")]
    pub onset: f64,
    #[serde(rename = "w")]
    pub width: f64,
    #[serde(default = "default_ramp")]
    pub ramp: Ramp,
}

fn default_ramp() -> Ramp {
    Ramp::Quintic
}

impl ScalingProfile {
    pub fn quintic(onset: f64, width: f64) -> Result<Self> {
        let p = Self { onset, width, ramp: Ramp::Quintic };
        p.validate()?;
        Ok(p)
    }

    /// `s(x) = x`: the whole axis is scaled.
    pub fn uniform() -> Self {
        Self { onset: 0.0, width: 1.0, ramp: Ramp::Uniform }
    }

    /// The two stock profiles, `w = 2` and `w = 6`, at onset `R`.
    pub fn stock(onset: f64) -> [ScalingProfile; 2] {
        [
            Self { onset, width: 2.0, ramp: Ramp::Quintic },
            Self { onset, width: 6.0, ramp: Ramp::Quintic },
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.onset >= 0.0) {
            return Err(Error::Config(format!("scaling.R must be >= 0, got {}", self.onset)));
        }
        if !(self.width > 0.0) {
            return Err(Error::Config(format!("scaling.w must be > 0, got {}", self.width)));
        }
        if let Ramp::Table { values } = &self.ramp {
            let ok = values.len() >= 2
                && values[0] == 0.0
                && *values.last().unwrap() == 1.0
                && values.windows(2).all(|w| w[0] <= w[1]);
            if !ok {
                return Err(Error::Config(
                    "scaling.ramp.values must rise monotonically from 0 to 1".into(),
                ));
            }
        }
        Ok(())
    }

    /// Start of the scaled region, `R + 1`.
    pub fn start(&self) -> f64 {
        match self.ramp {
            Ramp::Uniform => 0.0,
            _ => self.onset + 1.0,
        }
    }

    /// Point from which `s' = 1`.
    pub fn full(&self) -> f64 {
        match self.ramp {
            Ramp::Uniform => 0.0,
            _ => self.onset + 1.0 + self.width,
        }
    }

    /// `(s_R(x), s'_R(x))`.
    pub fn value(&self, x: f64) -> (f64, f64) {
        if let Ramp::Uniform = self.ramp {
            return (x, 1.0);
        }
        let w = self.width;
        let t = (x - self.onset - 1.0) / w;
        if t <= 0.0 {
            return (0.0, 0.0);
        }
        let (area, slope) = match &self.ramp {
            Ramp::Quintic => {
                if t >= 1.0 {
                    (0.5, 1.0)
                } else {
                    let t3 = t * t * t;
                    (t3 * t * (t * t - 3.0 * t + 2.5), t3 * (t * (6.0 * t - 15.0) + 10.0))
                }
            }
            Ramp::Table { values } => table_ramp(values, t),
            Ramp::Uniform => unreachable!(),
        };
        if t >= 1.0 {
            (w * area + (x - self.onset - 1.0 - w), 1.0)
        } else {
            (w * area, slope)
        }
    }

    /// Short identifier used in reports.
    pub fn id(&self) -> String {
        match self.ramp {
            Ramp::Quintic => format!("quintic(R={},w={})", self.onset, self.width),
            Ramp::Table { .. } => format!("table(R={},w={})", self.onset, self.width),
            Ramp::Uniform => "uniform".into(),
        }
    }
}

/// Area under the piecewise-linear ramp on `[0, min(t,1)]` and its value at `t`.
fn table_ramp(values: &[f64], t: f64) -> (f64, f64) {
    let n = values.len() - 1;
    let dt = 1.0 / n as f64;
    let tc = t.min(1.0);
    let mut area = 0.0;
    for k in 0..n {
        let t0 = k as f64 * dt;
        if tc <= t0 {
            break;
        }
        let t1 = (t0 + dt).min(tc);
        let f = |s: f64| values[k] + (values[k + 1] - values[k]) * (s - t0) / dt;
        area += 0.5 * (f(t0) + f(t1)) * (t1 - t0);
    }
    let slope = if t >= 1.0 {
        1.0
    } else {
        let k = ((t / dt).floor() as usize).min(n - 1);
        values[k] + (values[k + 1] - values[k]) * (t - k as f64 * dt) / dt
    };
    (area, slope)
}

/// `(s_R(x), s'_R(x))`.
pub fn ramp_value(p: &ScalingProfile, x: f64) -> (f64, f64) {
    p.value(x)
}

/// Checks `|λ| < sin α < 1/√2`.
pub fn check_lambda(lambda: C, alpha: f64) -> Result<()> {
    let cap = alpha.sin();
    if !(cap < FRAC_1_SQRT_2) {
        return Err(Error::Config(format!("sin(alpha) = {cap} must be < 1/sqrt(2)")));
    }
    if !(lambda.norm() < cap) {
        return Err(Error::Config(format!(
            "|lambda| = {} must be < sin(alpha) = {cap}",
            lambda.norm()
        )));
    }
    Ok(())
}

/// Far-field matrix `diag((1 + λ s')², h)`.
pub fn far_field_matrix(lambda: C, s_prime: f64, h: f64) -> Sym2 {
    let f = 1.0 + lambda * s_prime;
    Sym2::diag(f * f, C::new(h, 0.0))
}

/// `diag(1+λs', 1) · g(x + λ s, y) · diag(1+λs', 1)`.
pub fn deformed_metric(geom: &EndMetric, p: &ScalingProfile, lambda: C, x: f64, y: f64) -> Result<Sym2> {
    let (s, sp) = p.value(x);
    let z = x + lambda * s;
    Ok(geom.metric_at(z, y)?.scale_axial(1.0 + lambda * sp))
}

/// Everything the assembly needs at one point of the cylinder.
#[derive(Clone, Copy, Debug)]
pub struct FieldPoint {
    pub g: Sym2,
    pub ginv: Sym2,
    pub det: C,
    /// `det g₀(x, y)`, real and positive.
    pub det0: f64,
    pub rho: C,
}

const BRANCH_STEP: f64 = 0.05;
const GRAD_STEP: f64 = 1e-6;

/// The deformed metric, its inverse and the density for fixed geometry,
/// profile and λ. The sign of `ρ_λ` is tracked along increasing `x` once at
/// construction (seeded at `ρ = 1` in the unscaled region); lookups pick the
/// square-root branch closest to that track.
#[derive(Clone, Debug)]
pub struct DeformedMetricField<'a> {
    geom: &'a EndMetric,
    profile: &'a ScalingProfile,
    lambda: C,
    track: Vec<C>,
}

impl<'a> DeformedMetricField<'a> {
    /// `x_extent` is the axial length over which the branch is tracked.
    pub fn new(geom: &'a EndMetric, profile: &'a ScalingProfile, lambda: C, x_extent: f64) -> Result<Self> {
        check_lambda(lambda, geom.alpha())?;
        profile.validate()?;
        let mut field = Self { geom, profile, lambda, track: Vec::new() };
        let n = (x_extent.max(1.0) / BRANCH_STEP).ceil() as usize + 1;
        let mut track = Vec::with_capacity(n);
        let mut prev = C::new(1.0, 0.0);
        for k in 0..n {
            let x = k as f64 * BRANCH_STEP;
            let r = field.rho_raw(x, 0.0)?;
            let r = if (r - prev).norm() <= (-r - prev).norm() { r } else { -r };
            track.push(r);
            prev = r;
        }
        field.track = track;
        Ok(field)
    }

    pub fn lambda(&self) -> C {
        self.lambda
    }

    pub fn geometry(&self) -> &EndMetric {
        self.geom
    }

    pub fn profile(&self) -> &ScalingProfile {
        self.profile
    }

    fn rho_raw(&self, x: f64, y: f64) -> Result<C> {
        let p = self.raw(x, y)?;
        Ok((C::new(p.0, 0.0) / p.1).sqrt())
    }

    // (det g0, det g_lambda, g_lambda)
    fn raw(&self, x: f64, y: f64) -> Result<(f64, C, Sym2)> {
        let g0 = self.geom.metric_at(C::new(x, 0.0), y)?;
        let g = deformed_metric(self.geom, self.profile, self.lambda, x, y)?;
        let det0 = g0.det().re;
        let det = g.det();
        if !(det.norm() > 1e-14 * det0.abs()) || !det.is_finite() {
            return Err(Error::Degeneracy { x, y, lambda: self.lambda });
        }
        Ok((det0, det, g))
    }

    fn tracked(&self, x: f64) -> C {
        let t = (x / BRANCH_STEP).max(0.0);
        let k = t.floor() as usize;
        if k + 1 >= self.track.len() {
            return *self.track.last().unwrap();
        }
        let f = t - k as f64;
        self.track[k] * (1.0 - f) + self.track[k + 1] * f
    }

    fn branch(&self, r: C, x: f64) -> C {
        let reference = self.tracked(x);
        if (r - reference).norm() <= (-r - reference).norm() {
            r
        } else {
            -r
        }
    }

    pub fn at(&self, x: f64, y: f64) -> Result<FieldPoint> {
        let (det0, det, g) = self.raw(x, y)?;
        let ginv = g.inverse().ok_or(Error::Degeneracy { x, y, lambda: self.lambda })?;
        let rho = if x < self.profile.start() {
            C::new(1.0, 0.0)
        } else {
            self.branch((C::new(det0, 0.0) / det).sqrt(), x)
        };
        Ok(FieldPoint { g, ginv, det, det0, rho })
    }

    pub fn metric(&self, x: f64, y: f64) -> Result<Sym2> {
        deformed_metric(self.geom, self.profile, self.lambda, x, y)
    }

    /// `ρ_λ(x, y)`.
    pub fn rho(&self, x: f64, y: f64) -> Result<C> {
        Ok(self.at(x, y)?.rho)
    }

    /// `∇ρ_λ / ρ_λ` by central differences (one-sided at `x = 0`).
    pub fn log_rho_grad(&self, x: f64, y: f64) -> Result<[C; 2]> {
        if x + GRAD_STEP < self.profile.start() {
            // ρ ≡ 1 on the unscaled part
            return Ok([C::new(0.0, 0.0); 2]);
        }
        let rho = self.rho(x, y)?;
        let h = GRAD_STEP;
        let dx = if x > h {
            (self.rho(x + h, y)? - self.rho(x - h, y)?) / (2.0 * h)
        } else {
            (self.rho(x + h, y)? - rho) / h
        };
        let dy = (self.rho(x, y + h)? - self.rho(x, y - h)?) / (2.0 * h);
        Ok([dx / rho, dy / rho])
    }

    /// Realized bounds `c₁ ≤ |ρ_λ| ≤ c₂` over the sample points.
    pub fn rho_bounds(&self, xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for &x in xs {
            for &y in ys {
                let r = self.rho(x, y)?.norm();
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        Ok((lo, hi))
    }

    /// `max ‖g_λ⁻¹ − (ḡ^∞_λ)⁻¹‖` over the sample points.
    pub fn far_field_deviation(&self, xs: &[f64], ys: &[f64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for &x in xs {
            let (_, sp) = self.profile.value(x);
            for &y in ys {
                let ginv = self.at(x, y)?.ginv;
                let h = self.geom.limit(y).yy.re;
                let far = far_field_matrix(self.lambda, sp, h).inverse().expect("far field is invertible");
                worst = worst.max(ginv.sub(&far).norm());
            }
        }
        Ok(worst)
    }
}

/// Sampled sector of the pointwise form `ξ̄ᵀ g_λ⁻¹ ξ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointwiseSector {
    pub max_arg: f64,
    /// Largest `δ` with `δ|ξ|² ≤ Re(ξ̄ᵀ g_λ⁻¹ ξ) ≤ δ⁻¹|ξ|²` on the samples.
    pub delta: f64,
    pub samples: usize,
}

/// Below this margin to `π/2` the sampled sector triggers a warning: the
/// onset `R` is probably too small for the geometry.
pub const SECTOR_WARN_MARGIN: f64 = 0.1;

pub fn sample_pointwise_sector(
    field: &DeformedMetricField<'_>,
    x_range: (f64, f64),
    y_range: (f64, f64),
    samples: usize,
    seed: u64,
) -> Result<PointwiseSector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_arg = 0.0f64;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for _ in 0..samples {
        let x = rng.gen_range(x_range.0..=x_range.1);
        let y = rng.gen_range(y_range.0..=y_range.1);
        let xi = [
            C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        ];
        let n2 = xi[0].norm_sqr() + xi[1].norm_sqr();
        let ginv = field.at(x, y)?.ginv;
        let q = ginv.pair([xi[0].conj(), xi[1].conj()], xi) / n2;
        max_arg = max_arg.max(q.arg().abs());
        lo = lo.min(q.re);
        hi = hi.max(q.re);
    }
    if std::f64::consts::FRAC_PI_2 - max_arg < SECTOR_WARN_MARGIN {
        log::warn!(
            "sampled sector margin {:.3} rad is below {SECTOR_WARN_MARGIN}; consider a larger onset R",
            std::f64::consts::FRAC_PI_2 - max_arg
        );
    }
    Ok(PointwiseSector { max_arg, delta: lo.min(1.0 / hi), samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_section::{CrossSection, SideBc};
    use std::f64::consts::PI;

    fn product() -> EndMetric {
        EndMetric::product(&CrossSection::interval(PI, SideBc::Dirichlet).unwrap(), 0.6).unwrap()
    }

    #[test]
    fn ramp_values() {
        let p = ScalingProfile::quintic(10.0, 2.0).unwrap();
        assert_eq!(p.value(10.5), (0.0, 0.0));
        let (_, sp) = p.value(12.0);
        assert!((sp - 0.5).abs() < 1e-15);
        let (s, sp) = p.value(20.0);
        assert_eq!(sp, 1.0);
        assert!((s - 8.0).abs() < 1e-12);
    }

    #[test]
    fn ramp_antiderivative_matches_quadrature() {
        let p = ScalingProfile::quintic(3.0, 2.5).unwrap();
        let n = 20000;
        let (a, b) = (0.0, 9.0);
        let h = (b - a) / n as f64;
        let mut acc = 0.0;
        for k in 0..n {
            let x = a + (k as f64 + 0.5) * h;
            acc += p.value(x).1 * h;
        }
        assert!((acc - p.value(b).0).abs() < 1e-7);
    }

    #[test]
    fn table_ramp_reproduces_linear_blend() {
        let p = ScalingProfile {
            onset: 0.0,
            width: 2.0,
            ramp: Ramp::Table { values: vec![0.0, 0.5, 1.0] },
        };
        p.validate().unwrap();
        // s' = t on [0,1] => s = w t²/2
        let (s, sp) = p.value(2.0);
        assert!((sp - 0.5).abs() < 1e-15 && (s - 0.25).abs() < 1e-15);
        let (s, sp) = p.value(5.0);
        assert!(sp == 1.0 && (s - (1.0 + 2.0)).abs() < 1e-14);
        let bad = ScalingProfile { onset: 0.0, width: 1.0, ramp: Ramp::Table { values: vec![0.0, 0.7, 0.6, 1.0] } };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn lambda_disk() {
        assert!(check_lambda(C::new(0.0, 0.3), 0.5).is_ok());
        assert!(check_lambda(C::new(0.0, 0.5), 0.5).is_err());
        assert!(check_lambda(C::new(0.0, 0.1), 0.8).is_err());
    }

    #[test]
    fn far_field_examples() {
        let m = far_field_matrix(C::new(0.2, 0.0), 1.0, 1.0);
        assert!((m.xx - C::new(1.44, 0.0)).norm() < 1e-15 && m.yy == C::new(1.0, 0.0));
        let m = far_field_matrix(C::new(0.0, 0.3), 0.0, 2.0);
        assert!(m.xx == C::new(1.0, 0.0) && m.yy == C::new(2.0, 0.0));
        let m = far_field_matrix(C::new(0.0, 0.25), 1.0, 1.0);
        assert!((m.xx - C::new(0.9375, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn deformed_metric_examples() {
        let g = product();
        let p = ScalingProfile::quintic(10.0, 2.0).unwrap();
        let m = deformed_metric(&g, &p, C::new(0.0, 0.3), 20.0, 1.0).unwrap();
        assert!((m.xx - C::new(0.91, 0.6)).norm() < 1e-14);
        assert_eq!(m.yy, C::new(1.0, 0.0));
        let m0 = deformed_metric(&g, &p, C::new(0.0, 0.0), 20.0, 1.0).unwrap();
        assert_eq!(m0, Sym2::IDENTITY);
    }

    #[test]
    fn density_examples() {
        let g = product();
        let p = ScalingProfile::quintic(10.0, 2.0).unwrap();
        let f = DeformedMetricField::new(&g, &p, C::new(0.0, 0.3), 40.0).unwrap();
        let rho = f.rho(20.0, 1.0).unwrap();
        assert!((rho - C::new(0.917_431_192_660_550_5, -0.275_229_357_798_165_1)).norm() < 1e-12);
        assert_eq!(f.rho(5.0, 1.0).unwrap(), C::new(1.0, 0.0));
    }

    #[test]
    fn density_reflection() {
        let g = crate::geometry::pullback_from_phi(&crate::geometry::PhiSpec::Widen, 0.6).unwrap();
        let p = ScalingProfile::quintic(2.0, 2.0).unwrap();
        let lam = C::new(0.1, 0.3);
        let up = DeformedMetricField::new(&g, &p, lam, 30.0).unwrap();
        let down = DeformedMetricField::new(&g, &p, lam.conj(), 30.0).unwrap();
        for x in [0.5, 3.2, 4.7, 9.0, 25.0] {
            for y in [0.0, 1.0, 3.0] {
                let d = up.rho(x, y).unwrap().conj() - down.rho(x, y).unwrap();
                assert!(d.norm() < 1e-12);
                let m = up.metric(x, y).unwrap().conj().sub(&down.metric(x, y).unwrap());
                assert!(m.norm() < 1e-12);
            }
        }
    }
}
