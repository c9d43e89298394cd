//! Axial-analytic end metrics `g(z, y)` on the half-cylinder `R₊ × Ω`.
//!
//! A metric is either the product metric `dx² + h(y) dy²` or the pullback of
//! the Euclidean metric by a diffeomorphism `φ(x, y)` whose Jacobian extends
//! analytically in `x` to the sector `|arg z| < α`.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cross_section::CrossSection;
use crate::error::{Error, Result};
use crate::expr::Expr;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Complex symmetric 2×2 matrix `[[xx, xy], [xy, yy]]` in the `(x, y)` frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sym2 {
    pub xx: C,
    pub xy: C,
    pub yy: C,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 { xx: ONE, xy: ZERO, yy: ONE };

    pub fn new(xx: C, xy: C, yy: C) -> Self {
        Self { xx, xy, yy }
    }

    pub fn diag(xx: C, yy: C) -> Self {
        Self { xx, xy: ZERO, yy }
    }

    pub fn det(&self) -> C {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn inverse(&self) -> Option<Sym2> {
        let d = self.det();
        if d.norm() == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Sym2 { xx: self.yy / d, xy: -self.xy / d, yy: self.xx / d })
    }

    /// `diag(f, 1) · self · diag(f, 1)`.
    pub fn scale_axial(&self, f: C) -> Sym2 {
        Sym2 { xx: self.xx * f * f, xy: self.xy * f, yy: self.yy }
    }

    /// Bilinear (not sesquilinear) pairing `aᵀ · self · b`.
    pub fn pair(&self, a: [C; 2], b: [C; 2]) -> C {
        a[0] * (self.xx * b[0] + self.xy * b[1]) + a[1] * (self.xy * b[0] + self.yy * b[1])
    }

    pub fn apply(&self, v: [C; 2]) -> [C; 2] {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    pub fn conj(&self) -> Sym2 {
        Sym2 { xx: self.xx.conj(), xy: self.xy.conj(), yy: self.yy.conj() }
    }

    pub fn sub(&self, o: &Sym2) -> Sym2 {
        Sym2 { xx: self.xx - o.xx, xy: self.xy - o.xy, yy: self.yy - o.yy }
    }

    pub fn scale(&self, s: f64) -> Sym2 {
        Sym2 { xx: self.xx * s, xy: self.xy * s, yy: self.yy * s }
    }

    /// Frobenius norm `sqrt(Σ |g_lm|²)`.
    pub fn norm(&self) -> f64 {
        (self.xx.norm_sqr() + 2.0 * self.xy.norm_sqr() + self.yy.norm_sqr()).sqrt()
    }

    /// Eigenvalues of a real symmetric matrix (imaginary parts ignored).
    pub fn real_eigenvalues(&self) -> (f64, f64) {
        let (a, b, d) = (self.xx.re, self.xy.re, self.yy.re);
        let m = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (m - r, m + r)
    }
}

/// The diffeomorphism whose pullback defines the end metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiSpec {
    Identity,
    /// `φ(x, y) = (x, (x+3)^β a + (1 + (x+3)^γ) y)`, a bent end.
    Bend { a: f64, beta: f64, gamma: f64 },
    /// `φ(x, y) = (∫₀ˣ 1 + 1/log(t+4) dt, (1 + 1/log(x+5)) y)`, a slowly
    /// stabilizing end.
    Widen,
    /// Jacobian entries `jacobian[l][m] = ∂φ_l/∂x_m` as expressions in `z`
    /// and `y`; `phi` is informational.
    Custom {
        jacobian: [[String; 2]; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phi: Option<[String; 2]>,
    },
}

impl PhiSpec {
    pub fn validate(&self) -> Result<()> {
        if let PhiSpec::Bend { beta, gamma, a } = self {
            if !(*beta < 1.0) {
                return Err(Error::Config(format!("geometry.params.beta must be < 1, got {beta}")));
            }
            if !(*gamma < 0.0) {
                return Err(Error::Config(format!("geometry.params.gamma must be < 0, got {gamma}")));
            }
            if !a.is_finite() {
                return Err(Error::Config("geometry.params.a must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Product(CrossSection),
    Bend { a: f64, beta: f64, gamma: f64 },
    Widen,
    Custom(Box<[[Expr; 2]; 2]>),
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Product,
    Pullback,
    Custom,
}

/// An axial-analytic end metric evaluable on the sector `|arg z| < alpha`.
#[derive(Clone, Debug)]
pub struct EndMetric {
    kind: Kind,
    alpha: f64,
    id: String,
}

impl EndMetric {
    /// Product metric `dx² + h(y) dy²` of the given cross-section.
    pub fn product(cs: &CrossSection, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { kind: Kind::Product(cs.clone()), alpha, id: "product".into() })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Short identifier used in reports.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn provenance(&self) -> Provenance {
        match self.kind {
            Kind::Product(_) => Provenance::Product,
            Kind::Custom(_) => Provenance::Custom,
            _ => Provenance::Pullback,
        }
    }

    pub fn is_product(&self) -> bool {
        matches!(self.kind, Kind::Product(_) | Kind::Identity)
    }

    pub fn in_sector(&self, z: C) -> bool {
        z.re >= 0.0 && z.arg().abs() < self.alpha
    }

    /// `g(z, y)`; refuses points outside the sector.
    pub fn metric_at(&self, z: C, y: f64) -> Result<Sym2> {
        if !self.in_sector(z) {
            return Err(Error::Domain { z, alpha: self.alpha });
        }
        match &self.kind {
            Kind::Product(cs) => Ok(Sym2::diag(ONE, C::new(cs.h(y), 0.0))),
            Kind::Identity => Ok(Sym2::IDENTITY),
            _ => {
                let j = self.jacobian(z, y);
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                if det.norm() < 1e-14 || !det.is_finite() {
                    return Err(Error::Geometry(format!("singular Jacobian at z = {z}, y = {y}")));
                }
                Ok(pullback(&j))
            }
        }
    }

    /// Limit product metric `diag(1, h(y))`.
    pub fn limit(&self, y: f64) -> Sym2 {
        match &self.kind {
            Kind::Product(cs) => Sym2::diag(ONE, C::new(cs.h(y), 0.0)),
            _ => Sym2::IDENTITY,
        }
    }

    /// Jacobian `φ'[l][m] = ∂φ_l/∂x_m` of a pullback geometry; the identity
    /// for product metrics.
    pub fn jacobian(&self, z: C, y: f64) -> [[C; 2]; 2] {
        let y = C::new(y, 0.0);
        match &self.kind {
            Kind::Product(_) | Kind::Identity => [[ONE, ZERO], [ZERO, ONE]],
            Kind::Bend { a, beta, gamma } => {
                let s = z + 3.0;
                let t_x = *a * *beta * s.powf(beta - 1.0) + *gamma * s.powf(gamma - 1.0) * y;
                let t_y = ONE + s.powf(*gamma);
                [[ONE, ZERO], [t_x, t_y]]
            }
            Kind::Widen => {
                let l4 = (z + 4.0).ln();
                let l5 = (z + 5.0).ln();
                [[ONE + ONE / l4, ZERO], [-y / ((z + 5.0) * l5 * l5), ONE + ONE / l5]]
            }
            Kind::Custom(e) => [
                [e[0][0].eval(z, y.re), e[0][1].eval(z, y.re)],
                [e[1][0].eval(z, y.re), e[1][1].eval(z, y.re)],
            ],
        }
    }

    /// The map `φ(z, y)` itself for built-in pullbacks (used to cross-check
    /// the closed-form Jacobians). `None` for custom geometries.
    pub fn phi(&self, z: C, y: f64) -> Option<[C; 2]> {
        let yc = C::new(y, 0.0);
        match &self.kind {
            Kind::Product(_) | Kind::Identity => Some([z, yc]),
            Kind::Bend { a, beta, gamma } => {
                let s = z + 3.0;
                Some([z, *a * s.powf(*beta) + (ONE + s.powf(*gamma)) * yc])
            }
            Kind::Widen => {
                let f = |t: C| ONE + ONE / (t + 4.0).ln();
                Some([segment_integral(f, z), (ONE + ONE / (z + 5.0).ln()) * yc])
            }
            Kind::Custom(_) => None,
        }
    }
}

fn pullback(j: &[[C; 2]; 2]) -> Sym2 {
    let col = |m: usize, n: usize| j[0][m] * j[0][n] + j[1][m] * j[1][n];
    Sym2 { xx: col(0, 0), xy: col(0, 1), yy: col(1, 1) }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < FRAC_PI_4) {
        return Err(Error::Config(format!("geometry.alpha must lie in (0, pi/4), got {alpha}")));
    }
    Ok(())
}

/// `∫₀ᶻ f(t) dt` along the straight segment, composite Gauss–Legendre.
fn segment_integral(f: impl Fn(C) -> C, z: C) -> C {
    const NODES: [f64; 8] = [
        -0.960_289_856_497_536_3,
        -0.796_666_477_413_626_7,
        -0.525_532_409_916_329,
        -0.183_434_642_495_649_8,
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const WEIGHTS: [f64; 8] = [
        0.101_228_536_290_376_26,
        0.222_381_034_453_374_47,
        0.313_706_645_877_887_3,
        0.362_683_783_378_362,
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_47,
        0.101_228_536_290_376_26,
    ];
    let pieces = 32usize.max((z.norm() * 4.0).ceil() as usize);
    let mut acc = ZERO;
    for p in 0..pieces {
        let a = p as f64 / pieces as f64;
        let b = (p + 1) as f64 / pieces as f64;
        let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
        for (n, w) in NODES.iter().zip(WEIGHTS) {
            acc += f(z * (m + r * n)) * (w * r);
        }
    }
    acc * z
}

/// Geometry block of the run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Product,
    Dif1,
    Dif2,
    Custom,
}

#[derive(Deserialize)]
struct BendParams {
    a: f64,
    beta: f64,
    gamma: f64,
}

#[derive(Deserialize)]
struct CustomParams {
    jacobian: [[String; 2]; 2],
    #[serde(default)]
    phi: Option<[String; 2]>,
}

impl GeometryConfig {
    pub fn build(&self, cs: &CrossSection) -> Result<EndMetric> {
        let params = |what: &str| {
            self.params
                .clone()
                .ok_or_else(|| Error::Config(format!("geometry.params required for {what}")))
        };
        let spec = match self.kind {
            GeometryKind::Product => return EndMetric::product(cs, self.alpha),
            GeometryKind::Dif1 => {
                let p: BendParams = serde_json::from_value(params("dif1")?)
                    .map_err(|e| Error::Config(format!("geometry.params: {e}")))?;
                PhiSpec::Bend { a: p.a, beta: p.beta, gamma: p.gamma }
            }
            GeometryKind::Dif2 => PhiSpec::Widen,
            GeometryKind::Custom => {
                let p: CustomParams = serde_json::from_value(params("custom")?)
                    .map_err(|e| Error::Config(format!("geometry.params: {e}")))?;
                PhiSpec::Custom { jacobian: p.jacobian, phi: p.phi }
            }
        };
        if !cs.is_flat() {
            return Err(Error::Config(
                "pullback geometries require a flat cross_section.metric".into(),
            ));
        }
        pullback_from_phi(&spec, self.alpha)
    }
}

/// End metric `φ'(z, y)ᵀ φ'(z, y)` from a diffeomorphism specification.
pub fn pullback_from_phi(spec: &PhiSpec, alpha: f64) -> Result<EndMetric> {
    spec.validate()?;
    check_alpha(alpha)?;
    let (kind, id) = match spec {
        PhiSpec::Identity => (Kind::Identity, "identity".to_string()),
        PhiSpec::Bend { a, beta, gamma } => (
            Kind::Bend { a: *a, beta: *beta, gamma: *gamma },
            format!("dif1(a={a},beta={beta},gamma={gamma})"),
        ),
        PhiSpec::Widen => (Kind::Widen, "dif2".to_string()),
        PhiSpec::Custom { jacobian, .. } => {
            let parse = |s: &String| Expr::parse(s);
            let e = [
                [parse(&jacobian[0][0])?, parse(&jacobian[0][1])?],
                [parse(&jacobian[1][0])?, parse(&jacobian[1][1])?],
            ];
            (Kind::Custom(Box::new(e)), "custom".to_string())
        }
    };
    Ok(EndMetric { kind, alpha, id })
}

/// Decay of `g - ḡ` along one ray.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RayDecay {
    pub arg: f64,
    pub radii: Vec<f64>,
    /// `r(z) = max_y Σ ‖∂^q (g − ḡ)‖` at each radius.
    pub r: Vec<f64>,
    /// `r` is nonincreasing within 10 % slack.
    pub nonincreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilizationReport {
    pub rays: Vec<RayDecay>,
}

impl StabilizationReport {
    pub fn all_nonincreasing(&self) -> bool {
        self.rays.iter().all(|r| r.nonincreasing)
    }
}

const AXIAL_STEP: f64 = 1e-4;

/// Samples the stabilization quantity on each ray `arg z = θ` at the given
/// radii. Derivatives use central differences: step `1e-4` along the axis and
/// one cell of `y_samples` across.
pub fn check_stabilization(
    geom: &EndMetric,
    rays: &[f64],
    radii: &[f64],
    y_samples: &[f64],
) -> Result<StabilizationReport> {
    if radii.len() < 3 || radii.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("stabilization radii must be ascending with at least 3 values".into()));
    }
    if y_samples.len() < 2 {
        return Err(Error::Config("stabilization needs at least 2 y samples".into()));
    }
    let diff = |z: C, y: f64| -> Result<Sym2> { Ok(geom.metric_at(z, y)?.sub(&geom.limit(y))) };
    let mut out = Vec::with_capacity(rays.len());
    for &theta in rays {
        let dir = C::from_polar(1.0, theta);
        let mut r = Vec::with_capacity(radii.len());
        for &rad in radii {
            let z = dir * rad;
            if !geom.in_sector(z - AXIAL_STEP) || !geom.in_sector(z + AXIAL_STEP) {
                return Err(Error::Domain { z, alpha: geom.alpha() });
            }
            let mut worst = 0.0f64;
            for (k, &y) in y_samples.iter().enumerate() {
                let d0 = diff(z, y)?;
                let dx = diff(z + AXIAL_STEP, y)?.sub(&diff(z - AXIAL_STEP, y)?).scale(0.5 / AXIAL_STEP);
                let (lo, hi) = (k.saturating_sub(1), (k + 1).min(y_samples.len() - 1));
                let dy = diff(z, y_samples[hi])?
                    .sub(&diff(z, y_samples[lo])?)
                    .scale(1.0 / (y_samples[hi] - y_samples[lo]));
                worst = worst.max(d0.norm() + dx.norm() + dy.norm());
            }
            r.push(worst);
        }
        let nonincreasing = r.windows(2).all(|w| w[1] <= 1.1 * w[0]);
        out.push(RayDecay { arg: theta, radii: radii.to_vec(), r, nonincreasing });
    }
    Ok(StabilizationReport { rays: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_section::SideBc;
    use std::f64::consts::PI;

    fn dif1(a: f64) -> EndMetric {
        pullback_from_phi(&PhiSpec::Bend { a, beta: 0.5, gamma: -1.0 }, 0.7).unwrap()
    }

    #[test]
    fn product_metric_is_z_independent() {
        let cs = CrossSection::interval(PI, SideBc::Dirichlet).unwrap();
        let g = EndMetric::product(&cs, 0.5).unwrap();
        for z in [C::new(1.0, 0.0), C::new(30.0, 5.0)] {
            assert_eq!(g.metric_at(z, 0.4).unwrap(), Sym2::IDENTITY);
        }
    }

    #[test]
    fn sector_is_enforced() {
        let g = dif1(0.5);
        assert!(matches!(g.metric_at(C::new(1.0, 1.0), 0.0), Err(Error::Domain { .. })));
        assert!(matches!(g.metric_at(C::new(-1.0, 0.0), 0.0), Err(Error::Domain { .. })));
        assert!(g.metric_at(C::new(0.0, 0.0), 0.0).is_ok());
    }

    #[test]
    fn parameter_validation() {
        let bad_beta = PhiSpec::Bend { a: 1.0, beta: 1.0, gamma: -1.0 };
        assert!(matches!(pullback_from_phi(&bad_beta, 0.5), Err(Error::Config(_))));
        let bad_gamma = PhiSpec::Bend { a: 1.0, beta: 0.5, gamma: 0.0 };
        assert!(matches!(pullback_from_phi(&bad_gamma, 0.5), Err(Error::Config(_))));
        assert!(pullback_from_phi(&PhiSpec::Widen, 0.8).is_err());
    }

    #[test]
    fn identity_phi_gives_product_metric() {
        let g = pullback_from_phi(&PhiSpec::Identity, 0.5).unwrap();
        assert_eq!(g.metric_at(C::new(3.0, 0.5), 1.0).unwrap(), Sym2::IDENTITY);
    }

    #[test]
    fn far_field_of_bend_is_close_to_identity() {
        let g = dif1(1.0);
        let m = g.metric_at(C::new(1e4, 0.0), 1.0).unwrap();
        assert!(m.sub(&Sym2::IDENTITY).norm() < 0.05);
    }

    #[test]
    fn widen_reflection() {
        let g = pullback_from_phi(&PhiSpec::Widen, 0.5).unwrap();
        let z = C::new(5.0, 1.0);
        let up = g.metric_at(z, 0.7).unwrap();
        let down = g.metric_at(z.conj(), 0.7).unwrap();
        assert!(up.conj().sub(&down).norm() < 1e-12);
    }

    #[test]
    fn custom_matches_builtin() {
        let spec = PhiSpec::Custom {
            jacobian: [
                ["1 + 1/log(z + 4)".into(), "0".into()],
                ["-y / ((z + 5) * log(z + 5)^2)".into(), "1 + 1/log(z + 5)".into()],
            ],
            phi: None,
        };
        let custom = pullback_from_phi(&spec, 0.5).unwrap();
        let builtin = pullback_from_phi(&PhiSpec::Widen, 0.5).unwrap();
        let z = C::new(7.0, -2.0);
        let d = custom.metric_at(z, 1.3).unwrap().sub(&builtin.metric_at(z, 1.3).unwrap());
        assert!(d.norm() < 1e-14);
    }

    #[test]
    fn product_stabilization_is_zero() {
        let cs = CrossSection::interval(PI, SideBc::Dirichlet).unwrap();
        let g = EndMetric::product(&cs, 0.5).unwrap();
        let ys: Vec<f64> = (0..=10).map(|k| k as f64 * PI / 10.0).collect();
        let rep = check_stabilization(&g, &[0.0, 0.3], &[10.0, 100.0, 1000.0], &ys).unwrap();
        assert!(rep.rays.iter().all(|r| r.r.iter().all(|v| *v == 0.0)));
        assert!(check_stabilization(&g, &[0.0], &[10.0, 5.0, 20.0], &ys).is_err());
        assert!(check_stabilization(&g, &[0.6], &[10.0, 20.0, 30.0], &ys).is_err());
    }
}
