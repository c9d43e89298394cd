//! Compact cross-section `(Ω, h)` of the cylindrical end and its thresholds.
//!
//! The thresholds are the distinct eigenvalues of the Laplace–Beltrami
//! operator `-(1/√h) ∂_y((1/√h) ∂_y)` on `Ω`, with the boundary condition of
//! the ambient problem. Flat sections use closed forms; everything else goes
//! through a symmetric second-order finite-difference discretization.

use std::f64::consts::PI;

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two eigenvalues belong to the same threshold if they differ by less than
/// this times `1 + |nu|`.
pub const MULTIPLICITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SectionKind {
    Interval { length: f64 },
    Circle { circumference: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideBc {
    Dirichlet,
    Neumann,
    /// Only valid for the circle, which has no boundary.
    None,
}

/// Metric coefficient `h(y)` of the cross-section, `𝔥 = h(y) dy²`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CrossMetric {
    #[default]
    Flat,
    /// `h(y) = 1 + amplitude * sin(wavenumber * y)`.
    Sine { amplitude: f64, wavenumber: f64 },
    /// Uniform samples over the section, linearly interpolated. For an
    /// interval the first and last samples sit on the endpoints; for a circle
    /// the samples are periodic and the endpoint is not repeated.
    Samples { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    #[serde(flatten)]
    pub kind: SectionKind,
    #[serde(default)]
    pub metric: CrossMetric,
    pub bc: SideBc,
}

impl CrossSection {
    pub fn new(kind: SectionKind, metric: CrossMetric, bc: SideBc) -> Result<Self> {
        let cs = Self { kind, metric, bc };
        cs.validate()?;
        Ok(cs)
    }

    pub fn interval(length: f64, bc: SideBc) -> Result<Self> {
        Self::new(SectionKind::Interval { length }, CrossMetric::Flat, bc)
    }

    pub fn circle(circumference: f64) -> Result<Self> {
        Self::new(SectionKind::Circle { circumference }, CrossMetric::Flat, SideBc::None)
    }

    pub fn with_metric(mut self, metric: CrossMetric) -> Result<Self> {
        self.metric = metric;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.length();
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::Config(format!("cross_section length must be positive, got {len}")));
        }
        match (self.kind, self.bc) {
            (SectionKind::Circle { .. }, SideBc::None) => {}
            (SectionKind::Circle { .. }, _) => {
                return Err(Error::Config("cross_section.bc must be \"none\" for a circle".into()))
            }
            (SectionKind::Interval { .. }, SideBc::None) => {
                return Err(Error::Config(
                    "cross_section.bc = \"none\" requires a circle (compact boundary is excluded)".into(),
                ))
            }
            _ => {}
        }
        match &self.metric {
            CrossMetric::Samples { values } if values.len() < 2 => {
                return Err(Error::Config("cross_section.metric.values needs at least 2 samples".into()))
            }
            CrossMetric::Samples { values } => {
                if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
                    return Err(Error::Geometry(format!("non-positive metric sample h = {v}")));
                }
            }
            CrossMetric::Sine { amplitude, .. } if amplitude.abs() >= 1.0 => {
                return Err(Error::Geometry(format!(
                    "h(y) = 1 + {amplitude} sin(k y) is not positive everywhere"
                )))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        match self.kind {
            SectionKind::Interval { length } => length,
            SectionKind::Circle { circumference } => circumference,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.kind, SectionKind::Circle { .. })
    }

    pub fn is_flat(&self) -> bool {
        match &self.metric {
            CrossMetric::Flat => true,
            CrossMetric::Sine { amplitude, .. } => *amplitude == 0.0,
            CrossMetric::Samples { values } => values.iter().all(|v| *v == values[0]) && values[0] == 1.0,
        }
    }

    /// Metric coefficient `h(y)`.
    pub fn h(&self, y: f64) -> f64 {
        match &self.metric {
            CrossMetric::Flat => 1.0,
            CrossMetric::Sine { amplitude, wavenumber } => 1.0 + amplitude * (wavenumber * y).sin(),
            CrossMetric::Samples { values } => {
                let len = self.length();
                let n = values.len();
                if self.is_periodic() {
                    let t = (y / len).rem_euclid(1.0) * n as f64;
                    let i = (t.floor() as usize).min(n - 1);
                    let f = t - i as f64;
                    values[i] * (1.0 - f) + values[(i + 1) % n] * f
                } else {
                    let t = (y / len).clamp(0.0, 1.0) * (n - 1) as f64;
                    let i = (t.floor() as usize).min(n - 2);
                    let f = t - i as f64;
                    values[i] * (1.0 - f) + values[i + 1] * f
                }
            }
        }
    }
}

/// One sampled eigenfunction of the cross-section Laplacian.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    /// Index of the threshold this mode belongs to.
    pub threshold: usize,
    pub eigenvalue: f64,
    repr: ModeRepr,
}

#[derive(Clone, Debug, PartialEq)]
enum ModeRepr {
    Constant { value: f64 },
    Sine { wavenumber: f64, norm: f64 },
    Cosine { wavenumber: f64, norm: f64 },
    /// Finite-difference eigenvector on `nodes`, L²(Ω, h)-normalized.
    Nodal { nodes: Vec<f64>, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSet {
    /// Distinct thresholds, strictly ascending.
    pub values: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// Eigenfunctions ordered by eigenvalue; `modes[m].threshold` points into
    /// `values`.
    pub modes: Vec<Mode>,
    section: CrossSection,
}

impl ThresholdSet {
    pub fn section(&self) -> &CrossSection {
        &self.section
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdMethod {
    /// Closed forms for flat sections, finite differences otherwise.
    Auto,
    FiniteDifference,
}

/// First `count` distinct thresholds of the cross-section on `grid_n` points.
pub fn thresholds(cs: &CrossSection, count: usize, grid_n: usize) -> Result<ThresholdSet> {
    thresholds_with(cs, count, grid_n, ThresholdMethod::Auto)
}

pub fn thresholds_with(
    cs: &CrossSection,
    count: usize,
    grid_n: usize,
    method: ThresholdMethod,
) -> Result<ThresholdSet> {
    cs.validate()?;
    if count == 0 {
        return Err(Error::Config("threshold count must be positive".into()));
    }
    if grid_n < 8 || count > grid_n / 4 {
        return Err(Error::Resolution(format!(
            "grid_n = {grid_n} cannot resolve {count} thresholds (need grid_n >= 8 and count <= grid_n / 4)"
        )));
    }
    if method == ThresholdMethod::Auto && cs.is_flat() {
        Ok(closed_form(cs, count))
    } else {
        finite_difference(cs, count, grid_n)
    }
}

fn closed_form(cs: &CrossSection, count: usize) -> ThresholdSet {
    let len = cs.length();
    let mut values = Vec::with_capacity(count);
    let mut multiplicities = Vec::with_capacity(count);
    let mut modes = Vec::new();
    match (cs.kind, cs.bc) {
        (SectionKind::Interval { .. }, SideBc::Dirichlet) => {
            for j in 0..count {
                let k = (j + 1) as f64 * PI / len;
                values.push(k * k);
                multiplicities.push(1);
                modes.push(Mode {
                    threshold: j,
                    eigenvalue: k * k,
                    repr: ModeRepr::Sine { wavenumber: k, norm: (2.0 / len).sqrt() },
                });
            }
        }
        (SectionKind::Interval { .. }, _) => {
            for j in 0..count {
                let k = j as f64 * PI / len;
                values.push(k * k);
                multiplicities.push(1);
                let repr = if j == 0 {
                    ModeRepr::Constant { value: 1.0 / len.sqrt() }
                } else {
                    ModeRepr::Cosine { wavenumber: k, norm: (2.0 / len).sqrt() }
                };
                modes.push(Mode { threshold: j, eigenvalue: k * k, repr });
            }
        }
        (SectionKind::Circle { .. }, _) => {
            for j in 0..count {
                let k = 2.0 * PI * j as f64 / len;
                values.push(k * k);
                if j == 0 {
                    multiplicities.push(1);
                    modes.push(Mode {
                        threshold: 0,
                        eigenvalue: 0.0,
                        repr: ModeRepr::Constant { value: 1.0 / len.sqrt() },
                    });
                } else {
                    multiplicities.push(2);
                    let norm = (2.0 / len).sqrt();
                    modes.push(Mode {
                        threshold: j,
                        eigenvalue: k * k,
                        repr: ModeRepr::Cosine { wavenumber: k, norm },
                    });
                    modes.push(Mode {
                        threshold: j,
                        eigenvalue: k * k,
                        repr: ModeRepr::Sine { wavenumber: k, norm },
                    });
                }
            }
        }
    }
    ThresholdSet { values, multiplicities, modes, section: cs.clone() }
}

/// Nodes, quadrature weights and the symmetric stiffness for the FD scheme.
struct FdSystem {
    nodes: Vec<f64>,
    /// Diagonal of the weighted mass `hy * √h(y_i)` (halved at Neumann ends).
    mass: Vec<f64>,
    stiffness: Mat<f64>,
}

fn fd_system(cs: &CrossSection, grid_n: usize) -> Result<FdSystem> {
    let len = cs.length();
    let n = grid_n;
    let (hy, nodes): (f64, Vec<f64>) = match (cs.kind, cs.bc) {
        (SectionKind::Circle { .. }, _) => {
            let hy = len / n as f64;
            (hy, (0..n).map(|i| i as f64 * hy).collect())
        }
        (_, SideBc::Dirichlet) => {
            let hy = len / (n + 1) as f64;
            (hy, (0..n).map(|i| (i + 1) as f64 * hy).collect())
        }
        _ => {
            let hy = len / (n - 1) as f64;
            (hy, (0..n).map(|i| i as f64 * hy).collect())
        }
    };
    let sqrt_h = |y: f64| -> Result<f64> {
        let h = cs.h(y);
        if h > 0.0 {
            Ok(h.sqrt())
        } else {
            Err(Error::Geometry(format!("non-positive metric h({y}) = {h}")))
        }
    };
    // conductance 1/√h at the midpoint between node i and node i+1
    let cond = |y_mid: f64| -> Result<f64> { Ok(1.0 / (sqrt_h(y_mid)? * hy)) };

    let mut stiffness = Mat::<f64>::zeros(n, n);
    let mut mass = Vec::with_capacity(n);
    for &y in &nodes {
        mass.push(hy * sqrt_h(y)?);
    }
    let periodic = cs.is_periodic();
    let links = if periodic { n } else { n - 1 };
    for i in 0..links {
        let j = (i + 1) % n;
        let c = cond(nodes[i] + 0.5 * hy)?;
        stiffness[(i, i)] += c;
        stiffness[(j, j)] += c;
        stiffness[(i, j)] -= c;
        stiffness[(j, i)] -= c;
    }
    if !periodic && cs.bc == SideBc::Dirichlet {
        // links to the eliminated boundary nodes
        stiffness[(0, 0)] += cond(0.5 * hy)?;
        stiffness[(n - 1, n - 1)] += cond(len - 0.5 * hy)?;
    }
    if !periodic && cs.bc == SideBc::Neumann {
        mass[0] *= 0.5;
        mass[n - 1] *= 0.5;
    }
    Ok(FdSystem { nodes, mass, stiffness })
}

fn finite_difference(cs: &CrossSection, count: usize, grid_n: usize) -> Result<ThresholdSet> {
    let sys = fd_system(cs, grid_n)?;
    let n = sys.nodes.len();
    let inv_sqrt_w: Vec<f64> = sys.mass.iter().map(|w| 1.0 / w.sqrt()).collect();
    let sym = Mat::<f64>::from_fn(n, n, |i, j| sys.stiffness[(i, j)] * inv_sqrt_w[i] * inv_sqrt_w[j]);
    let evd = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Dense(format!("{e:?}")))?;
    let s = evd.S();
    let u = evd.U();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));

    let mut values: Vec<f64> = Vec::new();
    let mut multiplicities: Vec<usize> = Vec::new();
    let mut modes = Vec::new();
    for &col in &order {
        let nu = s[col];
        let same = values
            .last()
            .is_some_and(|&prev| (nu - prev).abs() < MULTIPLICITY_TOL * (1.0 + prev.abs()));
        if !same {
            if values.len() == count {
                break;
            }
            values.push(nu);
            multiplicities.push(0);
        }
        *multiplicities.last_mut().unwrap() += 1;
        let mut v: Vec<f64> = (0..n).map(|i| u[(i, col)] * inv_sqrt_w[i]).collect();
        let norm = v.iter().zip(&sys.mass).map(|(a, w)| a * a * w).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        fix_sign(&mut v);
        modes.push(Mode {
            threshold: values.len() - 1,
            eigenvalue: nu,
            repr: ModeRepr::Nodal { nodes: sys.nodes.clone(), values: v },
        });
    }
    // round-off can leave the constant mode at -1e-15
    if matches!(cs.bc, SideBc::Neumann | SideBc::None) && values[0].abs() < 1e-10 {
        values[0] = 0.0;
    }
    Ok(ThresholdSet { values, multiplicities, modes, section: cs.clone() })
}

fn fix_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if let Some(first) = v.iter().find(|a| a.abs() > 1e-12 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
    }
}

/// The nodes and normalized eigenvectors of the FD scheme, exposed so tests
/// can compare against an independent dense solve.
pub fn fd_nodes(cs: &CrossSection, grid_n: usize) -> Result<Vec<f64>> {
    Ok(fd_system(cs, grid_n)?.nodes)
}

/// Samples mode `index` (0-based position in `ts.modes`) on `y_grid`, with
/// the first nonzero sample made positive.
pub fn mode_values(ts: &ThresholdSet, index: usize, y_grid: &[f64]) -> Result<Vec<f64>> {
    let mode = ts
        .modes
        .get(index)
        .ok_or(Error::IndexOutOfRange { index, len: ts.modes.len() })?;
    let len = ts.section.length();
    let periodic = ts.section.is_periodic();
    let mut out: Vec<f64> = y_grid
        .iter()
        .map(|&y| match &mode.repr {
            ModeRepr::Constant { value } => *value,
            ModeRepr::Sine { wavenumber, norm } => norm * (wavenumber * y).sin(),
            ModeRepr::Cosine { wavenumber, norm } => norm * (wavenumber * y).cos(),
            ModeRepr::Nodal { nodes, values } => interpolate(nodes, values, y, len, periodic, ts.section.bc),
        })
        .collect();
    fix_sign(&mut out);
    Ok(out)
}

fn interpolate(nodes: &[f64], values: &[f64], y: f64, len: f64, periodic: bool, bc: SideBc) -> f64 {
    let n = nodes.len();
    if periodic {
        let hy = len / n as f64;
        let t = (y / hy).rem_euclid(n as f64);
        let i = (t.floor() as usize).min(n - 1);
        let f = t - i as f64;
        return values[i] * (1.0 - f) + values[(i + 1) % n] * f;
    }
    // extend with the boundary values: zero for Dirichlet, flat for Neumann
    let (y0, v0) = if bc == SideBc::Dirichlet { (0.0, 0.0) } else { (nodes[0], values[0]) };
    let (y1, v1) = if bc == SideBc::Dirichlet { (len, 0.0) } else { (nodes[n - 1], values[n - 1]) };
    if y <= nodes[0] {
        if nodes[0] == y0 {
            return v0;
        }
        let f = ((y - y0) / (nodes[0] - y0)).clamp(0.0, 1.0);
        return v0 * (1.0 - f) + values[0] * f;
    }
    if y >= nodes[n - 1] {
        if nodes[n - 1] == y1 {
            return v1;
        }
        let f = ((y - nodes[n - 1]) / (y1 - nodes[n - 1])).clamp(0.0, 1.0);
        return values[n - 1] * (1.0 - f) + v1 * f;
    }
    let i = nodes.partition_point(|&a| a <= y).saturating_sub(1).min(n - 2);
    let f = (y - nodes[i]) / (nodes[i + 1] - nodes[i]);
    values[i] * (1.0 - f) + values[i + 1] * f
}

/// Discrete L²(Ω, h) inner product on the FD nodes of `grid_n`.
pub fn fd_inner(cs: &CrossSection, grid_n: usize, u: &[f64], v: &[f64]) -> Result<f64> {
    let sys = fd_system(cs, grid_n)?;
    Ok(u.iter().zip(v).zip(&sys.mass).map(|((a, b), w)| a * b * w).sum())
}
