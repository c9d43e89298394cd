use faer::{Mat, Side};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::grid::{CapBc, Grid, GridSpec};
use super::sparse::CsrMatrix;
use crate::cross_section::{CrossSection, SideBc};
use crate::error::{Error, Result};
use crate::geometry::EndMetric;
use crate::scaling::{DeformedMetricField, ScalingProfile};

type C = Complex64;

const GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperatorMeta {
    pub lambda: [f64; 2],
    pub geometry: String,
    pub profile: String,
    pub grid: String,
}

/// Coefficient bounds seen at the quadrature points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct AssemblyStats {
    /// `max ‖g_λ⁻¹‖` (Frobenius).
    pub max_ginv: f64,
    /// Smallest eigenvalue of the Hermitian part of `g_λ⁻¹`.
    pub min_ginv_re: f64,
    /// `max |∇ρ_λ / ρ_λ|`.
    pub max_log_rho_grad: f64,
    pub rho_min: f64,
    pub rho_max: f64,
}

impl AssemblyStats {
    fn empty() -> Self {
        Self {
            max_ginv: 0.0,
            min_ginv_re: f64::INFINITY,
            max_log_rho_grad: 0.0,
            rho_min: f64::INFINITY,
            rho_max: 0.0,
        }
    }

    fn merge(self, o: Self) -> Self {
        Self {
            max_ginv: self.max_ginv.max(o.max_ginv),
            min_ginv_re: self.min_ginv_re.min(o.min_ginv_re),
            max_log_rho_grad: self.max_log_rho_grad.max(o.max_log_rho_grad),
            rho_min: self.rho_min.min(o.rho_min),
            rho_max: self.rho_max.max(o.rho_max),
        }
    }

    /// Shift `γ` that makes the real part of the shifted form coercive:
    /// `Re q ≥ δ‖∇u‖² − ‖G‖ b ‖∇u‖‖u‖ ≥ −(‖G‖ b)²/(2δ) ‖u‖²`.
    pub fn coercivity_shift(&self) -> f64 {
        let t = self.max_ginv * self.max_log_rho_grad;
        t * t / (2.0 * self.min_ginv_re.max(1e-12))
    }
}

#[derive(Clone, Debug)]
pub enum Layout {
    Tensor(Grid),
    /// One cross mode: axial nodes and the active node range.
    Axial { x_nodes: Vec<f64>, active: Vec<usize> },
}

/// Stiffness `A_ij = q_λ[φ_j, φ_i]` and mass `M_ij = (φ_j, φ_i)`.
#[derive(Clone, Debug)]
pub struct AssembledOperator {
    pub a: CsrMatrix,
    pub m: CsrMatrix,
    pub layout: Layout,
    pub meta: OperatorMeta,
    pub stats: AssemblyStats,
    lambda: C,
}

impl AssembledOperator {
    pub fn dofs(&self) -> usize {
        self.a.rows
    }

    pub fn lambda(&self) -> C {
        self.lambda
    }

    pub fn grid(&self) -> Result<&Grid> {
        match &self.layout {
            Layout::Tensor(g) => Ok(g),
            Layout::Axial { .. } => Err(Error::Unsupported("operation needs a 2-D operator".into())),
        }
    }

    /// `‖u‖_M = sqrt(uᴴ M u)`.
    pub fn m_norm(&self, u: &[C]) -> f64 {
        let mu = self.m.matvec(u);
        u.iter().zip(&mu).map(|(a, b)| (a.conj() * b).re).sum::<f64>().max(0.0).sqrt()
    }

    /// Writes `A` and `M` as triplet dumps `<stem>_A.txt` and `<stem>_M.txt`.
    pub fn dump(&self, dir: &std::path::Path, stem: &str) -> Result<()> {
        let open = |n: &str| -> Result<std::io::BufWriter<std::fs::File>> {
            Ok(std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}_{n}.txt")))?))
        };
        self.a.write_triplets(open("A")?)?;
        self.m.write_triplets(open("M")?)?;
        Ok(())
    }
}

fn meta(geom: &EndMetric, profile: &ScalingProfile, lambda: C, grid: String) -> OperatorMeta {
    OperatorMeta { lambda: [lambda.re, lambda.im], geometry: geom.id().into(), profile: profile.id(), grid }
}

struct QuadPoint {
    ginv: crate::geometry::Sym2,
    log_grad: [C; 2],
    weight: f64,
}

fn quad_point(field: &DeformedMetricField<'_>, x: f64, y: f64, w: f64, stats: &mut AssemblyStats) -> Result<QuadPoint> {
    let p = field.at(x, y)?;
    let log_grad = field.log_rho_grad(x, y)?;
    let h = p.ginv;
    // for complex symmetric G the Hermitian part is Re G
    let (lo, _) = h.real_eigenvalues();
    stats.max_ginv = stats.max_ginv.max(h.norm());
    stats.min_ginv_re = stats.min_ginv_re.min(lo);
    stats.max_log_rho_grad = stats.max_log_rho_grad.max((log_grad[0].norm_sqr() + log_grad[1].norm_sqr()).sqrt());
    stats.rho_min = stats.rho_min.min(p.rho.norm());
    stats.rho_max = stats.rho_max.max(p.rho.norm());
    Ok(QuadPoint { ginv: h, log_grad, weight: w * p.det0.sqrt() })
}

/// Assembles the deformed form on the tensor grid with bilinear elements and
/// 2×2 Gauss quadrature. Dirichlet nodes are dropped; Neumann conditions are
/// natural.
pub fn assemble_form(geom: &EndMetric, profile: &ScalingProfile, lambda: C, grid: &Grid) -> Result<AssembledOperator> {
    if lambda != C::new(0.0, 0.0) {
        grid.check_truncation(profile)?;
    }
    let x_extent = *grid.x_nodes.last().unwrap();
    let field = DeformedMetricField::new(geom, profile, lambda, x_extent)?;
    let (hx, hy) = (grid.hx(), grid.hy());
    let n = grid.dofs();
    let ny_cells = grid.ny();

    type Trip = Vec<(usize, usize, C)>;
    let columns: Vec<Result<(Trip, Trip, AssemblyStats)>> = (0..grid.nx())
        .into_par_iter()
        .map(|ix| {
            let mut ta = Vec::with_capacity(ny_cells * 16);
            let mut tm = Vec::with_capacity(ny_cells * 16);
            let mut stats = AssemblyStats::empty();
            let x0 = grid.x_nodes[ix];
            for iy in 0..ny_cells {
                let y0 = grid.y_nodes[iy];
                let dofs = [
                    grid.dof(ix, iy),
                    grid.dof(ix + 1, iy),
                    grid.dof(ix, iy + 1),
                    grid.dof(ix + 1, iy + 1),
                ];
                if dofs.iter().all(Option::is_none) {
                    continue;
                }
                let mut la = [[C::new(0.0, 0.0); 4]; 4];
                let mut lm = [[0.0f64; 4]; 4];
                for &gx in &GAUSS {
                    for &gy in &GAUSS {
                        let q = quad_point(&field, x0 + gx * hx, y0 + gy * hy, 0.25 * hx * hy, &mut stats)?;
                        let (phi, grad) = shape(gx, gy, hx, hy);
                        for a in 0..4 {
                            // test side: ∇φ_a + φ_a ∇ρ/ρ
                            let test = [
                                C::new(grad[a][0], 0.0) + phi[a] * q.log_grad[0],
                                C::new(grad[a][1], 0.0) + phi[a] * q.log_grad[1],
                            ];
                            let gt = q.ginv.apply(test);
                            for b in 0..4 {
                                la[a][b] += (gt[0] * grad[b][0] + gt[1] * grad[b][1]) * q.weight;
                                lm[a][b] += phi[a] * phi[b] * q.weight;
                            }
                        }
                    }
                }
                for a in 0..4 {
                    let Some(r) = dofs[a] else { continue };
                    for b in 0..4 {
                        let Some(c) = dofs[b] else { continue };
                        ta.push((r, c, la[a][b]));
                        tm.push((r, c, C::new(lm[a][b], 0.0)));
                    }
                }
            }
            Ok((ta, tm, stats))
        })
        .collect();

    let mut ta = Vec::new();
    let mut tm = Vec::new();
    let mut stats = AssemblyStats::empty();
    for col in columns {
        let (a, m, s) = col?;
        ta.extend(a);
        tm.extend(m);
        stats = stats.merge(s);
    }
    Ok(AssembledOperator {
        a: CsrMatrix::from_triplets(n, n, ta),
        m: CsrMatrix::from_triplets(n, n, tm),
        layout: Layout::Tensor(grid.clone()),
        meta: meta(geom, profile, lambda, grid.id()),
        stats,
        lambda,
    })
}

/// Values and gradients of the four bilinear shape functions at local
/// coordinates `(ξ, η)`; node order `(0,0) (1,0) (0,1) (1,1)`.
pub(crate) fn shape(xi: f64, eta: f64, hx: f64, hy: f64) -> ([f64; 4], [[f64; 2]; 4]) {
    let phi = [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), (1.0 - xi) * eta, xi * eta];
    let grad = [
        [-(1.0 - eta) / hx, -(1.0 - xi) / hy],
        [(1.0 - eta) / hx, -xi / hy],
        [-eta / hx, (1.0 - xi) / hy],
        [eta / hx, xi / hy],
    ];
    (phi, grad)
}

/// One-mode reduction of the form for product metrics: with
/// `u = U(x) Φ(y)` and `Φ` normalized, `A₁ = K_x^λ + ν M_x`.
pub fn assemble_modal(
    geom: &EndMetric,
    profile: &ScalingProfile,
    lambda: C,
    nu: f64,
    spec: &GridSpec,
) -> Result<AssembledOperator> {
    if !geom.is_product() {
        return Err(Error::Unsupported("modal reduction requires a product metric".into()));
    }
    if spec.nx < 8 {
        return Err(Error::Config(format!("grid.N_x must be >= 8, got {}", spec.nx)));
    }
    let hx = spec.x_max / spec.nx as f64;
    let x_nodes: Vec<f64> = (0..=spec.nx).map(|i| i as f64 * hx).collect();
    let lo = if spec.cap_bc == CapBc::Dirichlet { 1 } else { 0 };
    let active: Vec<usize> = (lo..spec.nx).collect();
    let dof = |i: usize| i.checked_sub(lo).filter(|&d| d < active.len());
    let field = DeformedMetricField::new(geom, profile, lambda, spec.x_max)?;
    let mut stats = AssemblyStats::empty();
    let mut ta = Vec::new();
    let mut tm = Vec::new();
    for ix in 0..spec.nx {
        let x0 = x_nodes[ix];
        let mut la = [[C::new(0.0, 0.0); 2]; 2];
        let mut lm = [[0.0f64; 2]; 2];
        for &g in &GAUSS {
            let x = x0 + g * hx;
            // product metric: the axial coefficients do not depend on y
            let q = quad_point(&field, x, 0.0, hx * 0.5, &mut stats)?;
            let phi = [1.0 - g, g];
            let grad = [-1.0 / hx, 1.0 / hx];
            for a in 0..2 {
                let test = C::new(grad[a], 0.0) + phi[a] * q.log_grad[0];
                for b in 0..2 {
                    // q.weight includes sqrt(det g0) = sqrt(h(y)); drop it
                    la[a][b] += q.ginv.xx * test * grad[b] * (hx * 0.5);
                    lm[a][b] += phi[a] * phi[b] * hx * 0.5;
                }
            }
        }
        let ends = [dof(ix), dof(ix + 1)];
        for a in 0..2 {
            let Some(r) = ends[a] else { continue };
            for b in 0..2 {
                let Some(c) = ends[b] else { continue };
                ta.push((r, c, la[a][b] + nu * lm[a][b]));
                tm.push((r, c, C::new(lm[a][b], 0.0)));
            }
        }
    }
    let n = active.len();
    Ok(AssembledOperator {
        a: CsrMatrix::from_triplets(n, n, ta),
        m: CsrMatrix::from_triplets(n, n, tm),
        layout: Layout::Axial { x_nodes, active },
        meta: meta(geom, profile, lambda, format!("modal {}@{} nu={nu}", spec.nx, spec.x_max)),
        stats,
        lambda,
    })
}

/// Finite-element pencil of the cross-section on the grid's y nodes:
/// `K_ij = ∫ N_i' N_j' h^{-1/2}`, `M_ij = ∫ N_i N_j h^{1/2}`, active nodes only.
pub fn cross_fe_pencil(grid: &Grid) -> (Mat<f64>, Mat<f64>) {
    let cs: &CrossSection = &grid.section;
    let ys = grid.y_active();
    let n = ys.len();
    let index = |iy: usize| {
        let iy = grid.wrap_y(iy);
        ys.iter().position(|&a| a == iy)
    };
    let hy = grid.hy();
    let mut k = Mat::<f64>::zeros(n, n);
    let mut m = Mat::<f64>::zeros(n, n);
    for iy in 0..grid.ny() {
        let nodes = [index(iy), index(iy + 1)];
        for &g in &GAUSS {
            let y = grid.y_nodes[iy] + g * hy;
            let sh = cs.h(y).sqrt();
            let phi = [1.0 - g, g];
            let grad = [-1.0 / hy, 1.0 / hy];
            for a in 0..2 {
                let Some(r) = nodes[a] else { continue };
                for b in 0..2 {
                    let Some(c) = nodes[b] else { continue };
                    k[(r, c)] += grad[a] * grad[b] / sh * hy * 0.5;
                    m[(r, c)] += phi[a] * phi[b] * sh * hy * 0.5;
                }
            }
        }
    }
    (k, m)
}

/// Eigenvalues and `M`-orthonormal eigenvectors (columns) of the cross
/// pencil, ascending. These are the thresholds the 2-D discretization sees.
pub fn cross_fe_modes(grid: &Grid) -> Result<(Vec<f64>, Mat<f64>)> {
    let (k, m) = cross_fe_pencil(grid);
    let n = k.nrows();
    let em = m.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Dense(format!("{e:?}")))?;
    let (dm, qm) = (em.S(), em.U());
    let inv_sqrt = Mat::<f64>::from_fn(n, n, |i, j| {
        (0..n).map(|l| qm[(i, l)] * qm[(j, l)] / dm[l].sqrt()).sum()
    });
    let c = &inv_sqrt * &k * &inv_sqrt;
    let c = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let ec = c.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Dense(format!("{e:?}")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ec.S()[a].total_cmp(&ec.S()[b]));
    let values = order.iter().map(|&i| ec.S()[i]).collect();
    let vecs = &inv_sqrt * ec.U();
    let vecs = Mat::<f64>::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    Ok((values, vecs))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side2 {
    /// `y = 0`
    Bottom,
    /// `y = L`
    Top,
}

/// Discrete L² norm along a Neumann side of the deformed conormal derivative
/// `(g_λ⁻¹ ∇u)_n / sqrt((g_λ⁻¹)_nn)`, with second-order one-sided normal
/// differences and central tangential ones.
pub fn neumann_trace(
    geom: &EndMetric,
    profile: &ScalingProfile,
    lambda: C,
    grid: &Grid,
    u: &[C],
    side: Side2,
) -> Result<f64> {
    if grid.side_bc != SideBc::Neumann {
        return Err(Error::Unsupported("Neumann trace needs Neumann sides".into()));
    }
    if u.len() != grid.dofs() {
        return Err(Error::Config(format!("vector length {} does not match {} dofs", u.len(), grid.dofs())));
    }
    let field = DeformedMetricField::new(geom, profile, lambda, *grid.x_nodes.last().unwrap())?;
    let full = grid.to_nodes(u);
    let w = grid.ny() + 1;
    let at = |ix: usize, iy: usize| full[ix * w + iy];
    let (hx, hy) = (grid.hx(), grid.hy());
    let ny = grid.ny();
    let (iy0, i1, i2, sign) = match side {
        Side2::Bottom => (0, 1, 2, -1.0),
        Side2::Top => (ny, ny - 1, ny - 2, 1.0),
    };
    let y = grid.y_nodes[iy0];
    let mut acc = 0.0;
    for ix in 1..grid.nx() {
        let x = grid.x_nodes[ix];
        // derivative along +y
        let dy = -sign * (-3.0 * at(ix, iy0) + 4.0 * at(ix, i1) - at(ix, i2)) / (2.0 * hy);
        let dx = (at(ix + 1, iy0) - at(ix - 1, iy0)) / (2.0 * hx);
        let ginv = field.at(x, y)?.ginv;
        let flux = ginv.apply([dx, dy])[1] * sign / ginv.yy.sqrt();
        acc += flux.norm_sqr() * hx;
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_section::SideBc;
    use std::f64::consts::PI;

    #[test]
    fn shape_functions_partition_unity() {
        for (xi, eta) in [(0.2, 0.7), (0.5, 0.5), (0.9, 0.1)] {
            let (phi, grad) = shape(xi, eta, 0.3, 0.2);
            assert!((phi.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert!(grad.iter().map(|g| g[0]).sum::<f64>().abs() < 1e-14);
            assert!(grad.iter().map(|g| g[1]).sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn nine_point_stencil_and_symmetry() {
        let cs = CrossSection::interval(PI, SideBc::Dirichlet).unwrap();
        let geom = EndMetric::product(&cs, 0.6).unwrap();
        let profile = ScalingProfile::quintic(2.0, 2.0).unwrap();
        let grid = Grid::new(&GridSpec::new(12.0, 24, 10), &cs).unwrap();
        let op = assemble_form(&geom, &profile, C::new(0.0, 0.0), &grid).unwrap();
        assert!(op.a.max_row_nnz() <= 9);
        assert!(op.a.hermitian_defect() < 1e-12);
        assert!(op.m.hermitian_defect() < 1e-12);
    }

    #[test]
    fn cross_pencil_matches_discrete_sine() {
        let cs = CrossSection::interval(PI, SideBc::Dirichlet).unwrap();
        let grid = Grid::new(&GridSpec::new(10.0, 8, 20), &cs).unwrap();
        let (nu, _) = cross_fe_modes(&grid).unwrap();
        // Q1 on a uniform grid: nu_h = (6/h²)(1 - cos kh)/(2 + cos kh)
        let h = PI / 20.0;
        let want = 6.0 / (h * h) * (1.0 - h.cos()) / (2.0 + h.cos());
        assert!((nu[0] - want).abs() < 1e-12);
    }

    #[test]
    fn modal_requires_product() {
        let g = crate::geometry::pullback_from_phi(&crate::geometry::PhiSpec::Widen, 0.6).unwrap();
        let p = ScalingProfile::quintic(2.0, 2.0).unwrap();
        let r = assemble_modal(&g, &p, C::new(0.0, 0.1), 1.0, &GridSpec::new(20.0, 20, 8));
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }
}
