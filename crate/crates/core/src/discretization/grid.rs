use serde::{Deserialize, Serialize};

use crate::cross_section::{CrossSection, SideBc};
use crate::error::{Error, Result};
use crate::scaling::ScalingProfile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapBc {
    Dirichlet,
    Neumann,
}

/// Grid block of the run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "X_max")]
    pub x_max: f64,
    #[serde(rename = "N_x")]
    pub nx: usize,
    #[serde(rename = "N_y")]
    pub ny: usize,
    #[serde(default = "default_cap")]
    pub cap_bc: CapBc,
}

fn default_cap() -> CapBc {
    CapBc::Dirichlet
}

impl GridSpec {
    pub fn new(x_max: f64, nx: usize, ny: usize) -> Self {
        Self { x_max, nx, ny, cap_bc: CapBc::Dirichlet }
    }

    /// Same box with both cell counts multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self { nx: self.nx * factor, ny: self.ny * factor, ..self.clone() }
    }
}

/// Tensor grid on `[0, X_max] × Ω` with the active-node numbering.
///
/// Dofs are numbered with the shorter of the two active index ranges running
/// fastest, which keeps the bandwidth of the assembled matrices at about that
/// length. Periodic sections always run `y` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub x_nodes: Vec<f64>,
    /// `N_y + 1` nodes; for a circle the last one is the image of the first.
    pub y_nodes: Vec<f64>,
    pub cap_bc: CapBc,
    pub side_bc: SideBc,
    pub section: CrossSection,
    x_active: Vec<usize>,
    y_active: Vec<usize>,
    y_fastest: bool,
    spec: GridSpec,
}

impl Grid {
    pub fn new(spec: &GridSpec, cs: &CrossSection) -> Result<Self> {
        cs.validate()?;
        if spec.nx < 8 || spec.ny < 8 {
            return Err(Error::Config(format!(
                "grid.N_x and grid.N_y must be >= 8, got {} and {}",
                spec.nx, spec.ny
            )));
        }
        if !(spec.x_max > 0.0) || !spec.x_max.is_finite() {
            return Err(Error::Config(format!("grid.X_max must be positive, got {}", spec.x_max)));
        }
        let hx = spec.x_max / spec.nx as f64;
        let x_nodes: Vec<f64> = (0..=spec.nx).map(|i| i as f64 * hx).collect();
        let len = cs.length();
        let hy = len / spec.ny as f64;
        let y_nodes: Vec<f64> = (0..=spec.ny).map(|i| i as f64 * hy).collect();

        let x_lo = if spec.cap_bc == CapBc::Dirichlet { 1 } else { 0 };
        let x_active: Vec<usize> = (x_lo..spec.nx).collect();
        let y_active: Vec<usize> = if cs.is_periodic() {
            (0..spec.ny).collect()
        } else if cs.bc == SideBc::Dirichlet {
            (1..spec.ny).collect()
        } else {
            (0..=spec.ny).collect()
        };
        let y_fastest = cs.is_periodic() || y_active.len() <= x_active.len();
        Ok(Self {
            x_nodes,
            y_nodes,
            cap_bc: spec.cap_bc,
            side_bc: cs.bc,
            section: cs.clone(),
            x_active,
            y_active,
            y_fastest,
            spec: spec.clone(),
        })
    }

    /// Checks that the ramp is fully active at least 5 units before the far cap.
    pub fn check_truncation(&self, profile: &ScalingProfile) -> Result<()> {
        let need = profile.full() + 5.0;
        if !(self.spec.x_max > need) {
            return Err(Error::Config(format!(
                "grid.X_max = {} must exceed scaling.R + 1 + scaling.w + 5 = {need}",
                self.spec.x_max
            )));
        }
        Ok(())
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn nx(&self) -> usize {
        self.spec.nx
    }

    pub fn ny(&self) -> usize {
        self.spec.ny
    }

    pub fn hx(&self) -> f64 {
        self.x_nodes[1] - self.x_nodes[0]
    }

    pub fn hy(&self) -> f64 {
        self.y_nodes[1] - self.y_nodes[0]
    }

    pub fn is_periodic(&self) -> bool {
        self.section.is_periodic()
    }

    pub fn dofs(&self) -> usize {
        self.x_active.len() * self.y_active.len()
    }

    pub fn x_active(&self) -> &[usize] {
        &self.x_active
    }

    pub fn y_active(&self) -> &[usize] {
        &self.y_active
    }

    pub fn y_fastest(&self) -> bool {
        self.y_fastest
    }

    /// Identifier used in reports.
    pub fn id(&self) -> String {
        format!("{}x{}@{}", self.spec.nx, self.spec.ny, self.spec.x_max)
    }

    /// Wraps a y-node index for periodic sections.
    pub fn wrap_y(&self, iy: usize) -> usize {
        if self.is_periodic() {
            iy % self.spec.ny
        } else {
            iy
        }
    }

    /// Dof index of node `(ix, iy)`, or `None` for eliminated nodes.
    pub fn dof(&self, ix: usize, iy: usize) -> Option<usize> {
        let iy = self.wrap_y(iy);
        let ax = ix.checked_sub(self.x_active[0]).filter(|&a| a < self.x_active.len())?;
        let ay = iy.checked_sub(self.y_active[0]).filter(|&a| a < self.y_active.len())?;
        Some(if self.y_fastest {
            ax * self.y_active.len() + ay
        } else {
            ay * self.x_active.len() + ax
        })
    }

    /// Node `(ix, iy)` of dof `d`.
    pub fn node(&self, d: usize) -> (usize, usize) {
        let (nxa, nya) = (self.x_active.len(), self.y_active.len());
        let (ax, ay) = if self.y_fastest { (d / nya, d % nya) } else { (d % nxa, d / nxa) };
        (self.x_active[ax], self.y_active[ay])
    }

    /// Coordinates of dof `d`.
    pub fn point(&self, d: usize) -> (f64, f64) {
        let (ix, iy) = self.node(d);
        (self.x_nodes[ix], self.y_nodes[iy])
    }

    /// Scatters a dof vector onto the full `(N_x+1) × (N_y+1)` node array
    /// (row-major in x), zero on eliminated nodes.
    pub fn to_nodes<T: Copy + Default>(&self, u: &[T]) -> Vec<T> {
        let w = self.spec.ny + 1;
        let mut out = vec![T::default(); (self.spec.nx + 1) * w];
        for (d, v) in u.iter().enumerate() {
            let (ix, iy) = self.node(d);
            out[ix * w + iy] = *v;
            if self.is_periodic() && iy == 0 {
                out[ix * w + self.spec.ny] = *v;
            }
        }
        out
    }

    /// Samples `f` at every dof.
    pub fn sample<T>(&self, mut f: impl FnMut(f64, f64) -> T) -> Vec<T> {
        (0..self.dofs()).map(|d| {
            let (x, y) = self.point(d);
            f(x, y)
        }).collect()
    }
}
