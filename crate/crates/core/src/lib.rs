//! Complex scaling for Laplacians on manifolds with asymptotically
//! cylindrical ends.
//!
//! The crate discretizes the complex-scaled Laplacian on a truncated end
//! `[0, X_max] × Ω`, computes its spectrum, sorts eigenvalues into
//! essential-spectrum ray artifacts and discrete candidates, and evaluates
//! continued resolvent matrix elements whose poles are the resonances.
//!
//! ```no_run
//! use cylres::prelude::*;
//! use std::f64::consts::PI;
//!
//! let cs = CrossSection::interval(PI, SideBc::Dirichlet)?;
//! let geom = EndMetric::product(&cs, 0.7)?;
//! let profile = ScalingProfile::quintic(10.0, 2.0)?;
//! let grid = Grid::new(&GridSpec::new(40.0, 200, 16), &cs)?;
//! let op = assemble_form(&geom, &profile, Complex64::new(0.0, 0.3), &grid)?;
//! let eig = solve_shift_invert(&op, Complex64::new(3.0, -0.5), 10, 1e-10, 60)?;
//! # Ok::<(), cylres::Error>(())
//! ```

pub mod cross_section;
pub mod discretization;
pub mod eigen;
mod error;
pub mod expr;
pub mod geometry;
pub mod resolvent;
pub mod runner;
pub mod scaling;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub mod prelude {
    pub use crate::cross_section::{thresholds, CrossMetric, CrossSection, SectionKind, SideBc, ThresholdSet};
    pub use crate::discretization::{assemble_form, assemble_modal, AssembledOperator, CapBc, Grid, GridSpec};
    pub use crate::eigen::{resolvent_apply, solve_dense, solve_shift_invert, EigenResult, Resolvent};
    pub use crate::geometry::{pullback_from_phi, EndMetric, PhiSpec};
    pub use crate::resolvent::{matrix_element_trace, AnalyticVector, MuGrid};
    pub use crate::scaling::{DeformedMetricField, ScalingProfile};
    pub use crate::spectral::{classify, predict_essential, EigenClass, SpectralPortrait};
    pub use crate::{Error, Result};
    pub use num_complex::Complex64;
}

pub(crate) fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    [z.re, z.im].serialize(s)
}

pub(crate) fn ser_opt_complex<S: serde::Serializer>(
    z: &Option<Complex64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    z.map(|z| [z.re, z.im]).serialize(s)
}
