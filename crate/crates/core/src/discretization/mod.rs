//! Bilinear finite elements for the deformed form on `[0, X_max] × Ω`.

mod assemble;
mod grid;
mod sparse;

pub use assemble::{
    assemble_form, assemble_modal, cross_fe_modes, cross_fe_pencil, neumann_trace, AssembledOperator, AssemblyStats,
    Layout, OperatorMeta, Side2,
};
pub use grid::{CapBc, Grid, GridSpec};
pub use sparse::CsrMatrix;
