//! The bent strip carries an eigenvalue below the first threshold. It stays
//! put as λ changes while the continuum rotates around it.

use std::f64::consts::PI;

use cylres::geometry::{pullback_from_phi, PhiSpec};
use cylres::prelude::*;

fn main() -> Result<()> {
    let cs = CrossSection::interval(PI, SideBc::Dirichlet)?;
    let bend = pullback_from_phi(&PhiSpec::Bend { a: 0.5, beta: 0.5, gamma: -1.0 }, 0.7)?;
    let profile = ScalingProfile::quintic(10.0, 2.0)?;
    for (nx, ny) in [(150, 15), (300, 30)] {
        let grid = Grid::new(&GridSpec::new(30.0, nx, ny), &cs)?;
        for lambda in [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.2), Complex64::new(0.0, 0.3)] {
            let op = assemble_form(&bend, &profile, lambda, &grid)?;
            let eig = solve_shift_invert(&op, Complex64::new(0.85, 0.0), 3, 1e-12, 80)?;
            let mu = eig
                .values()
                .into_iter()
                .min_by(|a, b| (a.re - 0.85).abs().total_cmp(&(b.re - 0.85).abs()))
                .unwrap();
            println!("{nx}x{ny} lambda = {lambda}: mu = {:.9} {:+.2e}i", mu.re, mu.im);
        }
    }
    Ok(())
}
