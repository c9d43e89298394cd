//! The matrix element `m(μ)` at μ = −1 for several λ, and a small trace
//! around the bend bound state with its detected pole.

use std::f64::consts::PI;

use cylres::geometry::{pullback_from_phi, PhiSpec};
use cylres::prelude::*;
use cylres::resolvent::detect_poles;

fn main() -> Result<()> {
    let cs = CrossSection::interval(PI, SideBc::Dirichlet)?;
    let ts = thresholds(&cs, 3, 400)?;
    let geom = EndMetric::product(&cs, 0.7)?;
    let profile = ScalingProfile::quintic(10.0, 2.0)?;
    let f = AnalyticVector::gaussian(0.1);
    let grid = Grid::new(&GridSpec::new(40.0, 200, 20), &cs)?;
    let at = MuGrid::single(Complex64::new(-1.0, 0.0));
    for lambda in [0.0, 0.1, 0.2].map(|r| Complex64::new(r, 0.0)).into_iter().chain([Complex64::new(0.0, 0.3)]) {
        let op = assemble_form(&geom, &profile, lambda, &grid)?;
        let t = matrix_element_trace(&geom, &profile, &op, &ts, &f, &f, &at, &[])?;
        println!("lambda = {lambda}: m(-1) = {:.10}", t.values[0].unwrap());
    }

    let bend = pullback_from_phi(&PhiSpec::Bend { a: 0.5, beta: 0.5, gamma: -1.0 }, 0.7)?;
    let lambda = Complex64::new(0.0, 0.3);
    let grid = Grid::new(&GridSpec::new(30.0, 150, 15), &cs)?;
    let op = assemble_form(&bend, &profile, lambda, &grid)?;
    let eig = solve_shift_invert(&op, Complex64::new(0.85, 0.0), 4, 1e-12, 80)?;
    let mus = MuGrid { re: [0.79, 0.89], im: [-0.04, 0.04], n_re: 41, n_im: 9 };
    let trace = matrix_element_trace(&bend, &profile, &op, &ts, &f, &f, &mus, &eig.values())?;
    let report = detect_poles(&trace, &eig.values(), 1e-2);
    for m in &report.matched {
        println!("pole {:.6} matches eigenvalue {:.6} (distance {:.1e})", m.pole, m.eigenvalue, m.distance);
    }
    println!("unmatched peaks: {}", report.unmatched.len());
    Ok(())
}
