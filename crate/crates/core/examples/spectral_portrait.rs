//! Spectral portrait of the scaled product cylinder at λ = 0.3i, written to
//! `target/portrait/` as CSV and SVG.

use std::f64::consts::PI;

use cylres::prelude::*;
use cylres::runner::svg::portrait_svg;
use cylres::spectral::{fit_ray_angle, ray_angle, ClassifyTolerances};

fn main() -> Result<()> {
    let cs = CrossSection::interval(PI, SideBc::Dirichlet)?;
    let geom = EndMetric::product(&cs, 0.7)?;
    let profile = ScalingProfile::quintic(10.0, 2.0)?;
    let lambda = Complex64::new(0.0, 0.3);
    let grid = Grid::new(&GridSpec::new(40.0, 200, 20), &cs)?;
    let op = assemble_form(&geom, &profile, lambda, &grid)?;
    let ts = thresholds(&cs, 3, 400)?;

    let eig = solve_shift_invert(&op, Complex64::new(3.5, -0.8), 40, 1e-10, 60)?;
    let portrait = classify(&ts.values, lambda, &eig, ClassifyTolerances::default());
    for class in [EigenClass::RayArtifact, EigenClass::DiscreteCandidate, EigenClass::ThresholdAdjacent] {
        println!("{class:?}: {}", portrait.of_class(class).count());
    }

    // ray artifacts leaving ν₀, against the infinite-cylinder prediction and
    // the angle set by the complex length of the truncated box
    let near_first: Vec<Complex64> = portrait
        .of_class(EigenClass::RayArtifact)
        .filter(|e| e.nearest_ray == 0 && (1.5..=6.0).contains(&e.mu.re))
        .map(|e| e.mu)
        .collect();
    let x = grid.spec().x_max;
    let ell = x + lambda * profile.value(x).0;
    println!(
        "fitted angle {:?} from {} points, predicted {:.5}, box {:.5}",
        fit_ray_angle(&near_first, 1.0),
        near_first.len(),
        ray_angle(lambda),
        -2.0 * ell.arg()
    );

    let dir = std::path::Path::new("target/portrait");
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("eigs.csv"), portrait.to_csv())?;
    std::fs::write(dir.join("portrait.svg"), portrait_svg(&portrait))?;
    println!("wrote {}", dir.display());
    Ok(())
}
