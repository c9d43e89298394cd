//! Samples the pointwise sector of the deformed metric and the shifted
//! numerical range of the assembled operator.

use std::f64::consts::PI;

use cylres::geometry::{pullback_from_phi, PhiSpec};
use cylres::prelude::*;
use cylres::scaling::sample_pointwise_sector;
use cylres::spectral::sector_check_auto;

fn main() -> Result<()> {
    let cs = CrossSection::interval(PI, SideBc::Dirichlet)?;
    let profile = ScalingProfile::quintic(10.0, 2.0)?;
    let grid = Grid::new(&GridSpec::new(30.0, 120, 12), &cs)?;
    let geoms = [("product", EndMetric::product(&cs, 0.7)?), ("widen", pullback_from_phi(&PhiSpec::Widen, 0.7)?)];
    for (name, geom) in &geoms {
        for lambda in [Complex64::new(0.0, 0.2), Complex64::new(0.0, 0.3), Complex64::new(0.3, 0.2)] {
            let field = DeformedMetricField::new(geom, &profile, lambda, 30.0)?;
            let pw = sample_pointwise_sector(&field, (0.0, 30.0), (0.0, PI), 1000, 1)?;
            let op = assemble_form(geom, &profile, lambda, &grid)?;
            let nr = sector_check_auto(&op, 1000, 1)?;
            println!(
                "{name:>8} lambda = {lambda}: pointwise max arg {:.3}, numerical range max arg {:.3} (gamma {:.3})",
                pw.max_arg, nr.max_arg, nr.gamma
            );
        }
    }
    Ok(())
}
