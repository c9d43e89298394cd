//! Thresholds of a few cross-sections: closed forms where they exist, the
//! finite-difference path for a warped metric.

use std::f64::consts::PI;

use cylres::cross_section::{thresholds_with, ThresholdMethod};
use cylres::prelude::*;

fn main() -> Result<()> {
    let sections = [
        ("interval, Dirichlet", CrossSection::interval(PI, SideBc::Dirichlet)?),
        ("interval, Neumann", CrossSection::interval(PI, SideBc::Neumann)?),
        ("circle", CrossSection::circle(2.0 * PI)?),
        (
            "warped interval",
            CrossSection::interval(PI, SideBc::Dirichlet)?
                .with_metric(CrossMetric::Sine { amplitude: 0.3, wavenumber: 2.0 })?,
        ),
    ];
    for (name, cs) in &sections {
        let ts = thresholds(cs, 4, 400)?;
        println!("{name:>20}: nu = {:?}, multiplicities = {:?}", ts.values, ts.multiplicities);
    }

    let cs = &sections[0].1;
    let fd = thresholds_with(cs, 3, 400, ThresholdMethod::FiniteDifference)?;
    for (j, v) in fd.values.iter().enumerate() {
        let exact = ((j + 1) * (j + 1)) as f64;
        println!("FD nu_{j} = {v:.8} (exact {exact}, rel err {:.2e})", (v - exact).abs() / exact);
    }
    Ok(())
}
