//! Tracks the bend eigenvalue across two ramp widths and two values of λ,
//! with a Richardson estimate of the discretization error.

use std::f64::consts::PI;

use cylres::eigen::ArnoldiOptions;
use cylres::geometry::{pullback_from_phi, PhiSpec};
use cylres::prelude::*;
use cylres::spectral::{sweep_lambda, sweep_profile, SweepJob, Window};

fn main() -> Result<()> {
    let cs = CrossSection::interval(PI, SideBc::Dirichlet)?;
    let job = SweepJob {
        geometry: pullback_from_phi(&PhiSpec::Bend { a: 0.5, beta: 0.5, gamma: -1.0 }, 0.7)?,
        section: cs.clone(),
        nu: thresholds(&cs, 3, 400)?.values,
        grid: GridSpec::new(30.0, 150, 15),
        count: 6,
        drift_tol: 1e-3,
        richardson: true,
        arnoldi: ArnoldiOptions::default(),
    };
    let window = Window { re: [0.8, 0.9], im: [-0.05, 0.05] };

    let by_profile = sweep_profile(&job, &ScalingProfile::stock(10.0), Complex64::new(0.0, 0.3), &window)?;
    println!(
        "profiles: drift {:.2e}, estimate {:.2e}, stable {}",
        by_profile.max_drift,
        by_profile.discretization_estimate.unwrap_or(f64::NAN),
        by_profile.stable()
    );

    let lambdas = [Complex64::new(0.0, 0.2), Complex64::new(0.0, 0.3)];
    let by_lambda = sweep_lambda(&job, &ScalingProfile::quintic(10.0, 2.0)?, &lambdas, &window)?;
    println!(
        "lambdas: drift {:.2e}, estimate {:.2e}, stable {}",
        by_lambda.max_drift,
        by_lambda.discretization_estimate.unwrap_or(f64::NAN),
        by_lambda.stable()
    );
    for run in &by_lambda.runs {
        println!("  {:?} {}: {:?}", run.lambda, run.profile, run.value);
    }
    Ok(())
}
