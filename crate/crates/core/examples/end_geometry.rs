//! The bend pullback metric: values on the real axis and in the complex
//! sector, its limit at infinity and the sampled stabilization check.

use cylres::geometry::{check_stabilization, pullback_from_phi, PhiSpec};
use cylres::prelude::*;
use cylres::scaling::{deformed_metric, ScalingProfile};

fn main() -> Result<()> {
    let bend = pullback_from_phi(&PhiSpec::Bend { a: 0.5, beta: 0.5, gamma: -1.0 }, 0.7)?;
    for x in [0.0, 1.0, 3.0, 10.0, 100.0] {
        let g = bend.metric_at(Complex64::new(x, 0.0), 1.0)?;
        println!("x = {x:>5}: g = [[{:.5}, {:.5}], [., {:.5}]]", g.xx.re, g.xy.re, g.yy.re);
    }
    let z = Complex64::from_polar(5.0, 0.3);
    let g = bend.metric_at(z, 1.0)?;
    println!("z = {z:.3}: g_xx = {:.5}, det = {:.5}", g.xx, g.det());

    let report = check_stabilization(&bend, &[0.0, 0.3, -0.3], &[10.0, 20.0, 40.0, 80.0], &[0.0, 0.5, 1.0, 1.5, 2.0])?;
    for ray in &report.rays {
        let r: Vec<String> = ray.r.iter().map(|v| format!("{v:.3e}")).collect();
        println!("arg {:+.1}: r = [{}], nonincreasing = {}", ray.arg, r.join(", "), ray.nonincreasing);
    }

    let profile = ScalingProfile::quintic(10.0, 2.0)?;
    let lambda = Complex64::new(0.0, 0.3);
    for x in [5.0, 12.0, 20.0] {
        let gl = deformed_metric(&bend, &profile, lambda, x, 1.0)?;
        println!("deformed g at x = {x}: xx = {:.5}, yy = {:.5}", gl.xx, gl.yy);
    }
    Ok(())
}
