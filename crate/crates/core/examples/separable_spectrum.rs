//! Product cylinder at λ = 0: the assembled eigenvalues against
//! `ν_j + (kπ/X)²` and the observed convergence order.

use std::f64::consts::PI;

use cylres::prelude::*;

fn lowest(nx: usize, ny: usize, count: usize) -> Result<Vec<f64>> {
    let cs = CrossSection::interval(PI, SideBc::Dirichlet)?;
    let geom = EndMetric::product(&cs, 0.7)?;
    let profile = ScalingProfile::quintic(10.0, 2.0)?;
    let grid = Grid::new(&GridSpec::new(10.0, nx, ny), &cs)?;
    let op = assemble_form(&geom, &profile, Complex64::new(0.0, 0.0), &grid)?;
    let eig = solve_shift_invert(&op, Complex64::new(0.0, 0.0), count, 1e-12, 80)?;
    let mut v: Vec<f64> = eig.values().iter().map(|m| m.re).collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn main() -> Result<()> {
    let mut exact = Vec::new();
    for j in 1..=4 {
        for k in 1..=40 {
            exact.push((j * j) as f64 + (k as f64 * PI / 10.0).powi(2));
        }
    }
    exact.sort_by(f64::total_cmp);
    exact.truncate(10);

    let levels = [(100, 10), (200, 20), (400, 40)];
    let mut errs = Vec::new();
    for &(nx, ny) in &levels {
        let v = lowest(nx, ny, 10)?;
        let e = v.iter().zip(&exact).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
        println!("{nx}x{ny}: max rel err {e:.3e}");
        errs.push(e);
    }
    for w in errs.windows(2) {
        println!("order {:.3}", (w[0] / w[1]).log2());
    }
    Ok(())
}
