use std::f64::consts::PI;

use approx::assert_relative_eq;
use cylres::discretization::cross_fe_modes;
use cylres::eigen::solve_dense_with;
use cylres::geometry::{pullback_from_phi, PhiSpec};
use cylres::prelude::*;
use cylres::resolvent::cutoff;
use cylres::runner::selftest::q1_eigenvalue;

type C = Complex64;

fn interval() -> CrossSection {
    CrossSection::interval(PI, SideBc::Dirichlet).unwrap()
}

fn nearest(z: C, set: &[C]) -> f64 {
    set.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min)
}

/// `−(1+λs')⁻¹ ∂x (1+λs')⁻¹ ∂x u − ∂y² u` for the product metric, with the
/// x-derivatives of `u` supplied analytically and `s''` by differences.
fn scaled_laplacian(profile: &ScalingProfile, lambda: C, x: f64, u: [f64; 3], u_yy: f64) -> C {
    let p = 1.0 + lambda * profile.value(x).1;
    let h = 1e-5;
    let dp = lambda * (profile.value(x + h).1 - profile.value(x - h).1) / (2.0 * h);
    let (_, ux, uxx) = (u[0], u[1], u[2]);
    -(uxx / p - dp * ux / (p * p)) / p - u_yy
}

// Green identity: vᵀ A u equals ∫ v (Δ_λ u) for smooth u, v vanishing at
// the ends, up to the discretization error.
#[test]
fn green_identity_against_direct_integration() {
    let cs = interval();
    let geom = EndMetric::product(&cs, 0.7).unwrap();
    let profile = ScalingProfile::quintic(10.0, 2.0).unwrap();
    let lambda = C::new(0.0, 0.3);
    let u_x = |x: f64| {
        let e = (-(x - 13.0).powi(2)).exp();
        [e, -2.0 * (x - 13.0) * e, (4.0 * (x - 13.0).powi(2) - 2.0) * e]
    };
    let v_x = |x: f64| (-(x - 12.0).powi(2) / 2.0).exp() * (1.0 + x / 10.0);
    let mut errs = Vec::new();
    for (nx, ny) in [(120, 12), (240, 24)] {
        let grid = Grid::new(&GridSpec::new(30.0, nx, ny), &cs).unwrap();
        let op = assemble_form(&geom, &profile, lambda, &grid).unwrap();
        let u: Vec<C> = grid.sample(|x, y| C::new(u_x(x)[0] * y.sin(), 0.0));
        let v: Vec<C> = grid.sample(|x, y| C::new(v_x(x) * y.sin(), 0.0));
        let lu: Vec<C> = grid.sample(|x, y| {
            let d = u_x(x);
            scaled_laplacian(&profile, lambda, x, [d[0] * y.sin(), d[1] * y.sin(), d[2] * y.sin()], -d[0] * y.sin())
        });
        let form: C = v.iter().zip(op.a.matvec(&u)).map(|(a, b)| a * b).sum();
        let direct: C = v.iter().zip(op.m.matvec(&lu)).map(|(a, b)| a * b).sum();
        errs.push((form - direct).norm() / direct.norm());
    }
    assert!(errs[1] < 2e-3, "{errs:?}");
    assert!(errs[0] / errs[1] > 3.0, "not second order: {errs:?}");
}

// U ⊗ φ with φ a discrete cross-section mode is an exact eigenvector of the
// 2-D pencil whenever U is one of the 1-D modal pencil.
#[test]
fn modal_eigenvector_lifts_exactly() {
    let cs = interval();
    let geom = EndMetric::product(&cs, 0.7).unwrap();
    let profile = ScalingProfile::quintic(10.0, 2.0).unwrap();
    let lambda = C::new(0.0, 0.3);
    let spec = GridSpec::new(24.0, 96, 8);
    let grid = Grid::new(&spec, &cs).unwrap();
    let (nu_h, phi) = cross_fe_modes(&grid).unwrap();
    assert_relative_eq!(nu_h[0], q1_eigenvalue(PI / 8.0, PI / 8.0), max_relative = 1e-12);

    let modal = assemble_modal(&geom, &profile, lambda, nu_h[0], &spec).unwrap();
    let one_d = solve_dense_with(&modal, true).unwrap();
    let op = assemble_form(&geom, &profile, lambda, &grid).unwrap();
    for pair in one_d.pairs.iter().take(5) {
        let ux = pair.vector.as_ref().unwrap();
        let lifted: Vec<C> = (0..grid.dofs())
            .map(|d| {
                let (ix, iy) = grid.node(d);
                ux[ix - 1] * phi[(iy - 1, 0)]
            })
            .collect();
        let r: Vec<C> = op.a.matvec(&lifted).iter().zip(op.m.matvec(&lifted)).map(|(a, m)| a - pair.mu * m).collect();
        let rn = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let un = lifted.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(rn / (un * op.a.norm1()) < 1e-10, "mu = {}: {}", pair.mu, rn / un);
    }
}

// The projected pencil UᴴAU, UᴴMU onto one cross mode reproduces the modal
// assembly.
#[test]
fn projection_matches_modal_assembly() {
    let cs = interval();
    let geom = EndMetric::product(&cs, 0.7).unwrap();
    let profile = ScalingProfile::quintic(10.0, 2.0).unwrap();
    let lambda = C::new(0.1, 0.25);
    let spec = GridSpec::new(24.0, 48, 8);
    let grid = Grid::new(&spec, &cs).unwrap();
    let (nu_h, phi) = cross_fe_modes(&grid).unwrap();
    let op = assemble_form(&geom, &profile, lambda, &grid).unwrap();
    let modal = assemble_modal(&geom, &profile, lambda, nu_h[1], &spec).unwrap();
    let n = modal.dofs();
    for i in 0..n {
        for j in [i.saturating_sub(1), i, (i + 1).min(n - 1)] {
            let ej: Vec<C> = (0..grid.dofs())
                .map(|d| {
                    let (ix, iy) = grid.node(d);
                    if ix - 1 == j { C::new(phi[(iy - 1, 1)], 0.0) } else { C::new(0.0, 0.0) }
                })
                .collect();
            let aej = op.a.matvec(&ej);
            let proj: C = (0..grid.dofs())
                .filter(|&d| grid.node(d).0 - 1 == i)
                .map(|d| aej[d] * phi[(grid.node(d).1 - 1, 1)])
                .sum();
            let want = modal.a.get(i, j);
            assert!((proj - want).norm() <= 1e-12 * (1.0 + want.norm()), "({i},{j}): {proj} vs {want}");
        }
    }
}

#[test]
fn dense_and_shift_invert_agree_on_a_pullback() {
    let cs = interval();
    let geom = pullback_from_phi(&PhiSpec::Bend { a: 0.5, beta: 0.5, gamma: -1.0 }, 0.7).unwrap();
    let profile = ScalingProfile::quintic(10.0, 2.0).unwrap();
    let grid = Grid::new(&GridSpec::new(24.0, 72, 9), &cs).unwrap();
    let op = assemble_form(&geom, &profile, C::new(0.0, 0.3), &grid).unwrap();
    let dense = solve_dense(&op).unwrap();
    let si = solve_shift_invert(&op, C::new(1.5, -0.3), 12, 1e-12, 80).unwrap();
    for m in si.values() {
        assert!(nearest(m, &dense.values()) < 1e-9 * (1.0 + m.norm()), "{m}");
    }
    assert!(dense.max_backward_error() < 1e-12);
}

// m(μ) is a rational function of μ, so its lattice differences satisfy the
// Cauchy-Riemann equations to second order in the step.
#[test]
fn trace_is_analytic_in_mu() {
    let cs = interval();
    let geom = EndMetric::product(&cs, 0.7).unwrap();
    let profile = ScalingProfile::quintic(0.0, 2.0).unwrap();
    let ts = thresholds(&cs, 3, 400).unwrap();
    let grid = Grid::new(&GridSpec::new(30.0, 120, 12), &cs).unwrap();
    let lambda = C::new(0.0, 0.3);
    let op = assemble_form(&geom, &profile, lambda, &grid).unwrap();
    let f = AnalyticVector::gaussian(0.1);
    let h = 1e-3;
    let mus = MuGrid { re: [2.0 - h, 2.0 + h], im: [-0.1 - h, -0.1 + h], n_re: 3, n_im: 3 };
    let t = matrix_element_trace(&geom, &profile, &op, &ts, &f, &f, &mus, &[]).unwrap();
    let at = |i: usize, j: usize| t.values[j * 3 + i].unwrap();
    let d_re = (at(2, 1) - at(0, 1)) / (2.0 * h);
    let d_im = (at(1, 2) - at(1, 0)) / (2.0 * h);
    assert!((d_im - C::i() * d_re).norm() < 1e-5 * d_re.norm(), "{d_re} {d_im}");
}

#[test]
fn trace_at_zero_matches_one_mode_resolvent() {
    let cs = interval();
    let geom = EndMetric::product(&cs, 0.7).unwrap();
    let profile = ScalingProfile::quintic(10.0, 2.0).unwrap();
    let ts = thresholds(&cs, 3, 400).unwrap();
    let spec = GridSpec::new(20.0, 80, 10);
    let grid = Grid::new(&spec, &cs).unwrap();
    let (nu_h, _) = cross_fe_modes(&grid).unwrap();
    let op = assemble_form(&geom, &profile, C::new(0.0, 0.0), &grid).unwrap();
    let f = AnalyticVector::gaussian(0.2);
    let mu = C::new(-0.5, 0.2);
    let t = matrix_element_trace(&geom, &profile, &op, &ts, &f, &f, &MuGrid::single(mu), &[]).unwrap();

    let modal = assemble_modal(&geom, &profile, C::new(0.0, 0.0), nu_h[0], &spec).unwrap();
    let h = spec.x_max / spec.nx as f64;
    let fx: Vec<C> = (1..spec.nx).map(|i| cutoff(i as f64 * h) * f.axial(C::new(i as f64 * h, 0.0))).collect();
    let u = resolvent_apply(&modal, mu, &fx).unwrap();
    let oracle: C = u.iter().zip(&fx).map(|(a, b)| a * b.conj() * h).sum();
    assert!((t.values[0].unwrap() - oracle).norm() < 1e-12, "{:?} vs {oracle}", t.values[0]);
}

#[test]
fn widening_end_has_real_spectrum_at_zero() {
    let cs = interval();
    let geom = pullback_from_phi(&PhiSpec::Widen, 0.7).unwrap();
    let profile = ScalingProfile::quintic(10.0, 2.0).unwrap();
    let grid = Grid::new(&GridSpec::new(20.0, 60, 10), &cs).unwrap();
    let op = assemble_form(&geom, &profile, C::new(0.0, 0.0), &grid).unwrap();
    assert!(op.a.hermitian_defect() < 1e-12);
    let eig = solve_dense(&op).unwrap();
    assert!(eig.values().iter().all(|m| m.im.abs() < 1e-9 * (1.0 + m.re.abs())));
}
