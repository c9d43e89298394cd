use std::f64::consts::PI;

use cylres::discretization::CsrMatrix;
use cylres::eigen::{BandedLu, EigenPair, EigenResult, Method};
use cylres::geometry::Sym2;
use cylres::prelude::*;
use cylres::scaling::{check_lambda, far_field_matrix};
use cylres::spectral::{ray_angle, ClassifyTolerances, Ray};
use proptest::prelude::*;

type C = Complex64;

fn lambda_in_disk() -> impl Strategy<Value = C> {
    (0.0f64..0.6, -PI..PI).prop_map(|(r, t)| C::from_polar(r, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ramp_is_monotone_with_unit_slope(onset in 0.0f64..20.0, width in 0.5f64..8.0, x in -5.0f64..40.0) {
        let p = ScalingProfile::quintic(onset, width).unwrap();
        let (s, ds) = p.value(x);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ds));
        prop_assert!(s >= 0.0);
        if x <= onset + 1.0 {
            prop_assert_eq!(s, 0.0);
        }
        if x >= onset + 1.0 + width {
            prop_assert!((ds - 1.0).abs() < 1e-12);
        }
        let (s2, _) = p.value(x + 0.1);
        prop_assert!(s2 >= s);
    }

    #[test]
    fn sym2_inverse_roundtrip(a in 0.5f64..3.0, b in -0.4f64..0.4, c in 0.5f64..3.0, t in -0.5f64..0.5) {
        let g = Sym2::new(C::new(a, t), C::new(b, 0.0), C::new(c, -t));
        let gi = g.inverse().unwrap();
        let e1 = gi.apply(g.apply([C::new(1.0, 0.0), C::new(0.0, 0.0)]));
        let e2 = gi.apply(g.apply([C::new(0.0, 0.0), C::new(1.0, 0.0)]));
        prop_assert!((e1[0] - 1.0).norm() < 1e-12 && e1[1].norm() < 1e-12);
        prop_assert!(e2[0].norm() < 1e-12 && (e2[1] - 1.0).norm() < 1e-12);
    }

    #[test]
    fn far_field_is_real_for_real_lambda(l in -0.6f64..0.6, ds in 0.0f64..1.0) {
        let h = far_field_matrix(C::new(l, 0.0), ds, 1.0);
        prop_assert!(h.xx.im.abs() < 1e-14 && h.yy.im.abs() < 1e-14);
    }

    #[test]
    fn disk_check_accepts_interior(l in lambda_in_disk()) {
        prop_assume!(l.norm() < 0.6);
        prop_assert!(check_lambda(l, 0.7).is_ok());
    }

    #[test]
    fn points_on_a_ray_are_artifacts(t in 0.2f64..6.0, l in 0.05f64..0.5) {
        let lambda = C::new(0.0, l);
        let ray = Ray { origin: 1.0, angle: ray_angle(lambda) };
        let mu = 1.0 + ray.direction() * t;
        prop_assert!(ray.distance(mu) < 1e-12);
        let eig = EigenResult {
            pairs: vec![EigenPair { mu, residual: 0.0, backward_error: 0.0, vector: None }],
            method: Method::Dense,
            shift: None,
        };
        let p = classify(&[1.0, 4.0, 9.0], lambda, &eig, ClassifyTolerances::default());
        let near_threshold = [1.0, 4.0, 9.0].iter().any(|v| (mu - v).norm() < 0.05);
        let expect = if near_threshold { EigenClass::ThresholdAdjacent } else { EigenClass::RayArtifact };
        prop_assert_eq!(p.eigs[0].class, expect);
    }

    #[test]
    fn ray_distance_is_nonnegative_and_exact_off_ray(t in 0.1f64..5.0, d in 0.01f64..1.0, a in -1.2f64..0.0) {
        let ray = Ray { origin: 2.0, angle: a };
        let normal = ray.direction() * C::i();
        let mu = 2.0 + ray.direction() * t + normal * d;
        prop_assert!((ray.distance(mu) - d).abs() < 1e-12);
    }

    #[test]
    fn csr_matvec_matches_dense(entries in prop::collection::vec((0usize..6, 0usize..6, -2.0f64..2.0, -2.0f64..2.0), 1..30),
                                x in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6)) {
        let trip: Vec<(usize, usize, C)> = entries.iter().map(|&(i, j, a, b)| (i, j, C::new(a, b))).collect();
        let m = CsrMatrix::from_triplets(6, 6, trip.clone());
        let x: Vec<C> = x.iter().map(|&(a, b)| C::new(a, b)).collect();
        let mut want = vec![C::new(0.0, 0.0); 6];
        for (i, j, v) in trip {
            want[i] += v * x[j];
        }
        for (a, b) in m.matvec(&x).iter().zip(&want) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn banded_lu_solves(diag in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12),
                        off in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 42),
                        b in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12)) {
        let n = 12;
        let mut t = Vec::new();
        let mut k = 0;
        for i in 0..n {
            t.push((i, i, C::new(diag[i].0, diag[i].1)));
            for j in [i + 1, i + 2] {
                if j < n {
                    t.push((i, j, C::new(off[k].0, off[k].1)));
                    t.push((j, i, C::new(off[k + 1].0, off[k + 1].1)));
                    k += 2;
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let b: Vec<C> = b.iter().map(|&(x, y)| C::new(x, y)).collect();
        if let Ok(lu) = BandedLu::factor(&a) {
            let x = lu.solve(&b);
            let r: f64 = a.matvec(&x).iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
            let xn: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(r <= 1e-9 * (1.0 + a.norm1() * xn), "residual {}", r);
        }
    }

    #[test]
    fn mu_grid_covers_its_corners(re0 in -2.0f64..2.0, w in 0.0f64..2.0, n_re in 1usize..7, n_im in 1usize..7) {
        let g = MuGrid { re: [re0, re0 + w], im: [-0.5, 0.5], n_re, n_im };
        let p = g.points();
        prop_assert_eq!(p.len(), n_re * n_im);
        prop_assert_eq!(p[0], C::new(re0, -0.5));
        let last_re = if n_re == 1 { re0 } else { re0 + w };
        let last_im = if n_im == 1 { -0.5 } else { 0.5 };
        let gap = (p[p.len() - 1] - C::new(last_re, last_im)).norm();
        prop_assert!(gap < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // A(λ̄) = conj A(λ) entrywise for a real-analytic end.
    #[test]
    fn assembly_commutes_with_conjugation(l in lambda_in_disk()) {
        prop_assume!(l.norm() < 0.6);
        let cs = CrossSection::interval(PI, SideBc::Dirichlet).unwrap();
        let geom = EndMetric::product(&cs, 0.7).unwrap();
        let profile = ScalingProfile::quintic(2.0, 2.0).unwrap();
        let grid = Grid::new(&GridSpec::new(12.0, 24, 8), &cs).unwrap();
        let a = assemble_form(&geom, &profile, l, &grid).unwrap();
        let b = assemble_form(&geom, &profile, l.conj(), &grid).unwrap();
        let d = a.a.conj().add_scaled(C::new(-1.0, 0.0), &b.a).max_abs();
        prop_assert!(d <= 1e-13 * a.a.max_abs());
        prop_assert!(a.m.hermitian_defect() < 1e-14);
    }

    // The sampled shifted numerical range stays inside the right half-plane.
    #[test]
    fn numerical_range_is_sectorial(l in lambda_in_disk(), seed in 0u64..1000) {
        prop_assume!(l.norm() < 0.6 && l.norm() > 0.01);
        let cs = CrossSection::interval(PI, SideBc::Dirichlet).unwrap();
        let geom = EndMetric::product(&cs, 0.7).unwrap();
        let profile = ScalingProfile::quintic(2.0, 2.0).unwrap();
        let grid = Grid::new(&GridSpec::new(12.0, 24, 8), &cs).unwrap();
        let op = assemble_form(&geom, &profile, l, &grid).unwrap();
        let rep = cylres::spectral::sector_check_auto(&op, 50, seed).unwrap();
        prop_assert!(rep.pass(), "{:?}", rep);
    }
}
