use fatou_core::fatou::{nested_samples, AdmissibleRegion};
use fatou_core::special::{gamma, ln_gamma};
use fatou_core::{HTypeGroup, Point, SpacePoint, SpectralParam};
use proptest::prelude::*;

fn groups() -> Vec<HTypeGroup> {
    vec![HTypeGroup::heisenberg(1).unwrap(), HTypeGroup::heisenberg(2).unwrap()]
}

// Coordinates for either test group: the first dim_x entries go to X, the
// next k to Z.
fn coords() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 5)
}

fn point(g: &HTypeGroup, c: &[f64]) -> Point {
    let m = g.dim_x();
    Point::new(&c[..m], &c[m..m + g.k()])
}

fn close(a: &Point, b: &Point, tol: f64) -> bool {
    a.coords().iter().zip(b.coords()).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn group_law_is_associative(gi in 0usize..2, a in coords(), b in coords(), c in coords()) {
        let g = &groups()[gi];
        let (a, b, c) = (point(g, &a), point(g, &b), point(g, &c));
        let left = g.mul(&g.mul(&a, &b), &c);
        let right = g.mul(&a, &g.mul(&b, &c));
        prop_assert!(close(&left, &right, 1e-12));
    }

    #[test]
    fn inverse_cancels(gi in 0usize..2, a in coords()) {
        let g = &groups()[gi];
        let a = point(g, &a);
        prop_assert!(close(&g.mul(&a, &g.inverse(&a)), &g.identity(), 1e-12));
        prop_assert!(close(&g.mul(&g.inverse(&a), &a), &g.identity(), 1e-12));
    }

    #[test]
    fn quasi_distance_is_left_invariant(gi in 0usize..2, m in coords(), a in coords(), b in coords()) {
        let g = &groups()[gi];
        let (m, a, b) = (point(g, &m), point(g, &a), point(g, &b));
        let before = g.quasi_distance(&a, &b);
        let after = g.quasi_distance(&g.mul(&m, &a), &g.mul(&m, &b));
        prop_assert!((before - after).abs() <= 1e-9 * (1.0 + before));
    }

    #[test]
    fn dilations_are_homogeneous_automorphisms(gi in 0usize..2, r in 0.01f64..100.0, a in coords(), b in coords()) {
        let g = &groups()[gi];
        let (a, b) = (point(g, &a), point(g, &b));
        let da = g.dilate(r, &a).unwrap();
        let db = g.dilate(r, &b).unwrap();
        prop_assert!((g.norm_d(&da) - r * g.norm_d(&a)).abs() <= 1e-12 * (1.0 + r * g.norm_d(&a)));
        let lhs = g.dilate(r, &g.mul(&a, &b)).unwrap();
        prop_assert!(close(&lhs, &g.mul(&da, &db), 1e-12));
    }

    #[test]
    fn quasi_triangle_holds_with_tau(gi in 0usize..2, a in coords(), b in coords()) {
        let g = &groups()[gi];
        let (a, b) = (point(g, &a), point(g, &b));
        let lhs = g.norm_d(&g.mul(&a, &b));
        prop_assert!(lhs <= g.tau() * (g.norm_d(&a) + g.norm_d(&b)) * (1.0 + 1e-12));
    }

    #[test]
    fn kernel_scales_under_dilation(gi in 0usize..2, beta in 0.2f64..3.0, a in 0.01f64..50.0, n in coords()) {
        let g = &groups()[gi];
        let sp = SpectralParam::new(g, beta).unwrap();
        let n = point(g, &n);
        let q = g.q() as i32;
        let lhs = sp.q_kernel(&n, a);
        let rhs = a.powi(-q) * sp.q_kernel(&g.dilate(1.0 / a, &n).unwrap(), 1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1e-300));
    }

    #[test]
    fn admissible_regions_follow_the_action(
        gi in 0usize..2,
        v in coords(),
        n in coords(),
        m in coords(),
        a in 0.01f64..10.0,
        r in 0.05f64..20.0,
        alpha in 0.25f64..4.0,
    ) {
        let g = &groups()[gi];
        let (v, n, m) = (point(g, &v), point(g, &n), point(g, &m));
        let x = SpacePoint { n: n.clone(), a };
        let inside = AdmissibleRegion::new(v.clone(), alpha).unwrap().contains(g, &x);
        // left translation moves vertex and point together
        let shifted = AdmissibleRegion::new(g.mul(&m, &v), alpha).unwrap();
        let xs = SpacePoint { n: g.mul(&m, &n), a };
        // the margin keeps rounding away from the boundary
        let margin = (g.quasi_distance(&v, &n) - alpha * a).abs() > 1e-9 * (1.0 + alpha * a);
        if margin {
            prop_assert_eq!(shifted.contains(g, &xs), inside);
            let scaled = AdmissibleRegion::new(g.dilate(r, &v).unwrap(), alpha).unwrap();
            let xr = SpacePoint { n: g.dilate(r, &n).unwrap(), a: r * a };
            prop_assert_eq!(scaled.contains(g, &xr), inside);
        }
    }

    #[test]
    fn gamma_recurrence(x in 0.05f64..60.0) {
        prop_assert!((ln_gamma(x + 1.0) - ln_gamma(x) - x.ln()).abs() < 1e-10 * (1.0 + ln_gamma(x + 1.0).abs()));
        if x < 20.0 {
            prop_assert!((gamma(x + 1.0) / (x * gamma(x)) - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn wider_apertures_see_every_narrower_sample(v in coords(), seed in 0u64..1000) {
        let g = HTypeGroup::heisenberg(1).unwrap();
        let v = point(&g, &v);
        let apertures = [0.5, 1.0, 2.0];
        let levels = [1.0, 0.25, 0.0625];
        let nested = nested_samples(&g, &v, &apertures, &levels, 6, seed).unwrap();
        for w in nested.windows(2) {
            let (narrow, wide) = (&w[0].1, &w[1].1);
            for (lo, hi) in narrow.iter().zip(wide) {
                for x in lo {
                    prop_assert!(hi.iter().any(|y| y.a == x.a && y.n.coords() == x.n.coords()));
                }
            }
        }
        for (alpha, levels) in &nested {
            let region = AdmissibleRegion::new(v.clone(), *alpha).unwrap();
            for x in levels.iter().flatten() {
                prop_assert!(region.contains(&g, x) || g.quasi_distance(&v, &x.n) == 0.0);
            }
        }
    }
}
