use proptest::prelude::*;
use superres::gaussian::{extreme_points, lambert_w0, limit_large_separation, ratio_eta, ratio_samewidth};
use superres::psf::make_gaussian;
use superres::qcrb::{
    classical_fisher_direct_full, hd_direct, hd_exact_general, hd_exact_identical, hd_known, qfi_unknown_general,
    separation_precision, SourceScene,
};

fn scene(d: f64, eps: f64) -> SourceScene {
    SourceScene::from_eps(0.0, d, eps, 1.0).unwrap()
}

proptest! {
    #[test]
    fn gaussian_ratio_is_a_fraction(eta in -0.9f64..0.9, eps in -0.99f64..0.99, d in 0.0f64..10.0) {
        let r = ratio_eta(eta, eps, d).unwrap().value;
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&r), "ratio {r}");
    }

    #[test]
    fn swapping_the_sources_leaves_the_ratio(eta in -0.9f64..0.9, eps in -0.99f64..0.99, d in 0.0f64..6.0) {
        let a = ratio_eta(eta, eps, d).unwrap().value;
        let b = ratio_eta(-eta, -eps, d).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300) + 1e-14);
    }

    #[test]
    fn equal_widths_are_the_limit_of_unequal_ones(eps in -0.95f64..0.95, d in 0.1f64..6.0) {
        let near = ratio_eta(1e-7, eps, d).unwrap().value;
        let same = ratio_samewidth(eps, d).unwrap().value;
        prop_assert!((near - same).abs() <= 1e-5, "{near} vs {same}");
    }

    #[test]
    fn wide_separations_approach_the_limit(eta in -0.8f64..0.8, eps in -0.95f64..0.95) {
        let lim = limit_large_separation(eta, eps).unwrap();
        let far = ratio_eta(eta, eps, 60.0).unwrap().value;
        prop_assert!((far - lim).abs() <= 1e-6, "{far} vs {lim}");
    }

    #[test]
    fn interior_minimum_bounds_the_curve(eta in 0.01f64..0.5, eps in -0.95f64..0.95, frac in 0.0f64..1.0) {
        let d2 = extreme_points(eta).unwrap().d_tilde_2;
        let f = |d: f64| ratio_eta(eta, eps, d).unwrap().value;
        let d = frac * 2.0 * d2;
        let (lo, hi) = (f(d2), f(0.0));
        prop_assert!(f(d) >= lo - 1e-12 && f(d) <= hi + 1e-12, "f({d}) = {} outside [{lo}, {hi}]", f(d));
    }

    #[test]
    fn lambert_inverts_w_exp_w(x in -0.367_879f64..50.0) {
        let w = lambert_w0(x).unwrap();
        prop_assert!(w >= -1.0);
        prop_assert!((w * w.exp() - x).abs() <= 1e-13 * x.abs().max(1e-3));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quantum_fisher_matrix_is_positive(s1 in 0.5f64..2.0, s2 in 0.5f64..2.0, d in 0.05f64..4.0, eps in -0.9f64..0.9) {
        let (p1, p2) = (make_gaussian(s1).unwrap(), make_gaussian(s2).unwrap());
        let q = qfi_unknown_general(&p1, &p2, &scene(d, eps)).unwrap();
        prop_assert!(q.is_symmetric(1e-12));
        prop_assert!(q.is_psd());
    }

    #[test]
    fn measurement_cannot_beat_the_quantum_bound(s1 in 0.5f64..2.0, s2 in 0.5f64..2.0, d in 0.1f64..4.0, eps in -0.9f64..0.9) {
        let (p1, p2) = (make_gaussian(s1).unwrap(), make_gaussian(s2).unwrap());
        let sc = scene(d, eps);
        let direct = separation_precision(&classical_fisher_direct_full(&p1, &p2, &sc).unwrap(), 1.0).unwrap().h_d;
        let quantum = hd_exact_general(&p1, &p2, &sc).unwrap().h_d;
        prop_assert!(direct <= quantum * (1.0 + 1e-8), "{direct} > {quantum}");
    }

    #[test]
    fn known_brightness_direct_imaging_stays_below_its_quantum_bound(s in 0.5f64..2.0, d in 0.1f64..4.0, eps in -0.9f64..0.9) {
        let p = make_gaussian(s).unwrap();
        let sc = scene(d, eps);
        let direct = hd_direct(&p, &p, &sc).unwrap().h_d;
        let quantum = hd_known(&p, &sc).unwrap().h_d;
        prop_assert!(direct <= quantum * (1.0 + 1e-8), "{direct} > {quantum}");
    }

    #[test]
    fn unknown_brightness_never_helps(d in 0.01f64..4.0, eps in -0.9f64..0.9) {
        let p = make_gaussian(1.0).unwrap();
        let sc = scene(d, eps);
        let unknown = hd_exact_identical(&p, &sc).unwrap();
        let known = hd_known(&p, &sc).unwrap();
        prop_assert!(unknown.h_d <= known.h_d * (1.0 + 1e-10));
        prop_assert!(unknown.ratio <= 1.0 + 1e-10);
    }

    #[test]
    fn relabelling_the_sources_is_harmless(s1 in 0.5f64..2.0, s2 in 0.5f64..2.0, d in 0.05f64..4.0, eps in -0.9f64..0.9) {
        let (p1, p2) = (make_gaussian(s1).unwrap(), make_gaussian(s2).unwrap());
        let a = hd_exact_general(&p1, &p2, &scene(d, eps)).unwrap().h_d;
        let b = hd_exact_general(&p2, &p1, &scene(d, -eps)).unwrap().h_d;
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-300), "{a} vs {b}");
    }

    #[test]
    fn scene_photon_numbers_round_trip(n1 in 0.1f64..1e6, n2 in 0.1f64..1e6, d in 0.0f64..10.0) {
        let s = SourceScene::new(0.3, d, n1, n2).unwrap();
        prop_assert!((s.n1() - n1).abs() <= 1e-9 * n1.max(n2));
        prop_assert!((s.n2() - n2).abs() <= 1e-9 * n1.max(n2));
        prop_assert!((s.x2() - s.x1() - d).abs() <= 1e-12 * (1.0 + d));
    }
}
