mod common;

use common::*;
use proptest::prelude::*;
use slowfast_core::dynamics::{boundedness_box, integrate, IntegratorControls};
use slowfast_core::manifold::{
    classify_region, fold_points, gamma_cap, lambda_1, lambda_2, phi, quartic_f, quartic_f_prime,
    Region,
};
use slowfast_core::model::Params;
use slowfast_core::normalform::{
    blowup_chart, canard_delta, first_lyapunov, g_coefficients, h_and_c, l1_from_g,
    l1_from_recursion, l2_compact, l2_from_recursion, second_lyapunov, taylor_coefficients,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn quartic_tracks_the_manifold_slope(
        theta in 0.01f64..0.95,
        eta in 0.01f64..0.95,
        u in 0.05f64..0.95,
    ) {
        let slope = richardson(|h| d1(|x| phi(x, theta, eta), u, h), 1e-3);
        let f = quartic_f(u, theta, eta);
        let want = -u * u * slope;
        prop_assert!(
            (f - want).abs() < 1e-6 * f.abs().max(want.abs()).max(1.0),
            "F = {f}, -u^2 phi' = {want}"
        );
    }

    #[test]
    fn closed_form_membership_implies_two_roots(
        theta in 0.02f64..0.99,
        frac in 0.05f64..0.95,
    ) {
        // eta < theta targets the first region's ordering
        let eta = frac * theta;
        let g = gamma_cap(theta, eta);
        prop_assume!(g > 0.0);
        let l2 = lambda_2(theta, eta);
        prop_assume!(l2 != 0.0);
        let ratio_sq = (lambda_1(theta, eta) / l2).powi(2);
        let mid = g.sqrt() / 3.0 - 3.0 < theta && theta < 1.0 + g.sqrt() / 3.0;
        prop_assume!(mid && g > ratio_sq);
        prop_assert_eq!(fold_points(theta, eta).len(), 2);
        prop_assert_eq!(classify_region(theta, eta), Region::R1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fold_points_agree_with_a_sign_change_scan(
        theta in 0.01f64..0.9,
        eta in 0.01f64..0.9,
    ) {
        // refine every sign change of the quartic on a fine grid
        let n = 40_000;
        let mut scanned = Vec::new();
        let mut prev_u = 1e-9;
        let mut prev_f = quartic_f(prev_u, theta, eta);
        for i in 1..=n {
            let u = i as f64 / n as f64;
            let f = quartic_f(u, theta, eta);
            if prev_f == 0.0 || prev_f * f < 0.0 {
                let (mut lo, mut hi) = (prev_u, u);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if quartic_f(lo, theta, eta) * quartic_f(mid, theta, eta) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                scanned.push(0.5 * (lo + hi));
            }
            prev_u = u;
            prev_f = f;
        }
        // tangential roots would need a sharper oracle than a sign scan
        prop_assume!(scanned
            .iter()
            .all(|&r| quartic_f_prime(r, theta, eta).abs() > 1e-2));

        let folds = fold_points(theta, eta);
        prop_assert_eq!(folds.len(), scanned.len());
        for (fp, r) in folds.iter().zip(&scanned) {
            prop_assert!((fp.u - r).abs() < 1e-7, "fold {} vs scan {r}", fp.u);
            prop_assert!(rel(fp.v, phi(fp.u, theta, eta)) < 1e-12);
        }
    }

    #[test]
    fn expansion_coefficients_match_finite_differences(
        theta in 0.01f64..0.4,
        eta in 0.05f64..0.5,
        right in proptest::bool::ANY,
    ) {
        let folds = fold_points(theta, eta);
        prop_assume!(folds.len() == 2 && folds.iter().all(|f| !f.degenerate));
        let fp = &folds[usize::from(right)];
        let ds = canard_delta(fp.u, eta);
        let exp = taylor_coefficients(fp, theta, eta, ds).unwrap();
        let fd = taylor_fd(theta, eta, ds, fp.u, fp.v);
        prop_assert!(fd.a10.abs() < 1e-7 && fd.b01.abs() < 1e-7);
        for (name, got, want) in [
            ("a01", exp.a01, fd.a01),
            ("a20", exp.a20, fd.a20),
            ("a11", exp.a11, fd.a11),
            ("a30", exp.a30, fd.a30),
            ("a21", exp.a21, fd.a21),
            ("a40", exp.a40, fd.a40),
            ("a50", exp.a50, fd.a50),
            ("b10", exp.b10, fd.b10),
            ("b20", exp.b20, fd.b20),
            ("b11", exp.b11, fd.b11),
            ("b21", exp.b21, fd.b21),
        ] {
            prop_assert!(
                rel(got, want) < 1e-6,
                "{name}: closed {got} vs fd {want}"
            );
        }
    }

    #[test]
    fn first_lyapunov_paths_agree(
        theta in 0.01f64..0.4,
        eta in 0.05f64..0.5,
        epsilon in 1e-4f64..0.02,
    ) {
        let exp = match left_expansion(theta, eta) {
            Some(e) => e,
            None => return Err(TestCaseError::reject("no two-fold geometry")),
        };
        let (l1_closed, _) = first_lyapunov(&exp, epsilon);
        let l1_rec = l1_from_recursion(&exp, epsilon).unwrap();
        prop_assert!(rel(l1_rec, l1_closed) < 1e-8, "{l1_rec} vs {l1_closed}");

        let ch = blowup_chart(&exp, epsilon, 0.0).unwrap();
        let l1_g = l1_from_g(&g_coefficients(&ch), ch.beta, ch.beta0);
        prop_assert!(rel(l1_g, l1_closed) < 1e-8, "{l1_g} vs {l1_closed}");
    }

    #[test]
    fn chart_eigenpairing_is_biorthogonal(
        theta in 0.01f64..0.4,
        eta in 0.05f64..0.5,
        epsilon in 1e-4f64..0.02,
        lambda2 in -0.5f64..0.5,
    ) {
        let exp = match left_expansion(theta, eta) {
            Some(e) => e,
            None => return Err(TestCaseError::reject("no two-fold geometry")),
        };
        let ch = match blowup_chart(&exp, epsilon, lambda2) {
            Ok(c) => c,
            Err(_) => return Err(TestCaseError::reject("left the oscillatory regime")),
        };
        let (p, q) = (ch.p, ch.q);
        let pairing = p.0.conj() * q.0 + p.1.conj() * q.1;
        prop_assert!((pairing.re - 1.0).abs() < 1e-9 && pairing.im.abs() < 1e-9);

        let scale = ch.mu.norm().max(1.0);
        let rq0 = ch.alpha11 * q.0 + ch.alpha12 * q.1 - ch.mu * q.0;
        let rq1 = ch.alpha21 * q.0 + ch.alpha22 * q.1 - ch.mu * q.1;
        prop_assert!(rq0.norm().max(rq1.norm()) < 1e-9 * scale);
        let lp0 = ch.alpha11 * p.0 + ch.alpha21 * p.1 - ch.mu.conj() * p.0;
        let lp1 = ch.alpha12 * p.0 + ch.alpha22 * p.1 - ch.mu.conj() * p.1;
        prop_assert!(lp0.norm().max(lp1.norm()) < 1e-9 * scale);
    }

    #[test]
    fn lyapunov_scaling_in_epsilon(
        theta in 0.01f64..0.4,
        eta in 0.05f64..0.5,
        epsilon in 1e-5f64..0.01,
    ) {
        let exp = match left_expansion(theta, eta) {
            Some(e) => e,
            None => return Err(TestCaseError::reject("no two-fold geometry")),
        };
        let (l1, _) = first_lyapunov(&exp, epsilon);
        let (l1_4, _) = first_lyapunov(&exp, 4.0 * epsilon);
        prop_assert!(rel(l1_4, 2.0 * l1) < 1e-14);

        let sl = second_lyapunov(&exp, epsilon);
        let sl_4 = second_lyapunov(&exp, 4.0 * epsilon);
        prop_assert!(rel(sl_4.l2, 8.0 * sl.l2) < 1e-13);
        prop_assert!(rel(sl_4.b, sl.b) < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn second_lyapunov_paths_agree_on_the_locus(
        eta in 0.08f64..0.25,
        epsilon in 1e-4f64..0.02,
    ) {
        let (_, exp) = match locus_expansion(eta) {
            Some(x) => x,
            None => return Err(TestCaseError::reject("no locus point")),
        };
        let l2_rec = l2_from_recursion(&exp, epsilon).unwrap();
        let ch = blowup_chart(&exp, epsilon, 0.0).unwrap();
        let nf = h_and_c(&g_coefficients(&ch), ch.mu).unwrap();
        let l2_comp = l2_compact(&nf, ch.beta).unwrap();
        prop_assert!(rel(l2_rec, l2_comp) < 1e-8, "{l2_rec} vs {l2_comp}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tolerance_refinement_converges(
        delta in 0.3f64..0.8,
        u0 in 0.2f64..1.2,
        v0 in 0.05f64..0.5,
    ) {
        let params = Params::new(delta, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
        let loose = IntegratorControls {
            rtol: 1e-6,
            atol: 1e-9,
            sample_every: Some(50.0),
            ..IntegratorControls::default()
        };
        let tight = IntegratorControls {
            rtol: 1e-10,
            atol: 1e-13,
            sample_every: Some(50.0),
            ..IntegratorControls::default()
        };
        let a = integrate(&params, u0, v0, 50.0, &loose).unwrap().final_state();
        let b = integrate(&params, u0, v0, 50.0, &tight).unwrap().final_state();
        prop_assert!(
            (a.0 - b.0).hypot(a.1 - b.1) < 1e-3,
            "loose {a:?} vs tight {b:?}"
        );
    }

    #[test]
    fn split_runs_match_a_single_run(
        delta in 0.3f64..0.8,
        u0 in 0.2f64..1.2,
        v0 in 0.05f64..0.5,
    ) {
        let params = Params::new(delta, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
        let controls = IntegratorControls {
            rtol: 1e-10,
            atol: 1e-13,
            sample_every: Some(120.0),
            ..IntegratorControls::default()
        };
        let whole = integrate(&params, u0, v0, 120.0, &controls).unwrap().final_state();
        let (um, vm) = integrate(&params, u0, v0, 70.0, &controls).unwrap().final_state();
        let split = integrate(&params, um, vm, 50.0, &controls).unwrap().final_state();
        prop_assert!(
            (whole.0 - split.0).hypot(whole.1 - split.1) < 1e-6,
            "whole {whole:?} vs split {split:?}"
        );
    }

    #[test]
    fn orbits_stay_positive_and_bounded(
        delta in 0.05f64..0.84,
        u0 in 1e-3f64..2.0,
        v0 in 1e-3f64..2.0,
    ) {
        let params = Params::new(delta, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
        let controls = IntegratorControls {
            sample_every: Some(5.0),
            ..IntegratorControls::default()
        };
        let bbox = boundedness_box(&params, u0, v0);
        let orbit = integrate(&params, u0, v0, 2000.0, &controls).unwrap();
        for (&u, &v) in orbit.u.iter().zip(&orbit.v) {
            prop_assert!(u > 0.0 && v > 0.0, "positivity failed at ({u}, {v})");
            prop_assert!(
                u <= bbox.u_max && v <= bbox.v_max,
                "left the trapping box at ({u}, {v})"
            );
        }
    }
}
