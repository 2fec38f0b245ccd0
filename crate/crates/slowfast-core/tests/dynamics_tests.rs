mod common;

use common::*;
use slowfast_core::dynamics::*;
use slowfast_core::manifold::{fold_points, singular_orbit};
use slowfast_core::model::{interior_equilibrium, vector_field, Params};
use slowfast_core::normalform::canard_delta;

/// Classical fixed-step fourth-order Runge-Kutta, as an independent oracle.
fn rk4(p: &Params, mut u: f64, mut v: f64, t_end: f64, n: usize) -> (f64, f64) {
    let h = t_end / n as f64;
    for _ in 0..n {
        let k1 = vector_field((u, v), p);
        let k2 = vector_field((u + 0.5 * h * k1.0, v + 0.5 * h * k1.1), p);
        let k3 = vector_field((u + 0.5 * h * k2.0, v + 0.5 * h * k2.1), p);
        let k4 = vector_field((u + h * k3.0, v + h * k3.1), p);
        u += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        v += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }
    (u, v)
}

#[test]
fn integrate_agrees_with_fixed_step_oracle() {
    let p = Params::new(0.55, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
    let controls = IntegratorControls {
        rtol: 1e-10,
        atol: 1e-13,
        ..IntegratorControls::default()
    };
    let orbit = integrate(&p, 0.8, 0.2, 20.0, &controls).unwrap();
    let (u, v) = orbit.final_state();
    let (ur, vr) = rk4(&p, 0.8, 0.2, 20.0, 400_000);
    assert!((u - ur).abs() < 1e-8 && (v - vr).abs() < 1e-8, "({u},{v}) vs ({ur},{vr})");
    assert!(orbit.stats.steps_accepted > 10);
    assert!(orbit.stats.rhs_evals >= 6 * orbit.stats.steps_accepted);
    assert!(orbit.stats.h_final > 0.0);
}

#[test]
fn dense_output_samples_on_the_exact_grid() {
    let p = Params::new(0.55, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
    let controls = IntegratorControls {
        sample_every: Some(2.5),
        ..IntegratorControls::default()
    };
    let orbit = integrate(&p, 0.8, 0.2, 20.0, &controls).unwrap();
    assert_eq!(orbit.t.len(), 9);
    for (i, t) in orbit.t.iter().enumerate() {
        assert_eq!(*t, 2.5 * i as f64);
    }
    // each interpolated sample sits on the trajectory of the oracle
    for i in 1..orbit.t.len() {
        let (ur, vr) = rk4(&p, 0.8, 0.2, orbit.t[i], 200_000);
        assert!(
            (orbit.u[i] - ur).abs() < 1e-7 && (orbit.v[i] - vr).abs() < 1e-7,
            "sample {i} off the oracle trajectory"
        );
    }
}

#[test]
fn final_state_is_always_stored() {
    let p = Params::new(0.55, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
    let controls = IntegratorControls {
        sample_every: Some(7.0),
        ..IntegratorControls::default()
    };
    let orbit = integrate(&p, 0.8, 0.2, 20.0, &controls).unwrap();
    assert_eq!(orbit.t, vec![0.0, 7.0, 14.0, 20.0]);
}

#[test]
fn step_budget_is_enforced() {
    let p = Params::new(0.4, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
    let controls = IntegratorControls {
        max_steps: 5,
        ..IntegratorControls::default()
    };
    assert!(matches!(
        integrate(&p, 0.8, 0.2, 1e6, &controls),
        Err(DynamicsError::MaxStepsExceeded { .. })
    ));
}

#[test]
fn orbit_respects_positivity_and_the_trapping_box() {
    let p = Params::new(0.4, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
    let bbox = boundedness_box(&p, 1e-3, 1.8);
    assert!(bbox.u_max >= 1.0 && bbox.v_max >= 1.8);

    let orbit = integrate(&p, 1e-3, 1.8, 2000.0, &IntegratorControls::default()).unwrap();
    for i in 0..orbit.t.len() {
        assert!(orbit.u[i] > 0.0 && orbit.v[i] > 0.0);
        assert!(orbit.u[i] <= bbox.u_max && orbit.v[i] <= bbox.v_max);
    }
}

#[test]
fn orbit_csv_format() {
    let p = Params::new(0.55, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
    let controls = IntegratorControls {
        sample_every: Some(5.0),
        ..IntegratorControls::default()
    };
    let orbit = integrate(&p, 0.8, 0.2, 10.0, &controls).unwrap();
    let csv = orbit.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,u,v"));
    assert_eq!(lines.count(), orbit.t.len());
}

#[test]
fn relaxation_cycle_at_the_reference_oscillatory_regime() {
    let p = Params::new(0.4, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
    let (u_star, _) = interior_equilibrium(&p).unwrap();
    let rec = poincare_cycle(&p, u_star, TimeDirection::Forward, 4e4, None)
        .unwrap()
        .expect("stable cycle exists at delta = 0.4");

    assert!((rec.period - 1138.663).abs() < 0.5, "period {}", rec.period);
    assert!((rec.u_min - 0.135137).abs() < 1e-3);
    assert!((rec.u_max - 0.717591).abs() < 1e-3);
    assert!((rec.v_min - 0.201190).abs() < 1e-3);
    assert!((rec.v_max - 0.246352).abs() < 1e-3);
    assert_eq!(rec.stability, CycleStability::Stable);
    assert_eq!(rec.kind, CycleKind::Relaxation);
    assert!(!rec.samples.is_empty());
    // the recorded loop stays inside its own extrema
    for (u, v) in &rec.samples {
        assert!(*u >= rec.u_min - 1e-9 && *u <= rec.u_max + 1e-9);
        assert!(*v >= rec.v_min - 1e-9 && *v <= rec.v_max + 1e-9);
    }
}

#[test]
fn no_cycle_in_the_globally_stable_regime() {
    let p = Params::new(0.7, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
    let (u_star, _) = interior_equilibrium(&p).unwrap();
    let rec = poincare_cycle(&p, u_star, TimeDirection::Forward, 4e4, None).unwrap();
    assert!(rec.is_none());
}

#[test]
fn reverse_time_finds_the_unstable_cycle() {
    // subcritical configuration: theta well below the Bautin locus opens a
    // resolvable window with a repelling cycle between the equilibrium and
    // the relaxation cycle
    let theta = 0.01;
    let folds = fold_points(theta, REF_ETA);
    let delta_h = canard_delta(folds[0].u, REF_ETA);
    let p = Params::new(delta_h - 0.008, theta, REF_ETA, REF_EPSILON).unwrap();
    let (u_star, _) = interior_equilibrium(&p).unwrap();

    let rec = poincare_cycle(&p, u_star, TimeDirection::Reverse, 4e5, None)
        .unwrap()
        .expect("repelling cycle inside the bistable window");
    assert_eq!(rec.stability, CycleStability::Unstable);
    assert!(rel(rec.period, 3294.89) < 1e-3, "period {}", rec.period);
    assert!(rec.u_min > 0.0 && rec.u_max < 1.0);
}

#[test]
fn cycle_kind_classification() {
    let eps = REF_EPSILON;
    assert_eq!(
        classify_cycle(0.30, 0.31, REF_THETA, REF_ETA, eps),
        CycleKind::SmallCanard
    );
    assert_eq!(
        classify_cycle(0.10, 0.50, REF_THETA, REF_ETA, eps),
        CycleKind::Canard
    );
    assert_eq!(
        classify_cycle(0.10, 0.69, REF_THETA, REF_ETA, eps),
        CycleKind::Relaxation
    );
    // without a singular orbit to compare against, a large cycle defaults
    // to the relaxation tag
    assert_eq!(
        classify_cycle(0.10, 0.60, 0.2, REF_ETA, eps),
        CycleKind::Relaxation
    );
    assert_eq!(CycleKind::SmallCanard.label(), "small-canard");
}

#[test]
fn hausdorff_known_values() {
    assert!(matches!(
        hausdorff(&[], &[(0.0, 0.0)]),
        Err(DynamicsError::EmptySamples)
    ));
    let a = [(0.0, 0.0)];
    let b = [(3.0, 4.0)];
    assert!((hausdorff(&a, &b).unwrap() - 5.0).abs() < 1e-15);

    let square = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    let with_center = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)];
    let d = hausdorff(&square, &with_center).unwrap();
    assert!((d - 0.5_f64.sqrt()).abs() < 1e-15);
}

#[test]
fn cycle_approaches_the_singular_orbit() {
    let p = Params::new(0.4, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
    let (u_star, _) = interior_equilibrium(&p).unwrap();
    let rec = poincare_cycle(&p, u_star, TimeDirection::Forward, 4e4, None)
        .unwrap()
        .unwrap();
    let folds = fold_points(REF_THETA, REF_ETA);
    let gamma0 = singular_orbit(REF_THETA, REF_ETA, &folds).unwrap();
    let d = cycle_vs_singular(&rec, &gamma0, 1500).unwrap();
    assert!((d - 0.020047).abs() < 2e-3, "hausdorff {d}");
}

#[test]
fn cycle_extrema_track_singular_corners_asymmetrically() {
    // the right excursion lands within 5% of the singular landing abscissa,
    // the left one overshoots it by about 9% at this timescale separation;
    // both gaps shrink with epsilon but only the right one is inside 5% here
    let p = Params::new(0.4, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
    let (u_star, _) = interior_equilibrium(&p).unwrap();
    let rec = poincare_cycle(&p, u_star, TimeDirection::Forward, 4e4, None)
        .unwrap()
        .unwrap();
    assert!(rel(rec.u_max, REF_U_RIGHT) < 0.05);
    let left_gap = rel(rec.u_min, REF_U_LEFT);
    assert!(left_gap > 0.05 && left_gap < 0.12, "left gap {left_gap}");
}
