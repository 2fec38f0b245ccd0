mod common;

use common::*;
use slowfast_core::model::*;

#[test]
fn params_validation_rejects_bad_inputs() {
    assert!(matches!(
        Params::new(-0.1, 0.05, 0.176, 0.005),
        Err(ModelError::NonPositive { .. })
    ));
    assert!(matches!(
        Params::new(0.4, 0.0, 0.176, 0.005),
        Err(ModelError::NonPositive { .. })
    ));
    assert!(matches!(
        Params::new(0.4, 0.05, f64::NAN, 0.005),
        Err(ModelError::NonFinite { .. })
    ));
    assert!(matches!(
        Params::new(0.4, 0.05, 0.176, 0.0),
        Err(ModelError::NonPositive { .. })
    ));
    assert!(matches!(
        Params::new(0.4, 0.05, 0.176, 1.0),
        Err(ModelError::EpsilonOutOfRange(_))
    ));
    assert!(Params::new(0.4, 0.05, 0.176, 0.005).is_ok());
}

#[test]
fn validation_errors_name_the_field() {
    let err = Params::new(0.4, -1.0, 0.176, 0.005).unwrap_err();
    assert!(err.to_string().contains("theta"), "message: {err}");
}

#[test]
fn range_warnings_are_advisory() {
    let p = Params::new(0.4, 0.05, 0.176, 0.005).unwrap();
    assert!(p.warnings().is_empty());
    let p = Params::new(0.4, 1.5, 0.176, 0.2).unwrap();
    let w = p.warnings();
    assert_eq!(w.len(), 2);
    assert!(w.iter().any(|m| m.contains("theta")));
    assert!(w.iter().any(|m| m.contains("epsilon")));
}

#[test]
fn nondimensionalization_reproduces_ratios() {
    let dim = DimensionalParams::new(2.0, 10.0, 0.5, 1.0, 0.8, 17.6, 0.4).unwrap();
    let nd = dim.nondimensionalize();
    assert!(rel(nd.delta, 0.4) < 1e-14);
    assert!(rel(nd.theta, 0.05) < 1e-14);
    assert!(rel(nd.eta, 0.176) < 1e-14);
    let p = nd.with_epsilon(0.005).unwrap();
    let q = Params::new(0.4, 0.05, 0.176, 0.005).unwrap();
    assert!(rel(p.delta, q.delta) < 1e-15);
    assert!(rel(p.theta, q.theta) < 1e-15);
    assert!(rel(p.eta, q.eta) < 1e-15);
    assert!(rel(p.epsilon, q.epsilon) < 1e-15);
}

#[test]
fn vector_field_vanishes_at_equilibria() {
    let p = Params::new(0.4, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
    for eq in equilibria(&p) {
        let (du, dv) = vector_field((eq.u, eq.v), &p);
        assert!(du.abs() < 1e-12 && dv.abs() < 1e-12, "residual at {:?}", eq.kind);
    }
}

#[test]
fn interior_equilibrium_matches_closed_form() {
    let p = Params::new(0.4, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
    let (u, v) = interior_equilibrium(&p).unwrap();
    assert!(rel(u, REF_EQ_U_04) < 1e-10);
    assert!(rel(v, REF_EQ_V_04) < 1e-10);
    // u* solves u^2(1-delta) = delta*eta independently of the manifold
    assert!((u * u * (1.0 - p.delta) - p.delta * p.eta).abs() < 1e-14);

    let beyond = Params::new(0.9, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
    assert!(interior_equilibrium(&beyond).is_none());
}

#[test]
fn transcritical_threshold_closed_form() {
    assert!(rel(transcritical_threshold(REF_ETA), REF_TRANSCRITICAL) < 1e-12);
    assert!(rel(transcritical_threshold(0.25), 0.8) < 1e-14);
}

#[test]
fn jacobian_matches_finite_differences() {
    let p = Params::new(0.37, REF_THETA, REF_ETA, 0.01).unwrap();
    for (u, v) in [(0.3, 0.2), (0.7, 0.25), (1.1, 0.05), (0.05, 0.4)] {
        let j = jacobian((u, v), &p);
        let fd = [
            [
                d1(|x| vector_field((x, v), &p).0, u, 1e-4),
                d1(|y| vector_field((u, y), &p).0, v, 1e-4),
            ],
            [
                d1(|x| vector_field((x, v), &p).1, u, 1e-4),
                d1(|y| vector_field((u, y), &p).1, v, 1e-4),
            ],
        ];
        for r in 0..2 {
            for c in 0..2 {
                assert!(
                    (j[r][c] - fd[r][c]).abs() < 1e-8 * (1.0 + j[r][c].abs()),
                    "entry ({r},{c}) at ({u},{v}): {} vs {}",
                    j[r][c],
                    fd[r][c]
                );
            }
        }
    }
}

#[test]
fn equilibria_below_threshold() {
    let p = Params::new(0.4, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
    let eqs = equilibria(&p);
    assert_eq!(eqs.len(), 3);

    let origin = &eqs[0];
    assert_eq!(origin.kind, EquilibriumKind::Origin);
    assert_eq!(origin.stability, Stability::AttractingSaddleNode);
    assert_eq!(origin.stability.label(), "attracting-saddle-node");
    assert!(origin.stability.is_stable());

    let boundary = &eqs[1];
    assert_eq!(boundary.kind, EquilibriumKind::Boundary);
    assert_eq!(boundary.stability, Stability::Saddle);
    assert!(!boundary.stability.is_stable());

    let interior = &eqs[2];
    assert_eq!(interior.kind, EquilibriumKind::Interior);
    assert!(!interior.stability.is_stable());
    assert_eq!(interior.branch, Some(slowfast_core::manifold::Branch::S0m));
}

#[test]
fn equilibria_stable_interior_on_right_branch() {
    let p = Params::new(0.7, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
    let eqs = equilibria(&p);
    assert_eq!(eqs.len(), 3);
    let interior = &eqs[2];
    assert!(rel(interior.u, 0.6408327915) < 1e-8);
    assert!(interior.stability.is_stable());
    assert_eq!(interior.branch, Some(slowfast_core::manifold::Branch::S0r));
}

#[test]
fn equilibria_beyond_threshold() {
    let p = Params::new(0.9, REF_THETA, REF_ETA, REF_EPSILON).unwrap();
    let eqs = equilibria(&p);
    assert_eq!(eqs.len(), 2);
    assert_eq!(eqs[1].kind, EquilibriumKind::Boundary);
    assert!(eqs[1].stability.is_stable());
}

#[test]
fn fast_rhs_factored_form_matches_polynomial() {
    // expanded quintic minus predation term, written out independently
    let (theta, eta) = (REF_THETA, REF_ETA);
    for (u, v) in [(0.3_f64, 0.2), (0.9, 0.1), (1.4, 0.3), (0.02, 0.5)] {
        let poly = -u.powi(5) + (1.0 - theta) * u.powi(4) + (theta - eta) * u.powi(3)
            + (1.0 - theta) * eta * u * u
            + theta * eta * u
            - u * u * v;
        assert!(rel(fast_rhs(u, v, theta, eta), poly) < 1e-13);
    }
}

#[test]
fn slow_rhs_has_no_timescale_factor() {
    // the drift field is written without epsilon; the integrator applies it
    let g = slow_rhs(0.5, 0.2, 0.4, REF_ETA);
    let expected = 0.25 * 0.2 - 0.4 * 0.2 * (0.25 + REF_ETA);
    assert!(rel(g, expected) < 1e-14);
}
