//! Shared fixtures: the reference parameter set, frozen cross-checked
//! values, relative-error helper, finite-difference oracles for the
//! canard-point Taylor coefficients, and a rejection sampler for random
//! two-fold parameter sets.

#![allow(dead_code)]

use rand::Rng;
use slowfast_core::manifold::{fold_points, FoldPoint};
use slowfast_core::model::{fast_rhs, slow_rhs};
use slowfast_core::normalform::{
    bautin_theta_selfconsistent, canard_delta, criticality_a, criticality_a_of_theta,
    taylor_coefficients, CanardExpansion,
};

pub const REF_THETA: f64 = 0.05;
pub const REF_ETA: f64 = 0.176;
pub const REF_EPSILON: f64 = 0.005;

pub const REF_FOLD_P_U: f64 = 0.2374887251315;
pub const REF_FOLD_P_V: f64 = 0.2145170845902;
pub const REF_FOLD_Q_U: f64 = 0.5359014217549;
pub const REF_FOLD_Q_V: f64 = 0.2350224602845;
pub const REF_DELTA_STAR: f64 = 0.2426879408973;
pub const REF_DELTA_Q: f64 = 0.6200266129448;
pub const REF_A_P: f64 = 2.796800360099e-7;
pub const REF_A_Q: f64 = -0.1054980204746;
pub const REF_L1_P: f64 = 5.477909442947e-8;
pub const REF_THETA_B_CLOSED: f64 = 0.04999545776649;
pub const REF_THETA_B_LOCUS: f64 = 0.050006629393;
pub const REF_B_LOCUS: f64 = -4.166362176233e-3;
pub const REF_DELTA_C: f64 = 0.2426868874835;
pub const REF_TRANSVERSALITY: f64 = -3.809838149575e-3;
pub const REF_TRANSCRITICAL: f64 = 0.8503401360544;
pub const REF_U_LEFT: f64 = 0.1244379507199;
pub const REF_U_RIGHT: f64 = 0.6984207017039;
pub const REF_EQ_U_04: f64 = 0.3425395354311;
pub const REF_EQ_V_04: f64 = 0.2210058448691;

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Fourth-order central first derivative.
pub fn d1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Fourth-order central second derivative.
pub fn d2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h))
        / (12.0 * h * h)
}

/// Second-order central third derivative.
pub fn d3_raw(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h * h * h)
}

/// Second-order central fourth derivative.
pub fn d4_raw(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + 2.0 * h) - 4.0 * f(x + h) + 6.0 * f(x) - 4.0 * f(x - h) + f(x - 2.0 * h))
        / (h * h * h * h)
}

/// Second-order central fifth derivative.
pub fn d5_raw(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + 3.0 * h) - 4.0 * f(x + 2.0 * h) + 5.0 * f(x + h) - 5.0 * f(x - h)
        + 4.0 * f(x - 2.0 * h)
        - f(x - 3.0 * h))
        / (2.0 * h.powi(5))
}

/// One Richardson step for a second-order stencil: the `h^2` error term
/// cancels between `d(h)` and `d(h/2)`.
pub fn richardson(d: impl Fn(f64) -> f64, h: f64) -> f64 {
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

/// Second-order cross derivative with one Richardson step.
pub fn d11(f: impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> f64 {
    let raw = |hh: f64| {
        (f(x + hh, y + hh) - f(x + hh, y - hh) - f(x - hh, y + hh) + f(x - hh, y - hh))
            / (4.0 * hh * hh)
    };
    richardson(raw, h)
}

/// All thirteen canard-point partial derivatives of the layer and drift
/// fields, by finite differences only.
pub struct TaylorFd {
    pub a10: f64,
    pub a01: f64,
    pub a20: f64,
    pub a11: f64,
    pub a30: f64,
    pub a21: f64,
    pub a40: f64,
    pub a50: f64,
    pub b10: f64,
    pub b01: f64,
    pub b20: f64,
    pub b11: f64,
    pub b21: f64,
}

pub fn taylor_fd(theta: f64, eta: f64, delta: f64, u: f64, v: f64) -> TaylorFd {
    let f = move |x: f64, y: f64| fast_rhs(x, y, theta, eta);
    let g = move |x: f64, y: f64| slow_rhs(x, y, delta, eta);
    let h_low = 1e-3;
    let h_high = 2e-2;
    let k = 1e-3;

    // first v-derivatives of the fields, exact to roundoff (linear in v)
    let fv = move |x: f64| (f(x, v + k) - f(x, v - k)) / (2.0 * k);
    let gv = move |x: f64| (g(x, v + k) - g(x, v - k)) / (2.0 * k);

    TaylorFd {
        a10: d1(move |x| f(x, v), u, h_low),
        a01: d1(move |y| f(u, y), v, h_low),
        a20: d2(move |x| f(x, v), u, h_low),
        a11: d11(f, u, v, h_low),
        a30: richardson(|h| d3_raw(move |x| f(x, v), u, h), h_high),
        a21: d2(fv, u, h_low),
        a40: richardson(|h| d4_raw(move |x| f(x, v), u, h), h_high),
        a50: richardson(|h| d5_raw(move |x| f(x, v), u, h), h_high),
        b10: d1(move |x| g(x, v), u, h_low),
        b01: d1(move |y| g(u, y), v, h_low),
        b20: d2(move |x| g(x, v), u, h_low),
        b11: d11(g, u, v, h_low),
        b21: d2(gv, u, h_low),
    }
}

/// Rejection-samples `(theta, eta)` until the manifold has exactly two
/// non-degenerate folds.
pub fn random_two_fold<R: Rng>(rng: &mut R) -> (f64, f64, Vec<FoldPoint>) {
    loop {
        let theta = rng.gen_range(0.01..0.4);
        let eta = rng.gen_range(0.05..0.5);
        let folds = fold_points(theta, eta);
        if folds.len() == 2 && folds.iter().all(|fp| !fp.degenerate) {
            return (theta, eta, folds);
        }
    }
}

/// Expansion at the left fold when the two-fold geometry holds.
pub fn left_expansion(theta: f64, eta: f64) -> Option<CanardExpansion> {
    let folds = fold_points(theta, eta);
    if folds.len() != 2 || folds.iter().any(|f| f.degenerate) {
        return None;
    }
    let ds = canard_delta(folds[0].u, eta);
    taylor_coefficients(&folds[0], theta, eta, ds).ok()
}

/// Scans the criticality constant in `theta` for a sign change, then hands
/// the bracket midpoint to the self-consistent solver. The locus exists
/// roughly for `eta` in `(0.08, 0.28)`.
pub fn locus_expansion(eta: f64) -> Option<(f64, CanardExpansion)> {
    let n = 400;
    let mut prev: Option<(f64, f64)> = None;
    let mut guess = None;
    for i in 1..=n {
        let theta = 0.002 + 0.598 * i as f64 / n as f64;
        let a = match criticality_a_of_theta(theta, eta) {
            Ok(a) => a,
            Err(_) => {
                prev = None;
                continue;
            }
        };
        if let Some((t0, a0)) = prev {
            if a0 * a < 0.0 {
                guess = Some(0.5 * (t0 + theta));
                break;
            }
        }
        prev = Some((theta, a));
    }
    let tb = bautin_theta_selfconsistent(eta, guess?).ok()?;
    let exp = left_expansion(tb, eta)?;
    (criticality_a(&exp).abs() < 1e-9).then_some((tb, exp))
}
