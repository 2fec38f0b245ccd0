//! Canard-point normal form: Taylor coefficients at the fold, the rescaled
//! blow-up chart, the g/h/c coefficient pipeline, and the closed-form
//! Lyapunov coefficients with their thresholds.
//!
//! Two independent routes to each Lyapunov coefficient are kept side by
//! side: closed forms in the Taylor coefficients, and the complex resonant
//! recursion through `g_kl`, `h_kl`, `c1`, `c2`. Tests cross-check them;
//! neither is derived from the other.

use crate::manifold::{self, FoldPoint};
use crate::solve;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NormalFormError {
    #[error("fold at u = {0} is degenerate; canard expansion undefined")]
    DegenerateFold(f64),
    #[error("canard condition violated: u*(delta*) = {u_star} vs fold u_m = {u_m}")]
    CanardCondition { u_star: f64, u_m: f64 },
    #[error("fold residual |f_u| = {0:.3e} too large for a canard expansion")]
    FoldResidual(f64),
    #[error("|a20| = {0:.3e} below the non-degeneracy threshold 1e-8")]
    QuadraticDegeneracy(f64),
    #[error("eigenvalues at the chart equilibrium are not complex (discriminant {0:.3e})")]
    NonOscillatory(f64),
    #[error("small denominator |{which}| = {value:.3e} in the resonant recursion")]
    SmallDenominator { which: &'static str, value: f64 },
    #[error("theta_B denominator vanishes")]
    ThetaBDenominator,
    #[error("beta must be nonzero")]
    ZeroBeta,
    #[error("finite-difference step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("expected exactly two fold points, found {0}")]
    FoldCountMismatch(usize),
    #[error("no sign change of A(theta) found near theta = {0}")]
    NoBautinBracket(f64),
}

/// The canard parameter value for a fold at `u_m`: the `delta` at which the
/// interior equilibrium sits exactly on the fold, `u_m^2 / (u_m^2 + eta)`.
pub fn canard_delta(u_m: f64, eta: f64) -> f64 {
    u_m * u_m / (u_m * u_m + eta)
}

/// Taylor coefficients of the fast and slow right-hand sides at a canard
/// point `(u_m, v_m, delta*)`. `a_ij` is the pure partial derivative
/// `d^{i+j} f / du^i dv^j`, likewise `b_ij` for `g`; no factorial weights.
#[derive(Debug, Clone, Copy)]
pub struct CanardExpansion {
    pub theta: f64,
    pub eta: f64,
    pub u_m: f64,
    pub v_m: f64,
    pub delta_star: f64,
    /// Parameter offset `delta - delta_star` for the query at hand; the
    /// coefficients themselves are always taken at `delta_star`.
    pub lambda: f64,
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

const A20_TOL: f64 = 1e-8;

/// Evaluates the closed-form Taylor coefficients at the given fold.
///
/// The fold must be non-degenerate and `delta_star` must place the interior
/// equilibrium on it to within `1e-8`; both conditions are what make the
/// point a canard point rather than a generic fold.
pub fn taylor_coefficients(
    fold: &FoldPoint,
    theta: f64,
    eta: f64,
    delta_star: f64,
) -> Result<CanardExpansion, NormalFormError> {
    if fold.degenerate {
        return Err(NormalFormError::DegenerateFold(fold.u));
    }
    let (u, v) = (fold.u, fold.v);
    let u_star = (delta_star * eta / (1.0 - delta_star)).sqrt();
    if (u_star - u).abs() >= 1e-8 {
        return Err(NormalFormError::CanardCondition { u_star, u_m: u });
    }

    // f = -u^5 + (1-theta)u^4 + (theta-eta)u^3 + (1-theta)eta u^2 + theta eta u - u^2 v
    let a10 = -5.0 * u.powi(4) + 4.0 * (1.0 - theta) * u.powi(3)
        + 3.0 * (theta - eta) * u * u
        + 2.0 * (1.0 - theta) * eta * u
        + theta * eta
        - 2.0 * u * v;
    if a10.abs() >= 1e-6 {
        return Err(NormalFormError::FoldResidual(a10.abs()));
    }
    let a01 = -u * u;
    let a20 = -20.0 * u.powi(3) + 12.0 * (1.0 - theta) * u * u
        + 6.0 * (theta - eta) * u
        + 2.0 * (1.0 - theta) * eta
        - 2.0 * v;
    if a20.abs() < A20_TOL {
        return Err(NormalFormError::QuadraticDegeneracy(a20.abs()));
    }
    let a11 = -2.0 * u;
    let a30 = -60.0 * u * u + 24.0 * (1.0 - theta) * u + 6.0 * (theta - eta);
    let a21 = -2.0;
    let a40 = 24.0 * (1.0 - theta) - 120.0 * u;
    let a50 = -120.0;
    let one_minus = 1.0 - delta_star;
    let b10 = 2.0 * one_minus * u * v;
    let b01 = 0.0;
    let b20 = 2.0 * one_minus * v;
    let b11 = 2.0 * one_minus * u;
    let b21 = 2.0 * one_minus;

    Ok(CanardExpansion {
        theta,
        eta,
        u_m: u,
        v_m: v,
        delta_star,
        lambda: 0.0,
        a10: 0.0,
        a01,
        a20,
        a11,
        a30,
        a21,
        a40,
        a50,
        b10,
        b01,
        b20,
        b11,
        b21,
    })
}

/// Quantities of the rescaled chart near the canard point, all series
/// truncated at the fixed order where quartic remainder terms are dropped.
#[derive(Debug, Clone, Copy)]
pub struct BlowupChart {
    /// Blow-up radius `sqrt(epsilon)`.
    pub r2: f64,
    /// Rescaled parameter `lambda / r2`.
    pub lambda2: f64,
    pub u2e: f64,
    pub v2e: f64,
    pub alpha11: f64,
    pub alpha12: f64,
    pub alpha21: f64,
    pub alpha22: f64,
    /// Real part of the eigenvalue at the chart equilibrium.
    pub alpha: f64,
    /// Imaginary part of the eigenvalue.
    pub beta: f64,
    /// Leading frequency `sqrt(-a01 b10)`.
    pub beta0: f64,
    pub mu: Complex64,
    /// Left eigenvector, normalized so that `<p, q> = 1`.
    pub p: (Complex64, Complex64),
    /// Right eigenvector.
    pub q: (Complex64, Complex64),
    pub ap20: f64,
    pub ap11: f64,
    pub ap30: f64,
    pub ap21: f64,
    pub ap40: f64,
    pub ap50: f64,
    pub bp20: f64,
    pub bp11: f64,
    pub bp21: f64,
}

/// Builds the rescaled chart at parameter offset `lambda2` (in units of the
/// blow-up radius). Errors when the chart equilibrium leaves the oscillatory
/// regime, i.e. its eigenvalues stop being a complex pair.
pub fn blowup_chart(
    exp: &CanardExpansion,
    epsilon: f64,
    lambda2: f64,
) -> Result<BlowupChart, NormalFormError> {
    let r2 = epsilon.sqrt();
    let (um, vm, eta) = (exp.u_m, exp.v_m, exp.eta);
    let k = vm * (um * um + eta);
    let (a01, a20, a11, a30, a21, a40, a50) =
        (exp.a01, exp.a20, exp.a11, exp.a30, exp.a21, exp.a40, exp.a50);
    let (b10, b20, b11, b21) = (exp.b10, exp.b20, exp.b11, exp.b21);
    let l2 = lambda2;

    let shift = 2.0 * um * vm * vm * (um * um + eta) - b20 / (2.0 * b10) * k * k;
    let u2e = k / b10 * l2 + shift * r2 * l2 * l2 / (b10 * b10);
    let v2e = -a20 / (2.0 * a01 * b10 * b10) * k * k * l2 * l2;

    let alpha11 = a20 / b10 * k * l2
        + a20 / (b10 * b10) * shift * r2 * l2 * l2
        + (a30 - a20 * a11 / a01) * k * k / (2.0 * b10 * b10) * r2 * l2 * l2;
    let alpha12 = a01 + a11 / b10 * k * r2 * l2;
    let alpha21 = b10 - 2.0 * um * vm * r2 * l2 + b20 / b10 * k * r2 * l2;
    let alpha22 = b11 / b10 * k * r2 * r2 * l2 - (um * um + eta) * r2 * r2 * l2;

    let disc = 4.0 * (alpha11 * alpha22 - alpha12 * alpha21) - (alpha11 + alpha22).powi(2);
    if disc <= 0.0 {
        return Err(NormalFormError::NonOscillatory(disc));
    }
    let alpha = 0.5 * (alpha11 + alpha22);
    let beta = 0.5 * disc.sqrt();
    let mu = Complex64::new(alpha, beta);
    let beta0 = (-a01 * b10).sqrt();

    let q1 = Complex64::new(alpha12, 0.0);
    let q2 = mu - alpha11;
    let denom = 2.0 * q1 * mu.conj() - q1 * (alpha11 + alpha22);
    let p1 = (mu.conj() - alpha22) / denom;
    let p2 = q1 / denom;

    Ok(BlowupChart {
        r2,
        lambda2,
        u2e,
        v2e,
        alpha11,
        alpha12,
        alpha21,
        alpha22,
        alpha,
        beta,
        beta0,
        mu,
        p: (p1, p2),
        q: (q1, q2),
        ap20: a20 + a30 / b10 * k * r2 * l2,
        ap11: a11 * r2 + a21 / b10 * k * r2 * l2,
        ap30: a30 * r2 + a40 / b10 * k * r2 * l2,
        ap21: a21 * r2 * r2,
        ap40: a40 * r2 * r2,
        ap50: a50 * r2 * r2 * r2,
        bp20: b20 * r2 - 2.0 * vm * r2 * l2,
        bp11: b11 * r2 * r2,
        bp21: b21 * r2 * r2 * r2,
    })
}

/// Coefficients of the complex normal-form pipeline: the projected Taylor
/// coefficients `g_kl`, the transformation coefficients `h_kl` for
/// `2 <= k+l <= 4`, and the resonant coefficients `c1`, `c2`. The
/// transformation maps `z = w + sum h_kl w^k wbar^l / (k! l!)`; the roles of
/// the intermediate coordinates are implicit in the recursion and not stored.
#[derive(Debug, Clone, Copy, Default)]
pub struct NormalFormCoeffs {
    pub g20: Complex64,
    pub g11: Complex64,
    pub g02: Complex64,
    pub g30: Complex64,
    pub g21: Complex64,
    pub g12: Complex64,
    pub g03: Complex64,
    pub g40: Complex64,
    pub g31: Complex64,
    pub g22: Complex64,
    pub g13: Complex64,
    pub g04: Complex64,
    pub g50: Complex64,
    pub g41: Complex64,
    pub g32: Complex64,
    pub g23: Complex64,
    pub g14: Complex64,
    pub g05: Complex64,
    pub h20: Complex64,
    pub h11: Complex64,
    pub h02: Complex64,
    pub h30: Complex64,
    pub h12: Complex64,
    pub h03: Complex64,
    pub h40: Complex64,
    pub h31: Complex64,
    pub h22: Complex64,
    pub h13: Complex64,
    pub h04: Complex64,
    pub c1: Complex64,
    pub c2: Complex64,
}

/// Projects the chart's quadratic-through-quintic terms onto the eigenbasis,
/// producing all eighteen `g_kl`. The `h` part and `c1`, `c2` are left zero;
/// [`h_and_c`] fills them.
pub fn g_coefficients(ch: &BlowupChart) -> NormalFormCoeffs {
    let (q1, q2) = ch.q;
    let (cq1, cq2) = (q1.conj(), q2.conj());
    let cp1 = ch.p.0.conj();
    let cp2 = ch.p.1.conj();
    let (a20, a11, a30, a21, a40, a50) =
        (ch.ap20, ch.ap11, ch.ap30, ch.ap21, ch.ap40, ch.ap50);
    let (b20, b11, b21) = (ch.bp20, ch.bp11, ch.bp21);

    let mut nf = NormalFormCoeffs::default();
    nf.g20 = cp1 * (a20 * q1 * q1 + 2.0 * a11 * q1 * q2)
        + cp2 * (b20 * q1 * q1 + 2.0 * b11 * q1 * q2);
    nf.g11 = cp1 * (a20 * q1 * cq1 + a11 * (q1 * cq2 + q2 * cq1))
        + cp2 * (b20 * q1 * cq1 + b11 * (q1 * cq2 + q2 * cq1));
    nf.g02 = cp1 * (a20 * cq1 * cq1 + 2.0 * a11 * cq1 * cq2)
        + cp2 * (b20 * cq1 * cq1 + 2.0 * b11 * cq1 * cq2);
    nf.g30 = cp1 * (a30 * q1 * q1 * q1 + 3.0 * a21 * q1 * q1 * q2)
        + 3.0 * b21 * cp2 * q1 * q1 * q2;
    nf.g21 = cp1 * (a30 * q1 * q1 * cq1 + a21 * (q1 * q1 * cq2 + 2.0 * q1 * cq1 * q2))
        + b21 * cp2 * (q1 * q1 * cq2 + 2.0 * q1 * cq1 * q2);
    nf.g12 = cp1 * (a30 * q1 * cq1 * cq1 + a21 * (cq1 * cq1 * q2 + 2.0 * q1 * cq1 * cq2))
        + b21 * cp2 * (cq1 * cq1 * q2 + 2.0 * q1 * cq1 * cq2);
    nf.g03 = cp1 * (a30 * cq1 * cq1 * cq1 + 3.0 * a21 * cq1 * cq1 * cq2)
        + 3.0 * b21 * cp2 * cq1 * cq1 * cq2;
    nf.g40 = a40 * cp1 * q1.powu(4);
    nf.g31 = a40 * cp1 * q1.powu(3) * cq1;
    nf.g22 = a40 * cp1 * q1.powu(2) * cq1.powu(2);
    nf.g13 = a40 * cp1 * q1 * cq1.powu(3);
    nf.g04 = a40 * cp1 * cq1.powu(4);
    nf.g50 = a50 * cp1 * q1.powu(5);
    nf.g41 = a50 * cp1 * q1.powu(4) * cq1;
    nf.g32 = a50 * cp1 * q1.powu(3) * cq1.powu(2);
    nf.g23 = a50 * cp1 * q1.powu(2) * cq1.powu(3);
    nf.g14 = a50 * cp1 * q1 * cq1.powu(4);
    nf.g05 = a50 * cp1 * cq1.powu(5);
    nf
}

const DENOM_TOL: f64 = 1e-12;

fn checked(which: &'static str, d: Complex64) -> Result<Complex64, NormalFormError> {
    let value = d.norm();
    if value < DENOM_TOL {
        Err(NormalFormError::SmallDenominator { which, value })
    } else {
        Ok(d)
    }
}

/// Runs the resonant recursion: `h` at orders two and three, then `c1`, then
/// the order-four `h` (which feed on `c1`), then `c2`. Every division is
/// guarded against near-resonant denominators.
///
/// The `w^2 wbar` slot at order three is resonant and absorbed into `c1`;
/// the transformation carries no `h21`.
pub fn h_and_c(nf: &NormalFormCoeffs, mu: Complex64) -> Result<NormalFormCoeffs, NormalFormError> {
    let mut r = *nf;
    let cmu = mu.conj();
    let (g20, g11, g02, g30, g21, g12, g03) =
        (nf.g20, nf.g11, nf.g02, nf.g30, nf.g21, nf.g12, nf.g03);
    let (g40, g31, g22, g13, g04, g32) = (nf.g40, nf.g31, nf.g22, nf.g13, nf.g04, nf.g32);

    let h20 = g20 / checked("mu", mu)?;
    let h11 = g11 / checked("conj(mu)", cmu)?;
    let h02 = g02 / checked("2conj(mu)-mu", 2.0 * cmu - mu)?;
    let h30 = 3.0 / checked("mu", mu)?
        * (g20 * h20 / 2.0 + g11 * h02.conj() / 2.0 + g30 / 6.0);
    let h12 = 1.0 / checked("2conj(mu)", 2.0 * cmu)?
        * (g20 * h02 + 2.0 * g11 * h11 + g11 * h20.conj() + 2.0 * g02 * h11.conj() + g12);
    let h03 = 1.0 / checked("3conj(mu)-mu", 3.0 * cmu - mu)?
        * (g03 + 3.0 * g11 * h02 + 3.0 * g02 * h20.conj());

    let c1 = g20 * g11 * (2.0 * mu + cmu) / checked("2|mu|^2", Complex64::from(2.0 * mu.norm_sqr()))?
        + Complex64::from(g11.norm_sqr()) / checked("mu", mu)?
        + Complex64::from(g02.norm_sqr()) / checked("2(2mu-conj(mu))", 2.0 * (2.0 * mu - cmu))?
        + g21 / 2.0;

    let h21 = Complex64::new(0.0, 0.0);
    let h40 = 8.0 / checked("mu", mu)?
        * (g20 / 2.0 * (h20 * h20 / 4.0 + h30 / 3.0)
            + g11 * (h03.conj() / 6.0 + h20 * h02.conj() / 4.0)
            + g02 * h02.conj() * h02.conj() / 8.0
            + g30 * h20 / 4.0
            + g21 * h02.conj() / 4.0
            + g40 / 24.0);
    let h31 = 6.0 / checked("2mu+conj(mu)", 2.0 * mu + cmu)?
        * (g20 / 2.0 * (h21 + h20 * h11)
            + g11
                * (h12.conj() / 2.0 + h20 * h11.conj() / 2.0 + h11 * h02.conj() / 2.0 + h30 / 6.0)
            + g02 / 2.0 * (h03.conj() / 3.0 + h11.conj() * h02.conj())
            + g30 * h11 / 2.0
            + g21 / 2.0 * (h20 + h11.conj())
            + g12 * h02.conj() / 2.0
            + g31 / 6.0
            - c1 * h20);
    let h22 = 4.0 / checked("mu+2conj(mu)", mu + 2.0 * cmu)?
        * (g20 / 2.0 * (h11 * h11 + h12 + h20 * h02 / 2.0)
            + g11
                * Complex64::from(
                    h20.norm_sqr() / 4.0 + h11.norm_sqr() + h02.norm_sqr() / 4.0,
                )
            + g21 / 2.0 * (2.0 * h11 + h20.conj() / 2.0)
            + g02 / 2.0 * (h20.conj() * h02.conj() / 2.0 + h11.conj() * h11.conj() + h12.conj())
            + g30 * h02 / 4.0
            + g12 / 2.0 * (2.0 * h11.conj() + h20 / 2.0)
            + g03 * h02.conj() / 4.0
            + g22 / 4.0
            - 2.0 * h11 * c1.re);
    let h13 = 2.0 / checked("conj(mu)", cmu)?
        * (g20 / 2.0 * (h11 * h02 + h03 / 3.0)
            + g11 * (h30.conj() / 6.0 + h12 / 2.0 + h11 * h20.conj() / 2.0 + h11.conj() * h02 / 2.0)
            + g02 / 2.0 * (h21.conj() + h11.conj() * h20.conj())
            + g21 * h02 / 2.0
            + g12 * (h11 + h20.conj()) / 2.0
            + g03 * h11.conj() / 2.0
            + g13 / 6.0
            - c1.conj() * h02);
    let h04 = 24.0 / checked("4conj(mu)-mu", 4.0 * cmu - mu)?
        * (g20 * h02 * h02 / 8.0
            + g11 * (h03 / 6.0 + h02 * h20.conj() / 4.0)
            + g02 / 2.0 * (h20.conj() * h20.conj() / 4.0 + h30.conj() / 3.0)
            + g12 * h02 / 4.0
            + g03 * h20.conj() / 4.0
            + g04 / 24.0);

    // the w^3 wbar^2 slot of the composed field
    let c2 = 0.5 * g20 * (h20 * h12 / 2.0 + h22 / 2.0 + h30 * h02 / 6.0)
        + g11
            * (h22.conj() / 4.0 + h11 * h12.conj() / 2.0 + h02 * h03.conj() / 12.0
                + h30 * h20.conj() / 12.0
                + h12 * h02.conj() / 4.0
                + h31 / 6.0)
        + g02 / 2.0 * (h20.conj() * h03.conj() / 6.0 + h11.conj() * h12.conj() + h13.conj() / 3.0)
        + g30 / 6.0 * (3.0 * h11 * h11 + 3.0 * h12 / 2.0 + 3.0 * h20 * h02 / 2.0)
        + g21 / 2.0
            * (Complex64::from(h20.norm_sqr() / 2.0 + 2.0 * h11.norm_sqr() + h02.norm_sqr() / 2.0)
                + h20 * h11)
        + g12 / 2.0
            * (h30 / 6.0 + h11.conj() * h11.conj() + h11.conj() * h20 + h11 * h02.conj()
                + h20.conj() * h02.conj() / 2.0
                + h12.conj())
        + g03 / 6.0 * (h03.conj() / 2.0 + 3.0 * h11.conj() * h02.conj())
        + g40 * h02 / 12.0
        + g31 / 6.0 * (3.0 * h11 + h20.conj() / 2.0)
        + g22 / 4.0 * (2.0 * h11.conj() + h20)
        + g13 * h02.conj() / 4.0
        + g32 / 12.0;

    r.h20 = h20;
    r.h11 = h11;
    r.h02 = h02;
    r.h30 = h30;
    r.h12 = h12;
    r.h03 = h03;
    r.h40 = h40;
    r.h31 = h31;
    r.h22 = h22;
    r.h13 = h13;
    r.h04 = h04;
    r.c1 = c1;
    r.c2 = c2;
    Ok(r)
}

/// The criticality constant `A = a01 a20 b20 - a01 a30 b10 + a11 a20 b10`.
pub fn criticality_a(exp: &CanardExpansion) -> f64 {
    exp.a01 * exp.a20 * exp.b20 - exp.a01 * exp.a30 * exp.b10 + exp.a11 * exp.a20 * exp.b10
}

/// First Lyapunov coefficient as `(L1, A)`, with
/// `L1 = -a01 A sqrt(eps) / (4 beta0 b10)`.
pub fn first_lyapunov(exp: &CanardExpansion, epsilon: f64) -> (f64, f64) {
    let a = criticality_a(exp);
    let beta0 = (-exp.a01 * exp.b10).sqrt();
    let l1 = -exp.a01 * a * epsilon.sqrt() / (4.0 * beta0 * exp.b10);
    (l1, a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criticality {
    Supercritical,
    Subcritical,
    Degenerate,
}

impl Criticality {
    pub fn label(self) -> &'static str {
        match self {
            Criticality::Supercritical => "supercritical",
            Criticality::Subcritical => "subcritical",
            Criticality::Degenerate => "degenerate",
        }
    }
}

/// Hopf criticality from the sign of `A`: negative is supercritical,
/// positive subcritical, and `|A| < 1e-10` is reported as degenerate.
pub fn criticality(a: f64) -> Criticality {
    if a.abs() < 1e-10 {
        Criticality::Degenerate
    } else if a < 0.0 {
        Criticality::Supercritical
    } else {
        Criticality::Subcritical
    }
}

/// The closed-form Bautin locus value `theta_B(u_m, eta, delta*)`: the theta
/// at which the criticality constant of this fold vanishes, holding the fold
/// abscissa and the canard parameter fixed.
pub fn theta_bautin(u_m: f64, eta: f64, delta_star: f64) -> Result<f64, NormalFormError> {
    let (um, et, ds) = (u_m, eta, delta_star);
    let um2 = um * um;
    let um3 = um2 * um;
    let num = -um * ((-1.0 + ds) * um3 + (-5.0 * ds + 5.0) * um2 - et * (-1.0 + ds) * um
        - 6.0 * ds * et);
    let den = (5.0 * ds - 5.0) * um3 + (-1.0 + ds) * um2 + 6.0 * ds * et * um - et * (-1.0 + ds);
    if den.abs() < 1e-300 {
        return Err(NormalFormError::ThetaBDenominator);
    }
    Ok(num / den)
}

/// Second Lyapunov coefficient from the closed-form leading constant `B`.
#[derive(Debug, Clone, Copy)]
pub struct SecondLyapunov {
    /// `B * eps^{3/2}`.
    pub l2: f64,
    /// The closed-form leading constant.
    pub b: f64,
    /// Set when the Bautin condition `|A| < 1e-6` fails at this expansion;
    /// the value is then a formula evaluation away from the locus it is
    /// meant for, reported rather than refused so sweeps can bracket the
    /// locus.
    pub off_locus: bool,
}

/// Evaluates the closed-form `B` and `L2 = B eps^{3/2}` at this expansion.
pub fn second_lyapunov(exp: &CanardExpansion, epsilon: f64) -> SecondLyapunov {
    let (a01, a20, a11, a30, a21, a40, a50) =
        (exp.a01, exp.a20, exp.a11, exp.a30, exp.a21, exp.a40, exp.a50);
    let (b10, b20, b11, b21) = (exp.b10, exp.b20, exp.b11, exp.b21);
    let beta0 = (-a01 * b10).sqrt();
    let t = 18.0 * a11.powi(3) * a20 * b10 * b10
        + (27.0 * a20 * b20 - 2.0 * a30 * b10) * a01 * a11 * a11 * b10
        + (7.0 * a30 * b10 * b20 - 27.0 * b20 * b20 * a20 - 10.0 * b10 * b10 * a40) * a01 * a01 * a11
        + 2.0 * (10.0 * a40 * b20 - 3.0 * a50 * b10) * a01.powi(3) * b10
        + (48.0 * b20 * a20 * a20 * b11 + 36.0 * a21 * a30 * b10 * b10
            - 30.0 * a20 * a20 * b21 * b10)
            * a01
            * a01;
    let b = a01.powi(4) * b10 / (144.0 * beta0.powi(7)) * t;
    SecondLyapunov {
        l2: b * epsilon.powf(1.5),
        b,
        off_locus: criticality_a(exp).abs() > 1e-6,
    }
}

/// The compact expression for `12 L2` in the `g_kl` and the frequency,
/// divided by twelve. Meant for evaluation at the Bautin locus; elsewhere it
/// still evaluates but measures nothing canonical.
pub fn l2_compact(nf: &NormalFormCoeffs, beta: f64) -> Result<f64, NormalFormError> {
    if beta == 0.0 {
        return Err(NormalFormError::ZeroBeta);
    }
    let (g20, g11, g02, g30, g21, g12, g03) =
        (nf.g20, nf.g11, nf.g02, nf.g30, nf.g21, nf.g12, nf.g03);
    let (g40, g31, g22, g13) = (nf.g40, nf.g31, nf.g22, nf.g13);
    let g32 = nf.g32;

    let t1 = g32.re / beta;
    let t2 = (g20 * g31.conj()
        - g11 * (4.0 * g31 + 3.0 * g22.conj())
        - g02 * (g40 + g13.conj()) / 3.0
        - g30 * g12)
        .im
        / (beta * beta);
    let t3 = ((g20
        * (g11.conj() * (3.0 * g12 - g30.conj())
            + g02 * (g12.conj() - g30 / 3.0)
            + g02.conj() * g03 / 3.0)
        + g11
            * (g02.conj() * (5.0 / 3.0 * g30.conj() + 3.0 * g12) + g02 * g03.conj() / 3.0
                - 4.0 * g11 * g30))
        .re
        + 3.0 * (g20 * g11).im * g21.im)
        / beta.powi(3);
    let t4 = ((g11 * g02.conj()
        * (g20.conj() * g20.conj() - 3.0 * g20.conj() * g11 - 4.0 * g11 * g11))
        .im
        + (g20 * g11).im * (3.0 * (g20 * g11).re - 2.0 * g02.norm_sqr()))
        / beta.powi(4);
    Ok((t1 + t2 + t3 + t4) / 12.0)
}

/// The `g`-level route to `L1`: `(1/(2 beta^2)) Re(i g20 g11 + beta0 g21)`.
pub fn l1_from_g(nf: &NormalFormCoeffs, beta: f64, beta0: f64) -> f64 {
    0.5 / (beta * beta) * (Complex64::i() * nf.g20 * nf.g11 + beta0 * nf.g21).re
}

/// `Re(c1)/beta` through the full recursion at the Hopf point.
pub fn l1_from_recursion(exp: &CanardExpansion, epsilon: f64) -> Result<f64, NormalFormError> {
    let ch = blowup_chart(exp, epsilon, 0.0)?;
    let nf = h_and_c(&g_coefficients(&ch), ch.mu)?;
    Ok(nf.c1.re / ch.beta)
}

/// `Re(c2)/beta` through the full recursion at the Hopf point.
pub fn l2_from_recursion(exp: &CanardExpansion, epsilon: f64) -> Result<f64, NormalFormError> {
    let ch = blowup_chart(exp, epsilon, 0.0)?;
    let nf = h_and_c(&g_coefficients(&ch), ch.mu)?;
    Ok(nf.c2.re / ch.beta)
}

/// Hopf and maximal-canard thresholds `(delta_H, delta_C)`:
/// `delta_H = delta*` at the analyzed order, and
/// `delta_C = delta* - b10 A eps / (2 a20^3 v_m (u_m^2 + eta))`.
pub fn thresholds(exp: &CanardExpansion, epsilon: f64) -> Result<(f64, f64), NormalFormError> {
    if exp.a20.abs() < A20_TOL {
        return Err(NormalFormError::QuadraticDegeneracy(exp.a20.abs()));
    }
    let a = criticality_a(exp);
    let delta_h = exp.delta_star;
    let delta_c = exp.delta_star
        - exp.b10 / (2.0 * exp.a20.powi(3) * exp.v_m * (exp.u_m * exp.u_m + exp.eta)) * a * epsilon;
    Ok((delta_h, delta_c))
}

fn expansion_at_fold_p(theta: f64, eta: f64) -> Result<CanardExpansion, NormalFormError> {
    let folds = manifold::fold_points(theta, eta);
    if folds.len() != 2 {
        return Err(NormalFormError::FoldCountMismatch(folds.len()));
    }
    let ds = canard_delta(folds[0].u, eta);
    taylor_coefficients(&folds[0], theta, eta, ds)
}

/// `A` at the left fold as a function of `theta`, with the fold coordinates
/// and the canard parameter recomputed per query.
pub fn criticality_a_of_theta(theta: f64, eta: f64) -> Result<f64, NormalFormError> {
    Ok(criticality_a(&expansion_at_fold_p(theta, eta)?))
}

/// Self-consistent Bautin locus: the root of `theta -> A(theta)` with the
/// fold and `delta*` refit at every iterate, found by expanding a bracket
/// around `theta_guess` and bisecting.
pub fn bautin_theta_selfconsistent(
    eta: f64,
    theta_guess: f64,
) -> Result<f64, NormalFormError> {
    let a_of = |t: f64| criticality_a_of_theta(t, eta).ok();
    let a0 = a_of(theta_guess).ok_or(NormalFormError::NoBautinBracket(theta_guess))?;
    if a0 == 0.0 {
        return Ok(theta_guess);
    }
    let step = 0.01;
    let mut lo = theta_guess;
    let mut hi = theta_guess;
    for _ in 0..60 {
        let lo2 = lo - step;
        let hi2 = hi + step;
        if lo2 > 1e-4 {
            if let Some(a_lo) = a_of(lo2) {
                if a_lo * a0 < 0.0 {
                    return bisect_a(eta, lo2, theta_guess);
                }
            }
        }
        if let Some(a_hi) = a_of(hi2) {
            if a_hi * a0 < 0.0 {
                return bisect_a(eta, theta_guess, hi2);
            }
        }
        lo = lo2;
        hi = hi2;
    }
    Err(NormalFormError::NoBautinBracket(theta_guess))
}

fn bisect_a(eta: f64, lo: f64, hi: f64) -> Result<f64, NormalFormError> {
    solve::bisect(|t| criticality_a_of_theta(t, eta).unwrap_or(f64::NAN), lo, hi)
        .filter(|t| t.is_finite())
        .ok_or(NormalFormError::NoBautinBracket(0.5 * (lo + hi)))
}

/// The Bautin regularity determinant
/// `det [[d alpha/d delta, d alpha/d theta], [d L1/d delta, d L1/d theta]]`
/// at `(delta_h, theta_b)`, by central differences with the given step.
/// `alpha` is the chart equilibrium's eigenvalue real part and `L1` is
/// `Re(c1)/beta`, both rebuilt from scratch at each probe with the fold and
/// canard parameter refit to the probed `theta`.
pub fn bautin_transversality(
    eta: f64,
    epsilon: f64,
    delta_h: f64,
    theta_b: f64,
    step: f64,
) -> Result<f64, NormalFormError> {
    if step <= 0.0 {
        return Err(NormalFormError::NonPositiveStep(step));
    }
    let alpha_l1 = |delta: f64, theta: f64| -> Result<(f64, f64), NormalFormError> {
        let exp = expansion_at_fold_p(theta, eta)?;
        let lambda2 = (delta - exp.delta_star) / epsilon.sqrt();
        let ch = blowup_chart(&exp, epsilon, lambda2)?;
        let nf = h_and_c(&g_coefficients(&ch), ch.mu)?;
        Ok((ch.alpha, nf.c1.re / ch.beta))
    };
    let (a_dp, l_dp) = alpha_l1(delta_h + step, theta_b)?;
    let (a_dm, l_dm) = alpha_l1(delta_h - step, theta_b)?;
    let (a_tp, l_tp) = alpha_l1(delta_h, theta_b + step)?;
    let (a_tm, l_tm) = alpha_l1(delta_h, theta_b - step)?;
    let da_dd = (a_dp - a_dm) / (2.0 * step);
    let da_dt = (a_tp - a_tm) / (2.0 * step);
    let dl_dd = (l_dp - l_dm) / (2.0 * step);
    let dl_dt = (l_tp - l_tm) / (2.0 * step);
    Ok(da_dd * dl_dt - da_dt * dl_dd)
}

/// Aggregate of every Lyapunov-side quantity at the left fold.
#[derive(Debug, Clone, Copy)]
pub struct LyapunovResult {
    pub l1: f64,
    pub a: f64,
    pub l2: f64,
    pub b: f64,
    /// Set when `l2`/`b` could only be evaluated away from the Bautin locus.
    pub b_off_locus: bool,
    pub delta_h: f64,
    /// Closed-form locus value at this fold's `(u_m, eta, delta*)`.
    pub theta_b: f64,
    pub delta_c: f64,
    /// Filled by the bifurcation module's cycle-fold search when run.
    pub delta_snl: Option<f64>,
    /// Regularity determinant at the self-consistent locus, when that locus
    /// is solvable from here.
    pub bautin_transversality: Option<f64>,
}

/// Assembles the full threshold picture anchored at the left fold: `L1` and
/// `A` at the input `theta`, the locus value `theta_B`, `L2` and `B` at the
/// self-consistent locus (falling back to the input point, flagged, when the
/// locus cannot be bracketed), the canard threshold, and the regularity
/// determinant.
pub fn lyapunov_summary(
    theta: f64,
    eta: f64,
    epsilon: f64,
) -> Result<LyapunovResult, NormalFormError> {
    let exp = expansion_at_fold_p(theta, eta)?;
    let (l1, a) = first_lyapunov(&exp, epsilon);
    let (delta_h, delta_c) = thresholds(&exp, epsilon)?;
    let theta_b = theta_bautin(exp.u_m, eta, exp.delta_star)?;

    let locus = bautin_theta_selfconsistent(eta, theta_b).ok();
    let (sl, transversality) = match locus {
        Some(tb) => {
            let exp_b = expansion_at_fold_p(tb, eta)?;
            let det = bautin_transversality(eta, epsilon, exp_b.delta_star, tb, 1e-4).ok();
            (second_lyapunov(&exp_b, epsilon), det)
        }
        None => (second_lyapunov(&exp, epsilon), None),
    };

    Ok(LyapunovResult {
        l1,
        a,
        l2: sl.l2,
        b: sl.b,
        b_off_locus: sl.off_locus,
        delta_h,
        theta_b,
        delta_c,
        delta_snl: None,
        bautin_transversality: transversality,
    })
}
