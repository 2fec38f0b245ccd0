//! Critical-manifold geometry: the graph `v = phi(u)`, the fold quartic,
//! region classification, branches, the singular relaxation orbit, and the
//! reduced slow flow.

use crate::model::{self, Params};
use crate::solve;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifoldError {
    #[error("expected exactly two fold points, found {0}")]
    FoldCountMismatch(usize),
    #[error("fold at u = {u} is degenerate (|F'(u)| = {residual:.3e})")]
    DegenerateFold { u: f64, residual: f64 },
    #[error("u = {u} is within {dist:.3e} of a fold; the slow flow is singular there")]
    NearFold { u: f64, dist: f64 },
    #[error("no sign change of {what} on ({lo}, {hi})")]
    BracketFailure { what: &'static str, lo: f64, hi: f64 },
    #[error("sample count must be positive")]
    EmptySample,
    #[error("interior equilibrium u* = {u_star} does not lie beyond the right fold u_M = {u_fold}")]
    DulacPrecondition { u_star: f64, u_fold: f64 },
    #[error("no feasible interior equilibrium at delta = {0}")]
    NoInteriorEquilibrium(f64),
}

/// The critical-manifold graph `phi(u) = (1-u)(u+theta)(u^2+eta)/u`.
pub fn phi(u: f64, theta: f64, eta: f64) -> f64 {
    (1.0 - u) * (u + theta) * (u * u + eta) / u
}

/// Analytic derivative of [`phi`]. Satisfies `F(u) = -u^2 phi'(u)` exactly.
pub fn phi_prime(u: f64, theta: f64, eta: f64) -> f64 {
    -quartic_f(u, theta, eta) / (u * u)
}

/// The fold quartic `F(u) = 3u^4 - 2(1-theta)u^3 - (theta-eta)u^2 + eta*theta`,
/// whose roots in `(0,1)` are the fold abscissas of the manifold.
pub fn quartic_f(u: f64, theta: f64, eta: f64) -> f64 {
    3.0 * u.powi(4) - 2.0 * (1.0 - theta) * u.powi(3) - (theta - eta) * u * u + eta * theta
}

/// Derivative of the fold quartic.
pub fn quartic_f_prime(u: f64, theta: f64, eta: f64) -> f64 {
    12.0 * u.powi(3) - 6.0 * (1.0 - theta) * u * u - 2.0 * (theta - eta) * u
}

/// `Gamma = 9 theta^2 + 6 theta + 9 - 24 eta`, the discriminant-like quantity
/// controlling whether the quartic has an interior minimum.
pub fn gamma_cap(theta: f64, eta: f64) -> f64 {
    9.0 * theta * theta + 6.0 * theta + 9.0 - 24.0 * eta
}

/// `Lambda_1`, the constant part of the quartic's value at its interior minimum.
pub fn lambda_1(theta: f64, eta: f64) -> f64 {
    eta / 8.0 * (theta * theta + 22.0 * theta / 3.0 + 1.0)
        - (3.0 * (1.0 + theta.powi(4)) + 2.0 * (theta * theta + 4.0 * eta * eta)) / 96.0
}

/// `Lambda_2`, the coefficient of `sqrt(Gamma)` in the quartic's minimum value.
pub fn lambda_2(theta: f64, eta: f64) -> f64 {
    (1.0 - theta) / 288.0 * (3.0 * theta * theta + 2.0 * theta + 3.0 - 8.0 * eta)
}

/// Abscissa of the interior minimum of the quartic, `(1-theta)/4 + sqrt(Gamma)/12`.
/// Only meaningful when `Gamma > 0`.
pub fn quartic_min_location(theta: f64, eta: f64) -> Option<f64> {
    let g = gamma_cap(theta, eta);
    if g <= 0.0 {
        return None;
    }
    Some((1.0 - theta) / 4.0 + g.sqrt() / 12.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldKind {
    /// Local minimum of `phi` (the left fold).
    LocalMin,
    /// Local maximum of `phi` (the right fold).
    LocalMax,
}

#[derive(Debug, Clone, Copy)]
pub struct FoldPoint {
    pub u: f64,
    pub v: f64,
    pub kind: FoldKind,
    /// Set when `|F'(u)| < 1e-8`, i.e. the fold is at or near a double root
    /// of the quartic. Downstream canard analysis refuses such folds.
    pub degenerate: bool,
}

const DEGENERACY_TOL: f64 = 1e-8;

/// All roots of the fold quartic in `(0,1)`, sorted by `u` and paired with
/// `v = phi(u)`. Returns 0, 1, or 2 points for parameters in the ranges of
/// interest; the count is whatever the scan finds. A double root is returned
/// as a single degenerate fold.
pub fn fold_points(theta: f64, eta: f64) -> Vec<FoldPoint> {
    let f = |u: f64| quartic_f(u, theta, eta);
    let df = |u: f64| quartic_f_prime(u, theta, eta);

    let mut roots = scan_roots(&f, &df, 1e-9, 1.0 - 1e-12, 2048);

    // A near-double root can hide between grid points; probe the quartic's
    // interior minimum explicitly.
    if roots.is_empty() {
        if let Some(u_min) = quartic_min_location(theta, eta) {
            if u_min > 0.0 && u_min < 1.0 && f(u_min) <= 0.0 {
                let lo = (u_min - 0.01).max(1e-9);
                let hi = (u_min + 0.01).min(1.0 - 1e-12);
                roots = scan_roots(&f, &df, lo, hi, 20000);
                if roots.is_empty() && f(u_min).abs() < 1e-10 {
                    roots.push(u_min);
                }
            }
        }
    }

    roots
        .into_iter()
        .map(|u| {
            let dfu = df(u);
            let kind = if dfu <= 0.0 { FoldKind::LocalMin } else { FoldKind::LocalMax };
            FoldPoint {
                u,
                v: phi(u, theta, eta),
                kind,
                degenerate: dfu.abs() < DEGENERACY_TOL,
            }
        })
        .collect()
}

fn scan_roots(
    f: &impl Fn(f64) -> f64,
    df: &impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n: usize,
) -> Vec<f64> {
    let mut roots = Vec::new();
    let step = (hi - lo) / n as f64;
    let mut u_prev = lo;
    let mut f_prev = f(lo);
    for k in 1..=n {
        let u = lo + k as f64 * step;
        let fu = f(u);
        if f_prev == 0.0 {
            roots.push(u_prev);
        } else if f_prev.signum() != fu.signum() {
            if let Some(r) = solve::bisect(f, u_prev, u) {
                roots.push(solve::newton_polish(f, df, r, u_prev, u));
            }
        }
        u_prev = u;
        f_prev = fu;
    }
    roots
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    R1,
    R2,
    R3,
    /// Two folds exist numerically but the printed closed-form membership
    /// tests cover none of the parameter orderings (e.g. theta < eta < 1).
    TwoFoldsOutsideClosedForms,
    FewerThanTwoFolds,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::R1 => "R1",
            Region::R2 => "R2",
            Region::R3 => "R3",
            Region::TwoFoldsOutsideClosedForms => "two-folds-outside-closed-forms",
            Region::FewerThanTwoFolds => "fewer-than-two-folds",
        }
    }
}

/// Classifies `(theta, eta)` against the closed-form two-fold regions, with
/// the numeric root count as the authority. The closed forms are advisory:
/// when one matches and the count is two, its tag is returned; otherwise the
/// count alone decides between the two fallback tags.
pub fn classify_region(theta: f64, eta: f64) -> Region {
    let count = fold_points(theta, eta).len();
    if count != 2 {
        return Region::FewerThanTwoFolds;
    }
    match closed_form_region(theta, eta) {
        Some(r) => r,
        None => Region::TwoFoldsOutsideClosedForms,
    }
}

fn closed_form_region(theta: f64, eta: f64) -> Option<Region> {
    let g = gamma_cap(theta, eta);
    if g <= 0.0 {
        return None;
    }
    let sg = g.sqrt();
    let l2 = lambda_2(theta, eta);
    if l2 == 0.0 {
        return None;
    }
    let ratio_sq = (lambda_1(theta, eta) / l2).powi(2);
    let mid = sg / 3.0 - 3.0 < theta && theta < 1.0 + sg / 3.0;
    if eta > 0.0 && eta < theta && theta <= 1.0 && mid && g > ratio_sq {
        Some(Region::R1)
    } else if eta > 0.0 && eta < 1.0 && theta > 1.0 && mid && g < ratio_sq {
        Some(Region::R2)
    } else if theta > 0.0 && theta < 1.0 && eta > 1.0 && sg / 3.0 - 3.0 < theta && g > ratio_sq {
        Some(Region::R3)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    S0l,
    S0m,
    S0r,
    Fold,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::S0l => "S0l",
            Branch::S0m => "S0m",
            Branch::S0r => "S0r",
            Branch::Fold => "fold",
        }
    }
}

const FOLD_BAND: f64 = 1e-9;

/// Which branch of the critical manifold the abscissa `u` belongs to, given
/// the two fold points. Within `1e-9` of either fold the tag is [`Branch::Fold`].
pub fn branch_of(u: f64, folds: &[FoldPoint]) -> Result<Branch, ManifoldError> {
    if folds.len() != 2 {
        return Err(ManifoldError::FoldCountMismatch(folds.len()));
    }
    let (u_m, u_big) = (folds[0].u, folds[1].u);
    if (u - u_m).abs() < FOLD_BAND || (u - u_big).abs() < FOLD_BAND {
        Ok(Branch::Fold)
    } else if u < u_m {
        Ok(Branch::S0l)
    } else if u < u_big {
        Ok(Branch::S0m)
    } else {
        Ok(Branch::S0r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    FastJump,
    SlowArc,
}

#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub kind: SegmentKind,
    pub label: &'static str,
    pub from: (f64, f64),
    pub to: (f64, f64),
}

/// The singular relaxation orbit: fast jump from the left fold, slow arc up
/// the right branch, fast jump back from the right fold, slow arc down the
/// left branch. Fast segments are horizontal; slow segments lie on the
/// manifold graph.
#[derive(Debug, Clone)]
pub struct SingularOrbit {
    pub theta: f64,
    pub eta: f64,
    /// Left landing abscissa, `phi(u_l) = v_M` with `u_l < u_m`.
    pub u_l: f64,
    /// Right landing abscissa, `phi(u_r) = v_m` with `u_r > u_M`.
    pub u_r: f64,
    pub segments: [Segment; 4],
}

impl SingularOrbit {
    /// Samples the four segments as a closed polyline, `per_segment` points
    /// each, in traversal order starting at the left fold.
    pub fn sample(&self, per_segment: usize) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(4 * per_segment + 1);
        for seg in &self.segments {
            for i in 0..per_segment {
                let s = i as f64 / per_segment as f64;
                let u = seg.from.0 + s * (seg.to.0 - seg.from.0);
                let v = match seg.kind {
                    SegmentKind::FastJump => seg.from.1,
                    SegmentKind::SlowArc => phi(u, self.theta, self.eta),
                };
                pts.push((u, v));
            }
        }
        pts.push(self.segments[3].to);
        pts
    }
}

/// Constructs the singular orbit from two non-degenerate folds. The landing
/// abscissas solve `phi(u) = v_M` on `(0, u_m)` and `phi(u) = v_m` on
/// `(u_M, 1)` by bracketed bisection with a Newton polish, residual below
/// `1e-10`. The construction is purely geometric; whether the reduced slow
/// flow actually traverses the arcs (no interior equilibrium on them) is the
/// caller's concern.
pub fn singular_orbit(
    theta: f64,
    eta: f64,
    folds: &[FoldPoint],
) -> Result<SingularOrbit, ManifoldError> {
    if folds.len() != 2 {
        return Err(ManifoldError::FoldCountMismatch(folds.len()));
    }
    for fp in folds {
        if fp.degenerate {
            return Err(ManifoldError::DegenerateFold {
                u: fp.u,
                residual: quartic_f_prime(fp.u, theta, eta).abs(),
            });
        }
    }
    let (p, q) = (&folds[0], &folds[1]);
    let (u_m, v_m, u_big, v_big) = (p.u, p.v, q.u, q.v);

    let root = |target: f64, lo: f64, hi: f64, what: &'static str| {
        let f = |u: f64| phi(u, theta, eta) - target;
        let df = |u: f64| phi_prime(u, theta, eta);
        let r = solve::bisect(f, lo, hi).ok_or(ManifoldError::BracketFailure { what, lo, hi })?;
        Ok::<f64, ManifoldError>(solve::newton_polish(f, df, r, lo, hi))
    };

    // phi -> infinity as u -> 0+, and phi(u_m) = v_m < v_M, so the left
    // bracket always closes; phi(u_M) = v_M > v_m and phi(1) = 0 close the
    // right one.
    let u_l = root(v_big, 1e-12, u_m * (1.0 - 1e-9), "phi(u) - v_M")?;
    let u_r = root(v_m, u_big * (1.0 + 1e-9), 1.0, "phi(u) - v_m")?;

    let segments = [
        Segment {
            kind: SegmentKind::FastJump,
            label: "l1",
            from: (u_m, v_m),
            to: (u_r, v_m),
        },
        Segment {
            kind: SegmentKind::SlowArc,
            label: "cr",
            from: (u_r, v_m),
            to: (u_big, v_big),
        },
        Segment {
            kind: SegmentKind::FastJump,
            label: "l2",
            from: (u_big, v_big),
            to: (u_l, v_big),
        },
        Segment {
            kind: SegmentKind::SlowArc,
            label: "cl",
            from: (u_l, v_big),
            to: (u_m, v_m),
        },
    ];
    Ok(SingularOrbit { theta, eta, u_l, u_r, segments })
}

/// The reduced flow `du/dtau = (u^2 - delta(u^2+eta)) phi(u) / phi'(u)` on an
/// attracting branch of the manifold. Errors inside a `1e-9` band around
/// either fold, where the division blows up and the slow dynamics hands over
/// to a fast jump.
pub fn slow_flow(u: f64, p: &Params) -> Result<f64, ManifoldError> {
    let folds = fold_points(p.theta, p.eta);
    for fp in &folds {
        let dist = (u - fp.u).abs();
        if dist < FOLD_BAND {
            return Err(ManifoldError::NearFold { u, dist });
        }
    }
    let dphi = phi_prime(u, p.theta, p.eta);
    if dphi == 0.0 {
        return Err(ManifoldError::NearFold { u, dist: 0.0 });
    }
    let numerator = (u * u - p.delta * (u * u + p.eta)) * phi(u, p.theta, p.eta);
    Ok(numerator / dphi)
}

/// Samples `phi'` at `n` points spaced uniformly on the closed interval
/// `[lo, hi]` and reports whether every sample is strictly negative.
pub fn phi_prime_negative_on(theta: f64, eta: f64, lo: f64, hi: f64, n: usize) -> bool {
    if n == 0 {
        return false;
    }
    if n == 1 {
        return phi_prime(lo, theta, eta) < 0.0;
    }
    (0..n).all(|i| {
        let u = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        phi_prime(u, theta, eta) < 0.0
    })
}

/// Dulac-style global-stability check for the regime where the interior
/// equilibrium sits beyond the right fold: samples `phi'` over the open
/// interval `(u_M, 1)` and returns true iff every sample is strictly
/// negative, ruling out periodic orbits there.
pub fn dulac_region_check(
    p: &Params,
    folds: &[FoldPoint],
    n_samples: usize,
) -> Result<bool, ManifoldError> {
    if n_samples == 0 {
        return Err(ManifoldError::EmptySample);
    }
    if folds.len() != 2 {
        return Err(ManifoldError::FoldCountMismatch(folds.len()));
    }
    let u_fold = folds[1].u;
    let (u_star, _) = model::interior_equilibrium(p)
        .ok_or(ManifoldError::NoInteriorEquilibrium(p.delta))?;
    if u_star <= u_fold {
        return Err(ManifoldError::DulacPrecondition { u_star, u_fold });
    }
    let ok = (0..n_samples).all(|i| {
        let s = (i + 1) as f64 / (n_samples + 1) as f64;
        let u = u_fold + s * (1.0 - u_fold);
        phi_prime(u, p.theta, p.eta) < 0.0
    });
    Ok(ok)
}

/// Default sampling density for [`dulac_region_check`].
pub const DULAC_DEFAULT_SAMPLES: usize = 10_000;

/// The manifold graph as CSV text with columns `u,phi,branch`, `n` rows over
/// `(0, 1)`. Branch tags need two folds; with any other fold count every row
/// is tagged `unbranched`.
pub fn manifold_csv(theta: f64, eta: f64, n: usize) -> String {
    let folds = fold_points(theta, eta);
    let mut out = String::from("u,phi,branch\n");
    for i in 0..n {
        let u = (i + 1) as f64 / (n + 1) as f64;
        let tag = if folds.len() == 2 {
            branch_of(u, &folds).map(Branch::label).unwrap_or("unbranched")
        } else {
            "unbranched"
        };
        out.push_str(&format!("{:.12e},{:.12e},{}\n", u, phi(u, theta, eta), tag));
    }
    out
}
