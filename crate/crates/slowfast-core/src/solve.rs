//! Scalar root finding: bisection on a bracketing interval with an optional
//! Newton polish. Shared by the manifold and bifurcation modules.

/// Bisects `f` on `[lo, hi]`, which must bracket a sign change, until the
/// interval is below machine-level width, then returns the midpoint.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Some(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Refines a root estimate with Newton steps, falling back to the input when
/// the iteration leaves `[lo, hi]` or the derivative degenerates.
pub(crate) fn newton_polish(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    x0: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    let mut x = x0;
    for _ in 0..12 {
        let fx = f(x);
        let dfx = df(x);
        if dfx == 0.0 {
            return x;
        }
        let next = x - fx / dfx;
        if !next.is_finite() || next < lo || next > hi {
            return x;
        }
        if (next - x).abs() <= 1e-16 * x.abs().max(1.0) {
            return next;
        }
        x = next;
    }
    x
}
