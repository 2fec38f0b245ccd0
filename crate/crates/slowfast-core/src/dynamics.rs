//! Time integration and limit-cycle detection.
//!
//! The integrator is an adaptive Dormand-Prince 5(4) pair with the standard
//! quartic dense-output interpolant. The system is only mildly stiff away
//! from the fast jumps, and tight step control on an explicit pair resolves
//! the jumps without an implicit solver; invariant checks (positivity, the
//! trapping box) run on every accepted step when enabled.

use crate::manifold;
use crate::model::{self, Params};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget {max_steps} exhausted at t = {t}")]
    MaxStepsExceeded { t: f64, max_steps: u64 },
    #[error("{what} violated at t = {t}: (u, v) = ({u}, {v})")]
    InvariantViolation {
        t: f64,
        u: f64,
        v: f64,
        what: &'static str,
    },
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("empty sample set")]
    EmptySamples,
}

/// Step-control and invariant settings for one integration.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorControls {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: u64,
    /// Sampling period for the stored trajectory; `None` stores every
    /// accepted step. The final state is always stored.
    pub sample_every: Option<f64>,
    /// Check positivity and the trapping box on every accepted step.
    pub enforce_invariants: bool,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        IntegratorControls {
            rtol: 1e-9,
            atol: 1e-12,
            h_init: 1e-6,
            h_max: 10.0,
            max_steps: 50_000_000,
            sample_every: None,
            enforce_invariants: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IntegratorStats {
    pub steps_accepted: u64,
    pub steps_rejected: u64,
    pub rhs_evals: u64,
    pub h_final: f64,
}

/// A stored trajectory.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub stats: IntegratorStats,
}

impl Orbit {
    pub fn final_state(&self) -> (f64, f64) {
        (
            *self.u.last().expect("orbit stores at least the start"),
            *self.v.last().expect("orbit stores at least the start"),
        )
    }

    /// CSV text with header `t,u,v`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,u,v\n");
        for i in 0..self.t.len() {
            s.push_str(&format!(
                "{:.12e},{:.12e},{:.12e}\n",
                self.t[i], self.u[i], self.v[i]
            ));
        }
        s
    }
}

/// A forward-invariant box `[0, u_max] x [0, v_max]` containing the orbit
/// from `(u0, v0)`.
///
/// `u` cannot exceed `max(u0, 1)` because the fast field is negative for
/// `u >= 1`, `v > 0`. For `v`, the function `V = u + v/(eps(1-delta))`
/// satisfies `dV/dt = q(u) - v delta eta/(1-delta)` with `q` the quintic
/// prey term, so `V` decreases once `v` exceeds `(1-delta) max q/(delta eta)`;
/// both bounds carry a safety margin.
#[derive(Debug, Clone, Copy)]
pub struct BoundingBox {
    pub u_max: f64,
    pub v_max: f64,
}

pub fn boundedness_box(params: &Params, u0: f64, v0: f64) -> BoundingBox {
    let u_box = u0.max(1.0) + 0.5;
    let (theta, eta) = (params.theta, params.eta);
    let n = 2000;
    let mut q_max: f64 = 0.0;
    for i in 0..=n {
        let u = u_box * i as f64 / n as f64;
        let q = u * (1.0 - u) * (u + theta) * (u * u + eta);
        q_max = q_max.max(q);
    }
    let one_minus = 1.0 - params.delta;
    let v_crit = one_minus * (1.05 * q_max) / (params.delta * params.eta);
    let v_max = (v0 + params.epsilon * one_minus * u0)
        .max(v_crit + params.epsilon * one_minus * u_box)
        + 0.5;
    BoundingBox { u_max: u_box, v_max }
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b5 - b4, the embedded error weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense-output weights
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

type State = [f64; 2];

/// One accepted step, with the dense-output polynomial for in-step queries.
struct StepRecord {
    t0: f64,
    h: f64,
    y1: State,
    cont: [[f64; 5]; 2],
}

impl StepRecord {
    /// Interpolated state at `t0 + theta h`, `theta` in `[0, 1]`.
    fn eval(&self, theta: f64) -> State {
        let mut y = [0.0; 2];
        for i in 0..2 {
            let c = &self.cont[i];
            y[i] = c[0] + theta * (c[1] + (1.0 - theta) * (c[2] + theta * (c[3] + (1.0 - theta) * c[4])));
        }
        y
    }
}

enum Flow {
    Continue,
    Stop,
}

/// Adaptive driver. Calls `on_step` after every accepted step; integration
/// ends at `t_end`, on `Flow::Stop`, or with an error.
fn drive<F, C>(
    field: F,
    y0: State,
    t_end: f64,
    controls: &IntegratorControls,
    mut on_step: C,
) -> Result<IntegratorStats, DynamicsError>
where
    F: Fn(f64, State) -> State,
    C: FnMut(&StepRecord) -> Result<Flow, DynamicsError>,
{
    let mut stats = IntegratorStats::default();
    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = field(t, y);
    stats.rhs_evals += 1;
    let mut h = controls.h_init.min(controls.h_max).min(t_end);
    let mut facold: f64 = 1e-4;

    while t < t_end {
        if stats.steps_accepted + stats.steps_rejected >= controls.max_steps {
            return Err(DynamicsError::MaxStepsExceeded {
                t,
                max_steps: controls.max_steps,
            });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(DynamicsError::StepUnderflow { t, h });
        }
        let last = t + h >= t_end;
        let hh = if last { t_end - t } else { h };

        let f = |dt: f64, s: State| field(t + dt, s);
        let y2 = [y[0] + hh * A21 * k1[0], y[1] + hh * A21 * k1[1]];
        let k2 = f(0.2 * hh, y2);
        let y3 = [
            y[0] + hh * (A31 * k1[0] + A32 * k2[0]),
            y[1] + hh * (A31 * k1[1] + A32 * k2[1]),
        ];
        let k3 = f(0.3 * hh, y3);
        let y4 = [
            y[0] + hh * (A41 * k1[0] + A42 * k2[0] + A43 * k3[0]),
            y[1] + hh * (A41 * k1[1] + A42 * k2[1] + A43 * k3[1]),
        ];
        let k4 = f(0.8 * hh, y4);
        let y5 = [
            y[0] + hh * (A51 * k1[0] + A52 * k2[0] + A53 * k3[0] + A54 * k4[0]),
            y[1] + hh * (A51 * k1[1] + A52 * k2[1] + A53 * k3[1] + A54 * k4[1]),
        ];
        let k5 = f(8.0 / 9.0 * hh, y5);
        let y6 = [
            y[0] + hh * (A61 * k1[0] + A62 * k2[0] + A63 * k3[0] + A64 * k4[0] + A65 * k5[0]),
            y[1] + hh * (A61 * k1[1] + A62 * k2[1] + A63 * k3[1] + A64 * k4[1] + A65 * k5[1]),
        ];
        let k6 = f(hh, y6);
        let ynew = [
            y[0] + hh * (B1 * k1[0] + B3 * k3[0] + B4 * k4[0] + B5 * k5[0] + B6 * k6[0]),
            y[1] + hh * (B1 * k1[1] + B3 * k3[1] + B4 * k4[1] + B5 * k5[1] + B6 * k6[1]),
        ];
        let k7 = f(hh, ynew);
        stats.rhs_evals += 6;

        let mut err_sq = 0.0;
        for i in 0..2 {
            let e = hh
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = controls.atol + controls.rtol * y[i].abs().max(ynew[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / 2.0).sqrt();

        if !err.is_finite() || !ynew[0].is_finite() || !ynew[1].is_finite() {
            return Err(DynamicsError::NonFiniteState { t });
        }

        let fac11 = err.powf(0.17);
        if err <= 1.0 {
            let mut cont = [[0.0; 5]; 2];
            for i in 0..2 {
                let ydiff = ynew[i] - y[i];
                let bspl = hh * k1[i] - ydiff;
                cont[i][0] = y[i];
                cont[i][1] = ydiff;
                cont[i][2] = bspl;
                cont[i][3] = ydiff - hh * k7[i] - bspl;
                cont[i][4] = hh
                    * (D1 * k1[i]
                        + D3 * k3[i]
                        + D4 * k4[i]
                        + D5 * k5[i]
                        + D6 * k6[i]
                        + D7 * k7[i]);
            }
            let rec = StepRecord {
                t0: t,
                h: hh,
                y1: ynew,
                cont,
            };
            stats.steps_accepted += 1;
            t += hh;
            y = ynew;
            k1 = k7;
            stats.h_final = hh;
            match on_step(&rec)? {
                Flow::Continue => {}
                Flow::Stop => break,
            }
            let fac = (fac11 / facold.powf(0.04) / 0.9).clamp(0.2, 10.0);
            h = (hh / fac).min(controls.h_max);
            facold = err.max(1e-4);
        } else {
            stats.steps_rejected += 1;
            h = hh / (fac11 / 0.9).min(10.0);
        }
    }
    Ok(stats)
}

fn invariant_check(
    rec: &StepRecord,
    bbox: &BoundingBox,
) -> Result<(), DynamicsError> {
    let [u, v] = rec.y1;
    let t = rec.t0 + rec.h;
    if u <= 0.0 || v <= 0.0 {
        return Err(DynamicsError::InvariantViolation {
            t,
            u,
            v,
            what: "positivity",
        });
    }
    if u > bbox.u_max || v > bbox.v_max {
        return Err(DynamicsError::InvariantViolation {
            t,
            u,
            v,
            what: "boundedness",
        });
    }
    Ok(())
}

/// Integrates forward from `(u0, v0)` to `t_end`, storing the trajectory
/// per `controls.sample_every`.
pub fn integrate(
    params: &Params,
    u0: f64,
    v0: f64,
    t_end: f64,
    controls: &IntegratorControls,
) -> Result<Orbit, DynamicsError> {
    let p = *params;
    let field = move |_t: f64, s: State| {
        let (f, g) = model::vector_field((s[0], s[1]), &p);
        [f, g]
    };
    let bbox = boundedness_box(params, u0, v0);
    let mut t_out = vec![0.0];
    let mut u_out = vec![u0];
    let mut v_out = vec![v0];
    let mut next_sample = controls.sample_every.unwrap_or(0.0);
    let mut last = (0.0, u0, v0);

    let stats = drive(field, [u0, v0], t_end, controls, |rec| {
        if controls.enforce_invariants {
            invariant_check(rec, &bbox)?;
        }
        let t1 = rec.t0 + rec.h;
        last = (t1, rec.y1[0], rec.y1[1]);
        match controls.sample_every {
            None => {
                t_out.push(t1);
                u_out.push(rec.y1[0]);
                v_out.push(rec.y1[1]);
            }
            Some(dt) => {
                while next_sample <= t1 && next_sample < t_end {
                    let theta = ((next_sample - rec.t0) / rec.h).clamp(0.0, 1.0);
                    let s = rec.eval(theta);
                    t_out.push(next_sample);
                    u_out.push(s[0]);
                    v_out.push(s[1]);
                    next_sample += dt;
                }
            }
        }
        Ok(Flow::Continue)
    })?;

    if t_out.last() != Some(&last.0) {
        t_out.push(last.0);
        u_out.push(last.1);
        v_out.push(last.2);
    }
    Ok(Orbit {
        t: t_out,
        u: u_out,
        v: v_out,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDirection {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleStability {
    Stable,
    Unstable,
}

impl CycleStability {
    pub fn label(self) -> &'static str {
        match self {
            CycleStability::Stable => "stable",
            CycleStability::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleKind {
    SmallCanard,
    Canard,
    Relaxation,
}

impl CycleKind {
    pub fn label(self) -> &'static str {
        match self {
            CycleKind::SmallCanard => "small-canard",
            CycleKind::Canard => "canard",
            CycleKind::Relaxation => "relaxation",
        }
    }
}

/// A converged periodic orbit found by the return map.
#[derive(Debug, Clone)]
pub struct CycleRecord {
    pub period: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub stability: CycleStability,
    pub kind: CycleKind,
    /// Hausdorff distance to the singular orbit, when the caller computed it.
    pub hausdorff_to_singular: Option<f64>,
    /// One period of the cycle, ordered in integration time.
    pub samples: Vec<(f64, f64)>,
}

/// Classifies a cycle by its `u` extent. Spans below `5 sqrt(eps)` are
/// blow-up-scale cycles; larger ones are relaxation oscillations once the
/// right excursion reaches the right slow arc, and canard cycles otherwise.
pub fn classify_cycle(u_min: f64, u_max: f64, theta: f64, eta: f64, epsilon: f64) -> CycleKind {
    let span = u_max - u_min;
    if span < 5.0 * epsilon.sqrt() {
        return CycleKind::SmallCanard;
    }
    let folds = manifold::fold_points(theta, eta);
    if folds.len() == 2 {
        if let Ok(orbit) = manifold::singular_orbit(theta, eta, &folds) {
            let u_r = orbit.u_r;
            return if u_max >= 0.9 * u_r {
                CycleKind::Relaxation
            } else {
                CycleKind::Canard
            };
        }
    }
    CycleKind::Relaxation
}

const HIT_TOL: f64 = 1e-8;
const CONFIRM_TOL: f64 = 2e-8;
const AMP_TOL: f64 = 1e-5;
const MAX_HITS: usize = 200;

/// Runs the return map on the vertical section `u = section_u` (crossings
/// with `du/dt > 0` in the integrated field) until successive section values
/// of `v` agree to `1e-8` and the next return confirms to `2e-8`, then
/// records one full loop.
///
/// Returns `Ok(None)` when no cycle is found within `max_transient` time
/// units: the trajectory converged to the interior equilibrium, escaped (in
/// reverse time), or the returns did not settle. `Reverse` integrates the
/// negated field, so a converged loop there is an unstable cycle of the
/// forward system.
///
/// `start` overrides the default initial state: `(0.8, 0.2)` forward, a
/// small outward offset from the interior equilibrium in reverse.
pub fn poincare_cycle(
    params: &Params,
    section_u: f64,
    direction: TimeDirection,
    max_transient: f64,
    start: Option<(f64, f64)>,
) -> Result<Option<CycleRecord>, DynamicsError> {
    let interior = model::interior_equilibrium(params);
    let p = *params;
    let sign = match direction {
        TimeDirection::Forward => 1.0,
        TimeDirection::Reverse => -1.0,
    };
    let field = move |_t: f64, s: State| {
        let (f, g) = model::vector_field((s[0], s[1]), &p);
        [sign * f, sign * g]
    };

    let (u0, v0) = match (start, direction, interior) {
        (Some(s), _, _) => s,
        (None, TimeDirection::Forward, _) => (0.8, 0.2),
        (None, TimeDirection::Reverse, Some((us, vs))) => (us * 1.001, vs),
        (None, TimeDirection::Reverse, None) => (0.8, 0.2),
    };

    let controls = IntegratorControls {
        rtol: if sign < 0.0 { 1e-10 } else { 1e-9 },
        atol: if sign < 0.0 { 1e-13 } else { 1e-12 },
        enforce_invariants: false,
        ..IntegratorControls::default()
    };

    // transient phase: collect section hits until two consecutive gaps close
    let mut hits: Vec<(f64, f64)> = Vec::new();
    let mut candidate = false;
    let mut converged: Option<(f64, f64)> = None; // (period, v at section)

    drive(field, [u0, v0], max_transient, &controls, |rec| {
        let [u, v] = rec.y1;
        if u > 4.0 || v > 4.0 || u < 1e-14 || v < 1e-14 {
            return Ok(Flow::Stop);
        }
        if let Some((us, vs)) = interior {
            if (u - us).hypot(v - vs) < 1e-6 {
                return Ok(Flow::Stop);
            }
        }
        for (t_hit, v_hit) in section_crossings(rec, section_u) {
            hits.push((t_hit, v_hit));
            let n = hits.len();
            if n >= 2 {
                let gap = (hits[n - 1].1 - hits[n - 2].1).abs();
                if candidate && gap < CONFIRM_TOL {
                    converged = Some((hits[n - 1].0 - hits[n - 2].0, hits[n - 1].1));
                    return Ok(Flow::Stop);
                }
                candidate = gap < HIT_TOL;
            }
            if n >= MAX_HITS {
                return Ok(Flow::Stop);
            }
        }
        Ok(Flow::Continue)
    })?;

    let (period, v_sec) = match converged {
        Some(c) => c,
        None => return Ok(None),
    };

    // one confirmed loop from the section state, recording extrema and samples
    let mut u_min = f64::INFINITY;
    let mut u_max = f64::NEG_INFINITY;
    let mut v_min = f64::INFINITY;
    let mut v_max = f64::NEG_INFINITY;
    let mut samples: Vec<(f64, f64)> = vec![(section_u, v_sec)];
    drive(field, [section_u, v_sec], period, &controls, |rec| {
        for j in 1..=4 {
            let s = rec.eval(j as f64 / 4.0);
            u_min = u_min.min(s[0]);
            u_max = u_max.max(s[0]);
            v_min = v_min.min(s[1]);
            v_max = v_max.max(s[1]);
            samples.push((s[0], s[1]));
        }
        Ok(Flow::Continue)
    })?;

    if u_max - u_min < AMP_TOL {
        return Ok(None);
    }

    let stability = match direction {
        TimeDirection::Forward => CycleStability::Stable,
        TimeDirection::Reverse => CycleStability::Unstable,
    };
    let kind = classify_cycle(u_min, u_max, params.theta, params.eta, params.epsilon);
    Ok(Some(CycleRecord {
        period,
        u_min,
        u_max,
        v_min,
        v_max,
        stability,
        kind,
        hausdorff_to_singular: None,
        samples,
    }))
}

/// Section crossings within one accepted step, located on the dense
/// interpolant. Only upward crossings (`u` increasing through the section)
/// count; the interpolant is subsampled at eight interior points so a pair
/// of crossings inside one step is not missed.
fn section_crossings(rec: &StepRecord, section_u: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let n = 8;
    let g = |theta: f64| rec.eval(theta)[0] - section_u;
    let mut prev_theta = 0.0;
    let mut prev_g = g(0.0);
    for j in 1..=n {
        let theta = j as f64 / n as f64;
        let gj = g(theta);
        if prev_g < 0.0 && gj >= 0.0 {
            let mut lo = prev_theta;
            let mut hi = theta;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if g(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let th = 0.5 * (lo + hi);
            let s = rec.eval(th);
            out.push((rec.t0 + th * rec.h, s[1]));
        }
        prev_theta = theta;
        prev_g = gj;
    }
    out
}

/// Symmetric Hausdorff distance between two planar sample sets, by direct
/// nearest-neighbor scan.
pub fn hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64, DynamicsError> {
    if a.is_empty() || b.is_empty() {
        return Err(DynamicsError::EmptySamples);
    }
    let one_sided = |p: &[(f64, f64)], q: &[(f64, f64)]| -> f64 {
        let mut worst: f64 = 0.0;
        for &(x, y) in p {
            let mut best = f64::INFINITY;
            for &(qx, qy) in q {
                let d = (x - qx) * (x - qx) + (y - qy) * (y - qy);
                if d < best {
                    best = d;
                }
            }
            worst = worst.max(best);
        }
        worst.sqrt()
    };
    Ok(one_sided(a, b).max(one_sided(b, a)))
}

/// Hausdorff distance from a detected cycle to the sampled singular orbit.
pub fn cycle_vs_singular(
    cycle: &CycleRecord,
    singular: &manifold::SingularOrbit,
    per_segment: usize,
) -> Result<f64, DynamicsError> {
    let gamma0 = singular.sample(per_segment);
    hausdorff(&cycle.samples, &gamma0)
}
