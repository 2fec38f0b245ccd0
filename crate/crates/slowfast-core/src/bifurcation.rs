//! Bifurcation diagrams in `delta`: per-row attractor classification,
//! threshold assembly, the numeric Hopf locator, and the cycle-fold search.

use crate::dynamics::{
    self, CycleKind, CycleStability, DynamicsError, IntegratorControls, TimeDirection,
};
use crate::manifold::{self, ManifoldError};
use crate::model::{self, ModelError, Params, Stability};
use crate::normalform::{self, NormalFormError};
use crate::solve;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BifurcationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    NormalForm(#[from] NormalFormError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("empty delta range")]
    EmptyRange,
    #[error("no bracket for the Hopf locus at fold u = {0}")]
    HopfBracket(f64),
    #[error("cycle-fold search requires a subcritical singular Hopf point, got A = {a:.3e}")]
    SnlPrecondition { a: f64 },
    #[error("cycle coexistence persists down to delta = {0}; no fold bracket")]
    SnlBracketFailure(f64),
    #[error("diagram parse error at line {line}: {what}")]
    Parse { line: usize, what: String },
}

/// Cycle summary stored in a diagram row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleInfo {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub period: f64,
    pub stability: CycleStability,
    pub kind: CycleKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowOutcome {
    Equilibrium,
    Cycle(CycleInfo),
    Unresolved,
}

impl RowOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            RowOutcome::Equilibrium => "equilibrium",
            RowOutcome::Cycle(_) => "cycle",
            RowOutcome::Unresolved => "unresolved",
        }
    }
}

/// One `delta` slice of the diagram: the interior equilibrium (when it
/// exists) and the attractor the forward flow settled on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagramRow {
    pub delta: f64,
    pub u_eq: Option<f64>,
    pub v_eq: Option<f64>,
    pub eq_stability: Option<Stability>,
    pub outcome: RowOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepMeta {
    pub theta: f64,
    pub eta: f64,
    pub epsilon: f64,
    /// Refined onset of the stable cycle branch, when a flip was bracketed.
    pub onset: Option<f64>,
    /// Refined offset of the stable cycle branch.
    pub offset: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramBranch {
    pub meta: SweepMeta,
    pub rows: Vec<DiagramRow>,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    /// Transient budget per row, in slow-time units.
    pub max_transient: f64,
    /// Poincare section; `None` uses the interior equilibrium abscissa.
    pub section: Option<f64>,
    /// Bisect outcome flips between adjacent rows down to this width.
    pub refine: bool,
    pub refine_tol: f64,
    /// Rows per sequential continuation block; blocks run in parallel.
    pub chunk: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            max_transient: 4e4,
            section: None,
            refine: true,
            refine_tol: 2.5e-4,
            chunk: 8,
        }
    }
}

fn interior_row_data(params: &Params) -> (Option<f64>, Option<f64>, Option<Stability>) {
    let eqs = model::equilibria(params);
    if let Some(e) = eqs
        .iter()
        .find(|e| e.kind == model::EquilibriumKind::Interior)
    {
        (Some(e.u), Some(e.v), Some(e.stability))
    } else if let Some(e) = eqs
        .iter()
        .find(|e| e.kind == model::EquilibriumKind::Boundary)
    {
        (None, None, Some(e.stability))
    } else {
        (None, None, None)
    }
}

/// Classifies one `delta`: forward return map first, then an equilibrium
/// probe from a cold start when no cycle converged. Returns the row and the
/// warm-start state for the next continuation step.
fn classify_delta(
    theta: f64,
    eta: f64,
    epsilon: f64,
    delta: f64,
    opts: &SweepOptions,
    warm: Option<(f64, f64)>,
) -> Result<(DiagramRow, Option<(f64, f64)>), BifurcationError> {
    let params = Params::new(delta, theta, eta, epsilon)?;
    let (u_eq, v_eq, eq_stability) = interior_row_data(&params);

    let interior = model::interior_equilibrium(&params);
    let (us, vs) = match interior {
        Some(e) => e,
        None => {
            // past the transcritical threshold the prey-only state attracts
            return Ok((
                DiagramRow {
                    delta,
                    u_eq,
                    v_eq,
                    eq_stability,
                    outcome: RowOutcome::Equilibrium,
                },
                None,
            ));
        }
    };

    let section = opts.section.unwrap_or(us);
    let cycle = dynamics::poincare_cycle(
        &params,
        section,
        TimeDirection::Forward,
        opts.max_transient,
        warm,
    )?;

    if let Some(c) = cycle {
        let info = CycleInfo {
            u_min: c.u_min,
            u_max: c.u_max,
            v_min: c.v_min,
            v_max: c.v_max,
            period: c.period,
            stability: c.stability,
            kind: c.kind,
        };
        let warm_next = c.samples.first().copied();
        return Ok((
            DiagramRow {
                delta,
                u_eq,
                v_eq,
                eq_stability,
                outcome: RowOutcome::Cycle(info),
            },
            warm_next,
        ));
    }

    // no cycle: equilibrium if a cold start lands on the interior point
    let controls = IntegratorControls {
        sample_every: Some(opts.max_transient),
        ..IntegratorControls::default()
    };
    let orbit = dynamics::integrate(&params, 0.8, 0.2, opts.max_transient, &controls)?;
    let (uf, vf) = orbit.final_state();
    let outcome = if (uf - us).hypot(vf - vs) < 1e-3 {
        RowOutcome::Equilibrium
    } else {
        RowOutcome::Unresolved
    };
    Ok((
        DiagramRow {
            delta,
            u_eq,
            v_eq,
            eq_stability,
            outcome,
        },
        None,
    ))
}

/// Sweeps the diagram over the given `delta` values. Rows are computed in
/// order-preserving parallel blocks; within a block the previous row's cycle
/// warm-starts the next to keep transients short.
pub fn sweep(
    theta: f64,
    eta: f64,
    epsilon: f64,
    deltas: &[f64],
    opts: &SweepOptions,
) -> Result<DiagramBranch, BifurcationError> {
    if deltas.is_empty() {
        return Err(BifurcationError::EmptyRange);
    }
    let chunk = opts.chunk.max(1);
    let blocks: Vec<&[f64]> = deltas.chunks(chunk).collect();
    let rows_nested: Result<Vec<Vec<DiagramRow>>, BifurcationError> = blocks
        .into_par_iter()
        .map(|block| {
            let mut rows = Vec::with_capacity(block.len());
            let mut warm = None;
            for &d in block {
                let (row, w) = classify_delta(theta, eta, epsilon, d, opts, warm)?;
                warm = w;
                rows.push(row);
            }
            Ok(rows)
        })
        .collect();
    let rows: Vec<DiagramRow> = rows_nested?.into_iter().flatten().collect();

    let mut meta = SweepMeta {
        theta,
        eta,
        epsilon,
        onset: None,
        offset: None,
    };
    if opts.refine {
        let (onset, offset) = refine_endpoints(theta, eta, epsilon, &rows, opts)?;
        meta.onset = onset;
        meta.offset = offset;
    }
    Ok(DiagramBranch { meta, rows })
}

/// Which side of the branch boundary a row sits on. Unresolved rows (slow
/// spiral transients near a Hopf crossing) fall back on the sign of the
/// equilibrium's leading eigenvalue: the flow is bounded and positively
/// invariant, so an unstable interior equilibrium forces a cycle.
fn cycle_side(row: &DiagramRow) -> bool {
    match &row.outcome {
        RowOutcome::Cycle(_) => true,
        RowOutcome::Equilibrium => false,
        RowOutcome::Unresolved => row
            .eq_stability
            .map(|s| !s.is_stable())
            .unwrap_or(false),
    }
}

/// Bisects equilibrium-to-cycle flips between adjacent rows. The first flip
/// into the cycle branch is the onset, the last flip out of it the offset.
fn refine_endpoints(
    theta: f64,
    eta: f64,
    epsilon: f64,
    rows: &[DiagramRow],
    opts: &SweepOptions,
) -> Result<(Option<f64>, Option<f64>), BifurcationError> {
    let mut onset = None;
    let mut offset = None;
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let (ca, cb) = (cycle_side(a), cycle_side(b));
        if ca == cb {
            continue;
        }
        let mut lo = a.delta;
        let mut hi = b.delta;
        while hi - lo > opts.refine_tol {
            let mid = 0.5 * (lo + hi);
            let (row, _) = classify_delta(theta, eta, epsilon, mid, opts, None)?;
            if cycle_side(&row) == ca {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let boundary = 0.5 * (lo + hi);
        if !ca && cb {
            if onset.is_none() {
                onset = Some(boundary);
            }
        } else {
            offset = Some(boundary);
        }
    }
    Ok((onset, offset))
}

/// Numeric singular-Hopf locator: the `delta` at which the interior
/// equilibrium abscissa crosses the given fold abscissa, bisected to
/// machine resolution within `(0, transcritical)`.
pub fn locate_hopf(fold_u: f64, eta: f64) -> Result<f64, BifurcationError> {
    let tau = model::transcritical_threshold(eta);
    let g = |d: f64| (d * eta / (1.0 - d)).sqrt() - fold_u;
    solve::bisect(g, 1e-300, tau * (1.0 - 1e-12)).ok_or(BifurcationError::HopfBracket(fold_u))
}

/// Result of the saddle-node-of-limit-cycles search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnlOutcome {
    /// Fold of cycles bracketed to `resolution`; `delta` is the bracket
    /// midpoint, strictly below the singular Hopf value.
    Located { delta: f64, bracket: (f64, f64) },
    /// No probe below the Hopf value showed stable/unstable coexistence:
    /// the coexistence window is narrower than the finest probe offset.
    BelowResolution { finest_offset: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct SnlOptions {
    /// Largest probe offset below the Hopf value.
    pub max_offset: f64,
    /// Smallest probe offset; reaching it without a hit stops the search.
    pub min_offset: f64,
    /// Bracket width at which bisection stops.
    pub resolution: f64,
    pub max_transient: f64,
    /// Reverse-time budget for capturing the unstable cycle.
    pub reverse_budget: f64,
}

impl Default for SnlOptions {
    fn default() -> Self {
        SnlOptions {
            max_offset: 0.02,
            min_offset: 1e-8,
            resolution: 2e-4,
            max_transient: 4e4,
            reverse_budget: 4e5,
        }
    }
}

/// Searches below the singular Hopf value for the fold of cycles of a
/// subcritical point: the `delta` where the stable relaxation cycle and the
/// unstable cycle born at the Hopf point merge.
///
/// A probe counts as coexistence when the forward return map converges to a
/// stable cycle and the reverse-time map then captures an unstable one; the
/// reverse run is skipped when the forward one already failed. Probes walk
/// geometrically from `max_offset` down to `min_offset`; all-miss returns
/// `BelowResolution`, a hit is refined by bisection against the nearest
/// missing probe.
pub fn locate_snl(
    theta: f64,
    eta: f64,
    epsilon: f64,
    opts: &SnlOptions,
) -> Result<SnlOutcome, BifurcationError> {
    let folds = manifold::fold_points(theta, eta);
    if folds.len() != 2 {
        return Err(ManifoldError::FoldCountMismatch(folds.len()).into());
    }
    let delta_star = normalform::canard_delta(folds[0].u, eta);
    let exp = normalform::taylor_coefficients(&folds[0], theta, eta, delta_star)?;
    let a = normalform::criticality_a(&exp);
    if a <= 1e-10 {
        return Err(BifurcationError::SnlPrecondition { a });
    }

    let has_two = |delta: f64| -> Result<bool, BifurcationError> {
        let params = Params::new(delta, theta, eta, epsilon)?;
        let us = match model::interior_equilibrium(&params) {
            Some((u, _)) => u,
            None => return Ok(false),
        };
        let forward = dynamics::poincare_cycle(
            &params,
            us,
            TimeDirection::Forward,
            opts.max_transient,
            None,
        )?;
        if forward.is_none() {
            return Ok(false);
        }
        let reverse = dynamics::poincare_cycle(
            &params,
            us,
            TimeDirection::Reverse,
            opts.reverse_budget,
            None,
        )?;
        Ok(reverse.is_some())
    };

    // walk offsets down until coexistence shows up
    let mut offset = opts.max_offset;
    let mut miss_below: f64 = opts.max_offset * 2.0;
    let mut hit: Option<f64> = None;
    while offset >= opts.min_offset {
        if has_two(delta_star - offset)? {
            hit = Some(offset);
            break;
        }
        miss_below = offset;
        offset *= 0.5;
    }
    let hit_offset = match hit {
        Some(o) => o,
        None => {
            return Ok(SnlOutcome::BelowResolution {
                finest_offset: opts.min_offset,
            })
        }
    };

    if hit_offset >= opts.max_offset {
        // coexistence at the cap: push the miss side further out
        let mut far = opts.max_offset * 2.0;
        let cap = 0.5 * delta_star;
        loop {
            if far > cap {
                return Err(BifurcationError::SnlBracketFailure(delta_star - far / 2.0));
            }
            if !has_two(delta_star - far)? {
                miss_below = far;
                break;
            }
            far *= 2.0;
        }
    }

    // delta bracket: low side has no cycles, high side has both
    let mut lo = delta_star - miss_below;
    let mut hi = delta_star - hit_offset;
    while hi - lo > opts.resolution {
        let mid = 0.5 * (lo + hi);
        if has_two(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(SnlOutcome::Located {
        delta: 0.5 * (lo + hi),
        bracket: (lo, hi),
    })
}

/// Organizing-center values for one `(theta, eta, epsilon)`.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdSummary {
    /// Singular Hopf value at the left fold.
    pub delta_h: f64,
    /// Singular Hopf value at the right fold.
    pub delta_q: f64,
    /// Maximal-canard threshold at the left fold.
    pub delta_c: f64,
    /// Closed-form Bautin locus value at the left fold.
    pub theta_b: f64,
    pub a_p: f64,
    pub a_q: f64,
    pub l1_p: f64,
    pub b: f64,
    /// Filled by [`locate_snl`] when run separately.
    pub delta_snl: Option<f64>,
}

pub fn threshold_summary(
    theta: f64,
    eta: f64,
    epsilon: f64,
) -> Result<ThresholdSummary, BifurcationError> {
    let folds = manifold::fold_points(theta, eta);
    if folds.len() != 2 {
        return Err(ManifoldError::FoldCountMismatch(folds.len()).into());
    }
    let summary = normalform::lyapunov_summary(theta, eta, epsilon)?;
    let ds_q = normalform::canard_delta(folds[1].u, eta);
    let exp_q = normalform::taylor_coefficients(&folds[1], theta, eta, ds_q)?;
    Ok(ThresholdSummary {
        delta_h: summary.delta_h,
        delta_q: ds_q,
        delta_c: summary.delta_c,
        theta_b: summary.theta_b,
        a_p: summary.a,
        a_q: normalform::criticality_a(&exp_q),
        l1_p: summary.l1,
        b: summary.b,
        delta_snl: None,
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:e}"),
        None => "none".to_string(),
    }
}

/// Renders the diagram as CSV. The first line carries the configuration
/// hash, the second the sweep metadata; every number uses shortest
/// round-trip formatting so parsing the text reproduces the branch exactly.
pub fn diagram_csv(branch: &DiagramBranch, config_hash: u64) -> String {
    let m = &branch.meta;
    let mut s = format!("# config-hash: {config_hash:016x}\n");
    s.push_str(&format!(
        "# meta: theta={:e},eta={:e},epsilon={:e},onset={},offset={}\n",
        m.theta,
        m.eta,
        m.epsilon,
        fmt_opt(m.onset),
        fmt_opt(m.offset)
    ));
    s.push_str("delta,u_eq,v_eq,eq_stability,outcome,u_min,u_max,v_min,v_max,period,cycle_stability,cycle_kind\n");
    for r in &branch.rows {
        let eq_u = r.u_eq.map(|x| format!("{x:e}")).unwrap_or_default();
        let eq_v = r.v_eq.map(|x| format!("{x:e}")).unwrap_or_default();
        let eq_s = r.eq_stability.map(|st| st.label()).unwrap_or("");
        match r.outcome {
            RowOutcome::Cycle(c) => {
                s.push_str(&format!(
                    "{:e},{},{},{},cycle,{:e},{:e},{:e},{:e},{:e},{},{}\n",
                    r.delta,
                    eq_u,
                    eq_v,
                    eq_s,
                    c.u_min,
                    c.u_max,
                    c.v_min,
                    c.v_max,
                    c.period,
                    c.stability.label(),
                    c.kind.label(),
                ));
            }
            _ => {
                s.push_str(&format!(
                    "{:e},{},{},{},{},,,,,,,\n",
                    r.delta,
                    eq_u,
                    eq_v,
                    eq_s,
                    r.outcome.label(),
                ));
            }
        }
    }
    s
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, BifurcationError> {
    tok.parse::<f64>().map_err(|_| BifurcationError::Parse {
        line,
        what: format!("bad number {tok:?}"),
    })
}

fn parse_opt_f64(tok: &str, line: usize) -> Result<Option<f64>, BifurcationError> {
    if tok.is_empty() || tok == "none" {
        Ok(None)
    } else {
        parse_f64(tok, line).map(Some)
    }
}

fn parse_stability(tok: &str, line: usize) -> Result<Option<Stability>, BifurcationError> {
    let st = match tok {
        "" => return Ok(None),
        "attracting-saddle-node" => Stability::AttractingSaddleNode,
        "stable-node" => Stability::StableNode,
        "saddle" => Stability::Saddle,
        "stable-focus-node" => Stability::StableFocusNode,
        "unstable" => Stability::Unstable,
        "undetermined-on-fold" => Stability::UndeterminedOnFold,
        other => {
            return Err(BifurcationError::Parse {
                line,
                what: format!("unknown stability {other:?}"),
            })
        }
    };
    Ok(Some(st))
}

/// Parses text produced by [`diagram_csv`], returning the branch and the
/// configuration hash it was written under.
pub fn parse_diagram(text: &str) -> Result<(DiagramBranch, u64), BifurcationError> {
    let mut lines = text.lines().enumerate();
    let (_, hash_line) = lines.next().ok_or(BifurcationError::Parse {
        line: 1,
        what: "empty input".into(),
    })?;
    let hash_hex = hash_line
        .strip_prefix("# config-hash: ")
        .ok_or(BifurcationError::Parse {
            line: 1,
            what: "missing config-hash header".into(),
        })?;
    let config_hash = u64::from_str_radix(hash_hex.trim(), 16).map_err(|_| {
        BifurcationError::Parse {
            line: 1,
            what: format!("bad hash {hash_hex:?}"),
        }
    })?;

    let (_, meta_line) = lines.next().ok_or(BifurcationError::Parse {
        line: 2,
        what: "missing meta line".into(),
    })?;
    let meta_body = meta_line
        .strip_prefix("# meta: ")
        .ok_or(BifurcationError::Parse {
            line: 2,
            what: "missing meta line".into(),
        })?;
    let mut meta = SweepMeta {
        theta: f64::NAN,
        eta: f64::NAN,
        epsilon: f64::NAN,
        onset: None,
        offset: None,
    };
    for kv in meta_body.split(',') {
        let (k, v) = kv.split_once('=').ok_or(BifurcationError::Parse {
            line: 2,
            what: format!("bad meta field {kv:?}"),
        })?;
        match k {
            "theta" => meta.theta = parse_f64(v, 2)?,
            "eta" => meta.eta = parse_f64(v, 2)?,
            "epsilon" => meta.epsilon = parse_f64(v, 2)?,
            "onset" => meta.onset = parse_opt_f64(v, 2)?,
            "offset" => meta.offset = parse_opt_f64(v, 2)?,
            other => {
                return Err(BifurcationError::Parse {
                    line: 2,
                    what: format!("unknown meta key {other:?}"),
                })
            }
        }
    }

    let (_, header) = lines.next().ok_or(BifurcationError::Parse {
        line: 3,
        what: "missing column header".into(),
    })?;
    if header != "delta,u_eq,v_eq,eq_stability,outcome,u_min,u_max,v_min,v_max,period,cycle_stability,cycle_kind" {
        return Err(BifurcationError::Parse {
            line: 3,
            what: "unexpected column header".into(),
        });
    }

    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.split(',').collect();
        if f.len() != 12 {
            return Err(BifurcationError::Parse {
                line,
                what: format!("expected 12 fields, got {}", f.len()),
            });
        }
        let outcome = match f[4] {
            "equilibrium" => RowOutcome::Equilibrium,
            "unresolved" => RowOutcome::Unresolved,
            "cycle" => {
                let stability = match f[10] {
                    "stable" => CycleStability::Stable,
                    "unstable" => CycleStability::Unstable,
                    other => {
                        return Err(BifurcationError::Parse {
                            line,
                            what: format!("unknown cycle stability {other:?}"),
                        })
                    }
                };
                let kind = match f[11] {
                    "small-canard" => CycleKind::SmallCanard,
                    "canard" => CycleKind::Canard,
                    "relaxation" => CycleKind::Relaxation,
                    other => {
                        return Err(BifurcationError::Parse {
                            line,
                            what: format!("unknown cycle kind {other:?}"),
                        })
                    }
                };
                RowOutcome::Cycle(CycleInfo {
                    u_min: parse_f64(f[5], line)?,
                    u_max: parse_f64(f[6], line)?,
                    v_min: parse_f64(f[7], line)?,
                    v_max: parse_f64(f[8], line)?,
                    period: parse_f64(f[9], line)?,
                    stability,
                    kind,
                })
            }
            other => {
                return Err(BifurcationError::Parse {
                    line,
                    what: format!("unknown outcome {other:?}"),
                })
            }
        };
        rows.push(DiagramRow {
            delta: parse_f64(f[0], line)?,
            u_eq: parse_opt_f64(f[1], line)?,
            v_eq: parse_opt_f64(f[2], line)?,
            eq_stability: parse_stability(f[3], line)?,
            outcome,
        });
    }
    Ok((DiagramBranch { meta, rows }, config_hash))
}
