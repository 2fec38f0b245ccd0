//! The dimensionless vector field, its equilibria, and conversion from the
//! dimensional model.

use crate::manifold::{self, Branch};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter {name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("parameter {name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("epsilon must lie in (0, 1), got {0}")]
    EpsilonOutOfRange(f64),
}

/// Dimensionless parameters of the slow-fast system.
///
/// `epsilon` is the timescale separation and must be supplied explicitly;
/// it is never derived from dimensional inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub delta: f64,
    pub theta: f64,
    pub eta: f64,
    pub epsilon: f64,
}

impl Params {
    pub fn new(delta: f64, theta: f64, eta: f64, epsilon: f64) -> Result<Self, ModelError> {
        for (name, value) in [
            ("delta", delta),
            ("theta", theta),
            ("eta", eta),
            ("epsilon", epsilon),
        ] {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { name, value });
            }
            if value <= 0.0 {
                return Err(ModelError::NonPositive { name, value });
            }
        }
        if epsilon >= 1.0 {
            return Err(ModelError::EpsilonOutOfRange(epsilon));
        }
        Ok(Self { delta, theta, eta, epsilon })
    }

    /// Advisory warnings for parameter ranges where the asymptotic results
    /// degrade but the computation still makes sense.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.epsilon >= 0.1 {
            w.push(format!(
                "epsilon = {} is large; results are asymptotic in epsilon -> 0",
                self.epsilon
            ));
        }
        if self.theta >= 1.0 {
            w.push(format!("theta = {} is outside the unit interval", self.theta));
        }
        if self.eta >= 1.0 {
            w.push(format!("eta = {} is outside the unit interval", self.eta));
        }
        w
    }
}

/// Parameters of the dimensional model, all strictly positive.
#[derive(Debug, Clone, Copy)]
pub struct DimensionalParams {
    pub r: f64,
    pub k: f64,
    pub m: f64,
    pub p: f64,
    pub q: f64,
    pub c: f64,
    pub d: f64,
}

impl DimensionalParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(r: f64, k: f64, m: f64, p: f64, q: f64, c: f64, d: f64) -> Result<Self, ModelError> {
        for (name, value) in [
            ("r", r),
            ("k", k),
            ("m", m),
            ("p", p),
            ("q", q),
            ("c", c),
            ("d", d),
        ] {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { name, value });
            }
            if value <= 0.0 {
                return Err(ModelError::NonPositive { name, value });
            }
        }
        Ok(Self { r, k, m, p, q, c, d })
    }

    /// Converts to the dimensionless ratios `delta = d/p`, `theta = m/K`,
    /// `eta = c/K^2`. The timescale separation is not recoverable from the
    /// dimensional inputs and must be attached with [`Nondimensional::with_epsilon`].
    pub fn nondimensionalize(&self) -> Nondimensional {
        Nondimensional {
            delta: self.d / self.p,
            theta: self.m / self.k,
            eta: self.c / (self.k * self.k),
        }
    }
}

/// The dimensionless ratios produced by [`DimensionalParams::nondimensionalize`],
/// still missing `epsilon`.
#[derive(Debug, Clone, Copy)]
pub struct Nondimensional {
    pub delta: f64,
    pub theta: f64,
    pub eta: f64,
}

impl Nondimensional {
    pub fn with_epsilon(self, epsilon: f64) -> Result<Params, ModelError> {
        Params::new(self.delta, self.theta, self.eta, epsilon)
    }
}

/// The fast right-hand side `f(u,v) = u(1-u)(u+theta)(u^2+eta) - u^2 v`.
pub fn fast_rhs(u: f64, v: f64, theta: f64, eta: f64) -> f64 {
    u * (1.0 - u) * (u + theta) * (u * u + eta) - u * u * v
}

/// The slow right-hand side `g(u,v) = u^2 v - delta v (u^2+eta)` without the
/// `epsilon` prefactor.
pub fn slow_rhs(u: f64, v: f64, delta: f64, eta: f64) -> f64 {
    u * u * v - delta * v * (u * u + eta)
}

/// The full time-rescaled vector field `(f, eps*g)`.
pub fn vector_field(state: (f64, f64), p: &Params) -> (f64, f64) {
    let (u, v) = state;
    (
        fast_rhs(u, v, p.theta, p.eta),
        p.epsilon * slow_rhs(u, v, p.delta, p.eta),
    )
}

/// Jacobian of the time-rescaled vector field at `state`, row-major.
pub fn jacobian(state: (f64, f64), p: &Params) -> [[f64; 2]; 2] {
    let (u, v) = state;
    let (theta, eta) = (p.theta, p.eta);
    // f = -u^5 + (1-theta)u^4 + (theta-eta)u^3 + (1-theta)eta u^2 + theta*eta*u - u^2 v
    let fu = -5.0 * u.powi(4) + 4.0 * (1.0 - theta) * u.powi(3)
        + 3.0 * (theta - eta) * u * u
        + 2.0 * (1.0 - theta) * eta * u
        + theta * eta
        - 2.0 * u * v;
    let fv = -u * u;
    let gu = p.epsilon * 2.0 * u * v * (1.0 - p.delta);
    let gv = p.epsilon * ((1.0 - p.delta) * u * u - p.delta * eta);
    [[fu, fv], [gu, gv]]
}

/// The transcritical threshold `delta = 1/(1+eta)` at which the boundary
/// equilibrium `(1, 0)` exchanges stability with the interior one.
pub fn transcritical_threshold(eta: f64) -> f64 {
    1.0 / (1.0 + eta)
}

/// Interior equilibrium `(u*, v*)` with `u* = sqrt(delta*eta/(1-delta))` and
/// `v* = phi(u*)`, or `None` when `delta >= 1/(1+eta)` puts it outside the
/// biologically feasible strip `0 < u < 1`.
pub fn interior_equilibrium(p: &Params) -> Option<(f64, f64)> {
    if p.delta >= transcritical_threshold(p.eta) {
        return None;
    }
    let u = (p.delta * p.eta / (1.0 - p.delta)).sqrt();
    let v = manifold::phi(u, p.theta, p.eta);
    Some((u, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    Origin,
    Boundary,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    AttractingSaddleNode,
    StableNode,
    Saddle,
    StableFocusNode,
    Unstable,
    UndeterminedOnFold,
}

impl Stability {
    pub fn is_stable(self) -> bool {
        matches!(
            self,
            Stability::StableNode | Stability::StableFocusNode | Stability::AttractingSaddleNode
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            Stability::AttractingSaddleNode => "attracting-saddle-node",
            Stability::StableNode => "stable-node",
            Stability::Saddle => "saddle",
            Stability::StableFocusNode => "stable-focus-node",
            Stability::Unstable => "unstable",
            Stability::UndeterminedOnFold => "undetermined-on-fold",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    pub u: f64,
    pub v: f64,
    pub stability: Stability,
    pub branch: Option<Branch>,
}

/// All equilibria of the system at the given parameters.
///
/// The origin and the boundary point `(1, 0)` always exist. The interior
/// point exists exactly when `delta` is below the transcritical threshold;
/// its stability is read off the branch of the critical manifold it sits on
/// when the manifold has two folds, and from the Jacobian otherwise. Within
/// `1e-9` of a fold abscissa the linearization is inconclusive and the point
/// is tagged [`Stability::UndeterminedOnFold`].
pub fn equilibria(p: &Params) -> Vec<Equilibrium> {
    let mut out = Vec::with_capacity(3);
    out.push(Equilibrium {
        kind: EquilibriumKind::Origin,
        u: 0.0,
        v: 0.0,
        stability: Stability::AttractingSaddleNode,
        branch: None,
    });

    let threshold = transcritical_threshold(p.eta);
    let boundary_stability = if (p.delta - threshold).abs() < 1e-12 {
        Stability::AttractingSaddleNode
    } else if p.delta > threshold {
        Stability::StableNode
    } else {
        Stability::Saddle
    };
    out.push(Equilibrium {
        kind: EquilibriumKind::Boundary,
        u: 1.0,
        v: 0.0,
        stability: boundary_stability,
        branch: None,
    });

    if let Some((u, v)) = interior_equilibrium(p) {
        let folds = manifold::fold_points(p.theta, p.eta);
        let (stability, branch) = if folds.len() == 2 {
            let branch = manifold::branch_of(u, &folds).expect("two folds present");
            let stability = match branch {
                Branch::Fold => Stability::UndeterminedOnFold,
                Branch::S0m => Stability::Unstable,
                Branch::S0l | Branch::S0r => Stability::StableFocusNode,
            };
            (stability, Some(branch))
        } else {
            (jacobian_stability((u, v), p), None)
        };
        out.push(Equilibrium {
            kind: EquilibriumKind::Interior,
            u,
            v,
            stability,
            branch,
        });
    }
    out
}

fn jacobian_stability(state: (f64, f64), p: &Params) -> Stability {
    let j = jacobian(state, p);
    let trace = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det < 0.0 {
        Stability::Saddle
    } else if trace < 0.0 {
        Stability::StableFocusNode
    } else {
        Stability::Unstable
    }
}
