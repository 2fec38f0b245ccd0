//! Numerical toolkit for a slow-fast predator-prey system with an Allee
//! effect in the prey growth and a sigmoidal functional response.
//!
//! The fast equation is `du/dt = u(1-u)(u+theta)(u^2+eta) - u^2 v` and the
//! slow equation is `dv/dt = eps (u^2 v - delta v (u^2+eta))`. The crate
//! computes the critical manifold and its fold points ([`manifold`]), the
//! canard-point normal form and Lyapunov coefficients ([`normalform`]),
//! time integration and limit-cycle detection ([`dynamics`]), and
//! one-parameter bifurcation diagrams in `delta` ([`bifurcation`]).

pub mod bifurcation;
pub mod dynamics;
pub mod manifold;
pub mod model;
pub mod normalform;
mod solve;
