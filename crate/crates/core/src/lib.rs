//! Quasi-linear elliptic equations div(Φ′(|∇u|²)∇u) = F′(u) on periodic
//! Riemannian grids, with discrete checks of the P-function gradient bound
//! and its consequences.

pub mod convergence;
pub mod dump;
pub mod geometry;
pub mod harness;
pub mod nonlinearity;
pub mod ode;
pub mod solver;
pub mod verifier;
