//! Φ-families, potentials and ellipticity checks.

mod ellipticity;
mod pchip;
mod phi;
mod potential;

pub use ellipticity::{check_assumption_a, check_assumption_b, ellipticity_floor, Assumption, EllipticityReport};
pub use pchip::Pchip;
pub use phi::{PhiFamily, PhiKind, DEFAULT_EPSILON};
pub use potential::{Potential, PotentialKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NonlinearityError {
    #[error("{family} is singular at t = {t:e}")]
    Domain { family: String, t: f64 },
    #[error("{0}")]
    Config(String),
    #[error("{value} is outside the range of Ψ for {family} (sup = {sup})")]
    OutOfRange { family: String, value: f64, sup: f64 },
}
