//! Newton solver for div(Φ′(|∇u|²)∇u) = F′(u) on a metric grid.

mod manufactured;
mod newton;
mod residual;
mod sparse;

pub use manufactured::{analytic_operator, manufactured_source, AnalyticField, Jet};
pub use newton::{
    extend_profile, initial_field, newton_solve, solve_problem, Continuation,
    ContinuationParameter, InitialGuess, IterateRecord, LinearSolver, Pin, SolveConfig,
    SolveReport,
};
pub use residual::{
    check_jacobian, linearize, residual, JacobianCheck, Problem, JACOBIAN_FLOOR,
};
pub use sparse::{gcr, inverse_norm_one_estimate, BorderedSolver, CsrMatrix, DirectSolver, InverseOperator};

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("Φ′ evaluated outside the domain of {family} at node {node} {index:?} (t = {t:e})")]
    Domain {
        node: usize,
        index: Vec<usize>,
        t: f64,
        family: String,
    },
    #[error("non-finite residual at node {node}")]
    NonFinite { node: usize },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("linear solve failed: {0}")]
    Linear(String),
    #[error("singular Jacobian: {0}")]
    Singular(String),
    #[error("i/o: {0}")]
    Io(String),
}
