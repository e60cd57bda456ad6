//! Experiment configs, runs, convergence studies and reports.

mod config;
mod report;
mod run;
mod study;

pub use config::{
    AnalyticField, CheckSpec, ExperimentConfig, FamilySpec, GridSpec, PotentialSpec, ProfileSpec, StudyKind,
    StudySpec,
};
pub use report::{headline, report, Summary, SUMMARY_FILE};
pub use run::{
    execute, output_root, run, run_dir, CheckOutcome, FileEntry, Mode, RunManifest, SolveSummary, MANIFEST_FILE,
    PROFILE_FILE, P_FILE, REFINEMENT_TOL, SOLUTION_FILE, STUDY_FILE,
};
pub use study::{convergence_study, StudyRow, StudyTable, DEFAULT_LEVELS};

use crate::dump::DumpError;
use crate::geometry::GeometryError;
use crate::ode::OdeError;
use crate::solver::SolverError;
use crate::verifier::VerifyError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {msg}")]
    Validation { field: String, msg: String },
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("study would allocate {nodes} nodes, above the cap of {cap}")]
    NodeCap { nodes: u128, cap: usize },
    #[error("{0}")]
    Check(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Dump(#[from] DumpError),
}
