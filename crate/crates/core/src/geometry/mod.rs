//! Periodic structured grids with analytic metrics and covariant operators.

mod curvature;
mod distance;
mod fields;
mod grid;
mod ops;

pub use curvature::{fd_christoffel, fd_ricci};
pub use distance::{ball_volume, geodesic_distance};
pub use fields::{ScalarField, SymTensorField, Variance, VectorField};
pub use grid::{conformal_flat_laplacian, MetricGrid, MetricKind, CONFORMAL_MAX_AMPLITUDE};
pub use ops::{
    central_diff, component_is_odd, covariant_gradient, covariant_hessian, discrete_ricci,
    divergence, face_gradient, laplace_beltrami, metric_compatibility_defect, ricci_quadratic,
    volume_integral,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("{0}")]
    Config(String),
    #[error("metric is not positive definite at node {node} (index {index:?})")]
    NotPositiveDefinite { node: usize, index: Vec<usize> },
    #[error("ball of radius {radius} exits the grid chart")]
    BallTooLarge { radius: f64 },
    #[error("field lives on a different grid")]
    GridMismatch,
}

/// Number of independent components of a symmetric dim×dim tensor.
pub const fn sym_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Packed position of (i, j) in upper-triangular row order.
pub fn sym_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * (i + 1) / 2 + j
}
