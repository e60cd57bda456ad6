//! Conservative discretization of div(Φ′(|∇u|²)∇u) − F′(u) and its Jacobian.

use std::sync::Arc;

use crate::geometry::{face_gradient, sym_index, MetricGrid, ScalarField};
use crate::nonlinearity::{PhiFamily, Potential};

use super::sparse::CsrMatrix;
use super::SolverError;

/// Equation data on one grid. `source` is subtracted from the residual, which
/// is how manufactured solutions enter.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Arc<MetricGrid>,
    pub phi: PhiFamily,
    pub pot: Potential,
    pub source: Option<Vec<f64>>,
}

/// Node coefficients of the face gradient components.
struct FaceStencil {
    n: usize,
    m: usize,
    axis: usize,
    /// (node, component, coefficient)
    entries: Vec<(usize, usize, f64)>,
}

fn face_stencil(grid: &MetricGrid, n: usize, axis: usize) -> FaceStencil {
    let (m, _) = grid.neighbor(n, axis, 1);
    let mut entries = Vec::with_capacity(2 + 4 * (grid.dim - 1));
    let ha = grid.spacing[axis];
    entries.push((m, axis, 1.0 / ha));
    entries.push((n, axis, -1.0 / ha));
    for b in 0..grid.dim {
        if b == axis {
            continue;
        }
        let c = 0.25 / grid.spacing[b];
        for node in [n, m] {
            entries.push((grid.neighbor(node, b, 1).0, b, c));
            entries.push((grid.neighbor(node, b, -1).0, b, -c));
        }
    }
    FaceStencil {
        n,
        m,
        axis,
        entries,
    }
}

impl Problem {
    pub fn new(grid: Arc<MetricGrid>, phi: PhiFamily, pot: Potential) -> Self {
        Self {
            grid,
            phi,
            pot,
            source: None,
        }
    }

    pub fn with_source(mut self, source: Vec<f64>) -> Self {
        assert_eq!(source.len(), self.grid.len());
        self.source = Some(source);
        self
    }

    fn domain_error(&self, n: usize, t: f64) -> SolverError {
        SolverError::Domain {
            node: n,
            index: self.grid.index(n),
            t,
            family: self.phi.name(),
        }
    }

    /// Face flux √g_f·Φ′(t_f)·g^{ab}_f D_b on every face, per axis.
    fn fluxes(&self, u: &[f64]) -> Result<Vec<Vec<f64>>, SolverError> {
        let grid = &self.grid;
        let d = grid.dim;
        let mut out = Vec::with_capacity(d);
        let mut du = [0.0; 3];
        for a in 0..d {
            let mut fa = Vec::with_capacity(grid.len());
            for n in 0..grid.len() {
                if !grid.face_open(n, a) {
                    fa.push(0.0);
                    continue;
                }
                face_gradient(grid, u, n, a, &mut du[..d]);
                let gi = grid.face_g_inv(n, a);
                let mut t = 0.0;
                let mut va = 0.0;
                for b in 0..d {
                    let vb: f64 = (0..d).map(|c| gi[sym_index(d, b, c)] * du[c]).sum();
                    t += vb * du[b];
                    if b == a {
                        va = vb;
                    }
                }
                let dphi = self.phi.dphi(t).map_err(|_| self.domain_error(n, t))?;
                fa.push(grid.face_sqrt_det(n, a) * (dphi * va));
            }
            out.push(fa);
        }
        Ok(out)
    }

    /// Nodal residual div(Φ′∇u) − F′(u) − s.
    pub fn residual(&self, u: &[f64]) -> Result<Vec<f64>, SolverError> {
        let grid = &self.grid;
        let fluxes = self.fluxes(u)?;
        let mut r = Vec::with_capacity(grid.len());
        for n in 0..grid.len() {
            let mut s = 0.0;
            for (a, fa) in fluxes.iter().enumerate() {
                let minus = grid.minus_face_owner(n, a).map_or(0.0, |m| fa[m]);
                s += (fa[n] - minus) / grid.spacing[a];
            }
            let mut v = s / grid.sqrt_det_g[n] - self.pot.df(u[n]);
            if let Some(src) = &self.source {
                v -= src[n];
            }
            if !v.is_finite() {
                return Err(SolverError::NonFinite { node: n });
            }
            r.push(v);
        }
        Ok(r)
    }

    /// Analytic Jacobian of [`Problem::residual`].
    ///
    /// A face flux varies as δF = √g_f·Σ_b A^{ab}δD_b with
    /// A = Φ′g⁻¹ + 2Φ″(g⁻¹D)(g⁻¹D)ᵀ.
    pub fn jacobian(&self, u: &[f64]) -> Result<CsrMatrix, SolverError> {
        let grid = &self.grid;
        let d = grid.dim;
        let mut trip: Vec<(usize, usize, f64)> =
            Vec::with_capacity(grid.len() * (1 + 2 * d * (2 + 4 * (d - 1))));
        let mut du = [0.0; 3];
        let mut v = [0.0; 3];
        for a in 0..d {
            for n in 0..grid.len() {
                if !grid.face_open(n, a) {
                    continue;
                }
                let st = face_stencil(grid, n, a);
                face_gradient(grid, u, n, a, &mut du[..d]);
                let gi = grid.face_g_inv(n, a);
                let mut t = 0.0;
                for b in 0..d {
                    v[b] = (0..d).map(|c| gi[sym_index(d, b, c)] * du[c]).sum();
                    t += v[b] * du[b];
                }
                let dphi = self.phi.dphi(t).map_err(|_| self.domain_error(n, t))?;
                let d2phi = if t == 0.0 {
                    0.0
                } else {
                    self.phi.d2phi(t).map_err(|_| self.domain_error(n, t))?
                };
                let sq = grid.face_sqrt_det(n, a);
                let row_n = 1.0 / (grid.spacing[a] * grid.sqrt_det_g[st.n]);
                let row_m = -1.0 / (grid.spacing[a] * grid.sqrt_det_g[st.m]);
                for &(node, b, c) in &st.entries {
                    let aab = dphi * gi[sym_index(d, st.axis, b)] + 2.0 * d2phi * v[st.axis] * v[b];
                    let w = sq * aab * c;
                    trip.push((st.n, node, row_n * w));
                    trip.push((st.m, node, row_m * w));
                }
            }
        }
        for n in 0..grid.len() {
            trip.push((n, n, -self.pot.d2f(u[n])));
        }
        Ok(CsrMatrix::from_triplets(grid.len(), trip))
    }
}

/// div(Φ′(|∇u|²)∇u) − F′(u) on the grid of `u`.
pub fn residual(
    u: &ScalarField,
    phi: &PhiFamily,
    pot: &Potential,
) -> Result<ScalarField, SolverError> {
    let p = Problem::new(u.grid.clone(), phi.clone(), pot.clone());
    Ok(ScalarField::new(u.grid.clone(), p.residual(&u.values)?))
}

/// Jacobian of [`residual`] at `u`.
pub fn linearize(u: &ScalarField, phi: &PhiFamily, pot: &Potential) -> Result<CsrMatrix, SolverError> {
    Problem::new(u.grid.clone(), phi.clone(), pot.clone()).jacobian(&u.values)
}

/// Directional-derivative consistency of the Jacobian.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct JacobianCheck {
    pub deltas: [f64; 2],
    pub errors: [f64; 2],
    /// Scale of Jv, used for the rounding floor.
    pub scale: f64,
    pub pass: bool,
}

/// Rounding floor relative to ‖Jv‖∞ below which a check passes outright.
pub const JACOBIAN_FLOOR: f64 = 1e-7;

/// Compares (R(u + δv) − R(u))/δ with Jv for the two step sizes.
pub fn check_jacobian(
    problem: &Problem,
    u: &[f64],
    v: &[f64],
    deltas: [f64; 2],
) -> Result<JacobianCheck, SolverError> {
    let r0 = problem.residual(u)?;
    let j = problem.jacobian(u)?;
    directional_check(problem, u, &r0, &j, v, deltas)
}

/// [`check_jacobian`] with the residual and Jacobian at `u` already known.
pub(crate) fn directional_check(
    problem: &Problem,
    u: &[f64],
    r0: &[f64],
    j: &CsrMatrix,
    v: &[f64],
    deltas: [f64; 2],
) -> Result<JacobianCheck, SolverError> {
    let jv = j.mul_vec(v);
    let scale = jv.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let mut errors = [0.0; 2];
    for (k, &delta) in deltas.iter().enumerate() {
        let up: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + delta * b).collect();
        let r1 = problem.residual(&up)?;
        errors[k] = r1
            .iter()
            .zip(r0)
            .zip(&jv)
            .map(|((a, b), j)| ((a - b) / delta - j).abs())
            .fold(0.0, f64::max);
    }
    // First order in δ: the error shrinks with δ unless both sit at the rounding floor.
    let ratio_ok = errors[1] <= 0.2 * errors[0] * (deltas[0] / deltas[1]) / 10.0;
    let floor_ok = errors[0] <= JACOBIAN_FLOOR * scale && errors[1] <= JACOBIAN_FLOOR * scale * 10.0;
    Ok(JacobianCheck {
        deltas,
        errors,
        scale,
        pass: ratio_ok || floor_ok,
    })
}
