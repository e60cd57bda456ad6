//! Analytic test fields and manufactured sources.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{sym_index, MetricGrid, ScalarField};
use crate::nonlinearity::{PhiFamily, Potential};

use super::SolverError;

/// Closed-form fields with exact first and second coordinate derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnalyticField {
    /// offset + amp·Πₐ sin(2πkₐxₐ/Lₐ + phaseₐ)
    Trig {
        amp: f64,
        offset: f64,
        k: Vec<f64>,
        phase: Vec<f64>,
    },
    /// offset + amp·cos θ on the sphere chart.
    CosTheta { amp: f64, offset: f64 },
}

/// Value, gradient and Hessian (coordinate derivatives) at a point.
pub struct Jet {
    pub value: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
}

impl AnalyticField {
    /// offset + amp·sin(2πk x_axis / L).
    pub fn sine(dim: usize, axis: usize, amp: f64, k: f64, offset: f64) -> Self {
        let mut ks = vec![0.0; dim];
        let mut phase = vec![PI / 2.0; dim];
        ks[axis] = k;
        phase[axis] = 0.0;
        AnalyticField::Trig {
            amp,
            offset,
            k: ks,
            phase,
        }
    }

    pub fn jet(&self, x: &[f64], lengths: &[f64]) -> Jet {
        let d = x.len();
        let mut grad = [0.0; 3];
        let mut hess = [[0.0; 3]; 3];
        match self {
            AnalyticField::Trig {
                amp,
                offset,
                k,
                phase,
            } => {
                let w: Vec<f64> = (0..d).map(|a| 2.0 * PI * k[a] / lengths[a]).collect();
                let s: Vec<f64> = (0..d).map(|a| (w[a] * x[a] + phase[a]).sin()).collect();
                let c: Vec<f64> = (0..d).map(|a| (w[a] * x[a] + phase[a]).cos()).collect();
                let prod_except = |skip: &[usize]| -> f64 {
                    (0..d).filter(|a| !skip.contains(a)).map(|a| s[a]).product()
                };
                let value = offset + amp * prod_except(&[]);
                for a in 0..d {
                    grad[a] = amp * w[a] * c[a] * prod_except(&[a]);
                    for b in 0..d {
                        hess[a][b] = if a == b {
                            -amp * w[a] * w[a] * s[a] * prod_except(&[a])
                        } else {
                            amp * w[a] * c[a] * w[b] * c[b] * prod_except(&[a, b])
                        };
                    }
                }
                Jet { value, grad, hess }
            }
            AnalyticField::CosTheta { amp, offset } => {
                let (st, ct) = x[0].sin_cos();
                grad[0] = -amp * st;
                hess[0][0] = -amp * ct;
                Jet {
                    value: offset + amp * ct,
                    grad,
                    hess,
                }
            }
        }
    }

    pub fn sample(&self, grid: &std::sync::Arc<MetricGrid>) -> ScalarField {
        ScalarField::from_fn(grid, |x| self.jet(x, &grid.lengths).value)
    }
}

/// Continuum div(Φ′(|∇u|²)∇u) = Φ′Δu + 2Φ″·Hess u(∇u, ∇u) at every node.
pub fn analytic_operator(
    field: &AnalyticField,
    grid: &MetricGrid,
    phi: &PhiFamily,
) -> Result<Vec<f64>, SolverError> {
    let d = grid.dim;
    let mut out = Vec::with_capacity(grid.len());
    for n in 0..grid.len() {
        let x = grid.coords(n);
        let jet = field.jet(&x, &grid.lengths);
        let gi = grid.g_inv_at(n);
        let mut h = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                let corr: f64 = (0..d).map(|k| grid.gamma(n, k, i, j) * jet.grad[k]).sum();
                h[i][j] = jet.hess[i][j] - corr;
            }
        }
        let mut up = [0.0; 3];
        for i in 0..d {
            up[i] = (0..d).map(|j| gi[sym_index(d, i, j)] * jet.grad[j]).sum();
        }
        let t: f64 = (0..d).map(|i| up[i] * jet.grad[i]).sum();
        let mut lap = 0.0;
        let mut hvv = 0.0;
        for i in 0..d {
            for j in 0..d {
                lap += gi[sym_index(d, i, j)] * h[i][j];
                hvv += h[i][j] * up[i] * up[j];
            }
        }
        let dphi = phi.dphi(t).map_err(|e| SolverError::Config(e.to_string()))?;
        let d2phi = if t == 0.0 {
            0.0
        } else {
            phi.d2phi(t).map_err(|e| SolverError::Config(e.to_string()))?
        };
        out.push(dphi * lap + 2.0 * d2phi * hvv);
    }
    Ok(out)
}

/// Source s with div(Φ′∇u*) − F′(u*) − s = 0 in the continuum.
pub fn manufactured_source(
    field: &AnalyticField,
    grid: &MetricGrid,
    phi: &PhiFamily,
    pot: &Potential,
) -> Result<Vec<f64>, SolverError> {
    let op = analytic_operator(field, grid, phi)?;
    Ok((0..grid.len())
        .map(|n| {
            let u = field.jet(&grid.coords(n), &grid.lengths).value;
            op[n] - pot.df(u)
        })
        .collect())
}
