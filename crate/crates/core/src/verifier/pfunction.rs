//! The P-function and the gradient-dependent coefficient fields.

use std::sync::Arc;

use crate::geometry::{
    covariant_gradient, covariant_hessian, laplace_beltrami, sym_index, sym_len, MetricGrid,
    ScalarField, SymTensorField, Variance, VectorField,
};
use crate::nonlinearity::{PhiFamily, Potential};

use super::{Result, VerifyError};

/// ∇u, |∇u|², the Hessian and the Φ-derivatives at every node.
pub(crate) struct Kinematics {
    pub grid: Arc<MetricGrid>,
    pub grad: VectorField,
    pub up: VectorField,
    pub t: Vec<f64>,
    pub hess: SymTensorField,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub d2phi: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Kinematics {
    pub fn new(u: &ScalarField, family: &PhiFamily) -> Result<Self> {
        Self::build(u, family, false)
    }

    /// As [`Kinematics::new`], but Λ = 0 is accepted at nodes with ∇u = 0
    /// (degenerate families); quantities divided by Λ are NaN there.
    pub fn new_degenerate(u: &ScalarField, family: &PhiFamily) -> Result<Self> {
        Self::build(u, family, true)
    }

    fn build(u: &ScalarField, family: &PhiFamily, degenerate: bool) -> Result<Self> {
        let grid = u.grid.clone();
        let grad = covariant_gradient(u);
        let up = grad.with_variance(Variance::Contravariant);
        let t = grad.norm2().values;
        let hess = covariant_hessian(u);
        let n = grid.len();
        let mut phi = Vec::with_capacity(n);
        let mut dphi = Vec::with_capacity(n);
        let mut d2phi = Vec::with_capacity(n);
        let mut lambda = Vec::with_capacity(n);
        let fam = |e: crate::nonlinearity::NonlinearityError| VerifyError::Family(e.to_string());
        for (node, &ti) in t.iter().enumerate() {
            phi.push(family.phi(ti).map_err(fam)?);
            dphi.push(family.dphi(ti).map_err(fam)?);
            let d2 = match family.d2phi(ti) {
                Ok(v) => v,
                Err(_) if ti == 0.0 => 0.0,
                Err(e) => return Err(fam(e)),
            };
            d2phi.push(d2);
            let l = 2.0 * ti * d2 + dphi[node];
            if !(l > 0.0) && !(degenerate && ti == 0.0 && l == 0.0) {
                return Err(VerifyError::Lambda {
                    node,
                    t: ti,
                    lambda: l,
                });
            }
            lambda.push(l);
        }
        Ok(Self {
            grid,
            grad,
            up,
            t,
            hess,
            phi,
            dphi,
            d2phi,
            lambda,
        })
    }

    /// Hess u(∇u, ∇u) at node `n`.
    pub fn hess_grad_grad(&self, n: usize) -> f64 {
        let d = self.grid.dim;
        let h = self.hess.at(n);
        let v = self.up.at(n);
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += h[sym_index(d, i, j)] * v[i] * v[j];
            }
        }
        s
    }

    /// Contravariant aⁱʲ = Φ′gⁱʲ + 2Φ″uⁱuʲ, scaled by `scale[n]`.
    pub fn a_contravariant(&self, scale: impl Fn(usize) -> f64) -> SymTensorField {
        let grid = &self.grid;
        let d = grid.dim;
        let mut out = Vec::with_capacity(grid.len() * sym_len(d));
        for n in 0..grid.len() {
            let gi = grid.g_inv_at(n);
            let v = self.up.at(n);
            let s = scale(n);
            for i in 0..d {
                for j in i..d {
                    out.push(s * (self.dphi[n] * gi[sym_index(d, i, j)] + 2.0 * self.d2phi[n] * v[i] * v[j]));
                }
            }
        }
        SymTensorField::new(grid.clone(), out, Variance::Contravariant)
    }
}

/// Contraction Tⁱʲwⱼ of a contravariant tensor with a covariant vector.
pub(crate) fn contract(t: &SymTensorField, w: &VectorField) -> VectorField {
    let grid = &t.grid;
    let d = grid.dim;
    let mut out = Vec::with_capacity(grid.len() * d);
    for n in 0..grid.len() {
        let a = t.at(n);
        let x = w.at(n);
        for i in 0..d {
            out.push((0..d).map(|j| a[sym_index(d, i, j)] * x[j]).sum());
        }
    }
    VectorField::new(grid.clone(), out, Variance::Contravariant)
}

/// P, ∇P by two routes, Λ, dᵢⱼ and f(u) of one field.
#[derive(Debug, Clone)]
pub struct PFieldBundle {
    /// 2Φ′(t)t − Φ(t) − 2F(u) with t = |∇u|².
    pub p: ScalarField,
    /// Central differences of `p`.
    pub grad_p: VectorField,
    /// 2Λ·Hess u(∇u, ·) − 2f(u)∇u.
    pub grad_p_closed: VectorField,
    pub lambda: ScalarField,
    /// Contravariant dⁱʲ = aⁱʲ/Λ.
    pub d_tensor: SymTensorField,
    pub f_of_u: ScalarField,
    pub grad_u_norm2: ScalarField,
    /// max|∇P direct − ∇P closed|.
    pub grad_p_discrepancy: f64,
    /// max|P − (Ψ(t) − 2F(u))|.
    pub psi_form_defect: f64,
}

pub fn p_function(u: &ScalarField, phi: &PhiFamily, pot: &Potential) -> Result<PFieldBundle> {
    let k = Kinematics::new(u, phi)?;
    let grid = &k.grid;
    let d = grid.dim;
    let n_nodes = grid.len();
    let mut p = Vec::with_capacity(n_nodes);
    let mut psi_defect: f64 = 0.0;
    for n in 0..n_nodes {
        let t = k.t[n];
        let f2 = 2.0 * pot.f(u.values[n]);
        let v = 2.0 * k.dphi[n] * t - k.phi[n] - f2;
        let psi = phi.psi(t).map_err(|e| VerifyError::Family(e.to_string()))?;
        psi_defect = psi_defect.max((v - (psi - f2)).abs());
        p.push(v);
    }
    let p = ScalarField::new(grid.clone(), p);
    let grad_p = covariant_gradient(&p);
    let f_of_u = u.map(|x| pot.df(x));
    let mut closed = Vec::with_capacity(n_nodes * d);
    for n in 0..n_nodes {
        let h = k.hess.at(n);
        let v = k.up.at(n);
        for i in 0..d {
            let hv: f64 = (0..d).map(|j| h[sym_index(d, i, j)] * v[j]).sum();
            closed.push(2.0 * k.lambda[n] * hv - 2.0 * f_of_u.values[n] * k.grad.component(n, i));
        }
    }
    let grad_p_closed = VectorField::new(grid.clone(), closed, Variance::Covariant);
    let grad_p_discrepancy = grad_p
        .values
        .iter()
        .zip(&grad_p_closed.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let lam = k.lambda.clone();
    let d_tensor = k.a_contravariant(|n| 1.0 / lam[n]);
    Ok(PFieldBundle {
        p,
        grad_p,
        grad_p_closed,
        lambda: ScalarField::new(grid.clone(), k.lambda.clone()),
        d_tensor,
        f_of_u,
        grad_u_norm2: ScalarField::new(grid.clone(), k.t.clone()),
        grad_p_discrepancy,
        psi_form_defect: psi_defect,
    })
}

/// Δu from the equation, (f − 2Φ″·Hess u(∇u, ∇u))/Φ′, and its max distance
/// from the discrete Laplace–Beltrami of `u`.
pub fn laplacian_decomposition(
    u: &ScalarField,
    phi: &PhiFamily,
    pot: &Potential,
) -> Result<(ScalarField, f64)> {
    let k = Kinematics::new(u, phi)?;
    let lb = laplace_beltrami(u);
    let mut out = Vec::with_capacity(u.values.len());
    let mut defect: f64 = 0.0;
    for n in 0..u.values.len() {
        if !(k.dphi[n] > 0.0) {
            return Err(VerifyError::Family(format!(
                "Φ′ vanishes at node {n} (|∇u|² = {})",
                k.t[n]
            )));
        }
        let v = (pot.df(u.values[n]) - 2.0 * k.d2phi[n] * k.hess_grad_grad(n)) / k.dphi[n];
        defect = defect.max((v - lb.values[n]).abs());
        out.push(v);
    }
    Ok((ScalarField::new(u.grid.clone(), out), defect))
}
