use serde::{Deserialize, Serialize};

use super::pchip::Pchip;
use super::NonlinearityError;

/// Default regularization used for the singular p-Laplacian (1 < p < 2).
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhiKind {
    /// Φ(t) = t
    Linear,
    /// Φ(t) = (2/p) t^{p/2}
    PLaplacian { p: f64 },
    /// Φ(t) = 2√(1+t) − 2
    MeanCurvature,
    /// Sampled Φ on [0, t_max], monotone cubic interpolation.
    CustomTable { table: Pchip },
}

/// Integrand profile Φ of the energy ∫ ½Φ(|∇u|²) + F(u).
///
/// With `epsilon = Some(ε)` the family is evaluated at `t + ε²` and shifted so
/// that Φ(0) = 0 still holds; all derived quantities (Λ, Ψ, aᵢⱼ) are those of the
/// shifted function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiFamily {
    pub kind: PhiKind,
    pub epsilon: Option<f64>,
}

impl PhiFamily {
    pub fn linear() -> Self {
        Self {
            kind: PhiKind::Linear,
            epsilon: None,
        }
    }

    /// p-Laplacian family. For 1 < p < 2 the default regularization is switched on.
    pub fn p_laplacian(p: f64) -> Self {
        let epsilon = (p < 2.0).then_some(DEFAULT_EPSILON);
        Self {
            kind: PhiKind::PLaplacian { p },
            epsilon,
        }
    }

    pub fn mean_curvature() -> Self {
        Self {
            kind: PhiKind::MeanCurvature,
            epsilon: None,
        }
    }

    pub fn custom_table(t: Vec<f64>, phi: Vec<f64>) -> Result<Self, NonlinearityError> {
        if t.first().copied() != Some(0.0) || phi.first().map(|v| v.abs()) != Some(0.0) {
            return Err(NonlinearityError::Config(
                "custom table must start at t = 0 with Φ(0) = 0".into(),
            ));
        }
        let table = Pchip::new(t, phi)
            .ok_or_else(|| NonlinearityError::Config("custom table knots must increase".into()))?;
        Ok(Self {
            kind: PhiKind::CustomTable { table },
            epsilon: None,
        })
    }

    pub fn with_epsilon(mut self, epsilon: Option<f64>) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn name(&self) -> String {
        match &self.kind {
            PhiKind::Linear => "linear".into(),
            PhiKind::PLaplacian { p } => format!("p-laplacian(p={p})"),
            PhiKind::MeanCurvature => "mean-curvature".into(),
            PhiKind::CustomTable { .. } => "custom-table".into(),
        }
    }

    fn shift(&self) -> f64 {
        self.epsilon.map_or(0.0, |e| e * e)
    }

    /// Raw Φ and derivatives of the unshifted family at s ≥ 0.
    fn raw(&self, s: f64) -> Result<[f64; 4], NonlinearityError> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(NonlinearityError::Domain {
                family: self.name(),
                t: s,
            });
        }
        let v = match &self.kind {
            PhiKind::Linear => [s, 1.0, 0.0, 0.0],
            PhiKind::PLaplacian { p } => {
                let p = *p;
                let h = 0.5 * p;
                let phi = s.powf(h) / h;
                let d1 = s.powf(h - 1.0);
                let d2 = (h - 1.0) * s.powf(h - 2.0);
                let d3 = (h - 1.0) * (h - 2.0) * s.powf(h - 3.0);
                // Exact zeros where the power vanishes identically.
                let d2 = if p == 2.0 { 0.0 } else { d2 };
                let d3 = if p == 2.0 || p == 4.0 { 0.0 } else { d3 };
                [phi, d1, d2, d3]
            }
            PhiKind::MeanCurvature => {
                let q = (1.0 + s).sqrt();
                [
                    2.0 * q - 2.0,
                    1.0 / q,
                    -0.5 / (q * q * q),
                    0.75 / (q * q * q * q * q),
                ]
            }
            PhiKind::CustomTable { table } => {
                let (lo, hi) = table.domain();
                if s < lo || s > hi {
                    return Err(NonlinearityError::Domain {
                        family: self.name(),
                        t: s,
                    });
                }
                table.eval(s)
            }
        };
        Ok(v)
    }

    /// Φ(t), Φ′(t), Φ″(t), Φ‴(t).
    pub fn derivatives(&self, t: f64) -> Result<[f64; 4], NonlinearityError> {
        let shift = self.shift();
        let mut v = self.raw(t + shift)?;
        if shift > 0.0 {
            v[0] -= self.raw(shift)?[0];
        }
        Ok(v)
    }

    pub fn phi(&self, t: f64) -> Result<f64, NonlinearityError> {
        Ok(self.derivatives(t)?[0])
    }

    /// Φ′(t); errors where the family is singular (p < 2 at t = 0 without ε).
    pub fn dphi(&self, t: f64) -> Result<f64, NonlinearityError> {
        let d = self.derivatives(t)?[1];
        self.finite(d, t)
    }

    pub fn d2phi(&self, t: f64) -> Result<f64, NonlinearityError> {
        let d = self.derivatives(t)?[2];
        self.finite(d, t)
    }

    fn finite(&self, v: f64, t: f64) -> Result<f64, NonlinearityError> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(NonlinearityError::Domain {
                family: self.name(),
                t,
            })
        }
    }

    /// Λ(t) = 2tΦ″(t) + Φ′(t), the eigenvalue of aᵢⱼ along σ.
    pub fn lambda(&self, t: f64) -> Result<f64, NonlinearityError> {
        if let (PhiKind::PLaplacian { p }, None) = (&self.kind, self.epsilon) {
            if t == 0.0 && *p < 2.0 {
                return Err(NonlinearityError::Domain {
                    family: self.name(),
                    t,
                });
            }
            if t >= 0.0 {
                return Ok((p - 1.0) * t.powf(0.5 * p - 1.0));
            }
        }
        let d = self.derivatives(t)?;
        if t == 0.0 {
            return self.finite(d[1], t);
        }
        self.finite(2.0 * t * d[2] + d[1], t)
    }

    /// Ψ(t) = 2tΦ′(t) − Φ(t); Ψ′ = Λ and P = Ψ(|∇u|²) − 2F(u).
    pub fn psi(&self, t: f64) -> Result<f64, NonlinearityError> {
        if let (PhiKind::PLaplacian { p }, None) = (&self.kind, self.epsilon) {
            if t >= 0.0 {
                return Ok(2.0 * (1.0 - 1.0 / p) * t.powf(0.5 * p));
            }
        }
        let d = self.derivatives(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        self.finite(2.0 * t * d[1] - d[0], t)
    }

    /// Supremum of Ψ over [0, ∞) when it is finite (mean curvature: 2).
    pub fn psi_sup(&self) -> f64 {
        match &self.kind {
            PhiKind::MeanCurvature => 2.0,
            PhiKind::CustomTable { table } => {
                let (_, hi) = table.domain();
                self.psi(hi).unwrap_or(f64::INFINITY)
            }
            _ => f64::INFINITY,
        }
    }

    /// Ψ⁻¹(y) for y ≥ 0 by safeguarded Newton on a bracket, using Ψ′ = Λ > 0.
    pub fn psi_inverse(&self, y: f64) -> Result<f64, NonlinearityError> {
        if !(y >= 0.0) || y >= self.psi_sup() {
            return Err(NonlinearityError::OutOfRange {
                family: self.name(),
                value: y,
                sup: self.psi_sup(),
            });
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        if let (PhiKind::Linear, None) = (&self.kind, self.epsilon) {
            return Ok(y);
        }
        if let (PhiKind::PLaplacian { p }, None) = (&self.kind, self.epsilon) {
            return Ok((y / (2.0 * (1.0 - 1.0 / p))).powf(2.0 / p));
        }
        if let (PhiKind::MeanCurvature, None) = (&self.kind, self.epsilon) {
            let q = 2.0 / (2.0 - y);
            return Ok(q * q - 1.0);
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        let t_max = match &self.kind {
            PhiKind::CustomTable { table } => table.domain().1,
            _ => f64::MAX,
        };
        while self.psi(hi)? < y {
            lo = hi;
            hi = (hi * 2.0).min(t_max);
            if hi == t_max && self.psi(hi)? < y {
                return Err(NonlinearityError::OutOfRange {
                    family: self.name(),
                    value: y,
                    sup: self.psi(hi)?,
                });
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let r = self.psi(t)? - y;
            if r.abs() <= 1e-14 * y.max(1.0) {
                return Ok(t);
            }
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let l = self.lambda(t)?;
            let step = t - r / l;
            t = if step > lo && step < hi {
                step
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok(t);
            }
        }
        Ok(t)
    }

    /// aᵢⱼ(σ) = 2Φ″(|σ|²)σᵢσⱼ + Φ′(|σ|²)δᵢⱼ, packed row-major dim×dim.
    pub fn a_tensor(&self, sigma: &[f64]) -> Result<Vec<f64>, NonlinearityError> {
        let n = sigma.len();
        let t: f64 = sigma.iter().map(|s| s * s).sum();
        let d = self.derivatives(t)?;
        let d1 = self.finite(d[1], t)?;
        let c = if t == 0.0 { 0.0 } else { self.finite(2.0 * d[2], t)? };
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = c * sigma[i] * sigma[j] + if i == j { d1 } else { 0.0 };
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        Ok(a)
    }
}
