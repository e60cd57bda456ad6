//! Discrete checks of the P-function bound, its elliptic inequalities, the
//! Liouville statements and the Harnack/ABP diagnostics.

mod diagnostics;
mod lemmas;
mod pfunction;
mod theorems;

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::geometry::{central_diff, component_is_odd, covariant_hessian, sym_index, sym_len, GeometryError, MetricGrid, ScalarField};
use crate::nonlinearity::Potential;
use crate::solver::SolverError;

pub use diagnostics::{abp_diagnostic, harnack_diagnostic, nearest_node, strip_mask};
pub use lemmas::{
    claim_discrepancy, claim_fields, lemma21_claim_residual, lemma21_inequality_residual, lemma31_residual,
    lemma31_terms, tensor_divergence, ClaimLevel, Lemma31Terms,
};
pub use pfunction::{laplacian_decomposition, p_function, PFieldBundle};
pub use theorems::{
    check_gradient_bound, equality_locus, liouville_experiment, zero_potential_experiment,
    EqualityLocus, LiouvilleOutcome,
};

/// Relative gradient floor: nodes with |∇u|² ≤ this·max|∇u|² are skipped.
pub const GRADIENT_FLOOR: f64 = 1e-10;
/// Absolute gradient floor, so an exactly constant field has no regular nodes.
pub const GRADIENT_FLOOR_ABS: f64 = 1e-24;
/// Tolerance of the sampled Ricci ≥ 0 and F-sign hypotheses.
pub const HYPOTHESIS_TOL: f64 = 1e-10;
/// Default relative gradient floor of the claim identity.
pub const CLAIM_FLOOR: f64 = 0.05;
/// Claim identity discrepancy treated as exact.
pub const CLAIM_EXACT: f64 = 1e-12;
/// Accepted observed-order window.
pub const ORDER_RANGE: (f64, f64) = (1.7, 2.3);

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("Λ = {lambda} ≤ 0 at node {node} (|∇u|² = {t})")]
    Lambda { node: usize, t: f64, lambda: f64 },
    #[error("{0}")]
    Family(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("domain violates the measure property at node {node} (index {index:?}): |B_R \\ Ω|/|B_R| = {fraction} < θ = {theta}")]
    Theta {
        node: usize,
        index: Vec<usize>,
        fraction: f64,
        theta: f64,
    },
    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, VerifyError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremTag {
    #[serde(rename = "thm1.1")]
    GradientBound,
    #[serde(rename = "thm1.2")]
    Liouville,
    #[serde(rename = "thm1.3")]
    ZeroPotential,
    #[serde(rename = "lem2.1")]
    Lemma21,
    #[serde(rename = "lem3.1")]
    Lemma31,
    #[serde(rename = "thm1.4-diag")]
    Harnack,
    #[serde(rename = "thm1.5-diag")]
    Abp,
    #[serde(rename = "thm5.1")]
    Equality,
}

impl TheoremTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremTag::GradientBound => "thm1.1",
            TheoremTag::Liouville => "thm1.2",
            TheoremTag::ZeroPotential => "thm1.3",
            TheoremTag::Lemma21 => "lem2.1",
            TheoremTag::Lemma31 => "lem3.1",
            TheoremTag::Harnack => "thm1.4-diag",
            TheoremTag::Abp => "thm1.5-diag",
            TheoremTag::Equality => "thm5.1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// Hypotheses unmet; the numbers are informational.
    Diagnostic,
    /// No threshold exists; the report is a measurement.
    Measurement,
}

/// Outcome of one check. `status` is a function of `values` and `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub theorem: TheoremTag,
    pub check: String,
    pub status: Status,
    pub hypotheses_met: bool,
    #[serde(with = "lenient_map")]
    pub values: BTreeMap<String, f64>,
    pub tolerance: f64,
    /// Digest of the SolveReport the field came from.
    pub provenance: Option<String>,
    pub notes: Vec<String>,
}

impl VerifyReport {
    pub fn new(theorem: TheoremTag, check: &str) -> Self {
        Self {
            theorem,
            check: check.to_string(),
            status: Status::Measurement,
            hypotheses_met: true,
            values: BTreeMap::new(),
            tolerance: 0.0,
            provenance: None,
            notes: Vec::new(),
        }
    }

    pub fn value(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub(crate) fn set(&mut self, key: &str, v: f64) -> &mut Self {
        self.values.insert(key.to_string(), v);
        self
    }

    pub(crate) fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Pass or Fail when the hypotheses hold, Diagnostic otherwise.
    pub(crate) fn decide(&mut self, pass: bool) {
        self.status = match (self.hypotheses_met, pass) {
            (false, _) => Status::Diagnostic,
            (true, true) => Status::Pass,
            (true, false) => Status::Fail,
        };
    }

    pub fn with_provenance(mut self, hash: impl Into<String>) -> Self {
        self.provenance = Some(hash.into());
        self
    }

    /// True unless the check failed outright.
    pub fn ok(&self) -> bool {
        self.status != Status::Fail
    }
}

/// Non-finite values serialize as the strings "inf", "-inf" and "nan".
pub(crate) mod lenient_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Num {
        F(f64),
        S(String),
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let out: BTreeMap<&String, Num> = m
            .iter()
            .map(|(k, &v)| {
                let n = if v.is_finite() {
                    Num::F(v)
                } else if v.is_nan() {
                    Num::S("nan".into())
                } else if v > 0.0 {
                    Num::S("inf".into())
                } else {
                    Num::S("-inf".into())
                };
                (k, n)
            })
            .collect();
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let m = BTreeMap::<String, Num>::deserialize(d)?;
        m.into_iter()
            .map(|(k, n)| {
                let v = match n {
                    Num::F(v) => v,
                    Num::S(s) => match s.as_str() {
                        "inf" => f64::INFINITY,
                        "-inf" => f64::NEG_INFINITY,
                        "nan" => f64::NAN,
                        other => return Err(serde::de::Error::custom(format!("bad number {other:?}"))),
                    },
                };
                Ok((k, v))
            })
            .collect()
    }
}

/// Grid tolerance tol_grid = C_tol·h².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridTolerance {
    pub h: f64,
    pub c_tol: f64,
    pub tol: f64,
}

impl GridTolerance {
    /// `c_tol` defaults to 10·max|∂³u|.
    pub fn for_field(u: &ScalarField, c_tol: Option<f64>) -> Self {
        let c_tol = c_tol.unwrap_or_else(|| 10.0 * third_derivative_estimate(u));
        let h = u.grid.h();
        Self {
            h,
            c_tol,
            tol: c_tol * h * h,
        }
    }

    pub(crate) fn record(&self, r: &mut VerifyReport) {
        r.tolerance = self.tol;
        r.set("tol_grid", self.tol).set("c_tol", self.c_tol).set("h", self.h);
    }
}

/// max over nodes, axes and components of |∂ₖ(∇ᵢ∇ⱼu)| by central differences.
pub fn third_derivative_estimate(u: &ScalarField) -> f64 {
    let grid = &u.grid;
    let d = grid.dim;
    let s = sym_len(d);
    let hess = covariant_hessian(u);
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            let c = sym_index(d, i, j);
            let get = |m: usize| hess.values[m * s + c];
            let odd = component_is_odd(grid, &[i, j]);
            for n in 0..grid.len() {
                for k in 0..d {
                    worst = worst.max(central_diff(grid, &get, n, k, odd).abs());
                }
            }
        }
    }
    worst
}

/// Smallest eigenvalue of Ric relative to g over all nodes (0 in one dimension).
pub fn ricci_min_eigenvalue(grid: &MetricGrid) -> f64 {
    let d = grid.dim;
    if d == 1 {
        return 0.0;
    }
    let mut worst = f64::INFINITY;
    for n in 0..grid.len() {
        let g = grid.g_at(n);
        let r = grid.ricci_at(n);
        let gm = DMatrix::from_fn(d, d, |i, j| g[sym_index(d, i, j)]);
        let rm = DMatrix::from_fn(d, d, |i, j| r[sym_index(d, i, j)]);
        let Some(ch) = Cholesky::new(gm) else {
            return f64::NAN;
        };
        let l = ch.l();
        let li = l.clone().try_inverse().expect("Cholesky factor is invertible");
        let m = &li * rm * li.transpose();
        let m = (&m + m.transpose()) * 0.5;
        let e = m.symmetric_eigenvalues().min();
        worst = worst.min(e);
    }
    worst
}

/// max(|R(v,v)|/|v|²) over nodes: zero iff the Ricci tensor vanishes.
pub fn ricci_max_abs_eigenvalue(grid: &MetricGrid) -> f64 {
    let d = grid.dim;
    if d == 1 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for n in 0..grid.len() {
        let g = grid.g_at(n);
        let r = grid.ricci_at(n);
        let gm = DMatrix::from_fn(d, d, |i, j| g[sym_index(d, i, j)]);
        let rm = DMatrix::from_fn(d, d, |i, j| r[sym_index(d, i, j)]);
        let Some(ch) = Cholesky::new(gm) else {
            return f64::NAN;
        };
        let li = ch.l().try_inverse().expect("Cholesky factor is invertible");
        let m = &li * rm * li.transpose();
        let m = (&m + m.transpose()) * 0.5;
        worst = worst.max(m.symmetric_eigenvalues().amax());
    }
    worst
}

/// Range of a field widened by `pad`, for sampled potential hypotheses.
pub(crate) fn sample_range(u: &ScalarField, pad: f64) -> (f64, f64) {
    (u.min() - pad, u.max() + pad)
}

pub(crate) const HYPOTHESIS_SAMPLES: usize = 2001;

pub(crate) fn potential_nonneg_on(pot: &Potential, lo: f64, hi: f64) -> bool {
    pot.sampled_nonneg(lo, hi, HYPOTHESIS_SAMPLES, HYPOTHESIS_TOL)
}

/// Nodes above the gradient floor.
pub(crate) fn regular_nodes(t: &[f64]) -> Vec<bool> {
    let max_t = t.iter().cloned().fold(0.0, f64::max);
    let floor = (GRADIENT_FLOOR * max_t).max(GRADIENT_FLOOR_ABS);
    t.iter().map(|&x| x > floor).collect()
}

pub(crate) fn mean_and_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lenient_values_round_trip() {
        let mut r = VerifyReport::new(TheoremTag::Harnack, "x");
        r.set("a", 1.5).set("b", f64::INFINITY).set("c", f64::NEG_INFINITY);
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"thm1.4-diag\"") && s.contains("\"inf\""));
        let back: VerifyReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn status_follows_hypotheses() {
        let mut r = VerifyReport::new(TheoremTag::GradientBound, "x");
        r.decide(false);
        assert_eq!(r.status, Status::Fail);
        r.hypotheses_met = false;
        r.decide(false);
        assert_eq!(r.status, Status::Diagnostic);
        assert!(r.ok());
    }
}
