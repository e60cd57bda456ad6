//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{MetricGrid, MetricKind};
use crate::nonlinearity::{PhiFamily, Potential};
use crate::solver::{InitialGuess, SolveConfig};
use crate::verifier::CLAIM_FLOOR;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Run directory, relative to the output root unless absolute.
    pub output: Option<PathBuf>,
    pub grid: Option<GridSpec>,
    pub family: FamilySpec,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub solve: SolveConfig,
    /// A 1D solve along `axis` whose profile seeds the main solve.
    pub profile: Option<ProfileSpec>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    pub study: Option<StudySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Catalog tag: flat-torus, conformal-torus or sphere-latlong.
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    pub shape: Option<Vec<usize>>,
    pub lengths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    /// linear, p-laplacian, mean-curvature or custom-table.
    pub kind: String,
    pub p: Option<f64>,
    pub epsilon: Option<f64>,
    pub t: Option<Vec<f64>>,
    pub phi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// allen-cahn, quadratic, cosh, zero or polynomial.
    pub kind: String,
    pub scale: Option<f64>,
    pub center: Option<f64>,
    pub coefficients: Option<Vec<f64>>,
    #[serde(default)]
    pub nonneg: bool,
    #[serde(default)]
    pub convex: bool,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    #[serde(default)]
    pub axis: usize,
    #[serde(default)]
    pub solve: SolveConfig,
}

/// Checks run in declared order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CheckSpec {
    GradientBound {
        c_tol: Option<f64>,
    },
    /// std(P)/|mean P| ≤ tol.
    PConstancy {
        #[serde(default = "p_constancy_tol")]
        tol: f64,
    },
    /// mean P against 2e_L, with e_L the closed-orbit energy of period L₀.
    PeriodEnergy {
        bracket: [f64; 2],
        #[serde(default = "period_step")]
        step: f64,
        #[serde(default = "period_energy_tol")]
        tol: f64,
    },
    /// Every row against the 1D profile solve.
    RowMatch {
        #[serde(default = "row_match_tol")]
        tol: f64,
    },
    Lemma21Inequality {
        c_tol: Option<f64>,
    },
    Lemma31 {
        c0: Option<f64>,
        c_tol: Option<f64>,
    },
    Liouville {
        starts: usize,
        amplitude: f64,
    },
    ZeroPotential {
        #[serde(default = "f_tol")]
        f_tol: f64,
    },
    EqualityLocus {
        c_tol: Option<f64>,
    },
    Harnack {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "two")]
        p: f64,
        /// Also evaluate on the grid refined once.
        #[serde(default)]
        refine: bool,
    },
    Abp {
        #[serde(default)]
        axis: usize,
        center: f64,
        half_width: f64,
        radius: f64,
        theta: f64,
        #[serde(default = "boundary_tol")]
        boundary_tol: f64,
        #[serde(default)]
        refine: bool,
    },
    /// Equality-reduction profile: first-integral drift, optionally against tanh(s/√2).
    /// `case` selects an equality-catalog entry instead of the configured problem.
    FirstIntegral {
        case: Option<String>,
        #[serde(default)]
        phi0: f64,
        span: Option<[f64; 2]>,
        step: f64,
        #[serde(default = "drift_tol")]
        drift_tol: f64,
        #[serde(default)]
        tanh_reference: bool,
        #[serde(default = "tanh_tol")]
        tanh_tol: f64,
    },
    /// Q-transform of every equality profile in the catalog.
    QTransform {
        step: f64,
        #[serde(default = "grad_tol")]
        grad_tol: f64,
        #[serde(default = "lap_tol")]
        lap_tol: f64,
    },
}

fn p_constancy_tol() -> f64 {
    1e-5
}
fn period_step() -> f64 {
    crate::ode::PERIOD_STEP
}
fn period_energy_tol() -> f64 {
    1e-4
}
fn row_match_tol() -> f64 {
    1e-8
}
fn f_tol() -> f64 {
    1e-8
}
fn two() -> f64 {
    2.0
}
fn boundary_tol() -> f64 {
    1e-6
}
fn drift_tol() -> f64 {
    1e-10
}
fn tanh_tol() -> f64 {
    1e-8
}
fn grad_tol() -> f64 {
    1e-8
}
fn lap_tol() -> f64 {
    1e-6
}

impl CheckSpec {
    pub fn label(&self) -> &'static str {
        match self {
            CheckSpec::GradientBound { .. } => "gradient-bound",
            CheckSpec::PConstancy { .. } => "p-constancy",
            CheckSpec::PeriodEnergy { .. } => "period-energy",
            CheckSpec::RowMatch { .. } => "row-match",
            CheckSpec::Lemma21Inequality { .. } => "lemma21-inequality",
            CheckSpec::Lemma31 { .. } => "lemma31",
            CheckSpec::Liouville { .. } => "liouville",
            CheckSpec::ZeroPotential { .. } => "zero-potential",
            CheckSpec::EqualityLocus { .. } => "equality-locus",
            CheckSpec::Harnack { .. } => "harnack",
            CheckSpec::Abp { .. } => "abp",
            CheckSpec::FirstIntegral { .. } => "first-integral",
            CheckSpec::QTransform { .. } => "q-transform",
        }
    }

    /// ODE-level checks need no grid or solve.
    pub fn is_ode(&self) -> bool {
        matches!(self, CheckSpec::FirstIntegral { .. } | CheckSpec::QTransform { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    /// Claim identity discrepancy on an analytic field.
    Claim,
    /// Covariant gradient against the exact gradient of an analytic field.
    Gradient,
    /// std(P)/|mean P| of re-solved problems.
    PVariation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalyticField {
    /// sin(2πx/L₀)cos(2πy/L₁) + 2.
    Trig,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub kind: StudyKind,
    #[serde(default = "trig")]
    pub field: AnalyticField,
    #[serde(default = "claim_floor")]
    pub floor: f64,
    pub levels: Option<usize>,
    #[serde(default = "node_cap")]
    pub node_cap: usize,
}

fn trig() -> AnalyticField {
    AnalyticField::Trig
}
fn claim_floor() -> f64 {
    CLAIM_FLOOR
}
fn node_cap() -> usize {
    1 << 24
}

fn field_err(field: &str, msg: impl Into<String>) -> HarnessError {
    HarnessError::Validation {
        field: field.into(),
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config and resolves file paths in initial guesses against its directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for solve in std::iter::once(&mut cfg.solve).chain(cfg.profile.as_mut().map(|p| &mut p.solve)) {
            match &mut solve.initial_guess {
                InitialGuess::FieldFile { path } | InitialGuess::ProfileExtension { path, .. } => {
                    if path.is_relative() {
                        *path = base.join(&*path);
                    }
                }
                _ => {}
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.build_family()?;
        self.build_potential()?;
        let needs_grid = self.checks.iter().any(|c| !c.is_ode()) || self.study.is_some();
        if let Some(g) = &self.grid {
            g.validate()?;
        } else if needs_grid {
            return Err(field_err("grid", "section missing"));
        }
        self.solve
            .validate()
            .map_err(|e| field_err("solve", e.to_string()))?;
        if let Some(p) = &self.profile {
            p.solve
                .validate()
                .map_err(|e| field_err("profile.solve", e.to_string()))?;
            let dim = self.grid.as_ref().and_then(|g| g.shape.as_ref()).map_or(0, |s| s.len());
            if p.axis >= dim {
                return Err(field_err("profile.axis", format!("axis {} outside a {dim}-dimensional grid", p.axis)));
            }
        }
        for (i, c) in self.checks.iter().enumerate() {
            let at = |f: &str| format!("checks[{i}].{f}");
            match c {
                CheckSpec::RowMatch { .. } if self.profile.is_none() => {
                    return Err(field_err(&at("kind"), "row-match needs a [profile] section"));
                }
                CheckSpec::Liouville { starts, .. } if *starts == 0 => {
                    return Err(field_err(&at("starts"), "must be >= 1"));
                }
                CheckSpec::Harnack { radius, .. } | CheckSpec::Abp { radius, .. } if !(*radius > 0.0) => {
                    return Err(field_err(&at("radius"), "must be > 0"));
                }
                CheckSpec::FirstIntegral { step, .. } | CheckSpec::QTransform { step, .. } if !(*step > 0.0) => {
                    return Err(field_err(&at("step"), "must be > 0"));
                }
                CheckSpec::FirstIntegral { case: None, span: None, .. } => {
                    return Err(field_err(&at("span"), "required unless a catalog case is named"));
                }
                CheckSpec::FirstIntegral { case: Some(name), .. }
                    if !crate::ode::equality_catalog().iter().any(|c| c.name == name) =>
                {
                    return Err(field_err(&at("case"), format!("unknown equality case '{name}'")));
                }
                _ => {}
            }
        }
        if let Some(s) = &self.study {
            if s.levels.is_some_and(|l| l < 3) {
                return Err(field_err("study.levels", "a study needs at least 3 levels"));
            }
        }
        Ok(())
    }

    pub fn build_family(&self) -> Result<PhiFamily, HarnessError> {
        let f = &self.family;
        let fam = match f.kind.as_str() {
            "linear" => PhiFamily::linear(),
            "mean-curvature" => PhiFamily::mean_curvature(),
            "p-laplacian" => {
                let p = f.p.ok_or_else(|| field_err("family.p", "required for p-laplacian"))?;
                if !(p > 1.0) {
                    return Err(field_err("family.p", format!("must be > 1, got {p}")));
                }
                PhiFamily::p_laplacian(p)
            }
            "custom-table" => {
                let (Some(t), Some(phi)) = (&f.t, &f.phi) else {
                    return Err(field_err("family.t", "custom-table needs t and phi arrays"));
                };
                PhiFamily::custom_table(t.clone(), phi.clone()).map_err(|e| field_err("family.t", e.to_string()))?
            }
            other => return Err(field_err("family.kind", format!("unknown family '{other}'"))),
        };
        Ok(match f.epsilon {
            Some(e) if !(e > 0.0) => return Err(field_err("family.epsilon", "must be > 0")),
            Some(e) => fam.with_epsilon(Some(e)),
            None => fam,
        })
    }

    pub fn build_potential(&self) -> Result<Potential, HarnessError> {
        let p = &self.potential;
        let pot = match p.kind.as_str() {
            "allen-cahn" => Potential::allen_cahn(p.scale.unwrap_or(1.0)),
            "quadratic" => Potential::quadratic(p.center.unwrap_or(0.0)),
            "cosh" => Potential::cosh(),
            "zero" => Potential::zero(),
            "polynomial" => {
                let c = p
                    .coefficients
                    .clone()
                    .ok_or_else(|| field_err("potential.coefficients", "required for polynomial"))?;
                Potential::polynomial(c, p.nonneg, p.convex)
            }
            other => return Err(field_err("potential.kind", format!("unknown potential '{other}'"))),
        };
        Ok(if p.amplitude == 1.0 { pot } else { pot.scaled(p.amplitude) })
    }

    pub fn build_grid(&self) -> Result<Arc<MetricGrid>, HarnessError> {
        let g = self.grid.as_ref().ok_or_else(|| field_err("grid", "section missing"))?;
        g.build(None)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let shape = self.shape.as_ref().ok_or_else(|| field_err("grid.shape", "missing"))?;
        let lengths = self.lengths.as_ref().ok_or_else(|| field_err("grid.lengths", "missing"))?;
        if shape.len() != lengths.len() {
            return Err(field_err(
                "grid.shape",
                format!("{} axes but lengths has {}", shape.len(), lengths.len()),
            ));
        }
        MetricKind::from_tag(&self.kind, &self.params).map_err(|e| field_err("grid.kind", e.to_string()))?;
        Ok(())
    }

    /// Builds the grid, with every axis multiplied by `refine` when given.
    pub fn build(&self, refine: Option<usize>) -> Result<Arc<MetricGrid>, HarnessError> {
        self.validate()?;
        let kind = MetricKind::from_tag(&self.kind, &self.params).map_err(|e| field_err("grid.kind", e.to_string()))?;
        let f = refine.unwrap_or(1);
        let shape: Vec<usize> = self.shape.as_ref().unwrap().iter().map(|n| n * f).collect();
        MetricGrid::build(kind, &shape, self.lengths.as_ref().unwrap()).map_err(|e| field_err("grid", e.to_string()))
    }

    pub fn nodes(&self) -> usize {
        self.shape.as_ref().map_or(0, |s| s.iter().product())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = r#"
[grid]
kind = "flat-torus"
shape = [16]
lengths = [10.0]

[family]
kind = "linear"

[potential]
kind = "allen-cahn"

[[checks]]
kind = "gradient-bound"
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::parse(MIN).unwrap();
        assert_eq!(c.solve, SolveConfig::default());
        assert_eq!(c.checks, vec![CheckSpec::GradientBound { c_tol: None }]);
        assert_eq!(c.build_grid().unwrap().shape, vec![16]);
    }

    #[test]
    fn missing_shape_is_named() {
        let e = ExperimentConfig::parse(&MIN.replace("shape = [16]\n", "")).unwrap_err();
        assert!(e.to_string().contains("shape"), "{e}");
    }

    #[test]
    fn unknown_catalog_names_are_rejected() {
        let e = ExperimentConfig::parse(&MIN.replace("\"allen-cahn\"", "\"sextic\"")).unwrap_err();
        assert!(e.to_string().contains("potential.kind"), "{e}");
        let e = ExperimentConfig::parse(&MIN.replace("\"flat-torus\"", "\"klein\"")).unwrap_err();
        assert!(e.to_string().contains("grid.kind"), "{e}");
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = ExperimentConfig::parse(MIN).unwrap();
        let b = ExperimentConfig::parse(&format!("# comment\n{MIN}")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::parse(&format!("seed = 3\n{MIN}")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
