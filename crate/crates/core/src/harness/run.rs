//! One experiment run: solve, checks, dumps and the manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dump::FieldDump;
use crate::geometry::{MetricGrid, MetricKind, ScalarField};
use crate::nonlinearity::{PhiFamily, Potential};
use crate::ode::{energy_for_period, equality_catalog, equality_profile, q_transform};
use crate::solver::{extend_profile, newton_solve, InitialGuess, SolveConfig, SolveReport, JACOBIAN_FLOOR};
use crate::verifier::{
    self, abp_diagnostic, check_gradient_bound, equality_locus, harnack_diagnostic, lemma21_inequality_residual,
    lemma31_residual, liouville_experiment, p_function, strip_mask, zero_potential_experiment, GridTolerance,
    Status, TheoremTag, VerifyReport,
};

use super::config::{CheckSpec, ExperimentConfig};
use super::study::{convergence_study, StudyTable};
use super::HarnessError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SOLUTION_FILE: &str = "solution.txt";
pub const P_FILE: &str = "p.txt";
pub const PROFILE_FILE: &str = "profile.txt";
pub const STUDY_FILE: &str = "study.txt";

/// Relative change of C_emp accepted under one dyadic refinement.
pub const REFINEMENT_TOL: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Solve and dump only.
    Solve,
    /// Solve and run every check.
    Verify,
    /// ODE-level checks only.
    Ode,
    /// Convergence study.
    Study,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub converged: bool,
    pub final_residual_maxnorm: f64,
    pub iterations: usize,
    pub continuation_steps: usize,
    pub jacobian_condition_estimate: f64,
    pub jacobian_checks_pass: bool,
    pub residual_history: Vec<f64>,
    pub pin: String,
    pub message: String,
    pub hash: String,
}

impl SolveSummary {
    fn of(r: &SolveReport) -> Self {
        Self {
            converged: r.converged,
            final_residual_maxnorm: r.final_residual_maxnorm,
            iterations: r.iterations,
            continuation_steps: r.continuation_steps,
            jacobian_condition_estimate: r.jacobian_condition_estimate,
            jacobian_checks_pass: r.jacobian_checks_pass,
            residual_history: r.residual_history(),
            pin: r.pin.clone(),
            message: r.message.clone(),
            hash: r.hash(),
        }
    }

    /// Converged, and every directional Jacobian check passed when requested.
    pub fn ok(&self) -> bool {
        self.converged && self.jacobian_checks_pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub label: String,
    pub report: Option<VerifyReport>,
    pub error: Option<String>,
}

impl CheckOutcome {
    pub fn ok(&self) -> bool {
        self.error.is_none() && self.report.as_ref().is_some_and(|r| r.ok())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub mode: Mode,
    pub seed: u64,
    /// The parsed config with every default filled in.
    pub config: ExperimentConfig,
    /// Every tolerance and floor in effect.
    #[serde(with = "crate::verifier::lenient_map")]
    pub tolerances: BTreeMap<String, f64>,
    pub profile_solve: Option<SolveSummary>,
    pub solve: Option<SolveSummary>,
    pub checks: Vec<CheckOutcome>,
    pub study: Option<StudyTable>,
    pub files: Vec<FileEntry>,
    /// Wall seconds per stage; the only fields that vary between identical runs.
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    /// True when every solve converged and no check failed or errored.
    pub fn ok(&self) -> bool {
        self.profile_solve.as_ref().is_none_or(|s| s.ok())
            && self.solve.as_ref().is_none_or(|s| s.ok())
            && self.checks.iter().all(|c| c.ok())
            && self.study.as_ref().is_none_or(|s| s.status != Status::Fail)
    }

    /// The manifest with wall times cleared, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        Self {
            timings: BTreeMap::new(),
            ..self.clone()
        }
    }

    pub fn check(&self, label: &str) -> Option<&VerifyReport> {
        self.checks.iter().find(|c| c.label == label).and_then(|c| c.report.as_ref())
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))
    }
}

/// Output root: `QLAB_OUTPUT_ROOT`, else `out` under the working directory.
pub fn output_root() -> PathBuf {
    std::env::var_os("QLAB_OUTPUT_ROOT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
}

/// Run directory of a config loaded from `path`.
pub fn run_dir(cfg: &ExperimentConfig, path: &Path) -> PathBuf {
    let rel = cfg.output.clone().unwrap_or_else(|| {
        PathBuf::from(
            cfg.name
                .clone()
                .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
                .unwrap_or_else(|| "run".into()),
        )
    });
    if rel.is_absolute() {
        rel
    } else {
        output_root().join(rel)
    }
}

/// Loads `path`, solves, runs the checks in declared order and writes the run directory.
pub fn run(path: &Path) -> Result<RunManifest, HarnessError> {
    let cfg = ExperimentConfig::load(path)?;
    execute(&cfg, Mode::Verify, &run_dir(&cfg, path), None)
}

fn io_err(path: &Path, e: impl ToString) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

pub(crate) struct Problem {
    pub phi: PhiFamily,
    pub pot: Potential,
}

/// A solved field, with the 1D profile it was seeded from.
pub(crate) struct Solved {
    pub report: SolveReport,
    pub profile: Option<SolveReport>,
}

pub(crate) fn solve_pipeline(cfg: &ExperimentConfig, pr: &Problem, grid: &Arc<MetricGrid>) -> Result<Solved, HarnessError> {
    let mut main = cfg.solve.clone();
    let mut profile = None;
    if let Some(p) = &cfg.profile {
        let line = MetricGrid::build(MetricKind::FlatTorus, &[grid.shape[p.axis]], &[grid.lengths[p.axis]])?;
        let rep = newton_solve(&p.solve, &pr.phi, &pr.pot, &line)?;
        let s: Vec<f64> = (0..line.len()).map(|n| line.coord(n, 0)).collect();
        main.initial_guess = InitialGuess::Values {
            values: extend_profile(grid, p.axis, &s, &rep.solution.values)?,
        };
        profile = Some(rep);
    }
    let report = newton_solve(&main, &pr.phi, &pr.pot, grid)?;
    Ok(Solved { report, profile })
}

fn solution_dumps(u: &ScalarField, pr: &Problem, seed: u64) -> Vec<(&'static str, FieldDump)> {
    let g = &u.grid;
    let p = p_function(u, &pr.phi, &pr.pot).ok().map(|b| b.p.values);
    let coords: Vec<String> = match g.dim {
        1 => vec!["s".into()],
        2 => vec!["x".into(), "y".into()],
        _ => vec!["x".into(), "y".into(), "z".into()],
    };
    let base = |name: &str, cols: Vec<String>, rows: Vec<Vec<f64>>| FieldDump {
        name: name.into(),
        shape: g.shape.clone(),
        lengths: g.lengths.clone(),
        grid_hash: g.hash.clone(),
        seed: Some(seed),
        columns: cols,
        rows,
    };
    let row = |n: usize, v: &[f64]| -> Vec<f64> {
        let mut r = g.coords(n);
        r.extend_from_slice(v);
        r
    };
    let mut out = Vec::new();
    if g.dim == 1 {
        let mut cols = coords.clone();
        cols.push("u".into());
        let with_p = p.is_some();
        if with_p {
            cols.push("P".into());
        }
        let rows = (0..g.len())
            .map(|n| match &p {
                Some(p) => row(n, &[u.values[n], p[n]]),
                None => row(n, &[u.values[n]]),
            })
            .collect();
        out.push((SOLUTION_FILE, base("u", cols, rows)));
    } else {
        let mut cols = coords.clone();
        cols.push("u".into());
        out.push((SOLUTION_FILE, base("u", cols, (0..g.len()).map(|n| row(n, &[u.values[n]])).collect())));
        if let Some(p) = &p {
            let mut cols = coords;
            cols.push("P".into());
            out.push((P_FILE, base("P", cols, (0..g.len()).map(|n| row(n, &[p[n]])).collect())));
        }
    }
    out
}

/// Runs `cfg` in `mode`, writing dumps and the manifest into `dir`.
pub fn execute(
    cfg: &ExperimentConfig,
    mode: Mode,
    dir: &Path,
    levels: Option<usize>,
) -> Result<RunManifest, HarnessError> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let pr = Problem {
        phi: cfg.build_family()?,
        pot: cfg.build_potential()?,
    };
    let mut timings = BTreeMap::new();
    let mut written: Vec<String> = Vec::new();
    let mut solved = None;
    let mut solve_summary = None;
    let mut profile_summary = None;
    let mut checks = Vec::new();
    let mut study = None;

    let wants_solve = match mode {
        Mode::Solve => true,
        Mode::Verify => cfg.checks.iter().any(|c| !c.is_ode() && !matches!(c, CheckSpec::Liouville { .. })),
        Mode::Ode | Mode::Study => false,
    };
    if wants_solve {
        let grid = cfg.build_grid()?;
        let t0 = Instant::now();
        let s = solve_pipeline(cfg, &pr, &grid)?;
        timings.insert("solve".into(), t0.elapsed().as_secs_f64());
        solve_summary = Some(SolveSummary::of(&s.report));
        if let Some(p) = &s.profile {
            profile_summary = Some(SolveSummary::of(p));
            let g = &p.solution.grid;
            let d = FieldDump {
                name: "profile".into(),
                shape: g.shape.clone(),
                lengths: g.lengths.clone(),
                grid_hash: g.hash.clone(),
                seed: Some(cfg.seed),
                columns: vec!["s".into(), "u".into()],
                rows: (0..g.len()).map(|n| vec![g.coord(n, 0), p.solution.values[n]]).collect(),
            };
            d.write(&dir.join(PROFILE_FILE))?;
            written.push(PROFILE_FILE.into());
        }
        for (name, d) in solution_dumps(&s.report.solution, &pr, cfg.seed) {
            d.write(&dir.join(name))?;
            written.push(name.into());
        }
        solved = Some(s);
    }

    if matches!(mode, Mode::Verify | Mode::Ode) {
        let mut ctx = Context {
            cfg,
            pr: &pr,
            solved: solved.as_ref(),
            refined: None,
            dir,
            written: &mut written,
        };
        for (i, spec) in cfg.checks.iter().enumerate() {
            if mode == Mode::Ode && !spec.is_ode() {
                continue;
            }
            let t0 = Instant::now();
            let res = ctx.run_check(i, spec);
            timings.insert(format!("checks[{i}].{}", spec.label()), t0.elapsed().as_secs_f64());
            checks.push(match res {
                Ok(r) => CheckOutcome {
                    label: spec.label().into(),
                    report: Some(r),
                    error: None,
                },
                Err(e) => CheckOutcome {
                    label: spec.label().into(),
                    report: None,
                    error: Some(e.to_string()),
                },
            });
        }
    }

    if mode == Mode::Study {
        let t0 = Instant::now();
        let table = convergence_study(cfg, levels)?;
        timings.insert("study".into(), t0.elapsed().as_secs_f64());
        std::fs::write(dir.join(STUDY_FILE), table.to_text()).map_err(|e| io_err(dir, e))?;
        written.push(STUDY_FILE.into());
        study = Some(table);
    }

    let mut files = Vec::new();
    for name in written {
        let path = dir.join(&name);
        let bytes = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
        files.push(FileEntry {
            name: name.clone(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    let manifest = RunManifest {
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").into(),
        mode,
        seed: cfg.seed,
        config: cfg.clone(),
        tolerances: tolerances(cfg, &checks),
        profile_solve: profile_summary,
        solve: solve_summary,
        checks,
        study,
        files,
        timings,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| HarnessError::Parse(e.to_string()))?;
    std::fs::write(&path, json).map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

fn tolerances(cfg: &ExperimentConfig, checks: &[CheckOutcome]) -> BTreeMap<String, f64> {
    let mut t = BTreeMap::new();
    let mut solve = |prefix: &str, s: &SolveConfig| {
        t.insert(format!("{prefix}.newton_tol"), s.newton_tol);
        t.insert(format!("{prefix}.min_step"), s.min_step);
        t.insert(format!("{prefix}.backtrack"), s.backtrack);
        t.insert(format!("{prefix}.jacobian_delta_0"), s.jacobian_deltas[0]);
        t.insert(format!("{prefix}.jacobian_delta_1"), s.jacobian_deltas[1]);
    };
    solve("solve", &cfg.solve);
    if let Some(p) = &cfg.profile {
        solve("profile.solve", &p.solve);
    }
    t.insert("solver.jacobian_floor".into(), JACOBIAN_FLOOR);
    t.insert("verifier.gradient_floor".into(), verifier::GRADIENT_FLOOR);
    t.insert("verifier.gradient_floor_abs".into(), verifier::GRADIENT_FLOOR_ABS);
    t.insert("verifier.hypothesis_tol".into(), verifier::HYPOTHESIS_TOL);
    t.insert("verifier.claim_floor".into(), verifier::CLAIM_FLOOR);
    t.insert("verifier.claim_exact".into(), verifier::CLAIM_EXACT);
    t.insert("verifier.order_min".into(), verifier::ORDER_RANGE.0);
    t.insert("verifier.order_max".into(), verifier::ORDER_RANGE.1);
    t.insert("harness.refinement_tol".into(), REFINEMENT_TOL);
    for (i, c) in checks.iter().enumerate() {
        if let Some(r) = &c.report {
            t.insert(format!("checks[{i}].{}.tolerance", c.label), r.tolerance);
            for key in ["tol_grid", "c_tol", "hypothesis_tol", "boundary_tol", "f_tol", "oscillation_threshold"] {
                if let Some(v) = r.value(key) {
                    t.insert(format!("checks[{i}].{}.{key}", c.label), v);
                }
            }
        }
    }
    t
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    pr: &'a Problem,
    solved: Option<&'a Solved>,
    /// Solution on the grid refined once, solved on first use.
    refined: Option<Result<ScalarField, String>>,
    dir: &'a Path,
    written: &'a mut Vec<String>,
}

impl Context<'_> {
    fn solution(&self) -> Result<(&SolveReport, &ScalarField), HarnessError> {
        let s = self.solved.ok_or_else(|| HarnessError::Check("no solution available".into()))?;
        if !s.report.converged {
            return Err(HarnessError::Check(format!("solve did not converge: {}", s.report.message)));
        }
        Ok((&s.report, &s.report.solution))
    }

    fn refined_solution(&mut self) -> Result<ScalarField, HarnessError> {
        if self.refined.is_none() {
            let grid = self.cfg.grid.as_ref().expect("validated").build(Some(2))?;
            let r = solve_pipeline(self.cfg, self.pr, &grid)
                .map_err(|e| e.to_string())
                .and_then(|s| {
                    if s.report.converged {
                        Ok(s.report.solution)
                    } else {
                        Err(format!("refined solve did not converge: {}", s.report.message))
                    }
                });
            self.refined = Some(r);
        }
        self.refined.clone().unwrap().map_err(HarnessError::Check)
    }

    fn run_check(&mut self, index: usize, spec: &CheckSpec) -> Result<VerifyReport, HarnessError> {
        let (phi, pot) = (&self.pr.phi, &self.pr.pot);
        let r = match spec {
            CheckSpec::GradientBound { c_tol } => {
                let (rep, u) = self.solution()?;
                let tol = GridTolerance::for_field(u, *c_tol);
                check_gradient_bound(u, phi, pot, &tol)?.0.with_provenance(rep.hash())
            }
            CheckSpec::PConstancy { tol } => {
                let (rep, u) = self.solution()?;
                let b = p_function(u, phi, pot)?;
                let (mean, std) = verifier::mean_and_std(&b.p.values);
                let rel = if mean != 0.0 { std / mean.abs() } else { std };
                let mut r = VerifyReport::new(TheoremTag::GradientBound, "p-constancy");
                r.tolerance = *tol;
                r.set("mean_p", mean).set("std_p", std).set("relative_std_p", rel);
                if u.grid.dim != 1 {
                    r.note("P is constant only for one-dimensional solutions");
                }
                r.decide(rel <= *tol);
                r.with_provenance(rep.hash())
            }
            CheckSpec::PeriodEnergy { bracket, step, tol } => {
                let (rep, u) = self.solution()?;
                let l = u.grid.lengths[0];
                let e = energy_for_period(phi, pot, l, (bracket[0], bracket[1]), *step)?;
                let b = p_function(u, phi, pot)?;
                let (mean, _) = verifier::mean_and_std(&b.p.values);
                let rel = (mean - 2.0 * e).abs() / (2.0 * e).abs();
                let mut r = VerifyReport::new(TheoremTag::GradientBound, "period-energy");
                r.tolerance = *tol;
                r.set("period", l)
                    .set("energy", e)
                    .set("mean_p", mean)
                    .set("relative_error", rel)
                    .set("step", *step);
                r.decide(rel <= *tol);
                r.with_provenance(rep.hash())
            }
            CheckSpec::RowMatch { tol } => {
                let (rep, u) = self.solution()?;
                let prof = self
                    .solved
                    .and_then(|s| s.profile.as_ref())
                    .ok_or_else(|| HarnessError::Check("no profile solve".into()))?;
                let axis = self.cfg.profile.as_ref().map_or(0, |p| p.axis);
                let g = &prof.solution.grid;
                let s: Vec<f64> = (0..g.len()).map(|n| g.coord(n, 0)).collect();
                let ext = extend_profile(&u.grid, axis, &s, &prof.solution.values)?;
                let dev = u.values.iter().zip(&ext).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let b = p_function(u, phi, pot)?;
                let mut r = VerifyReport::new(TheoremTag::GradientBound, "row-match");
                r.tolerance = *tol;
                r.set("max_deviation", dev).set("max_p", b.p.max());
                r.decide(dev <= *tol && b.p.max() < 0.0);
                r.with_provenance(rep.hash())
            }
            CheckSpec::Lemma21Inequality { c_tol } => {
                let (rep, u) = self.solution()?;
                let tol = GridTolerance::for_field(u, *c_tol);
                lemma21_inequality_residual(u, phi, pot, &tol)?.0.with_provenance(rep.hash())
            }
            CheckSpec::Lemma31 { c0, c_tol } => {
                let (rep, u) = self.solution()?;
                let tol = GridTolerance::for_field(u, *c_tol);
                lemma31_residual(u, phi, pot, *c0, &tol)?.0.with_provenance(rep.hash())
            }
            CheckSpec::Liouville { starts, amplitude } => {
                let grid = self.cfg.build_grid()?;
                liouville_experiment(phi, pot, &grid, &self.cfg.solve, *starts, *amplitude, self.cfg.seed)?.report
            }
            CheckSpec::ZeroPotential { f_tol } => {
                let (rep, u) = self.solution()?;
                zero_potential_experiment(u, pot, self.cfg.solve.newton_tol, *f_tol).with_provenance(rep.hash())
            }
            CheckSpec::EqualityLocus { c_tol } => {
                let (rep, u) = self.solution()?;
                let tol = GridTolerance::for_field(u, *c_tol);
                equality_locus(u, phi, pot, &tol)?.0.with_provenance(rep.hash())
            }
            CheckSpec::Harnack { center, radius, p, refine } => {
                let (rep, u) = self.solution()?;
                let mut r = harnack_diagnostic(u, phi, pot, center, *radius, *p)?.with_provenance(rep.hash());
                if *refine {
                    let fine = self.refined_solution()?;
                    let rf = harnack_diagnostic(&fine, phi, pot, center, *radius, *p)?;
                    record_refinement(&mut r, &rf);
                }
                r
            }
            CheckSpec::Abp { axis, center, half_width, radius, theta, boundary_tol, refine } => {
                let (rep, u) = self.solution()?;
                let mask = strip_mask(&u.grid, *axis, *center, *half_width);
                let mut r =
                    abp_diagnostic(u, phi, pot, &mask, *radius, *theta, *boundary_tol)?.with_provenance(rep.hash());
                if *refine {
                    let fine = self.refined_solution()?;
                    let mask = strip_mask(&fine.grid, *axis, *center, *half_width);
                    let rf = abp_diagnostic(&fine, phi, pot, &mask, *radius, *theta, *boundary_tol)?;
                    record_refinement(&mut r, &rf);
                }
                r
            }
            CheckSpec::FirstIntegral { case, phi0, span, step, drift_tol, tanh_reference, tanh_tol } => {
                let (fam, pt, p0, sp) = match case {
                    Some(name) => {
                        let c = equality_catalog()
                            .into_iter()
                            .find(|c| c.name == name)
                            .ok_or_else(|| HarnessError::Check(format!("unknown equality case '{name}'")))?;
                        (c.family, c.potential, c.phi0, c.span)
                    }
                    None => (phi.clone(), pot.clone(), *phi0, span.map(|s| (s[0], s[1])).expect("validated")),
                };
                let prof = equality_profile(&fam, &pt, p0, 1.0, sp, *step)?;
                let drift = prof.energy_drift();
                let mut r = VerifyReport::new(TheoremTag::Equality, "first-integral");
                r.tolerance = *drift_tol;
                r.set("drift", drift).set("step", *step).set("samples", prof.len() as f64);
                let mut pass = drift <= *drift_tol;
                if *tanh_reference {
                    let err = prof
                        .s
                        .iter()
                        .zip(&prof.phi)
                        .map(|(s, p)| (p - (s / 2f64.sqrt()).tanh()).abs())
                        .fold(0.0, f64::max);
                    r.set("tanh_error", err).set("tanh_tol", *tanh_tol);
                    pass &= err <= *tanh_tol;
                }
                if case.is_some() {
                    r.note(format!("equality case {}", case.as_deref().unwrap()));
                }
                let mut d = prof.to_dump();
                d.seed = Some(self.cfg.seed);
                let name = format!("equality_profile_{index}.txt");
                d.write(&self.dir.join(&name))?;
                self.written.push(name);
                r.decide(pass);
                r
            }
            CheckSpec::QTransform { step, grad_tol, lap_tol } => {
                let mut r = VerifyReport::new(TheoremTag::Equality, "q-transform");
                r.tolerance = *grad_tol;
                r.set("grad_tol", *grad_tol).set("lap_tol", *lap_tol).set("step", *step);
                let mut pass = true;
                for (i, c) in equality_catalog().iter().enumerate() {
                    let prof = equality_profile(&c.family, &c.potential, c.phi0, 1.0, c.span, *step)?;
                    let q = q_transform(&prof)?;
                    let (gd, ld) = (q.unit_gradient_defect(), q.laplacian_defect());
                    r.set(&format!("unit_gradient_defect_{i}"), gd);
                    r.set(&format!("laplacian_defect_{i}"), ld);
                    r.note(format!("case {i}: {}", c.name));
                    pass &= gd <= *grad_tol && ld <= *lap_tol;
                }
                r.decide(pass);
                r
            }
        };
        Ok(r)
    }
}

/// Adds the refined C_emp and decides stability when the report is a measurement.
fn record_refinement(r: &mut VerifyReport, fine: &VerifyReport) {
    let (c, cf) = (r.value("c_emp").unwrap_or(f64::NAN), fine.value("c_emp").unwrap_or(f64::NAN));
    let change = if c == 0.0 && cf == 0.0 { 0.0 } else { (cf - c).abs() / c.abs() };
    r.set("c_emp_refined", cf).set("refinement_change", change).set("refinement_tol", REFINEMENT_TOL);
    if r.status == Status::Measurement {
        r.decide(change.is_finite() && change <= REFINEMENT_TOL && c.is_finite());
    }
}
