//! Damped Newton with backtracking, bordered pins and parameter continuation.

use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dump::FieldDump;
use crate::geometry::{central_diff, MetricGrid, ScalarField};
use crate::nonlinearity::{PhiFamily, Potential};

use super::residual::{directional_check, JacobianCheck, Problem};
use super::sparse::{gcr, inverse_norm_one_estimate, BorderedSolver, CsrMatrix, DirectSolver};
use super::SolverError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LinearSolver {
    DirectSparse,
    /// GCR; the tolerance defaults to 1e−2·newton_tol relative.
    ConjugateResidual {
        rtol: Option<f64>,
        max_iter: usize,
        restart: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialGuess {
    Zero,
    Constant { value: f64 },
    /// offset + amplitude·U(−1, 1) per node.
    Random { seed: u64, amplitude: f64, #[serde(default)] offset: f64 },
    /// offset + amplitude·sin(2πk x_axis / L_axis).
    Sine { amplitude: f64, k: f64, axis: usize, #[serde(default)] offset: f64 },
    Values { values: Vec<f64> },
    /// Column `u` of a field dump on the same grid.
    FieldFile { path: PathBuf },
    /// A 1D (s, u) dump extended constantly across the other axes.
    ProfileExtension { path: PathBuf, #[serde(default)] axis: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Pin {
    /// Mean pin when F′ ≡ 0, none otherwise.
    Auto,
    None,
    /// ∫u dμ / |M| = value (default: the initial guess mean).
    Mean { value: Option<f64> },
    /// ⟨u − u₀, ∂ₐu₀⟩ = 0 against the stage's starting iterate u₀.
    Phase { axis: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContinuationParameter {
    /// Coordinate period of axis 0.
    Length,
    /// Potential amplitude multiplier.
    Amplitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Continuation {
    pub parameter: ContinuationParameter,
    pub start: f64,
    pub steps: usize,
    #[serde(default = "default_bisections")]
    pub max_bisections: usize,
}

fn default_bisections() -> usize {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub backtrack: f64,
    /// Smallest line-search step; 1 disables damping.
    pub min_step: f64,
    pub continuation: Option<Continuation>,
    pub linear_solver: LinearSolver,
    pub initial_guess: InitialGuess,
    pub pin: Pin,
    /// Directional-derivative check at every accepted iterate.
    pub check_jacobian: bool,
    pub jacobian_deltas: [f64; 2],
    pub condition_estimate: bool,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_newton_iters: 50,
            backtrack: 0.5,
            min_step: 1e-6,
            continuation: None,
            linear_solver: LinearSolver::DirectSparse,
            initial_guess: InitialGuess::Zero,
            pin: Pin::Auto,
            check_jacobian: false,
            jacobian_deltas: [1e-4, 1e-5],
            condition_estimate: true,
            seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.newton_tol > 0.0) {
            return Err(SolverError::Config("newton_tol must be > 0".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(SolverError::Config("backtrack must lie in (0, 1)".into()));
        }
        if !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return Err(SolverError::Config("min_step must lie in (0, 1]".into()));
        }
        if self.max_newton_iters == 0 {
            return Err(SolverError::Config("max_newton_iters must be >= 1".into()));
        }
        if let Some(c) = &self.continuation {
            if c.steps == 0 {
                return Err(SolverError::Config("continuation steps must be >= 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    /// max|R| at the iterate.
    pub residual: f64,
    /// Accepted line-search step.
    pub step: f64,
    pub jacobian_check: Option<JacobianCheck>,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub converged: bool,
    pub final_residual_maxnorm: f64,
    pub iterations: usize,
    pub continuation_steps: usize,
    pub solution: ScalarField,
    pub jacobian_condition_estimate: f64,
    /// Newton history of the final continuation stage.
    pub history: Vec<IterateRecord>,
    /// Every directional check over all stages passed.
    pub jacobian_checks_pass: bool,
    pub lagrange_multiplier: f64,
    pub pin: String,
    pub message: String,
}

impl SolveReport {
    /// Digest of every numeric field, used as provenance by verification reports.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update([self.converged as u8]);
        h.update(self.final_residual_maxnorm.to_le_bytes());
        h.update((self.iterations as u64).to_le_bytes());
        h.update((self.continuation_steps as u64).to_le_bytes());
        h.update(self.jacobian_condition_estimate.to_le_bytes());
        h.update(self.solution.grid.hash.as_bytes());
        for v in &self.solution.values {
            h.update(v.to_le_bytes());
        }
        for r in &self.history {
            h.update(r.residual.to_le_bytes());
            h.update(r.step.to_le_bytes());
        }
        hex::encode(&h.finalize()[..16])
    }

    /// Residual norms of the last Newton steps, for the quadratic-tail check.
    pub fn residual_history(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.residual).collect()
    }
}

/// Evaluates an initial guess on `grid`.
pub fn initial_field(guess: &InitialGuess, grid: &Arc<MetricGrid>) -> Result<Vec<f64>, SolverError> {
    let n = grid.len();
    Ok(match guess {
        InitialGuess::Zero => vec![0.0; n],
        InitialGuess::Constant { value } => vec![*value; n],
        InitialGuess::Random {
            seed,
            amplitude,
            offset,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..n)
                .map(|_| offset + amplitude * rng.random_range(-1.0..1.0))
                .collect()
        }
        InitialGuess::Sine {
            amplitude,
            k,
            axis,
            offset,
        } => {
            if *axis >= grid.dim {
                return Err(SolverError::Config(format!("sine axis {axis} out of range")));
            }
            let w = 2.0 * std::f64::consts::PI * k / grid.lengths[*axis];
            (0..n)
                .map(|m| offset + amplitude * (w * grid.coord(m, *axis)).sin())
                .collect()
        }
        InitialGuess::Values { values } => {
            if values.len() != n {
                return Err(SolverError::Config(format!(
                    "initial values have {} entries, grid has {n} nodes",
                    values.len()
                )));
            }
            values.clone()
        }
        InitialGuess::FieldFile { path } => {
            let d = FieldDump::read(path).map_err(|e| SolverError::Io(e.to_string()))?;
            if d.shape != grid.shape {
                return Err(SolverError::Config(format!(
                    "field file shape {:?} does not match grid {:?}",
                    d.shape, grid.shape
                )));
            }
            d.column("u")
                .ok_or_else(|| SolverError::Config("field file has no 'u' column".into()))?
        }
        InitialGuess::ProfileExtension { path, axis } => {
            let d = FieldDump::read(path).map_err(|e| SolverError::Io(e.to_string()))?;
            let s = d.column("s").or_else(|| d.column("x"));
            let u = d.column("u").or_else(|| d.column("phi"));
            let (Some(s), Some(u)) = (s, u) else {
                return Err(SolverError::Config("profile needs (s|x, u|phi) columns".into()));
            };
            extend_profile(grid, *axis, &s, &u)?
        }
    })
}

/// Periodic linear interpolation of a 1D profile along `axis`, constant across
/// the other axes. Nodes that coincide with profile samples copy them exactly.
pub fn extend_profile(
    grid: &MetricGrid,
    axis: usize,
    s: &[f64],
    u: &[f64],
) -> Result<Vec<f64>, SolverError> {
    if axis >= grid.dim || s.len() < 2 || s.len() != u.len() {
        return Err(SolverError::Config("invalid profile extension".into()));
    }
    let l = grid.lengths[axis];
    Ok((0..grid.len())
        .map(|n| {
            let x = grid.coord(n, axis).rem_euclid(l);
            if let Some(i) = s.iter().position(|v| (v - x).abs() <= 1e-12 * l.max(1.0)) {
                return u[i];
            }
            let i = s.partition_point(|v| *v <= x);
            let (i0, i1) = if i == 0 || i == s.len() {
                (s.len() - 1, 0)
            } else {
                (i - 1, i)
            };
            let (s0, mut s1) = (s[i0], s[i1]);
            let mut xx = x;
            if s1 <= s0 {
                s1 += l;
                if xx < s0 {
                    xx += l;
                }
            }
            let t = (xx - s0) / (s1 - s0);
            u[i0] * (1.0 - t) + u[i1] * t
        })
        .collect())
}

/// Linear constraint row·u = target, enforced with a Lagrange multiplier.
struct Border {
    row: Vec<f64>,
    col: Vec<f64>,
    target: f64,
}

fn make_border(pin: &Pin, problem: &Problem, u0: &[f64]) -> Result<Option<Border>, SolverError> {
    let grid = &problem.grid;
    let w = grid.volume_weights();
    let scale = |v: Vec<f64>| -> Vec<f64> {
        let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if m > 0.0 {
            v.iter().map(|x| x / m).collect()
        } else {
            v
        }
    };
    match pin {
        Pin::None => Ok(None),
        Pin::Auto if !problem.pot.is_zero() || problem.source.is_some() => Ok(None),
        Pin::Auto | Pin::Mean { .. } => {
            let total: f64 = w.iter().sum();
            let row: Vec<f64> = w.iter().map(|x| x / total).collect();
            let mean0: f64 = row.iter().zip(u0).map(|(a, b)| a * b).sum();
            let target = match pin {
                Pin::Mean { value: Some(v) } => *v,
                _ => mean0,
            };
            Ok(Some(Border {
                col: scale(row.clone()),
                row,
                target,
            }))
        }
        Pin::Phase { axis } => {
            if *axis >= grid.dim {
                return Err(SolverError::Config(format!("phase axis {axis} out of range")));
            }
            let get = |m: usize| u0[m];
            let du: Vec<f64> = (0..grid.len())
                .map(|n| central_diff(grid, &get, n, *axis, false))
                .collect();
            let norm: f64 = du.iter().zip(&w).map(|(d, w)| d * d * w).sum::<f64>().sqrt();
            if !(norm > 0.0) {
                return Err(SolverError::Config(
                    "phase pin needs a reference with nonzero derivative".into(),
                ));
            }
            let row: Vec<f64> = du.iter().zip(&w).map(|(d, w)| d * w / norm).collect();
            let target = row.iter().zip(u0).map(|(a, b)| a * b).sum();
            Ok(Some(Border {
                col: scale(row.clone()),
                row,
                target,
            }))
        }
    }
}

struct Stage {
    u: Vec<f64>,
    lambda: f64,
    converged: bool,
    residual: f64,
    iterations: usize,
    history: Vec<IterateRecord>,
    checks_pass: bool,
    message: String,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn augmented(j: &CsrMatrix, border: &Option<Border>) -> CsrMatrix {
    let Some(b) = border else {
        return j.clone();
    };
    let n = j.n;
    let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(j.nnz() + 2 * n);
    for r in 0..n {
        for (c, v) in j.row(r) {
            t.push((r, c, v));
        }
        t.push((r, n, b.col[r]));
    }
    for (c, v) in b.row.iter().enumerate() {
        t.push((n, c, *v));
    }
    CsrMatrix::from_triplets(n + 1, t)
}

fn solve_linear(
    cfg: &SolveConfig,
    j: &CsrMatrix,
    border: &Option<Border>,
    rhs: &[f64],
) -> Result<Vec<f64>, SolverError> {
    match &cfg.linear_solver {
        LinearSolver::DirectSparse => match border {
            Some(b) => BorderedSolver::factor(j, &b.col, &b.row)?.solve(rhs),
            None => DirectSolver::factor(j)?.solve(rhs),
        },
        LinearSolver::ConjugateResidual {
            rtol,
            max_iter,
            restart,
        } => {
            let tol = rtol.unwrap_or(1e-2 * cfg.newton_tol);
            let (x, rel) = gcr(&augmented(j, border), rhs, tol, *max_iter, *restart);
            if rel <= tol.max(1e-14) || rel < 1e-3 {
                Ok(x)
            } else {
                Err(SolverError::Linear(format!("GCR stalled at relative residual {rel:e}")))
            }
        }
    }
}

fn newton_stage(
    cfg: &SolveConfig,
    problem: &Problem,
    u0: Vec<f64>,
    stage_seed: u64,
) -> Result<Stage, SolverError> {
    let border = make_border(&cfg.pin, problem, &u0)?;
    let n = problem.grid.len();
    let mut u = u0;
    let mut lambda = 0.0;
    let mut history = Vec::new();
    let mut checks_pass = true;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ stage_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));

    let eval = |u: &[f64], lambda: f64| -> Result<(Vec<f64>, Vec<f64>, f64), SolverError> {
        let r = problem.residual(u)?;
        let mut g = r.clone();
        let mut merit_c = 0.0;
        if let Some(b) = &border {
            for (gi, ci) in g.iter_mut().zip(&b.col) {
                *gi += lambda * ci;
            }
            let c: f64 = b.row.iter().zip(u).map(|(a, x)| a * x).sum::<f64>() - b.target;
            merit_c = c;
            g.push(c);
        }
        Ok((r, g, merit_c))
    };

    let (mut r, mut g, mut c) = eval(&u, lambda)?;
    for it in 0..=cfg.max_newton_iters {
        let res = max_abs(&r);
        let merit = max_abs(&g);
        let done = res <= cfg.newton_tol && c.abs() <= cfg.newton_tol;
        if done || it == cfg.max_newton_iters {
            history.push(IterateRecord {
                residual: res,
                step: 0.0,
                jacobian_check: None,
            });
            return Ok(Stage {
                u,
                lambda,
                converged: done,
                residual: res,
                iterations: it,
                history,
                checks_pass,
                message: if done {
                    "converged".into()
                } else {
                    format!("no convergence after {it} iterations (residual {res:e})")
                },
            });
        }
        let j = problem.jacobian(&u)?;
        let check = if cfg.check_jacobian {
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let chk = directional_check(problem, &u, &r, &j, &v, cfg.jacobian_deltas)?;
            checks_pass &= chk.pass;
            Some(chk)
        } else {
            None
        };
        let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
        let delta = match solve_linear(cfg, &j, &border, &rhs) {
            Ok(d) => d,
            Err(e) => {
                history.push(IterateRecord {
                    residual: res,
                    step: 0.0,
                    jacobian_check: check,
                });
                return Ok(Stage {
                    u,
                    lambda,
                    converged: false,
                    residual: res,
                    iterations: it,
                    history,
                    checks_pass,
                    message: e.to_string(),
                });
            }
        };
        let mut alpha = 1.0;
        let undamped = cfg.min_step >= 1.0;
        let accepted = loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(x, d)| x + alpha * d).collect();
            let tl = if border.is_some() { lambda + alpha * delta[n] } else { lambda };
            if let Ok((tr, tg, tc)) = eval(&trial, tl) {
                let tm = max_abs(&tg);
                if tm <= (1.0 - 1e-4 * alpha) * merit || tm <= cfg.newton_tol || undamped {
                    break Some((trial, tl, tr, tg, tc));
                }
            }
            alpha *= cfg.backtrack;
            if alpha < cfg.min_step {
                break None;
            }
        };
        history.push(IterateRecord {
            residual: res,
            step: if accepted.is_some() { alpha } else { 0.0 },
            jacobian_check: check,
        });
        match accepted {
            Some((nu, nl, nr, ng, nc)) => {
                u = nu;
                lambda = nl;
                r = nr;
                g = ng;
                c = nc;
            }
            None => {
                return Ok(Stage {
                    u,
                    lambda,
                    converged: false,
                    residual: res,
                    iterations: it + 1,
                    history,
                    checks_pass,
                    message: format!("line search failed at residual {res:e}"),
                });
            }
        }
    }
    unreachable!("loop returns on its last pass")
}

fn condition_estimate(cfg: &SolveConfig, problem: &Problem, u: &[f64]) -> f64 {
    if !cfg.condition_estimate || problem.grid.len() > 300_000 {
        return f64::NAN;
    }
    let Ok(j) = problem.jacobian(u) else {
        return f64::NAN;
    };
    let border = make_border(&cfg.pin, problem, u).ok().flatten();
    let norm = augmented(&j, &border).norm_one();
    let inv = match &border {
        Some(b) => BorderedSolver::factor(&j, &b.col, &b.row).map(|s| inverse_norm_one_estimate(&s)),
        None => DirectSolver::factor(&j).map(|s| inverse_norm_one_estimate(&s)),
    };
    inv.map_or(f64::INFINITY, |i| norm * i)
}

/// Solves div(Φ′(|∇u|²)∇u) = F′(u) on `grid`.
pub fn newton_solve(
    cfg: &SolveConfig,
    phi: &PhiFamily,
    pot: &Potential,
    grid: &Arc<MetricGrid>,
) -> Result<SolveReport, SolverError> {
    solve_problem(cfg, &Problem::new(grid.clone(), phi.clone(), pot.clone()))
}

/// As [`newton_solve`] for a problem that may carry a source term.
pub fn solve_problem(cfg: &SolveConfig, problem: &Problem) -> Result<SolveReport, SolverError> {
    cfg.validate()?;
    let pin_name = format!("{:?}", cfg.pin);
    let Some(cont) = &cfg.continuation else {
        let u0 = initial_field(&cfg.initial_guess, &problem.grid)?;
        let st = newton_stage(cfg, problem, u0, 0)?;
        let cond = condition_estimate(cfg, problem, &st.u);
        return Ok(SolveReport {
            converged: st.converged,
            final_residual_maxnorm: st.residual,
            iterations: st.iterations,
            continuation_steps: 0,
            solution: ScalarField::new(problem.grid.clone(), st.u),
            jacobian_condition_estimate: cond,
            history: st.history,
            jacobian_checks_pass: st.checks_pass,
            lagrange_multiplier: st.lambda,
            pin: pin_name,
            message: st.message,
        });
    };
    if cont.parameter == ContinuationParameter::Length && problem.source.is_some() {
        return Err(SolverError::Config(
            "length continuation cannot transport a manufactured source".into(),
        ));
    }
    let target = match cont.parameter {
        ContinuationParameter::Length => problem.grid.lengths[0],
        ContinuationParameter::Amplitude => problem.pot.amplitude,
    };
    let at = |value: f64| -> Result<Problem, SolverError> {
        Ok(match cont.parameter {
            ContinuationParameter::Length => {
                let mut lengths = problem.grid.lengths.clone();
                lengths[0] = value;
                let grid = MetricGrid::build(problem.grid.kind.clone(), &problem.grid.shape, &lengths)
                    .map_err(|e| SolverError::Config(e.to_string()))?;
                Problem {
                    grid,
                    ..problem.clone()
                }
            }
            ContinuationParameter::Amplitude => Problem {
                pot: problem.pot.scaled(value),
                ..problem.clone()
            },
        })
    };
    let first = at(cont.start)?;
    let mut u = initial_field(&cfg.initial_guess, &first.grid)?;
    let mut current = cont.start;
    let mut step = (target - cont.start) / cont.steps as f64;
    let mut stages = 0usize;
    let mut total_iters = 0usize;
    let mut failures = 0usize;
    let mut checks_pass = true;
    let mut first_stage = true;
    loop {
        let next = if first_stage {
            cont.start
        } else if (target - current).abs() <= step.abs() * (1.0 + 1e-12) {
            target
        } else {
            current + step
        };
        let p = at(next)?;
        let st = newton_stage(cfg, &p, u.clone(), stages as u64 + 1)?;
        total_iters += st.iterations;
        checks_pass &= st.checks_pass;
        if st.converged {
            stages += 1;
            failures = 0;
            u = st.u.clone();
            current = next;
            first_stage = false;
            if next == target {
                let cond = condition_estimate(cfg, &p, &st.u);
                return Ok(SolveReport {
                    converged: true,
                    final_residual_maxnorm: st.residual,
                    iterations: total_iters,
                    continuation_steps: stages,
                    solution: ScalarField::new(p.grid.clone(), st.u),
                    jacobian_condition_estimate: cond,
                    history: st.history,
                    jacobian_checks_pass: checks_pass,
                    lagrange_multiplier: st.lambda,
                    pin: pin_name,
                    message: st.message,
                });
            }
        } else {
            failures += 1;
            if first_stage || failures > cont.max_bisections {
                let cond = condition_estimate(cfg, &p, &st.u);
                return Ok(SolveReport {
                    converged: false,
                    final_residual_maxnorm: st.residual,
                    iterations: total_iters,
                    continuation_steps: stages,
                    solution: ScalarField::new(p.grid.clone(), st.u),
                    jacobian_condition_estimate: cond,
                    history: st.history,
                    jacobian_checks_pass: checks_pass,
                    lagrange_multiplier: st.lambda,
                    pin: pin_name,
                    message: format!(
                        "continuation stopped at {current} (target {target}): {}",
                        st.message
                    ),
                });
            }
            step *= 0.5;
        }
    }
}
