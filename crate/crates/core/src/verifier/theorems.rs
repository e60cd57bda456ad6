//! Gradient bound, Liouville statements and the equality locus.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::geometry::{MetricGrid, ScalarField};
use crate::nonlinearity::{PhiFamily, Potential};
use crate::solver::{initial_field, newton_solve, InitialGuess, SolveConfig, SolveReport};

use super::pfunction::{p_function, Kinematics, PFieldBundle};
use super::{
    mean_and_std, potential_nonneg_on, regular_nodes, ricci_min_eigenvalue, sample_range,
    GridTolerance, Result, TheoremTag, VerifyReport, HYPOTHESIS_SAMPLES, HYPOTHESIS_TOL,
};

/// max P ≤ tol_grid, asserted only when F ≥ 0 on the solution's range and
/// Ric ≥ 0 at every node.
pub fn check_gradient_bound(
    u: &ScalarField,
    phi: &PhiFamily,
    pot: &Potential,
    tol: &GridTolerance,
) -> Result<(VerifyReport, PFieldBundle)> {
    let b = p_function(u, phi, pot)?;
    let (lo, hi) = sample_range(u, 0.0);
    let nonneg = potential_nonneg_on(pot, lo, hi);
    let ric_min = ricci_min_eigenvalue(&u.grid);
    let ric_ok = ric_min >= -HYPOTHESIS_TOL;
    let (mean, std) = mean_and_std(&b.p.values);
    let mut r = VerifyReport::new(TheoremTag::GradientBound, "max-p");
    tol.record(&mut r);
    r.hypotheses_met = nonneg && ric_ok;
    r.set("max_p", b.p.max())
        .set("min_p", b.p.min())
        .set("mean_p", mean)
        .set("std_p", std)
        .set("relative_std_p", if mean != 0.0 { std / mean.abs() } else { std })
        .set("ricci_min_eigenvalue", ric_min)
        .set("grad_p_discrepancy", b.grad_p_discrepancy)
        .set("psi_form_defect", b.psi_form_defect)
        .set("hypothesis_tol", HYPOTHESIS_TOL);
    if !nonneg {
        r.note(format!("F < 0 somewhere on [{lo}, {hi}]: hypotheses unmet, diagnostic only"));
    }
    if !ric_ok {
        r.note(format!("Ricci has eigenvalue {ric_min:e} < 0: hypotheses unmet, diagnostic only"));
    }
    if u.grid.dim == 1 {
        r.note("one-dimensional grid: ODE-level check");
    }
    r.decide(b.p.max() <= tol.tol);
    Ok((r, b))
}

/// Random-start solves of a convex-potential problem.
#[derive(Debug, Clone)]
pub struct LiouvilleOutcome {
    pub report: VerifyReport,
    pub solves: Vec<SolveReport>,
}

/// Solves from `starts` random fields (seeds `seed`, `seed + 1`, ...) and
/// passes when every converged solution oscillates by at most 10·newton_tol.
pub fn liouville_experiment(
    phi: &PhiFamily,
    pot: &Potential,
    grid: &Arc<MetricGrid>,
    cfg: &SolveConfig,
    starts: usize,
    amplitude: f64,
    seed: u64,
) -> Result<LiouvilleOutcome> {
    let threshold = 10.0 * cfg.newton_tol;
    let mut solves = Vec::with_capacity(starts);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..starts {
        let mut c = cfg.clone();
        c.initial_guess = InitialGuess::Random {
            seed: seed + k as u64,
            amplitude,
            offset: 0.0,
        };
        c.seed = seed + k as u64;
        let u0 = initial_field(&c.initial_guess, grid)?;
        for v in u0 {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let s = newton_solve(&c, phi, pot, grid)?;
        lo = lo.min(s.solution.min());
        hi = hi.max(s.solution.max());
        solves.push(s);
    }
    let convex = pot.sampled_convex(lo, hi, HYPOTHESIS_SAMPLES, HYPOTHESIS_TOL);
    let ric_min = ricci_min_eigenvalue(grid);
    let mut r = VerifyReport::new(TheoremTag::Liouville, "random-starts");
    r.tolerance = threshold;
    r.hypotheses_met = convex && ric_min >= -HYPOTHESIS_TOL;
    let converged: Vec<&SolveReport> = solves.iter().filter(|s| s.converged).collect();
    let worst = converged.iter().map(|s| s.solution.oscillation()).fold(0.0, f64::max);
    r.set("starts", starts as f64)
        .set("converged", converged.len() as f64)
        .set("max_oscillation", worst)
        .set("ricci_min_eigenvalue", ric_min)
        .set("sample_lo", lo)
        .set("sample_hi", hi)
        .set("newton_tol", cfg.newton_tol)
        .set("amplitude", amplitude);
    for (k, s) in solves.iter().enumerate() {
        r.set(&format!("oscillation_{k}"), s.solution.oscillation());
        r.set(&format!("residual_{k}"), s.final_residual_maxnorm);
        if !s.converged {
            r.note(format!("start {k} did not converge: {}", s.message));
        }
    }
    if !convex {
        r.note(format!("F″ < 0 somewhere on [{lo}, {hi}]: hypotheses unmet, diagnostic only"));
    }
    if converged.is_empty() {
        r.note("no start converged");
    }
    r.decide(worst <= threshold);
    Ok(LiouvilleOutcome { report: r, solves })
}

/// min F(u) ≤ `f_tol` ⇒ osc u ≤ 10·newton_tol.
pub fn zero_potential_experiment(
    u: &ScalarField,
    pot: &Potential,
    newton_tol: f64,
    f_tol: f64,
) -> VerifyReport {
    let min_f = u.values.iter().map(|&x| pot.f(x)).fold(f64::INFINITY, f64::min);
    let osc = u.oscillation();
    let threshold = 10.0 * newton_tol;
    let antecedent = min_f <= f_tol;
    let consequent = osc <= threshold;
    let (lo, hi) = sample_range(u, 0.0);
    let ric_min = ricci_min_eigenvalue(&u.grid);
    let mut r = VerifyReport::new(TheoremTag::ZeroPotential, "implication");
    r.tolerance = f_tol;
    r.hypotheses_met = potential_nonneg_on(pot, lo, hi) && ric_min >= -HYPOTHESIS_TOL;
    r.set("min_f", min_f)
        .set("oscillation", osc)
        .set("oscillation_threshold", threshold)
        .set("f_tol", f_tol)
        .set("antecedent", antecedent as u8 as f64)
        .set("consequent", consequent as u8 as f64);
    if !antecedent {
        r.note("F(u) > tol everywhere: implication holds vacuously");
    }
    r.decide(!antecedent || consequent);
    r
}

/// Regular nodes with |P| ≤ tol, grouped by 2·dim adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualityLocus {
    pub nodes: Vec<usize>,
    pub components: Vec<Vec<usize>>,
    /// max|Ric(∇u, ∇u)| per component.
    pub max_ricci: Vec<f64>,
}

pub fn equality_locus(
    u: &ScalarField,
    phi: &PhiFamily,
    pot: &Potential,
    tol: &GridTolerance,
) -> Result<(VerifyReport, EqualityLocus)> {
    let b = p_function(u, phi, pot)?;
    let k = Kinematics::new(u, phi)?;
    let grid = &u.grid;
    let regular = regular_nodes(&k.t);
    let in_locus: Vec<bool> = (0..grid.len())
        .map(|n| regular[n] && b.p.values[n].abs() <= tol.tol)
        .collect();
    let nodes: Vec<usize> = (0..grid.len()).filter(|&n| in_locus[n]).collect();
    let ric = crate::geometry::ricci_quadratic(&k.up);
    let mut seen = vec![false; grid.len()];
    let mut components = Vec::new();
    let mut max_ricci = Vec::new();
    for &start in &nodes {
        if seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(n) = queue.pop_front() {
            comp.push(n);
            for a in 0..grid.dim {
                for dir in [-1, 1] {
                    let (m, _) = grid.neighbor(n, a, dir);
                    if in_locus[m] && !seen[m] {
                        seen[m] = true;
                        queue.push_back(m);
                    }
                }
            }
        }
        comp.sort_unstable();
        max_ricci.push(comp.iter().map(|&n| ric.values[n].abs()).fold(0.0, f64::max));
        components.push(comp);
    }
    let worst = max_ricci.iter().cloned().fold(0.0, f64::max);
    let mut r = VerifyReport::new(TheoremTag::Equality, "locus");
    tol.record(&mut r);
    r.set("locus_nodes", nodes.len() as f64)
        .set("components", components.len() as f64)
        .set("max_ricci", worst)
        .set("regular_nodes", regular.iter().filter(|&&x| x).count() as f64);
    if nodes.is_empty() {
        r.note("empty locus");
    }
    r.decide(worst <= tol.tol);
    Ok((
        r,
        EqualityLocus {
            nodes,
            components,
            max_ricci,
        },
    ))
}
