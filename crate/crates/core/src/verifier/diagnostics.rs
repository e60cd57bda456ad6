//! Harnack and ABP measurements. Both sides are evaluated; the constants are
//! reported, not bounded.

use crate::geometry::{ball_volume, geodesic_distance, MetricGrid, MetricKind, ScalarField};
use crate::nonlinearity::{PhiFamily, Potential};

use super::pfunction::Kinematics;
use super::{ricci_max_abs_eigenvalue, ricci_min_eigenvalue, Result, TheoremTag, VerifyError, VerifyReport, HYPOTHESIS_SAMPLES, HYPOTHESIS_TOL};

/// Node closest to coordinate point `x` (periodic in every axis but the sphere's θ).
pub fn nearest_node(grid: &MetricGrid, x: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for n in 0..grid.len() {
        let c = grid.coords(n);
        let mut s = 0.0;
        for a in 0..grid.dim {
            let l = grid.lengths[a];
            let mut dx = (c[a] - x[a]).abs();
            if !(grid.is_sphere() && a == 0) {
                dx = dx.rem_euclid(l);
                dx = dx.min(l - dx);
            }
            s += dx * dx;
        }
        if s < best.0 {
            best = (s, n);
        }
    }
    best.1
}

/// Nodes whose coordinate along `axis` lies within `half_width` of `center`.
pub fn strip_mask(grid: &MetricGrid, axis: usize, center: f64, half_width: f64) -> Vec<bool> {
    let l = grid.lengths[axis];
    (0..grid.len())
        .map(|n| {
            let dx = (grid.coord(n, axis) - center).rem_euclid(l);
            dx.min(l - dx) <= half_width + 1e-12 * l
        })
        .collect()
}

fn integral_over(grid: &MetricGrid, inside: impl Fn(usize) -> bool, f: impl Fn(usize) -> f64) -> f64 {
    let c = grid.cell_volume();
    (0..grid.len())
        .filter(|&n| inside(n))
        .map(|n| f(n) * grid.sqrt_det_g[n] * c)
        .sum()
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

/// Both sides of the gradient Harnack inequality on B_R(center):
/// |B_R|^{−1/p}‖|∇u|²‖_{Lᵖ(B_R)} against inf_{B_R}|∇u|² + R²|B_2R|^{−1/n}‖Hess u‖²_{L²ⁿ(B_2R)}
/// + R²|B_2R|^{−1/n}‖Φ′Ric(∇u, ∇u)‖_{Lⁿ(B_2R)}. The Ricci term is dropped when
/// Ric ≡ 0. C_emp = LHS/RHS.
pub fn harnack_diagnostic(
    u: &ScalarField,
    phi: &PhiFamily,
    pot: &Potential,
    center: &[f64],
    radius: f64,
    p_exp: f64,
) -> Result<VerifyReport> {
    if !(radius > 0.0 && p_exp >= 1.0) {
        return Err(VerifyError::Config(format!(
            "harnack needs R > 0 and p >= 1 (R = {radius}, p = {p_exp})"
        )));
    }
    let grid = &u.grid;
    let k = Kinematics::new(u, phi)?;
    let c = nearest_node(grid, center);
    let dist = geodesic_distance(grid, c, 2.0 * radius)?;
    let n = grid.dim as f64;
    let in_r = |m: usize| dist[m] <= radius;
    let in_2r = |m: usize| dist[m] <= 2.0 * radius;
    let vol_r = ball_volume(grid, &dist, radius);
    let vol_2r = ball_volume(grid, &dist, 2.0 * radius);
    let lhs = vol_r.powf(-1.0 / p_exp) * integral_over(grid, in_r, |m| k.t[m].powf(p_exp)).powf(1.0 / p_exp);
    let inf = (0..grid.len()).filter(|&m| in_r(m)).map(|m| k.t[m]).fold(f64::INFINITY, f64::min);
    let hn = k.hess.norm2();
    let scale = radius * radius / vol_2r.powf(1.0 / n);
    let hess_norm = integral_over(grid, in_2r, |m| hn.values[m].powf(n)).powf(1.0 / (2.0 * n));
    let hess_term = scale * hess_norm * hess_norm;
    let ric = crate::geometry::ricci_quadratic(&k.up);
    let flat = ricci_max_abs_eigenvalue(grid) == 0.0;
    let ric_term = if flat {
        0.0
    } else {
        scale * integral_over(grid, in_2r, |m| (k.dphi[m] * ric.values[m]).abs().powf(n)).powf(1.0 / n)
    };
    let rhs = inf + hess_term + ric_term;
    let concave = pot.sampled_concave(u.min(), u.max(), HYPOTHESIS_SAMPLES, HYPOTHESIS_TOL);
    // Hessian of |∇u|²: largest eigenvalue, recorded without a threshold.
    let p_hess = crate::geometry::covariant_hessian(&ScalarField::new(grid.clone(), k.t.clone()));
    let max_eig = (0..grid.len())
        .map(|m| max_eigenvalue(grid, p_hess.at(m), m))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut r = VerifyReport::new(TheoremTag::Harnack, if flat { "ricci-flat-variant" } else { "full" });
    r.hypotheses_met = concave;
    r.set("lhs", lhs)
        .set("rhs", rhs)
        .set("c_emp", ratio(lhs, rhs))
        .set("inf_grad2", inf)
        .set("hessian_term", hess_term)
        .set("ricci_term", ric_term)
        .set("ball_volume_r", vol_r)
        .set("ball_volume_2r", vol_2r)
        .set("radius", radius)
        .set("p", p_exp)
        .set("center_node", c as f64)
        .set("max_eigenvalue_hess_grad2", max_eig);
    if !concave {
        r.note("F″ > 0 somewhere on the solution range: diagnostic only");
    }
    Ok(r)
}

/// Largest eigenvalue of a covariant symmetric tensor relative to g.
fn max_eigenvalue(grid: &MetricGrid, t: &[f64], n: usize) -> f64 {
    use crate::geometry::sym_index;
    use nalgebra::{Cholesky, DMatrix};
    let d = grid.dim;
    let g = grid.g_at(n);
    let gm = DMatrix::from_fn(d, d, |i, j| g[sym_index(d, i, j)]);
    let tm = DMatrix::from_fn(d, d, |i, j| t[sym_index(d, i, j)]);
    let Some(ch) = Cholesky::new(gm) else {
        return f64::NAN;
    };
    let li = ch.l().try_inverse().expect("Cholesky factor is invertible");
    let m = &li * tm * li.transpose();
    ((&m + m.transpose()) * 0.5).symmetric_eigenvalues().max()
}

/// Fraction of |B_R(x)| outside the mask, for every masked node x. The first
/// node below θ is an error.
fn check_theta(grid: &MetricGrid, mask: &[bool], radius: f64, theta: f64) -> Result<f64> {
    let mut worst = f64::INFINITY;
    let report = |n: usize, fraction: f64| VerifyError::Theta {
        node: n,
        index: grid.index(n),
        fraction,
        theta,
    };
    if grid.kind == MetricKind::FlatTorus {
        if grid.lengths.iter().any(|&l| radius > 0.5 * l) {
            return Err(crate::geometry::GeometryError::BallTooLarge { radius }.into());
        }
        // Translation-invariant ball: one offset stencil serves every node.
        let d = grid.dim;
        let reach: Vec<i64> = (0..d).map(|a| (radius / grid.spacing[a]).floor() as i64).collect();
        let mut offsets: Vec<Vec<i64>> = vec![vec![]];
        for a in 0..d {
            let mut next = Vec::new();
            for o in &offsets {
                for k in -reach[a]..=reach[a] {
                    let mut v = o.clone();
                    v.push(k);
                    next.push(v);
                }
            }
            offsets = next;
        }
        offsets.retain(|o| {
            let r2: f64 = o.iter().enumerate().map(|(a, &k)| (k as f64 * grid.spacing[a]).powi(2)).sum();
            r2 <= radius * radius
        });
        for n in 0..grid.len() {
            if !mask[n] {
                continue;
            }
            let idx = grid.index(n);
            let mut outside = 0usize;
            for o in &offsets {
                let j: Vec<usize> = (0..d)
                    .map(|a| (idx[a] as i64 + o[a]).rem_euclid(grid.shape[a] as i64) as usize)
                    .collect();
                if !mask[grid.node(&j)] {
                    outside += 1;
                }
            }
            let f = outside as f64 / offsets.len() as f64;
            if f < theta {
                return Err(report(n, f));
            }
            worst = worst.min(f);
        }
    } else {
        for n in 0..grid.len() {
            if !mask[n] {
                continue;
            }
            let dist = geodesic_distance(grid, n, radius)?;
            let total = ball_volume(grid, &dist, radius);
            let c = grid.cell_volume();
            let outside: f64 = (0..grid.len())
                .filter(|&m| dist[m] <= radius && !mask[m])
                .map(|m| grid.sqrt_det_g[m] * c)
                .sum();
            let f = outside / total;
            if f < theta {
                return Err(report(n, f));
            }
            worst = worst.min(f);
        }
    }
    Ok(worst)
}

/// Both sides of the gradient ABP estimate on the masked domain Ω:
/// sup_Ω|∇u|² against R²|B_2R(z₀)|^{−1/n}‖F″(u)|∇u|²‖_{Lⁿ(Ω∩B_2R(z₀))},
/// z₀ = argmax of |∇u|² over Ω and its boundary ring. C_emp = LHS/RHS.
pub fn abp_diagnostic(
    u: &ScalarField,
    phi: &PhiFamily,
    pot: &Potential,
    mask: &[bool],
    radius: f64,
    theta: f64,
    boundary_tol: f64,
) -> Result<VerifyReport> {
    let grid = &u.grid;
    if mask.len() != grid.len() {
        return Err(VerifyError::Config("mask length differs from the node count".into()));
    }
    if !(radius > 0.0 && theta > 0.0 && theta < 1.0) {
        return Err(VerifyError::Config(format!(
            "abp needs R > 0 and θ ∈ (0, 1) (R = {radius}, θ = {theta})"
        )));
    }
    if !mask.iter().any(|&m| m) {
        return Err(VerifyError::Config("empty domain mask".into()));
    }
    let min_fraction = check_theta(grid, mask, radius, theta)?;
    let k = Kinematics::new(u, phi)?;
    let ring: Vec<bool> = (0..grid.len())
        .map(|n| {
            !mask[n]
                && (0..grid.dim).any(|a| [-1, 1].iter().any(|&dir| mask[grid.neighbor(n, a, dir).0]))
        })
        .collect();
    let ring_max = (0..grid.len())
        .filter(|&n| ring[n])
        .map(|n| k.t[n].sqrt())
        .fold(0.0, f64::max);
    let closed = |n: usize| mask[n] || ring[n];
    let mut z0 = 0;
    let mut best = f64::NEG_INFINITY;
    for n in (0..grid.len()).filter(|&n| closed(n)) {
        if k.t[n] > best {
            best = k.t[n];
            z0 = n;
        }
    }
    let dist = geodesic_distance(grid, z0, 2.0 * radius)?;
    let vol_2r = ball_volume(grid, &dist, 2.0 * radius);
    let n = grid.dim as f64;
    let norm = integral_over(
        grid,
        |m| mask[m] && dist[m] <= 2.0 * radius,
        |m| (pot.d2f(u.values[m]) * k.t[m]).abs().powf(n),
    )
    .powf(1.0 / n);
    let rhs = radius * radius / vol_2r.powf(1.0 / n) * norm;
    let lhs = (0..grid.len()).filter(|&m| mask[m]).map(|m| k.t[m]).fold(0.0, f64::max);
    let ric_ok = ricci_min_eigenvalue(grid) >= -HYPOTHESIS_TOL;
    let decay = ring_max <= boundary_tol;
    let mut r = VerifyReport::new(TheoremTag::Abp, "domain");
    r.hypotheses_met = ric_ok && decay;
    r.set("lhs", lhs)
        .set("rhs", rhs)
        .set("c_emp", ratio(lhs, rhs))
        .set("z0_node", z0 as f64)
        .set("ball_volume_2r", vol_2r)
        .set("radius", radius)
        .set("theta", theta)
        .set("min_outside_fraction", min_fraction)
        .set("boundary_max_grad", ring_max)
        .set("boundary_tol", boundary_tol);
    if !decay {
        r.note(format!(
            "|∇u| = {ring_max:e} on the domain boundary exceeds {boundary_tol:e}: boundary decay unmet"
        ));
    }
    if !ric_ok {
        r.note("Ricci curvature has a negative eigenvalue");
    }
    Ok(r)
}
