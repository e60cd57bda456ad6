//! Second-order covariant difference operators.

use super::{sym_index, sym_len, MetricGrid, ScalarField, SymTensorField, Variance, VectorField};

/// True when a component with these indices changes sign across a pole.
pub fn component_is_odd(grid: &MetricGrid, indices: &[usize]) -> bool {
    grid.is_sphere() && indices.iter().filter(|&&i| i == 0).count() % 2 == 1
}

/// Value of component `get` at the neighbor of `n`, with the cross-pole sign.
#[inline]
fn neighbor_value(
    grid: &MetricGrid,
    get: &impl Fn(usize) -> f64,
    n: usize,
    axis: usize,
    dir: i32,
    odd: bool,
) -> f64 {
    let (m, flipped) = grid.neighbor(n, axis, dir);
    if flipped && odd {
        -get(m)
    } else {
        get(m)
    }
}

/// Central difference of a nodal component along `axis` at node `n`.
#[inline]
pub fn central_diff(
    grid: &MetricGrid,
    get: &impl Fn(usize) -> f64,
    n: usize,
    axis: usize,
    odd: bool,
) -> f64 {
    let p = neighbor_value(grid, get, n, axis, 1, odd);
    let m = neighbor_value(grid, get, n, axis, -1, odd);
    (p - m) / (2.0 * grid.spacing[axis])
}

/// ∂ᵢu by central differences (covariant components).
pub fn covariant_gradient(u: &ScalarField) -> VectorField {
    let grid = &u.grid;
    let d = grid.dim;
    let get = |m: usize| u.values[m];
    let mut out = Vec::with_capacity(grid.len() * d);
    for n in 0..grid.len() {
        for a in 0..d {
            out.push(central_diff(grid, &get, n, a, false));
        }
    }
    VectorField::new(grid.clone(), out, Variance::Covariant)
}

/// ∇ᵢ∇ⱼu = ∂ᵢ∂ⱼu − Γᵏᵢⱼ∂ₖu. Mixed derivatives difference the later axis first.
pub fn covariant_hessian(u: &ScalarField) -> SymTensorField {
    let grid = &u.grid;
    let d = grid.dim;
    let get = |m: usize| u.values[m];
    let mut out = Vec::with_capacity(grid.len() * sym_len(d));
    for n in 0..grid.len() {
        let grad: Vec<f64> = (0..d).map(|a| central_diff(grid, &get, n, a, false)).collect();
        for i in 0..d {
            for j in i..d {
                let second = if i == j {
                    let p = neighbor_value(grid, &get, n, i, 1, false);
                    let m = neighbor_value(grid, &get, n, i, -1, false);
                    let h = grid.spacing[i];
                    (p - 2.0 * u.values[n] + m) / (h * h)
                } else {
                    let inner = |m: usize| central_diff(grid, &get, m, j, false);
                    central_diff(grid, &inner, n, i, component_is_odd(grid, &[j]))
                };
                let corr: f64 = (0..d).map(|k| grid.gamma(n, k, i, j) * grad[k]).sum();
                out.push(second - corr);
            }
        }
    }
    SymTensorField::new(grid.clone(), out, Variance::Covariant)
}

/// (1/√g)∂ₖ(√g Vᵏ) in flux form: face flux √g_f·(Vᵏₙ + Vᵏₘ)/2, zero on pole faces.
pub fn divergence(v: &VectorField) -> ScalarField {
    let v = v.with_variance(Variance::Contravariant);
    let grid = &v.grid;
    let d = grid.dim;
    let flux = |n: usize, a: usize| -> f64 {
        if !grid.face_open(n, a) {
            return 0.0;
        }
        let (m, _) = grid.neighbor(n, a, 1);
        grid.face_sqrt_det(n, a) * 0.5 * (v.component(n, a) + v.component(m, a))
    };
    assemble_flux_divergence(grid, flux, d)
}

fn assemble_flux_divergence(
    grid: &std::sync::Arc<MetricGrid>,
    flux: impl Fn(usize, usize) -> f64,
    d: usize,
) -> ScalarField {
    let n_nodes = grid.len();
    let mut faces: Vec<Vec<f64>> = Vec::with_capacity(d);
    for a in 0..d {
        faces.push((0..n_nodes).map(|n| flux(n, a)).collect());
    }
    let values = (0..n_nodes)
        .map(|n| {
            let mut s = 0.0;
            for (a, fa) in faces.iter().enumerate() {
                let minus = grid.minus_face_owner(n, a).map_or(0.0, |m| fa[m]);
                s += (fa[n] - minus) / grid.spacing[a];
            }
            s / grid.sqrt_det_g[n]
        })
        .collect();
    ScalarField::new(grid.clone(), values)
}

/// Covariant gradient on the +½ face of `n` along `axis`: compact difference
/// along the axis, average of the two nodal central differences across it.
#[inline]
pub fn face_gradient(grid: &MetricGrid, u: &[f64], n: usize, axis: usize, out: &mut [f64]) {
    let (m, _) = grid.neighbor(n, axis, 1);
    let get = |k: usize| u[k];
    for (b, o) in out.iter_mut().enumerate().take(grid.dim) {
        *o = if b == axis {
            (u[m] - u[n]) / grid.spacing[axis]
        } else {
            0.5 * (central_diff(grid, &get, n, b, false) + central_diff(grid, &get, m, b, false))
        };
    }
}

/// Laplace–Beltrami operator in compact flux form.
pub fn laplace_beltrami(u: &ScalarField) -> ScalarField {
    let grid = &u.grid;
    let d = grid.dim;
    let flux = |n: usize, a: usize| -> f64 {
        if !grid.face_open(n, a) {
            return 0.0;
        }
        let mut du = [0.0; 3];
        face_gradient(grid, &u.values, n, a, &mut du[..d]);
        let gi = grid.face_g_inv(n, a);
        let s: f64 = (0..d).map(|b| gi[sym_index(d, a, b)] * du[b]).sum();
        grid.face_sqrt_det(n, a) * s
    };
    assemble_flux_divergence(grid, flux, d)
}

/// Ric(V, V) = RᵢⱼVⁱVʲ.
pub fn ricci_quadratic(v: &VectorField) -> ScalarField {
    let v = v.with_variance(Variance::Contravariant);
    let grid = &v.grid;
    let ric = SymTensorField::new(grid.clone(), grid.ricci.clone(), Variance::Covariant);
    ric.quadratic(&v)
}

/// ∫ f dμ with the nodal quadrature √g·cell volume, summed in node order.
pub fn volume_integral(f: &ScalarField) -> f64 {
    let c = f.grid.cell_volume();
    f.values
        .iter()
        .zip(&f.grid.sqrt_det_g)
        .map(|(v, s)| v * s * c)
        .sum()
}

/// Max over nodes and components of |∂ₖgᵢⱼ − Γˡₖᵢgₗⱼ − Γˡₖⱼgᵢₗ| with differenced nodal g.
pub fn metric_compatibility_defect(grid: &MetricGrid) -> f64 {
    let d = grid.dim;
    let s = sym_len(d);
    let mut worst: f64 = 0.0;
    for n in 0..grid.len() {
        for k in 0..d {
            for i in 0..d {
                for j in i..d {
                    let c = sym_index(d, i, j);
                    let get = |m: usize| grid.g[m * s + c];
                    let dg = central_diff(grid, &get, n, k, component_is_odd(grid, &[i, j]));
                    let g = grid.g_at(n);
                    let mut corr = 0.0;
                    for l in 0..d {
                        corr += grid.gamma(n, l, k, i) * g[sym_index(d, l, j)]
                            + grid.gamma(n, l, k, j) * g[sym_index(d, i, l)];
                    }
                    worst = worst.max((dg - corr).abs());
                }
            }
        }
    }
    worst
}

/// Ricci tensor from differences of the nodal metric alone.
///
/// In 2D (both catalogs are orthogonal there) this is K·g with the Gauss
/// curvature K = −(EG)^{−½}[∂₁(∂₁√G/√E) + ∂₂(∂₂√E/√G)] in compact form; √G is
/// odd across the poles. In 3D the Christoffel symbols and then the Ricci tensor
/// are formed by central differences.
pub fn discrete_ricci(grid: &std::sync::Arc<MetricGrid>) -> SymTensorField {
    let d = grid.dim;
    let s = sym_len(d);
    let n_nodes = grid.len();
    let mut out = vec![0.0; n_nodes * s];
    match d {
        1 => {}
        2 => {
            let se: Vec<f64> = (0..n_nodes).map(|n| grid.g_at(n)[0].sqrt()).collect();
            let sg: Vec<f64> = (0..n_nodes).map(|n| grid.g_at(n)[2].sqrt()).collect();
            let (h0, h1) = (grid.spacing[0], grid.spacing[1]);
            for n in 0..n_nodes {
                let nb = |axis: usize, dir: i32| -> (f64, f64) {
                    let (m, flipped) = grid.neighbor(n, axis, dir);
                    let sign = if flipped { -1.0 } else { 1.0 };
                    (se[m], sign * sg[m])
                };
                let (ep, gp) = nb(0, 1);
                let (em, gm) = nb(0, -1);
                let t0 = ((gp - sg[n]) / (0.5 * (ep + se[n])) - (sg[n] - gm) / (0.5 * (em + se[n])))
                    / (h0 * h0);
                let (ep, gp) = nb(1, 1);
                let (em, gm) = nb(1, -1);
                let t1 = ((ep - se[n]) / (0.5 * (gp + sg[n])) - (se[n] - em) / (0.5 * (gm + sg[n])))
                    / (h1 * h1);
                let k = -(t0 + t1) / (se[n] * sg[n]);
                let g = grid.g_at(n);
                for c in 0..s {
                    out[n * s + c] = k * g[c];
                }
            }
        }
        _ => {
            let gamma = nodal_christoffel(grid);
            let dd = d * d * d;
            for n in 0..n_nodes {
                let gm = |k: usize, i: usize, j: usize| gamma[n * dd + k * d * d + i * d + j];
                for i in 0..d {
                    for j in i..d {
                        let mut r = 0.0;
                        for k in 0..d {
                            let a = |m: usize| gamma[m * dd + k * d * d + i * d + j];
                            let b = |m: usize| gamma[m * dd + k * d * d + i * d + k];
                            r += central_diff(grid, &a, n, k, false)
                                - central_diff(grid, &b, n, j, false);
                            for l in 0..d {
                                r += gm(k, k, l) * gm(l, i, j) - gm(k, j, l) * gm(l, i, k);
                            }
                        }
                        out[n * s + sym_index(d, i, j)] = r;
                    }
                }
            }
        }
    }
    SymTensorField::new(grid.clone(), out, Variance::Covariant)
}

fn nodal_christoffel(grid: &MetricGrid) -> Vec<f64> {
    let d = grid.dim;
    let s = sym_len(d);
    let mut out = vec![0.0; grid.len() * d * d * d];
    for n in 0..grid.len() {
        let dg = |l: usize, i: usize, j: usize| {
            let c = sym_index(d, i, j);
            let get = |m: usize| grid.g[m * s + c];
            central_diff(grid, &get, n, l, false)
        };
        let gi = grid.g_inv_at(n);
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut v = 0.0;
                    for l in 0..d {
                        v += gi[sym_index(d, k, l)] * (dg(i, j, l) + dg(j, i, l) - dg(l, i, j));
                    }
                    out[n * d * d * d + k * d * d + i * d + j] = 0.5 * v;
                }
            }
        }
    }
    out
}
