//! Christoffel symbols and Ricci tensor by fourth-order differences of a metric.

use super::grid::unpack;
use super::{sym_index, sym_len};

fn d4<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x: &[f64], axis: usize, step: f64) -> Vec<f64> {
    let at = |k: f64| {
        let mut y = x.to_vec();
        y[axis] += k * step;
        f(&y)
    };
    let (p2, p1, m1, m2) = (at(2.0), at(1.0), at(-1.0), at(-2.0));
    (0..p1.len())
        .map(|i| (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * step))
        .collect()
}

/// Γᵏᵢⱼ (index `k*d*d + i*d + j`) of a packed metric field at `x`.
pub fn fd_christoffel<F: Fn(&[f64]) -> Vec<f64>>(metric: &F, x: &[f64], step: f64) -> Vec<f64> {
    let d = x.len();
    let g = metric(x);
    let ginv = unpack(d, &g).try_inverse().expect("metric is invertible");
    let dg: Vec<Vec<f64>> = (0..d).map(|a| d4(metric, x, a, step)).collect();
    let dgc = |l: usize, i: usize, j: usize| dg[l][sym_index(d, i, j)];
    let mut gamma = vec![0.0; d * d * d];
    for k in 0..d {
        for i in 0..d {
            for j in i..d {
                let mut s = 0.0;
                for l in 0..d {
                    s += ginv[(k, l)] * (dgc(i, j, l) + dgc(j, i, l) - dgc(l, i, j));
                }
                gamma[k * d * d + i * d + j] = 0.5 * s;
                gamma[k * d * d + j * d + i] = 0.5 * s;
            }
        }
    }
    gamma
}

/// Packed Rᵢⱼ = ∂ₖΓᵏᵢⱼ − ∂ⱼΓᵏᵢₖ + ΓᵏₖₗΓˡᵢⱼ − ΓᵏⱼₗΓˡᵢₖ at `x`.
pub fn fd_ricci<F: Fn(&[f64]) -> Vec<f64>>(metric: &F, x: &[f64], step: f64) -> Vec<f64> {
    let d = x.len();
    let gamma_at = |y: &[f64]| fd_christoffel(metric, y, step);
    let gm = gamma_at(x);
    let dgm: Vec<Vec<f64>> = (0..d).map(|a| d4(&gamma_at, x, a, step)).collect();
    let g = |k: usize, i: usize, j: usize| gm[k * d * d + i * d + j];
    let dg = |a: usize, k: usize, i: usize, j: usize| dgm[a][k * d * d + i * d + j];
    let mut ric = vec![0.0; sym_len(d)];
    for i in 0..d {
        for j in i..d {
            let mut r = 0.0;
            for k in 0..d {
                r += dg(k, k, i, j) - dg(j, k, i, k);
                for l in 0..d {
                    r += g(k, k, l) * g(l, i, j) - g(k, j, l) * g(l, i, k);
                }
            }
            ric[sym_index(d, i, j)] = r;
        }
    }
    // The two index orders of the derivative term differ by rounding only.
    ric
}
