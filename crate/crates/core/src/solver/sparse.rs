//! Compressed sparse rows, a direct solver backed by faer, and GCR.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use super::SolverError;

/// Square matrix in compressed sparse row form with sorted, unique columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicate entries are summed in insertion order.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        // Stable sort keeps the summation order of duplicates deterministic.
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Max absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut s = vec![0.0; self.n];
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                s[c] += v.abs();
            }
        }
        s.into_iter().fold(0.0, f64::max)
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>, SolverError> {
        let t: Vec<Triplet<usize, usize, f64>> = (0..self.n)
            .flat_map(|r| self.row(r).map(move |(c, v)| Triplet::new(r, c, v)))
            .collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &t)
            .map_err(|e| SolverError::Linear(format!("matrix assembly failed: {e:?}")))
    }
}

/// Sparse LU factorization.
pub struct DirectSolver {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl DirectSolver {
    pub fn factor(a: &CsrMatrix) -> Result<Self, SolverError> {
        faer::set_global_parallelism(faer::Par::Seq);
        let m = a.to_faer()?;
        let lu = m
            .sp_lu()
            .map_err(|e| SolverError::Singular(format!("sparse LU failed: {e:?}")))?;
        Ok(Self { lu, n: a.n })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SolverError> {
        let rhs = Col::<f64>::from_fn(self.n, |i| b[i]);
        let x = self.lu.solve(&rhs);
        let out: Vec<f64> = (0..self.n).map(|i| x[i]).collect();
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(SolverError::Singular("non-finite solution of the linear system".into()))
        }
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Col::<f64>::from_fn(self.n, |i| b[i]);
        let x = self.lu.solve_transpose(&rhs);
        (0..self.n).map(|i| x[i]).collect()
    }

    /// Hager–Higham estimate of ‖A⁻¹‖₁.
    pub fn inverse_norm_one_estimate(&self) -> f64 {
        inverse_norm_one_estimate(self)
    }
}

/// Actions of A⁻¹ and A⁻ᵀ.
pub trait InverseOperator {
    fn dim(&self) -> usize;
    fn apply(&self, b: &[f64]) -> Result<Vec<f64>, SolverError>;
    fn apply_transpose(&self, b: &[f64]) -> Result<Vec<f64>, SolverError>;
}

impl InverseOperator for DirectSolver {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, b: &[f64]) -> Result<Vec<f64>, SolverError> {
        self.solve(b)
    }

    fn apply_transpose(&self, b: &[f64]) -> Result<Vec<f64>, SolverError> {
        Ok(self.solve_transpose(b))
    }
}

/// Hager–Higham estimate of ‖A⁻¹‖₁ from solves with A and Aᵀ.
pub fn inverse_norm_one_estimate(op: &impl InverseOperator) -> f64 {
    let n = op.dim();
    let mut x = vec![1.0 / n as f64; n];
    let mut est = 0.0;
    for _ in 0..5 {
        let Ok(y) = op.apply(&x) else {
            return f64::INFINITY;
        };
        let new = y.iter().map(|v| v.abs()).sum::<f64>();
        let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
        let Ok(z) = op.apply_transpose(&xi) else {
            return f64::INFINITY;
        };
        let (j, zmax) = z
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bj, bm), (j, v)| if v.abs() > bm { (j, v.abs()) } else { (bj, bm) });
        let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        if new <= est || zmax <= zx {
            est = est.max(new);
            break;
        }
        est = new;
        x = vec![0.0; n];
        x[j] = 1.0;
    }
    est
}

/// Solver for the bordered matrix [J c; rᵀ 0] that never factors the dense
/// border.
///
/// J itself may be singular (a constant or translation null mode), so the
/// factored matrix is M = J + s·e_k e_kᵀ with k = argmax |r|. Writing
/// ν = s·x_k turns the system into M bordered by two columns, which is closed
/// by a 2×2 Schur complement.
pub struct BorderedSolver {
    lu: DirectSolver,
    n: usize,
    k: usize,
    s: f64,
    col: Vec<f64>,
    row: Vec<f64>,
    /// M⁻¹e_k, M⁻¹c, M⁻ᵀe_k, M⁻ᵀr.
    e: Vec<f64>,
    u: Vec<f64>,
    et: Vec<f64>,
    vt: Vec<f64>,
}

impl BorderedSolver {
    pub fn factor(j: &CsrMatrix, col: &[f64], row: &[f64]) -> Result<Self, SolverError> {
        let n = j.n;
        assert!(col.len() == n && row.len() == n);
        let k = row
            .iter()
            .enumerate()
            .fold((0, -1.0f64), |(bk, bm), (i, v)| if v.abs() > bm { (i, v.abs()) } else { (bk, bm) })
            .0;
        let s = (0..n).map(|r| j.get(r, r).abs()).fold(0.0, f64::max);
        let s = if s > 0.0 { s } else { 1.0 };
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(j.nnz() + 1);
        for r in 0..n {
            t.extend(j.row(r).map(|(c, v)| (r, c, v)));
        }
        t.push((k, k, s));
        let lu = DirectSolver::factor(&CsrMatrix::from_triplets(n, t))?;
        let mut ek = vec![0.0; n];
        ek[k] = 1.0;
        let e = lu.solve(&ek)?;
        let u = lu.solve(col)?;
        let et = lu.solve_transpose(&ek);
        let vt = lu.solve_transpose(row);
        Ok(Self {
            lu,
            n,
            k,
            s,
            col: col.to_vec(),
            row: row.to_vec(),
            e,
            u,
            et,
            vt,
        })
    }

    fn solve_with(
        &self,
        b: &[f64],
        transpose: bool,
    ) -> Result<Vec<f64>, SolverError> {
        let n = self.n;
        let (e, u, v) = if transpose {
            (&self.et, &self.vt, &self.col)
        } else {
            (&self.e, &self.u, &self.row)
        };
        let x0 = if transpose {
            self.lu.solve_transpose(&b[..n])
        } else {
            self.lu.solve(&b[..n])?
        };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let (k, s) = (self.k, self.s);
        let a11 = s * e[k] - 1.0;
        let a12 = -s * u[k];
        let a21 = dot(v, e);
        let a22 = -dot(v, u);
        let r1 = -s * x0[k];
        let r2 = b[n] - dot(v, &x0);
        let det = a11 * a22 - a12 * a21;
        let scale = (a11.abs() + a12.abs()) * (a21.abs() + a22.abs());
        if !(det.abs() > 1e-14 * scale) {
            return Err(SolverError::Singular("bordered Schur complement is singular".into()));
        }
        let nu = (r1 * a22 - a12 * r2) / det;
        let mu = (a11 * r2 - a21 * r1) / det;
        let mut out: Vec<f64> = (0..n).map(|i| x0[i] + nu * e[i] - mu * u[i]).collect();
        out.push(mu);
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(SolverError::Singular("non-finite solution of the bordered system".into()))
        }
    }

    /// Solves [J c; rᵀ 0][x; μ] = b.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SolverError> {
        self.solve_with(b, false)
    }

    /// Solves [Jᵀ r; cᵀ 0][x; μ] = b.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>, SolverError> {
        self.solve_with(b, true)
    }

    pub fn col(&self) -> &[f64] {
        &self.col
    }

    pub fn row(&self) -> &[f64] {
        &self.row
    }
}

impl InverseOperator for BorderedSolver {
    fn dim(&self) -> usize {
        self.n + 1
    }

    fn apply(&self, b: &[f64]) -> Result<Vec<f64>, SolverError> {
        self.solve(b)
    }

    fn apply_transpose(&self, b: &[f64]) -> Result<Vec<f64>, SolverError> {
        self.solve_transpose(b)
    }
}

/// Generalized conjugate residual iteration (restarted, unpreconditioned
/// apart from Jacobi scaling). Returns the iterate and its residual 2-norm.
pub fn gcr(a: &CsrMatrix, b: &[f64], rtol: f64, max_iter: usize, restart: usize) -> (Vec<f64>, f64) {
    let n = a.n;
    let diag: Vec<f64> = (0..n)
        .map(|r| {
            let d = a.get(r, r);
            if d != 0.0 { 1.0 / d } else { 1.0 }
        })
        .collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let bnorm = dot(b, b).sqrt().max(f64::MIN_POSITIVE);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut ps: Vec<Vec<f64>> = Vec::new();
    let mut aps: Vec<Vec<f64>> = Vec::new();
    let mut rnorm = bnorm;
    for _ in 0..max_iter {
        if rnorm <= rtol * bnorm {
            break;
        }
        let mut p: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r * d).collect();
        let mut ap = a.mul_vec(&p);
        for (q, aq) in ps.iter().zip(&aps) {
            let beta = dot(&ap, aq);
            for i in 0..n {
                p[i] -= beta * q[i];
                ap[i] -= beta * aq[i];
            }
        }
        let nap = dot(&ap, &ap).sqrt();
        if nap == 0.0 {
            break;
        }
        for i in 0..n {
            p[i] /= nap;
            ap[i] /= nap;
        }
        let alpha = dot(&r, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = dot(&r, &r).sqrt();
        ps.push(p);
        aps.push(ap);
        if ps.len() >= restart {
            ps.clear();
            aps.clear();
        }
    }
    (x, rnorm / bnorm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, -2.0 - shift));
            t.push((i, (i + 1) % n, 1.0));
            t.push((i, (i + n - 1) % n, 1.0));
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, 2.0), (0, 0, 0.5), (0, 1, -1.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 0), 1.5);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![0.5, 2.0]);
    }

    #[test]
    fn direct_and_gcr_agree() {
        let a = laplacian_1d(50, 0.3);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let lu = DirectSolver::factor(&a).unwrap();
        let x = lu.solve(&b).unwrap();
        let ax = a.mul_vec(&x);
        assert!(ax.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
        let (y, rel) = gcr(&a, &b, 1e-12, 500, 100);
        assert!(rel <= 1e-12);
        assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-9));
        let cond = a.norm_one() * lu.inverse_norm_one_estimate();
        assert!(cond > 1.0 && cond.is_finite());
    }

    #[test]
    fn bordered_solver_handles_singular_block() {
        // Periodic Laplacian has the constant null mode; border with the mean.
        let n = 40;
        let a = laplacian_1d(n, 0.0);
        let row = vec![1.0 / n as f64; n];
        let col = vec![1.0; n];
        let mut t = Vec::new();
        for r in 0..n {
            t.extend(a.row(r).map(|(c, v)| (r, c, v)));
            t.push((r, n, col[r]));
            t.push((n, r, row[r]));
        }
        let full = CsrMatrix::from_triplets(n + 1, t);
        let b: Vec<f64> = (0..=n).map(|i| (i as f64 * 0.71).cos()).collect();
        let bs = BorderedSolver::factor(&a, &col, &row).unwrap();
        let x = bs.solve(&b).unwrap();
        let r = full.mul_vec(&x);
        assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-10));
        let y = bs.solve_transpose(&b).unwrap();
        let mut ty = vec![0.0; n + 1];
        for r in 0..=n {
            for (c, v) in full.row(r) {
                ty[c] += v * y[r];
            }
        }
        assert!(ty.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-10));
        let direct = DirectSolver::factor(&full).unwrap().solve(&b).unwrap();
        assert!(x.iter().zip(&direct).all(|(p, q)| (p - q).abs() < 1e-9));
    }
}
