use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::curvature::{fd_christoffel, fd_ricci};
use super::{sym_index, sym_len, GeometryError};

/// Metric catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MetricKind {
    /// gᵢⱼ = δᵢⱼ, dim 1–3.
    FlatTorus,
    /// g = e^{2f}δ with f = a·sin(2πkx/Lx)·sin(2πly/Ly), dim 2.
    ConformalTorus { a: f64, k: f64, l: f64 },
    /// g = diag(r², r² sin²θ) on (θ, φ) ∈ (0, π) × [0, 2π).
    SphereLatLong { r: f64 },
}

impl MetricKind {
    pub fn tag(&self) -> &'static str {
        match self {
            MetricKind::FlatTorus => "flat-torus",
            MetricKind::ConformalTorus { .. } => "conformal-torus",
            MetricKind::SphereLatLong { .. } => "sphere-latlong",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            MetricKind::FlatTorus => vec![],
            MetricKind::ConformalTorus { a, k, l } => vec![*a, *k, *l],
            MetricKind::SphereLatLong { r } => vec![*r],
        }
    }

    /// Builds a catalog entry from its tag and positional parameters.
    pub fn from_tag(tag: &str, params: &[f64]) -> Result<Self, GeometryError> {
        let need = |n: usize| -> Result<(), GeometryError> {
            if params.len() == n {
                Ok(())
            } else {
                Err(GeometryError::Config(format!(
                    "{tag} expects {n} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        match tag {
            "flat-torus" => {
                need(0)?;
                Ok(MetricKind::FlatTorus)
            }
            "conformal-torus" => {
                need(3)?;
                Ok(MetricKind::ConformalTorus {
                    a: params[0],
                    k: params[1],
                    l: params[2],
                })
            }
            "sphere-latlong" => {
                need(1)?;
                Ok(MetricKind::SphereLatLong { r: params[0] })
            }
            other => Err(GeometryError::Config(format!(
                "unknown metric catalog tag '{other}'"
            ))),
        }
    }
}

/// Amplitude bound for the conformal factor.
pub const CONFORMAL_MAX_AMPLITUDE: f64 = 5.0;

/// Pointwise analytic metric data.
pub(crate) struct PointMetric {
    pub g: Vec<f64>,
    /// Signed √det g (odd under the cross-pole reflection on the sphere).
    pub sqrt_det: f64,
}

/// Structured periodic grid with an analytic metric.
///
/// Nodes are stored row-major with the last axis fastest. On the sphere axis 0 is
/// the polar angle θ with nodes at (j + ½)h and axis 1 the azimuth φ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricGrid {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub lengths: Vec<f64>,
    pub kind: MetricKind,
    pub spacing: Vec<f64>,
    strides: Vec<usize>,
    n_nodes: usize,
    /// Packed symmetric gᵢⱼ per node.
    pub g: Vec<f64>,
    pub g_inv: Vec<f64>,
    pub sqrt_det_g: Vec<f64>,
    /// Γᵏᵢⱼ per node, index `k*d*d + i*d + j`.
    pub christoffel: Vec<f64>,
    /// Packed symmetric Rᵢⱼ per node.
    pub ricci: Vec<f64>,
    /// True when Γ and Ric came from finite differences of the metric.
    pub curvature_from_fd: bool,
    /// Per axis: packed g^{ab} on the +½ face of every node.
    face_g_inv: Vec<Vec<f64>>,
    /// Per axis: √det g on the +½ face of every node (0 on closed faces).
    face_sqrt_det: Vec<Vec<f64>>,
    /// Per axis: false where the +½ face sits on a pole.
    face_open: Vec<Vec<bool>>,
    pub hash: String,
}

impl MetricGrid {
    pub fn build(
        kind: MetricKind,
        shape: &[usize],
        lengths: &[f64],
    ) -> Result<Arc<Self>, GeometryError> {
        let dim = shape.len();
        if !(1..=3).contains(&dim) {
            return Err(GeometryError::Config(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if lengths.len() != dim {
            return Err(GeometryError::Config(format!(
                "shape has {dim} axes but lengths has {}",
                lengths.len()
            )));
        }
        if let Some(n) = shape.iter().find(|&&n| n < 8) {
            return Err(GeometryError::Config(format!("shape entries must be >= 8, got {n}")));
        }
        if let Some(l) = lengths.iter().find(|&&l| !(l > 0.0) || !l.is_finite()) {
            return Err(GeometryError::Config(format!("lengths must be positive, got {l}")));
        }
        match &kind {
            MetricKind::FlatTorus => {}
            MetricKind::ConformalTorus { a, k, l } => {
                if dim != 2 {
                    return Err(GeometryError::Config("conformal-torus requires dim 2".into()));
                }
                if !(a.abs() < CONFORMAL_MAX_AMPLITUDE) {
                    return Err(GeometryError::Config(format!(
                        "conformal amplitude |a| must be < {CONFORMAL_MAX_AMPLITUDE}, got {a}"
                    )));
                }
                if !(k.is_finite() && l.is_finite()) || k.fract() != 0.0 || l.fract() != 0.0 {
                    return Err(GeometryError::Config(
                        "conformal wave numbers k, l must be integers".into(),
                    ));
                }
            }
            MetricKind::SphereLatLong { r } => {
                if dim != 2 {
                    return Err(GeometryError::Config("sphere-latlong requires dim 2".into()));
                }
                if !(*r > 0.0) {
                    return Err(GeometryError::Config(format!("sphere radius must be > 0, got {r}")));
                }
                if (lengths[0] - PI).abs() > 1e-12 || (lengths[1] - 2.0 * PI).abs() > 1e-12 {
                    return Err(GeometryError::Config(
                        "sphere-latlong lengths must be [π, 2π]".into(),
                    ));
                }
                if shape[1] % 2 != 0 {
                    return Err(GeometryError::Config(
                        "sphere-latlong needs an even number of azimuthal nodes".into(),
                    ));
                }
            }
        }
        let spacing: Vec<f64> = shape.iter().zip(lengths).map(|(&n, &l)| l / n as f64).collect();
        let mut strides = vec![1; dim];
        for a in (0..dim - 1).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        let n_nodes: usize = shape.iter().product();
        let mut grid = MetricGrid {
            dim,
            shape: shape.to_vec(),
            lengths: lengths.to_vec(),
            kind,
            spacing,
            strides,
            n_nodes,
            g: Vec::with_capacity(n_nodes * sym_len(dim)),
            g_inv: Vec::with_capacity(n_nodes * sym_len(dim)),
            sqrt_det_g: Vec::with_capacity(n_nodes),
            christoffel: Vec::with_capacity(n_nodes * dim * dim * dim),
            ricci: Vec::with_capacity(n_nodes * sym_len(dim)),
            curvature_from_fd: false,
            face_g_inv: vec![Vec::new(); dim],
            face_sqrt_det: vec![Vec::new(); dim],
            face_open: vec![Vec::new(); dim],
            hash: String::new(),
        };
        grid.fill_nodes()?;
        grid.fill_faces();
        grid.hash = grid.compute_hash();
        Ok(Arc::new(grid))
    }

    pub fn len(&self) -> usize {
        self.n_nodes
    }

    pub fn is_empty(&self) -> bool {
        self.n_nodes == 0
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.kind, MetricKind::SphereLatLong { .. })
    }

    pub fn is_flat(&self) -> bool {
        match self.kind {
            MetricKind::FlatTorus => true,
            MetricKind::ConformalTorus { a, .. } => a == 0.0,
            MetricKind::SphereLatLong { .. } => false,
        }
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Multi-index of node `n`.
    pub fn index(&self, n: usize) -> Vec<usize> {
        (0..self.dim)
            .map(|a| (n / self.strides[a]) % self.shape[a])
            .collect()
    }

    pub fn node(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Coordinate of node `n` along `axis`.
    pub fn coord(&self, n: usize, axis: usize) -> f64 {
        let i = (n / self.strides[axis]) % self.shape[axis];
        self.axis_coord(axis, i as f64)
    }

    fn axis_coord(&self, axis: usize, i: f64) -> f64 {
        if self.is_sphere() && axis == 0 {
            (i + 0.5) * self.spacing[0]
        } else {
            i * self.spacing[axis]
        }
    }

    pub fn coords(&self, n: usize) -> Vec<f64> {
        (0..self.dim).map(|a| self.coord(n, a)).collect()
    }

    /// Neighbor of `n` one step along `axis` (`dir` = ±1).
    ///
    /// The flag is true when the step crosses a pole; the returned node then sits
    /// half a turn away in φ and components carrying an odd number of θ indices
    /// change sign.
    pub fn neighbor(&self, n: usize, axis: usize, dir: i32) -> (usize, bool) {
        let na = self.shape[axis];
        let i = (n / self.strides[axis]) % na;
        let base = n - i * self.strides[axis];
        if self.is_sphere() && axis == 0 {
            let crosses = (dir < 0 && i == 0) || (dir > 0 && i == na - 1);
            if crosses {
                let nphi = self.shape[1];
                let k = n % nphi;
                let k2 = (k + nphi / 2) % nphi;
                return (n - k + k2, true);
            }
        }
        let j = (i as i64 + dir as i64).rem_euclid(na as i64) as usize;
        (base + j * self.strides[axis], false)
    }

    /// Whether the +½ face of `n` along `axis` carries flux.
    pub fn face_open(&self, n: usize, axis: usize) -> bool {
        self.face_open[axis][n]
    }

    /// The node whose +½ face is the −½ face of `n`, or `None` at a pole.
    pub fn minus_face_owner(&self, n: usize, axis: usize) -> Option<usize> {
        let (m, flipped) = self.neighbor(n, axis, -1);
        (!flipped).then_some(m)
    }

    pub fn face_g_inv(&self, n: usize, axis: usize) -> &[f64] {
        let s = sym_len(self.dim);
        &self.face_g_inv[axis][n * s..(n + 1) * s]
    }

    pub fn face_sqrt_det(&self, n: usize, axis: usize) -> f64 {
        self.face_sqrt_det[axis][n]
    }

    pub fn g_at(&self, n: usize) -> &[f64] {
        let s = sym_len(self.dim);
        &self.g[n * s..(n + 1) * s]
    }

    pub fn g_inv_at(&self, n: usize) -> &[f64] {
        let s = sym_len(self.dim);
        &self.g_inv[n * s..(n + 1) * s]
    }

    pub fn ricci_at(&self, n: usize) -> &[f64] {
        let s = sym_len(self.dim);
        &self.ricci[n * s..(n + 1) * s]
    }

    /// Γᵏᵢⱼ at node `n`.
    pub fn gamma(&self, n: usize, k: usize, i: usize, j: usize) -> f64 {
        let d = self.dim;
        self.christoffel[n * d * d * d + k * d * d + i * d + j]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Quadrature weight √det g · cell volume of every node.
    pub fn volume_weights(&self) -> Vec<f64> {
        let c = self.cell_volume();
        self.sqrt_det_g.iter().map(|s| s * c).collect()
    }

    pub fn total_volume(&self) -> f64 {
        self.volume_weights().iter().sum()
    }

    /// Smallest spacing in arc length, used as the grid scale h.
    pub fn h(&self) -> f64 {
        match self.kind {
            MetricKind::SphereLatLong { r } => r * self.spacing.iter().cloned().fold(f64::INFINITY, f64::min),
            _ => self.spacing.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }

    /// Analytic metric at a coordinate point.
    pub(crate) fn metric_at(kind: &MetricKind, lengths: &[f64], x: &[f64]) -> PointMetric {
        let dim = x.len();
        match kind {
            MetricKind::FlatTorus => {
                let mut g = vec![0.0; sym_len(dim)];
                for i in 0..dim {
                    g[sym_index(dim, i, i)] = 1.0;
                }
                PointMetric { g, sqrt_det: 1.0 }
            }
            MetricKind::ConformalTorus { .. } => {
                let e = (2.0 * conformal_f(kind, lengths, x)).exp();
                PointMetric {
                    g: vec![e, 0.0, e],
                    sqrt_det: e,
                }
            }
            MetricKind::SphereLatLong { r } => {
                let s = x[0].sin();
                PointMetric {
                    g: vec![r * r, 0.0, r * r * s * s],
                    sqrt_det: r * r * s,
                }
            }
        }
    }

    fn fill_nodes(&mut self) -> Result<(), GeometryError> {
        let dim = self.dim;
        let s = sym_len(dim);
        let fd = matches!(self.kind, MetricKind::ConformalTorus { a, .. } if a != 0.0);
        self.curvature_from_fd = fd;
        for n in 0..self.n_nodes {
            let x = self.coords(n);
            let pm = Self::metric_at(&self.kind, &self.lengths, &x);
            let full = unpack(dim, &pm.g);
            let chol = full.clone().cholesky();
            let Some(chol) = chol else {
                return Err(GeometryError::NotPositiveDefinite {
                    node: n,
                    index: self.index(n),
                });
            };
            let inv = chol.inverse();
            self.g.extend_from_slice(&pm.g);
            for i in 0..dim {
                for j in i..dim {
                    self.g_inv.push(inv[(i, j)]);
                }
            }
            debug_assert_eq!(self.g_inv.len(), (n + 1) * s);
            self.sqrt_det_g.push(pm.sqrt_det.abs());
            let (gamma, ric) = if fd {
                let kind = self.kind.clone();
                let lengths = self.lengths.clone();
                let metric = move |y: &[f64]| Self::metric_at(&kind, &lengths, y).g;
                let step = self.fd_step();
                (fd_christoffel(&metric, &x, step), fd_ricci(&metric, &x, step))
            } else {
                self.analytic_curvature(&x)
            };
            self.christoffel.extend_from_slice(&gamma);
            self.ricci.extend_from_slice(&ric);
        }
        Ok(())
    }

    /// Step for the fourth-order metric differences, a fixed fraction of the
    /// shortest wavelength of the conformal factor.
    fn fd_step(&self) -> f64 {
        match self.kind {
            MetricKind::ConformalTorus { k, l, .. } => {
                let wx = self.lengths[0] / (2.0 * PI * k.abs().max(1.0));
                let wy = self.lengths[1] / (2.0 * PI * l.abs().max(1.0));
                2e-3 * wx.min(wy)
            }
            _ => 1e-3,
        }
    }

    fn analytic_curvature(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let mut gamma = vec![0.0; d * d * d];
        let mut ric = vec![0.0; sym_len(d)];
        if let MetricKind::SphereLatLong { .. } = self.kind {
            let (s, c) = x[0].sin_cos();
            // Γ^θ_φφ = −sinθ cosθ, Γ^φ_θφ = Γ^φ_φθ = cotθ
            gamma[3] = -s * c;
            gamma[5] = c / s;
            gamma[6] = c / s;
            // Ric = g / r²
            ric[0] = 1.0;
            ric[2] = s * s;
        }
        (gamma, ric)
    }

    fn fill_faces(&mut self) {
        let dim = self.dim;
        for axis in 0..dim {
            let mut ginv = Vec::with_capacity(self.n_nodes * sym_len(dim));
            let mut sq = Vec::with_capacity(self.n_nodes);
            let mut open = Vec::with_capacity(self.n_nodes);
            for n in 0..self.n_nodes {
                let mut x = self.coords(n);
                x[axis] += 0.5 * self.spacing[axis];
                let pole = self.is_sphere()
                    && axis == 0
                    && (n / self.strides[0]) % self.shape[0] == self.shape[0] - 1;
                if pole {
                    ginv.extend(std::iter::repeat_n(0.0, sym_len(dim)));
                    sq.push(0.0);
                    open.push(false);
                    continue;
                }
                let pm = Self::metric_at(&self.kind, &self.lengths, &x);
                let inv = unpack(dim, &pm.g)
                    .try_inverse()
                    .expect("face metric is positive definite where nodes are");
                for i in 0..dim {
                    for j in i..dim {
                        ginv.push(inv[(i, j)]);
                    }
                }
                sq.push(pm.sqrt_det.abs());
                open.push(true);
            }
            self.face_g_inv[axis] = ginv;
            self.face_sqrt_det[axis] = sq;
            self.face_open[axis] = open;
        }
    }

    fn compute_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.kind.tag().as_bytes());
        for p in self.kind.params() {
            h.update(p.to_le_bytes());
        }
        for s in &self.shape {
            h.update((*s as u64).to_le_bytes());
        }
        for l in &self.lengths {
            h.update(l.to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }

    /// Same catalog entry with every axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Arc<Self>, GeometryError> {
        let shape: Vec<usize> = self.shape.iter().map(|n| n * factor).collect();
        Self::build(self.kind.clone(), &shape, &self.lengths)
    }
}

pub(crate) fn conformal_f(kind: &MetricKind, lengths: &[f64], x: &[f64]) -> f64 {
    match kind {
        MetricKind::ConformalTorus { a, k, l } => {
            a * (2.0 * PI * k * x[0] / lengths[0]).sin() * (2.0 * PI * l * x[1] / lengths[1]).sin()
        }
        _ => 0.0,
    }
}

/// Flat Laplacian Δ₀f of the conformal exponent (closed form).
pub fn conformal_flat_laplacian(kind: &MetricKind, lengths: &[f64], x: &[f64]) -> f64 {
    match kind {
        MetricKind::ConformalTorus { k, l, .. } => {
            let wx = 2.0 * PI * k / lengths[0];
            let wy = 2.0 * PI * l / lengths[1];
            -(wx * wx + wy * wy) * conformal_f(kind, lengths, x)
        }
        _ => 0.0,
    }
}

pub(crate) fn unpack(dim: usize, packed: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| packed[sym_index(dim, i, j)])
}
