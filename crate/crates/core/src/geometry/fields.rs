use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{sym_index, sym_len, MetricGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variance {
    Covariant,
    Contravariant,
}

#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<MetricGrid>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<MetricGrid>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "one value per node");
        Self { grid, values }
    }

    pub fn constant(grid: &Arc<MetricGrid>, c: f64) -> Self {
        Self::new(grid.clone(), vec![c; grid.len()])
    }

    /// Samples `f` at node coordinates.
    pub fn from_fn(grid: &Arc<MetricGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|n| f(&grid.coords(n))).collect();
        Self::new(grid.clone(), values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn oscillation(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }
}

#[derive(Debug, Clone)]
pub struct VectorField {
    pub grid: Arc<MetricGrid>,
    pub values: Vec<f64>,
    pub variance: Variance,
}

impl VectorField {
    pub fn new(grid: Arc<MetricGrid>, values: Vec<f64>, variance: Variance) -> Self {
        assert_eq!(values.len(), grid.len() * grid.dim, "dim values per node");
        Self {
            grid,
            values,
            variance,
        }
    }

    pub fn zeros(grid: &Arc<MetricGrid>, variance: Variance) -> Self {
        Self::new(grid.clone(), vec![0.0; grid.len() * grid.dim], variance)
    }

    pub fn at(&self, n: usize) -> &[f64] {
        let d = self.grid.dim;
        &self.values[n * d..(n + 1) * d]
    }

    pub fn component(&self, n: usize, i: usize) -> f64 {
        self.values[n * self.grid.dim + i]
    }

    /// Index raised or lowered with the node metric.
    pub fn with_variance(&self, variance: Variance) -> Self {
        if variance == self.variance {
            return self.clone();
        }
        let grid = &self.grid;
        let d = grid.dim;
        let mut out = vec![0.0; self.values.len()];
        for n in 0..grid.len() {
            let m = match variance {
                Variance::Contravariant => grid.g_inv_at(n),
                Variance::Covariant => grid.g_at(n),
            };
            let v = self.at(n);
            for i in 0..d {
                out[n * d + i] = (0..d).map(|j| m[sym_index(d, i, j)] * v[j]).sum();
            }
        }
        Self::new(grid.clone(), out, variance)
    }

    /// |V|²_g per node.
    pub fn norm2(&self) -> ScalarField {
        let grid = &self.grid;
        let d = grid.dim;
        let values = (0..grid.len())
            .map(|n| {
                let m = match self.variance {
                    Variance::Covariant => grid.g_inv_at(n),
                    Variance::Contravariant => grid.g_at(n),
                };
                let v = self.at(n);
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        s += m[sym_index(d, i, j)] * v[i] * v[j];
                    }
                }
                s
            })
            .collect();
        ScalarField::new(grid.clone(), values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct SymTensorField {
    pub grid: Arc<MetricGrid>,
    pub values: Vec<f64>,
    pub variance: Variance,
}

impl SymTensorField {
    pub fn new(grid: Arc<MetricGrid>, values: Vec<f64>, variance: Variance) -> Self {
        assert_eq!(values.len(), grid.len() * sym_len(grid.dim), "packed values per node");
        Self {
            grid,
            values,
            variance,
        }
    }

    pub fn at(&self, n: usize) -> &[f64] {
        let s = sym_len(self.grid.dim);
        &self.values[n * s..(n + 1) * s]
    }

    pub fn get(&self, n: usize, i: usize, j: usize) -> f64 {
        let d = self.grid.dim;
        self.values[n * sym_len(d) + sym_index(d, i, j)]
    }

    /// T(V, V) per node.
    pub fn quadratic(&self, v: &VectorField) -> ScalarField {
        let grid = &self.grid;
        let d = grid.dim;
        let values = (0..grid.len())
            .map(|n| {
                let t = self.at(n);
                let x = v.at(n);
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        s += t[sym_index(d, i, j)] * x[i] * x[j];
                    }
                }
                s
            })
            .collect();
        ScalarField::new(grid.clone(), values)
    }

    /// |T|²_g = g^{ik}g^{jl}TᵢⱼTₖₗ for a covariant tensor.
    pub fn norm2(&self) -> ScalarField {
        let grid = &self.grid;
        let d = grid.dim;
        let values = (0..grid.len())
            .map(|n| {
                let t = self.at(n);
                let m = match self.variance {
                    Variance::Covariant => grid.g_inv_at(n),
                    Variance::Contravariant => grid.g_at(n),
                };
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        for k in 0..d {
                            for l in 0..d {
                                s += m[sym_index(d, i, k)]
                                    * m[sym_index(d, j, l)]
                                    * t[sym_index(d, i, j)]
                                    * t[sym_index(d, k, l)];
                            }
                        }
                    }
                }
                s
            })
            .collect();
        ScalarField::new(grid.clone(), values)
    }

    /// g^{ij}Tᵢⱼ for a covariant tensor.
    pub fn trace(&self) -> ScalarField {
        let grid = &self.grid;
        let d = grid.dim;
        let values = (0..grid.len())
            .map(|n| {
                let t = self.at(n);
                let m = grid.g_inv_at(n);
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        s += m[sym_index(d, i, j)] * t[sym_index(d, i, j)];
                    }
                }
                s
            })
            .collect();
        ScalarField::new(grid.clone(), values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
