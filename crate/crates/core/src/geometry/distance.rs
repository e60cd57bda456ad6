//! Approximate geodesic distances for ball-based diagnostics.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::grid::{unpack, MetricGrid};
use super::{GeometryError, MetricKind};

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Distance from node `center` to every node, and an error when a ball of
/// radius `radius` would wrap around the chart.
///
/// Flat tori use the periodic coordinate distance, the sphere the great-circle
/// distance, and the conformal torus Dijkstra over the grid graph with
/// axis, diagonal and knight-move edges weighted by their metric length.
pub fn geodesic_distance(
    grid: &MetricGrid,
    center: usize,
    radius: f64,
) -> Result<Vec<f64>, GeometryError> {
    match grid.kind {
        MetricKind::FlatTorus => {
            if grid.lengths.iter().any(|&l| radius > 0.5 * l) {
                return Err(GeometryError::BallTooLarge { radius });
            }
            let c = grid.coords(center);
            Ok((0..grid.len())
                .map(|n| {
                    let x = grid.coords(n);
                    (0..grid.dim)
                        .map(|a| {
                            let l = grid.lengths[a];
                            let mut dx = (x[a] - c[a]).rem_euclid(l);
                            if dx > 0.5 * l {
                                dx = l - dx;
                            }
                            dx * dx
                        })
                        .sum::<f64>()
                        .sqrt()
                })
                .collect())
        }
        MetricKind::SphereLatLong { r } => {
            if radius >= std::f64::consts::PI * r {
                return Err(GeometryError::BallTooLarge { radius });
            }
            let c = grid.coords(center);
            let unit = |x: &[f64]| {
                let (st, ct) = x[0].sin_cos();
                let (sp, cp) = x[1].sin_cos();
                [st * cp, st * sp, ct]
            };
            let cu = unit(&c);
            Ok((0..grid.len())
                .map(|n| {
                    let xu = unit(&grid.coords(n));
                    let dot: f64 = (0..3).map(|i| xu[i] * cu[i]).sum();
                    r * dot.clamp(-1.0, 1.0).acos()
                })
                .collect())
        }
        MetricKind::ConformalTorus { .. } => {
            let dist = dijkstra(grid, center);
            // A ball wraps when it reaches the half-period line on any axis.
            let c = grid.index(center);
            for n in 0..grid.len() {
                if dist[n] <= radius {
                    let idx = grid.index(n);
                    for a in 0..grid.dim {
                        let na = grid.shape[a];
                        let off = (idx[a] + na - c[a]) % na;
                        if off == na / 2 {
                            return Err(GeometryError::BallTooLarge { radius });
                        }
                    }
                }
            }
            Ok(dist)
        }
    }
}

fn dijkstra(grid: &MetricGrid, center: usize) -> Vec<f64> {
    let steps: &[(i64, i64)] = &[
        (1, 0),
        (-1, 0),
        (0, 1),
        (0, -1),
        (1, 1),
        (1, -1),
        (-1, 1),
        (-1, -1),
        (2, 1),
        (2, -1),
        (-2, 1),
        (-2, -1),
        (1, 2),
        (1, -2),
        (-1, 2),
        (-1, -2),
    ];
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut heap = BinaryHeap::new();
    dist[center] = 0.0;
    heap.push(Item(0.0, center));
    while let Some(Item(d, n)) = heap.pop() {
        if d > dist[n] {
            continue;
        }
        let idx = grid.index(n);
        let x = grid.coords(n);
        for &(di, dj) in steps {
            let i = (idx[0] as i64 + di).rem_euclid(grid.shape[0] as i64) as usize;
            let j = (idx[1] as i64 + dj).rem_euclid(grid.shape[1] as i64) as usize;
            let m = grid.node(&[i, j]);
            let dx = [di as f64 * grid.spacing[0], dj as f64 * grid.spacing[1]];
            let mid = [x[0] + 0.5 * dx[0], x[1] + 0.5 * dx[1]];
            let g = unpack(2, &MetricGrid::metric_at(&grid.kind, &grid.lengths, &mid).g);
            let len = (g[(0, 0)] * dx[0] * dx[0]
                + 2.0 * g[(0, 1)] * dx[0] * dx[1]
                + g[(1, 1)] * dx[1] * dx[1])
                .sqrt();
            let nd = d + len;
            if nd < dist[m] {
                dist[m] = nd;
                heap.push(Item(nd, m));
            }
        }
    }
    dist
}

/// Volume of {dist ≤ radius} with the nodal quadrature.
pub fn ball_volume(grid: &MetricGrid, dist: &[f64], radius: f64) -> f64 {
    let c = grid.cell_volume();
    dist.iter()
        .zip(&grid.sqrt_det_g)
        .filter(|(d, _)| **d <= radius)
        .map(|(_, s)| s * c)
        .sum()
}
