//! Empirical sandwich constants for the ellipticity assumptions.
//!
//! Both checkers sample σ log-uniformly in |σ| over a wide range and record the
//! tightest constants. Because any finite sample yields finite constants, the
//! pass flag asks for *range stability*: the constants over the full range must
//! stay within a factor of [`STABILITY_FACTOR`] of those over the core range.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use super::PhiFamily;

pub const SIGMA_RANGE: (f64, f64) = (1e-6, 1e6);
pub const CORE_RANGE: (f64, f64) = (1e-3, 1e3);
pub const STABILITY_FACTOR: f64 = 2.0;
const SAMPLE_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Assumption {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub family: String,
    pub assumption: Assumption,
    pub n_sigma: usize,
    pub n_xi: usize,
    pub c1: f64,
    pub c2: f64,
    pub core_c1: f64,
    pub core_c2: f64,
    pub p: f64,
    pub a: f64,
    pub pass: bool,
    /// σ at which the family could not be evaluated, if any.
    pub offending_sigma: Option<Vec<f64>>,
}

#[derive(Default)]
struct Bounds {
    lo: f64,
    hi: f64,
}

impl Bounds {
    fn new() -> Self {
        Self {
            lo: f64::INFINITY,
            hi: 0.0,
        }
    }

    fn add(&mut self, r: f64) {
        self.lo = self.lo.min(r);
        self.hi = self.hi.max(r);
    }
}

fn sample_sigma(rng: &mut ChaCha8Rng, mag: f64) -> [f64; SAMPLE_DIM] {
    let d: [f64; 3] = UnitSphere.sample(rng);
    [mag * d[0], mag * d[1], mag * d[2]]
}

fn log_uniform(rng: &mut ChaCha8Rng) -> f64 {
    let (lo, hi) = SIGMA_RANGE;
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn quad(a: &[f64], xi: &[f64]) -> f64 {
    let n = xi.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i * n + j] * xi[i] * xi[j];
        }
    }
    s
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn run(
    phi: &PhiFamily,
    assumption: Assumption,
    p: f64,
    a: f64,
    n_samples: usize,
    seed: u64,
) -> EllipticityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut full = Bounds::new();
    let mut core = Bounds::new();
    let mut offending = None;
    let mut n_xi = 0;
    // (B) holds for every σ, including 0 where the form reduces to Φ′(0)|ξ|².
    let zero = (assumption == Assumption::B).then_some(0.0);
    let mags: Vec<f64> = zero
        .into_iter()
        .chain((0..n_samples).map(|_| log_uniform(&mut rng)))
        .collect();
    let n_sigma = mags.len();
    for mag in mags {
        let sigma = sample_sigma(&mut rng, mag);
        let weight = match assumption {
            Assumption::A => (a + mag).powf(p - 2.0),
            Assumption::B => 1.0 / (1.0 + mag),
        };
        let (dphi, tensor) = match (phi.dphi(mag * mag), phi.a_tensor(&sigma)) {
            (Ok(d), Ok(t)) => (d, t),
            _ => {
                offending = Some(sigma.to_vec());
                break;
            }
        };
        let mut ratios = vec![dphi / weight];
        // Random ξ plus the two eigen-directions, which carry the extremes.
        let xi_r: [f64; 3] = UnitSphere.sample(&mut rng);
        let along = if mag > 0.0 {
            sigma.map(|s| s / mag)
        } else {
            [1.0, 0.0, 0.0]
        };
        let across = {
            let t = [along[1], -along[0], 0.0];
            let nt = dot(&t, &t).sqrt();
            if nt > 0.0 { t.map(|v| v / nt) } else { [0.0, 1.0, 0.0] }
        };
        for xi in [xi_r, along, across] {
            n_xi += 1;
            let q = quad(&tensor, &xi);
            let norm2 = match assumption {
                Assumption::A => dot(&xi, &xi),
                Assumption::B => {
                    // |ξ′|² for ξ′ the projection of (ξ, 0) onto (−σ, 1)^⊥.
                    let sx = dot(&sigma, &xi);
                    dot(&xi, &xi) - sx * sx / (1.0 + mag * mag)
                }
            };
            ratios.push(q / (weight * norm2));
        }
        for r in ratios {
            if !r.is_finite() {
                offending = Some(sigma.to_vec());
                continue;
            }
            full.add(r);
            if mag == 0.0 || (mag >= CORE_RANGE.0 && mag <= CORE_RANGE.1) {
                core.add(r);
            }
        }
    }
    let stable = |x: f64, y: f64| x > 0.0 && y > 0.0 && x.max(y) / x.min(y) <= STABILITY_FACTOR;
    let pass = offending.is_none()
        && full.lo > 0.0
        && full.hi.is_finite()
        && full.lo <= full.hi
        && stable(full.lo, core.lo)
        && stable(full.hi, core.hi);
    EllipticityReport {
        family: phi.name(),
        assumption,
        n_sigma,
        n_xi,
        c1: full.lo,
        c2: full.hi,
        core_c1: core.lo,
        core_c2: core.hi,
        p,
        a,
        pass,
        offending_sigma: offending,
    }
}

/// Sandwich c₁(a + |σ|)^{p−2} ≤ {Φ′, aᵢⱼξᵢξⱼ/|ξ|²} ≤ c₂(a + |σ|)^{p−2}.
pub fn check_assumption_a(
    phi: &PhiFamily,
    p: f64,
    a: f64,
    n_samples: usize,
    seed: u64,
) -> EllipticityReport {
    run(phi, Assumption::A, p, a, n_samples, seed)
}

/// Sandwich with weight (1 + |σ|)^{−1}, the quadratic form measured against |ξ′|².
pub fn check_assumption_b(phi: &PhiFamily, n_samples: usize, seed: u64) -> EllipticityReport {
    run(phi, Assumption::B, 1.0, 1.0, n_samples, seed)
}

/// min over t ∈ [0, t_max] of min(Φ′(t), Λ(t)), the lower eigenvalue of aᵢⱼ.
pub fn ellipticity_floor(phi: &PhiFamily, t_max: f64, n: usize) -> Option<f64> {
    let n = n.max(2);
    let mut m = f64::INFINITY;
    for i in 0..n {
        let t = t_max * i as f64 / (n - 1) as f64;
        let d = phi.dphi(t).ok()?;
        let l = phi.lambda(t).ok()?;
        m = m.min(d.min(l));
    }
    Some(m)
}
