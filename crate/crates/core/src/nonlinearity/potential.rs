use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialKind {
    /// F(u) = scale·(1 − u²)²/4
    AllenCahn { scale: f64 },
    /// F(u) = (u − center)²/2
    Quadratic { center: f64 },
    /// F(u) = cosh(u) − 1
    Cosh,
    /// F ≡ 0
    Zero,
    /// F(u) = Σ cₖ uᵏ
    Polynomial { coefficients: Vec<f64> },
}

/// Potential F with derivatives f = F′ and F″.
///
/// `nonneg` and `convex` are claims; experiments that rely on them re-check by sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub kind: PotentialKind,
    /// Overall multiplier, used by amplitude continuation.
    pub amplitude: f64,
    pub nonneg: bool,
    pub convex: bool,
}

impl Potential {
    pub fn new(kind: PotentialKind) -> Self {
        let (nonneg, convex) = match &kind {
            PotentialKind::AllenCahn { scale } => (*scale >= 0.0, false),
            PotentialKind::Quadratic { .. } | PotentialKind::Cosh | PotentialKind::Zero => {
                (true, true)
            }
            PotentialKind::Polynomial { .. } => (false, false),
        };
        Self {
            kind,
            amplitude: 1.0,
            nonneg,
            convex,
        }
    }

    pub fn allen_cahn(scale: f64) -> Self {
        Self::new(PotentialKind::AllenCahn { scale })
    }

    pub fn quadratic(center: f64) -> Self {
        Self::new(PotentialKind::Quadratic { center })
    }

    pub fn cosh() -> Self {
        Self::new(PotentialKind::Cosh)
    }

    pub fn zero() -> Self {
        Self::new(PotentialKind::Zero)
    }

    pub fn polynomial(coefficients: Vec<f64>, nonneg: bool, convex: bool) -> Self {
        Self {
            nonneg,
            convex,
            ..Self::new(PotentialKind::Polynomial { coefficients })
        }
    }

    pub fn scaled(&self, amplitude: f64) -> Self {
        Self {
            amplitude,
            ..self.clone()
        }
    }

    pub fn name(&self) -> String {
        let base = match &self.kind {
            PotentialKind::AllenCahn { scale } => format!("allen-cahn(scale={scale})"),
            PotentialKind::Quadratic { center } => format!("quadratic(center={center})"),
            PotentialKind::Cosh => "cosh".into(),
            PotentialKind::Zero => "zero".into(),
            PotentialKind::Polynomial { coefficients } => format!("polynomial({coefficients:?})"),
        };
        if self.amplitude == 1.0 {
            base
        } else {
            format!("{}*{base}", self.amplitude)
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            PotentialKind::Zero => true,
            PotentialKind::Polynomial { coefficients } => coefficients.iter().all(|c| *c == 0.0),
            _ => self.amplitude == 0.0,
        }
    }

    /// (F, F′, F″) at u.
    pub fn eval(&self, u: f64) -> [f64; 3] {
        let v = match &self.kind {
            PotentialKind::AllenCahn { scale } => {
                let w = 1.0 - u * u;
                [
                    scale * 0.25 * w * w,
                    -scale * u * w,
                    scale * (3.0 * u * u - 1.0),
                ]
            }
            PotentialKind::Quadratic { center } => {
                let d = u - center;
                [0.5 * d * d, d, 1.0]
            }
            PotentialKind::Cosh => [u.cosh() - 1.0, u.sinh(), u.cosh()],
            PotentialKind::Zero => [0.0, 0.0, 0.0],
            PotentialKind::Polynomial { coefficients } => {
                let (mut f, mut d1, mut d2) = (0.0, 0.0, 0.0);
                for c in coefficients.iter().rev() {
                    f = f * u + c;
                }
                for (k, c) in coefficients.iter().enumerate().skip(1).rev() {
                    d1 = d1 * u + c * k as f64;
                }
                for (k, c) in coefficients.iter().enumerate().skip(2).rev() {
                    d2 = d2 * u + c * (k * (k - 1)) as f64;
                }
                [f, d1, d2]
            }
        };
        [
            self.amplitude * v[0],
            self.amplitude * v[1],
            self.amplitude * v[2],
        ]
    }

    pub fn f(&self, u: f64) -> f64 {
        self.eval(u)[0]
    }

    pub fn df(&self, u: f64) -> f64 {
        self.eval(u)[1]
    }

    pub fn d2f(&self, u: f64) -> f64 {
        self.eval(u)[2]
    }

    fn samples(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
        let n = n.max(2);
        (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
    }

    /// Sampled check of F ≥ −tol on [lo, hi].
    pub fn sampled_nonneg(&self, lo: f64, hi: f64, n: usize, tol: f64) -> bool {
        Self::samples(lo, hi, n).all(|u| self.f(u) >= -tol)
    }

    /// Sampled check of F″ ≥ −tol on [lo, hi].
    pub fn sampled_convex(&self, lo: f64, hi: f64, n: usize, tol: f64) -> bool {
        Self::samples(lo, hi, n).all(|u| self.d2f(u) >= -tol)
    }

    /// Sampled check of F″ ≤ tol on [lo, hi].
    pub fn sampled_concave(&self, lo: f64, hi: f64, n: usize, tol: f64) -> bool {
        Self::samples(lo, hi, n).all(|u| self.d2f(u) <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(p: &Potential, u: f64) {
        let d = 1e-4;
        let [_, d1, d2] = p.eval(u);
        let fd1 = (p.f(u + d) - p.f(u - d)) / (2.0 * d);
        let fd2 = (p.df(u + d) - p.df(u - d)) / (2.0 * d);
        assert!((fd1 - d1).abs() < 1e-6 * (1.0 + d1.abs()), "{} F'", p.name());
        assert!((fd2 - d2).abs() < 1e-6 * (1.0 + d2.abs()), "{} F''", p.name());
    }

    #[test]
    fn derivatives_are_consistent() {
        let pots = [
            Potential::allen_cahn(1.0),
            Potential::allen_cahn(0.5),
            Potential::quadratic(0.3),
            Potential::cosh(),
            Potential::zero(),
            Potential::polynomial(vec![1.0, -2.0, 0.5, 0.25], false, false),
            Potential::cosh().scaled(0.4),
        ];
        for p in &pots {
            for &u in &[-1.3, -0.2, 0.0, 0.7, 1.9] {
                fd_check(p, u);
            }
        }
    }

    #[test]
    fn catalog_values_and_claims() {
        let ac = Potential::allen_cahn(1.0);
        assert_eq!(ac.f(1.0), 0.0);
        assert_eq!(ac.df(1.0), 0.0);
        assert_eq!(ac.f(0.0), 0.25);
        assert!(ac.nonneg && !ac.convex);
        assert!(ac.sampled_nonneg(-2.0, 2.0, 1001, 0.0));
        assert!(!ac.sampled_convex(-1.0, 1.0, 101, 0.0));
        let c = Potential::cosh();
        assert!(c.sampled_convex(-5.0, 5.0, 101, 0.0));
        assert_eq!(c.f(0.0), 0.0);
        let poly = Potential::polynomial(vec![0.0, 0.0, 0.5], true, true);
        assert!((poly.f(3.0) - 4.5).abs() < 1e-14);
        assert!((poly.d2f(-1.0) - 1.0).abs() < 1e-14);
    }
}
