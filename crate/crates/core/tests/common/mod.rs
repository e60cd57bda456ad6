#![allow(dead_code)]

/// Period of the closed orbit of u″ = u³ − u through (A, 0).
///
/// With u = A sin θ the period integral becomes
/// T = 4√2 ∫₀^{π/2} dθ / √(2 − A²(1 + sin²θ)), which is smooth.
pub fn ac_period(a: f64) -> f64 {
    let n = 2000;
    let h = std::f64::consts::FRAC_PI_2 / n as f64;
    let f = |t: f64| 1.0 / (2.0 - a * a * (1.0 + t.sin().powi(2))).sqrt();
    let mut s = f(0.0) + f(std::f64::consts::FRAC_PI_2);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    4.0 * 2f64.sqrt() * s * h / 3.0
}

/// Amplitude and energy e = −F(A) of the orbit with period `l`.
pub fn ac_orbit(l: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0, 1.0 - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ac_period(mid) < l {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    (a, -(1.0 - a * a).powi(2) / 4.0)
}

/// Independent RK4 for u″ = u³ − u, used as a shooting oracle.
pub fn ac_shoot(u0: f64, v0: f64, s_end: f64, steps: usize) -> Vec<(f64, f64, f64)> {
    let h = s_end / steps as f64;
    let rhs = |u: f64, v: f64| (v, u * u * u - u);
    let (mut u, mut v) = (u0, v0);
    let mut out = vec![(0.0, u, v)];
    for i in 0..steps {
        let k1 = rhs(u, v);
        let k2 = rhs(u + 0.5 * h * k1.0, v + 0.5 * h * k1.1);
        let k3 = rhs(u + 0.5 * h * k2.0, v + 0.5 * h * k2.1);
        let k4 = rhs(u + h * k3.0, v + h * k3.1);
        u += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        v += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        out.push(((i + 1) as f64 * h, u, v));
    }
    out
}
