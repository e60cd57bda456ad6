//! One-dimensional profiles φ″ = F′(φ)/Λ((φ′)²), their first integral
//! Ψ((φ′)²) − 2F(φ), the Q-transform and the period map of closed orbits.

use serde::{Deserialize, Serialize};

use crate::dump::FieldDump;
use crate::nonlinearity::{PhiFamily, Potential};

/// Profiles stop once |φ| exceeds this.
pub const BLOWUP_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeError {
    #[error("Λ((φ′)²) ≤ 0 at s = {s} (φ = {phi}, φ′ = {dphi})")]
    Ellipticity { s: f64, phi: f64, dphi: f64 },
    #[error("2F(φ) = {value} at φ = {phi} is outside the range of Ψ (sup = {sup})")]
    Range { phi: f64, value: f64, sup: f64 },
    #[error("G(φ) ≤ 0 at φ = {phi}")]
    Degenerate { phi: f64 },
    #[error("profile is not on the equality set (Ψ − 2F = {energy:e})")]
    NotEquality { energy: f64 },
    #[error("no closed orbit at energy {energy}: {reason}")]
    NoClosedOrbit { energy: f64, reason: String },
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    HeteroclinicApprox,
    Periodic,
    GenericIvp,
}

#[derive(Debug, Clone)]
pub struct Profile {
    pub s: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub family: PhiFamily,
    pub potential: Potential,
    /// Ψ((φ′)²) − 2F(φ) at the initial point.
    pub energy_constant: f64,
    pub kind: ProfileKind,
    /// φ′ has one strict sign on every sample.
    pub monotone: bool,
    /// Integration stopped early at the blow-up cap.
    pub truncated: bool,
}

impl Profile {
    fn new(
        s: Vec<f64>,
        phi: Vec<f64>,
        dphi: Vec<f64>,
        family: &PhiFamily,
        pot: &Potential,
        kind: ProfileKind,
        truncated: bool,
    ) -> Result<Self, OdeError> {
        let i0 = s.iter().position(|&x| x == 0.0).unwrap_or(0);
        let energy_constant = first_integral(family, pot, phi[i0], dphi[i0])?;
        let monotone = dphi.iter().all(|&d| d > 0.0) || dphi.iter().all(|&d| d < 0.0);
        Ok(Self {
            s,
            phi,
            dphi,
            family: family.clone(),
            potential: pot.clone(),
            energy_constant,
            kind,
            monotone,
            truncated,
        })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Ψ((φ′)²) − 2F(φ) on every sample.
    pub fn first_integral(&self) -> Vec<f64> {
        self.phi
            .iter()
            .zip(&self.dphi)
            .map(|(&p, &d)| first_integral(&self.family, &self.potential, p, d).unwrap_or(f64::NAN))
            .collect()
    }

    /// max_s |Ψ((φ′)²) − 2F(φ) − energy_constant|.
    pub fn energy_drift(&self) -> f64 {
        self.first_integral()
            .iter()
            .map(|e| (e - self.energy_constant).abs())
            .fold(0.0, f64::max)
    }

    /// F(φ) at both ends, i.e. the distance of a truncated heteroclinic from the wells.
    pub fn endpoint_potential(&self) -> (f64, f64) {
        let f = |p: f64| self.potential.f(p);
        (f(self.phi[0]), f(*self.phi.last().unwrap()))
    }

    /// Columns (s, phi, dphi); readable by the profile-extension initial guess.
    pub fn to_dump(&self) -> FieldDump {
        let span = self.s.last().unwrap() - self.s[0];
        FieldDump {
            name: "profile".into(),
            shape: vec![self.len()],
            lengths: vec![span],
            grid_hash: "1d".into(),
            seed: None,
            columns: vec!["s".into(), "phi".into(), "dphi".into()],
            rows: (0..self.len())
                .map(|i| vec![self.s[i], self.phi[i], self.dphi[i]])
                .collect(),
        }
    }
}

/// Ψ((φ′)²) − 2F(φ).
pub fn first_integral(family: &PhiFamily, pot: &Potential, phi: f64, dphi: f64) -> Result<f64, OdeError> {
    let psi = family
        .psi(dphi * dphi)
        .map_err(|e| OdeError::Config(e.to_string()))?;
    Ok(psi - 2.0 * pot.f(phi))
}

fn accel(family: &PhiFamily, pot: &Potential, s: f64, phi: f64, dphi: f64) -> Result<f64, OdeError> {
    let l = family
        .lambda(dphi * dphi)
        .map_err(|_| OdeError::Ellipticity { s, phi, dphi })?;
    if !(l > 0.0) {
        return Err(OdeError::Ellipticity { s, phi, dphi });
    }
    Ok(pot.df(phi) / l)
}

fn rk4_step(
    family: &PhiFamily,
    pot: &Potential,
    s: f64,
    y: [f64; 2],
    h: f64,
) -> Result<[f64; 2], OdeError> {
    let f = |s: f64, y: [f64; 2]| -> Result<[f64; 2], OdeError> {
        Ok([y[1], accel(family, pot, s, y[0], y[1])?])
    };
    let k1 = f(s, y)?;
    let k2 = f(s + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]])?;
    let k3 = f(s + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]])?;
    let k4 = f(s + h, [y[0] + h * k3[0], y[1] + h * k3[1]])?;
    Ok([
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ])
}

/// Sample points of `span` through s = 0 (or from the left end when 0 is
/// outside), with spacing at most `step` on each side.
fn sample_points(span: (f64, f64), step: f64) -> Result<(Vec<f64>, usize), OdeError> {
    let (a, b) = span;
    if !(step > 0.0) || !(b > a) || !a.is_finite() || !b.is_finite() {
        return Err(OdeError::Config(format!("invalid span {span:?} or step {step}")));
    }
    let origin = if a <= 0.0 && b >= 0.0 { 0.0 } else { a };
    let nl = ((origin - a) / step).round().max(0.0) as usize;
    let nr = ((b - origin) / step).round().max(0.0) as usize;
    let mut s = Vec::with_capacity(nl + nr + 1);
    for i in (1..=nl).rev() {
        s.push(origin - (origin - a) * i as f64 / nl as f64);
    }
    s.push(origin);
    for i in 1..=nr {
        s.push(origin + (b - origin) * i as f64 / nr as f64);
    }
    Ok((s, nl))
}

/// Drives `step` outward from sample `i0` in both directions and returns the
/// contiguous window [lo, hi] that stayed below the blow-up cap.
fn march<F>(
    s: &[f64],
    i0: usize,
    y0: [f64; 2],
    mut step: F,
) -> Result<(Vec<[f64; 2]>, usize, bool), OdeError>
where
    F: FnMut(f64, [f64; 2], f64) -> Result<[f64; 2], OdeError>,
{
    let mut y = vec![[f64::NAN; 2]; s.len()];
    y[i0] = y0;
    let mut truncated = false;
    let (mut lo, mut hi) = (i0, i0);
    for i in i0 + 1..s.len() {
        let next = step(s[i - 1], y[i - 1], s[i] - s[i - 1])?;
        if !(next[0].abs() <= BLOWUP_CAP) {
            truncated = true;
            break;
        }
        y[i] = next;
        hi = i;
    }
    for i in (0..i0).rev() {
        let next = step(s[i + 1], y[i + 1], s[i] - s[i + 1])?;
        if !(next[0].abs() <= BLOWUP_CAP) {
            truncated = true;
            break;
        }
        y[i] = next;
        lo = i;
    }
    Ok((y[lo..=hi].to_vec(), lo, truncated))
}

/// Integrates φ″ = F′(φ)/Λ((φ′)²) by classical RK4 from (φ, φ′) given at
/// s = 0, or at the left end of `span` when 0 lies outside it.
pub fn integrate_profile(
    phi0: f64,
    dphi0: f64,
    span: (f64, f64),
    step: f64,
    family: &PhiFamily,
    pot: &Potential,
) -> Result<Profile, OdeError> {
    let (s, i0) = sample_points(span, step)?;
    let (y, lo, truncated) = march(&s, i0, [phi0, dphi0], |s, y, h| rk4_step(family, pot, s, y, h))?;
    let s = s[lo..lo + y.len()].to_vec();
    Profile::new(
        s,
        y.iter().map(|v| v[0]).collect(),
        y.iter().map(|v| v[1]).collect(),
        family,
        pot,
        ProfileKind::GenericIvp,
        truncated,
    )
}

/// √G(φ) = √Ψ⁻¹(2F(φ)).
pub fn equality_speed(family: &PhiFamily, pot: &Potential, phi: f64) -> Result<f64, OdeError> {
    let v = 2.0 * pot.f(phi);
    if v < 0.0 {
        return Err(OdeError::Degenerate { phi });
    }
    let t = family.psi_inverse(v).map_err(|_| OdeError::Range {
        phi,
        value: v,
        sup: family.psi_sup(),
    })?;
    Ok(t.sqrt())
}

/// Integrates the equality reduction φ′ = sign·√Ψ⁻¹(2F(φ)) by RK4.
///
/// A trajectory that reaches a zero of F stays there.
pub fn equality_profile(
    family: &PhiFamily,
    pot: &Potential,
    phi0: f64,
    sign: f64,
    span: (f64, f64),
    step: f64,
) -> Result<Profile, OdeError> {
    if sign.abs() != 1.0 {
        return Err(OdeError::Config(format!("sign must be ±1, got {sign}")));
    }
    let (s, i0) = sample_points(span, step)?;
    let speed = |p: f64| equality_speed(family, pot, p).map(|v| sign * v);
    let mut phi = vec![f64::NAN; s.len()];
    phi[i0] = phi0;
    let stationary = pot.f(phi0) == 0.0;
    let rk = |p: f64, h: f64| -> Result<f64, OdeError> {
        let k1 = speed(p)?;
        let k2 = speed(p + 0.5 * h * k1)?;
        let k3 = speed(p + 0.5 * h * k2)?;
        let k4 = speed(p + h * k3)?;
        Ok(p + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    };
    let mut advance = |from: usize, to: usize| -> Result<(), OdeError> {
        let p = phi[from];
        if stationary || pot.f(p) == 0.0 {
            phi[to] = p;
            return Ok(());
        }
        let h = s[to] - s[from];
        let mut next = rk(p, h)?;
        // Passing through a zero of F along the direction of motion means the
        // trajectory hit an equilibrium in finite time.
        let dir = (next - p).signum();
        if dir * pot.df(next) > 0.0 && dir * pot.df(p) < 0.0 {
            let (mut a, mut b) = (p, next);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if dir * pot.df(m) < 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            let root = 0.5 * (a + b);
            if pot.f(root) <= 1e-14 {
                next = root;
            }
        }
        phi[to] = next;
        Ok(())
    };
    for i in i0 + 1..s.len() {
        advance(i - 1, i)?;
    }
    for i in (0..i0).rev() {
        advance(i + 1, i)?;
    }
    let dphi: Vec<f64> = phi
        .iter()
        .map(|&p| if pot.f(p) == 0.0 { Ok(0.0) } else { speed(p) })
        .collect::<Result<_, _>>()?;
    Profile::new(s, phi, dphi, family, pot, ProfileKind::HeteroclinicApprox, false)
}

/// Result of the Q-transform along a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTransform {
    pub s: Vec<f64>,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
}

impl QTransform {
    /// max | |w′| − 1 |.
    pub fn unit_gradient_defect(&self) -> f64 {
        self.dw.iter().map(|d| (d.abs() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// max |w_{i+1} − 2w_i + w_{i−1}| / h² on uniformly spaced runs.
    pub fn laplacian_defect(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 1..self.s.len().saturating_sub(1) {
            let h0 = self.s[i] - self.s[i - 1];
            let h1 = self.s[i + 1] - self.s[i];
            if (h0 - h1).abs() > 1e-9 * h0.abs() {
                continue;
            }
            m = m.max(((self.w[i + 1] - 2.0 * self.w[i] + self.w[i - 1]) / (h0 * h1)).abs());
        }
        m
    }
}

const GL_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// w(s) = ∫_{φ(0)}^{φ(s)} G(x)^{−1/2} dx with G = Ψ⁻¹(2F), and w′ = G(φ)^{−1/2}φ′.
///
/// The quadrature runs along the path in s: on each step φ and φ′ are cubic
/// Hermite interpolants of (φ, φ′) and (φ′, φ″), and w′ is integrated by
/// 4-point Gauss–Legendre. Differencing φ directly would lose all digits
/// near a well, where φ′h is tiny.
pub fn q_transform(profile: &Profile) -> Result<QTransform, OdeError> {
    let tol = 1e-8 * (1.0 + profile.potential.f(profile.phi[0]).abs());
    if profile.energy_constant.abs() > tol {
        return Err(OdeError::NotEquality {
            energy: profile.energy_constant,
        });
    }
    let fam = &profile.family;
    let pot = &profile.potential;
    let inv_sqrt_g = |x: f64| -> Result<f64, OdeError> {
        let g = equality_speed(fam, pot, x)?;
        if !(g > 0.0) {
            return Err(OdeError::Degenerate { phi: x });
        }
        Ok(1.0 / g)
    };
    let n = profile.len();
    let ddphi = (0..n)
        .map(|i| accel(fam, pot, profile.s[i], profile.phi[i], profile.dphi[i]))
        .collect::<Result<Vec<_>, _>>()?;
    let hermite = |t: f64, h: f64, p0: f64, m0: f64, p1: f64, m1: f64| {
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * h * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * h * m1
    };
    let segment = |i: usize| -> Result<f64, OdeError> {
        let h = profile.s[i + 1] - profile.s[i];
        let (p0, p1) = (profile.phi[i], profile.phi[i + 1]);
        let (d0, d1) = (profile.dphi[i], profile.dphi[i + 1]);
        let (a0, a1) = (ddphi[i], ddphi[i + 1]);
        let mut acc = 0.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let t = 0.5 * (1.0 + x);
            let phi = hermite(t, h, p0, d0, p1, d1);
            let dphi = hermite(t, h, d0, a0, d1, a1);
            acc += w * dphi * inv_sqrt_g(phi)?;
        }
        Ok(0.5 * h * acc)
    };
    let i0 = profile.s.iter().position(|&x| x == 0.0).unwrap_or(0);
    let mut w = vec![0.0; n];
    for i in i0 + 1..n {
        w[i] = w[i - 1] + segment(i - 1)?;
    }
    for i in (0..i0).rev() {
        w[i] = w[i + 1] - segment(i)?;
    }
    let dw = profile
        .phi
        .iter()
        .zip(&profile.dphi)
        .map(|(&p, &d)| Ok(inv_sqrt_g(p)? * d))
        .collect::<Result<Vec<_>, OdeError>>()?;
    Ok(QTransform {
        s: profile.s.clone(),
        w,
        dw,
    })
}

/// Default RK4 step for the period map.
pub const PERIOD_STEP: f64 = 1e-3;

/// The local maximum of F nearest 0 in [−10, 10] (the centre of the closed orbits).
pub fn well_center(pot: &Potential) -> Option<f64> {
    let df = |u: f64| pot.df(u);
    let n = 4000;
    let mut best: Option<f64> = None;
    for i in 0..n {
        let a = -10.0 + 20.0 * i as f64 / n as f64;
        let b = a + 20.0 / n as f64;
        let (fa, fb) = (df(a), df(b));
        let root = if fa == 0.0 && pot.d2f(a) < 0.0 {
            Some(a)
        } else if fa > 0.0 && fb < 0.0 {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..200 {
                let m = 0.5 * (lo + hi);
                if df(m) > 0.0 {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            Some(0.5 * (lo + hi))
        } else {
            None
        };
        if let Some(r) = root {
            if best.map_or(true, |b| r.abs() < b.abs()) {
                best = Some(r);
            }
        }
    }
    best
}

/// Period of the closed orbit with E = ½(Ψ((φ′)²) − 2F(φ)) = `energy`.
pub fn period_map(family: &PhiFamily, pot: &Potential, energy: f64) -> Result<f64, OdeError> {
    period_map_with_step(family, pot, energy, PERIOD_STEP)
}

pub fn period_map_with_step(
    family: &PhiFamily,
    pot: &Potential,
    energy: f64,
    step: f64,
) -> Result<f64, OdeError> {
    let (_, period) = orbit(family, pot, energy, step, false)?;
    Ok(period)
}

/// One period of the closed orbit at `energy`, starting at its maximum.
pub fn periodic_profile(
    family: &PhiFamily,
    pot: &Potential,
    energy: f64,
    step: f64,
) -> Result<Profile, OdeError> {
    let (p, _) = orbit(family, pot, energy, step, true)?;
    Ok(p.expect("samples requested"))
}

fn orbit(
    family: &PhiFamily,
    pot: &Potential,
    energy: f64,
    step: f64,
    keep: bool,
) -> Result<(Option<Profile>, f64), OdeError> {
    let no = |reason: &str| OdeError::NoClosedOrbit {
        energy,
        reason: reason.into(),
    };
    let c = well_center(pot).ok_or_else(|| no("F has no local maximum in [−10, 10]"))?;
    let y = 2.0 * (energy + pot.f(c));
    if !(y > 0.0) {
        return Err(no("energy is below the bottom of the well"));
    }
    let v0 = family
        .psi_inverse(y)
        .map_err(|_| no("Ψ cannot reach the required speed"))?
        .sqrt();
    let f = |y: [f64; 2]| accel(family, pot, 0.0, y[0], y[1]).map(|a| [y[1], a]);
    // Turning points are the sign changes of φ′; each is refined on the cubic
    // Hermite interpolant of φ′ over the step.
    let mut s = 0.0;
    let mut y = [c, v0];
    let mut events: Vec<(f64, [f64; 2])> = Vec::new();
    let max_steps = (1e4 / step) as usize;
    for _ in 0..max_steps {
        let next = rk4_step(family, pot, s, y, step)?;
        if !(next[0].abs() <= BLOWUP_CAP) {
            return Err(no("trajectory escapes"));
        }
        if y[1] != 0.0 && next[1].signum() != y[1].signum() {
            let a0 = f(y)?[1];
            let a1 = f(next)?[1];
            let (p0, p1) = (y[1], next[1]);
            let herm = |t: f64| {
                let t2 = t * t;
                let t3 = t2 * t;
                (2.0 * t3 - 3.0 * t2 + 1.0) * p0
                    + (t3 - 2.0 * t2 + t) * step * a0
                    + (-2.0 * t3 + 3.0 * t2) * p1
                    + (t3 - t2) * step * a1
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..100 {
                let m = 0.5 * (lo + hi);
                if herm(m).signum() == p0.signum() {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            let tau = 0.5 * (lo + hi) * step;
            let turn = rk4_step(family, pot, s, y, tau)?;
            events.push((s + tau, turn));
            if events.len() == 3 {
                break;
            }
        }
        s += step;
        y = next;
    }
    if events.len() < 3 {
        return Err(no("no turning points within s = 1e4"));
    }
    let period = events[2].0 - events[0].0;
    if !keep {
        return Ok((None, period));
    }
    let (_, top) = events[0];
    let n = (period / step).ceil() as usize;
    let h = period / n as f64;
    let mut ss = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n + 1);
    let mut cur = [top[0], 0.0];
    for i in 0..=n {
        ss.push(i as f64 * h);
        ys.push(cur);
        if i < n {
            cur = rk4_step(family, pot, i as f64 * h, cur, h)?;
        }
    }
    let profile = Profile::new(
        ss,
        ys.iter().map(|v| v[0]).collect(),
        ys.iter().map(|v| v[1]).collect(),
        family,
        pot,
        ProfileKind::Periodic,
        false,
    )?;
    Ok((Some(profile), period))
}

/// Energy in (lo, hi) whose closed orbit has period `target`, by bisection
/// on the monotone period map.
pub fn energy_for_period(
    family: &PhiFamily,
    pot: &Potential,
    target: f64,
    bracket: (f64, f64),
    step: f64,
) -> Result<f64, OdeError> {
    let (mut lo, mut hi) = bracket;
    let t_lo = period_map_with_step(family, pot, lo, step)?;
    let t_hi = period_map_with_step(family, pot, hi, step)?;
    if (t_lo - target).signum() == (t_hi - target).signum() {
        return Err(OdeError::Config(format!(
            "periods {t_lo} and {t_hi} at the bracket ends do not straddle {target}"
        )));
    }
    let increasing = t_hi > t_lo;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let t = period_map_with_step(family, pot, mid, step)?;
        if (t < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A named equality-profile setup.
#[derive(Debug, Clone)]
pub struct EqualityCase {
    pub name: &'static str,
    pub family: PhiFamily,
    pub potential: Potential,
    pub phi0: f64,
    pub span: (f64, f64),
}

/// Equality profiles exercised by the Q-transform checks. The p-Laplacian
/// span stops before φ′ reaches 0, where Λ = 3(φ′)² degenerates.
pub fn equality_catalog() -> Vec<EqualityCase> {
    vec![
        EqualityCase {
            name: "linear/allen-cahn",
            family: PhiFamily::linear(),
            potential: Potential::allen_cahn(1.0),
            phi0: 0.0,
            span: (-8.0, 8.0),
        },
        EqualityCase {
            name: "p-laplacian(4)/allen-cahn",
            family: PhiFamily::p_laplacian(4.0),
            potential: Potential::allen_cahn(1.0),
            phi0: 0.0,
            span: (-1.0, 1.0),
        },
        EqualityCase {
            name: "mean-curvature/allen-cahn(1/2)",
            family: PhiFamily::mean_curvature(),
            potential: Potential::allen_cahn(0.5),
            phi0: 0.0,
            span: (-8.0, 8.0),
        },
    ]
}
