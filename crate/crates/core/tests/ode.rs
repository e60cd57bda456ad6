mod common;

use qlgrad::nonlinearity::{PhiFamily, Potential};
use qlgrad::ode::*;

fn ac() -> Potential {
    Potential::allen_cahn(1.0)
}

fn tanh_error(p: &Profile) -> f64 {
    p.s.iter()
        .zip(&p.phi)
        .map(|(s, f)| (f - (s / 2f64.sqrt()).tanh()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn tanh_oracle_satisfies_the_equation() {
    // φ = tanh(s/√2): φ′ = (1 − φ²)/√2, φ″ = −φ(1 − φ²) = φ³ − φ.
    for i in 0..100 {
        let s = -5.0 + 0.1 * i as f64;
        let f = (s / 2f64.sqrt()).tanh();
        let d = (1.0 - f * f) / 2f64.sqrt();
        assert!((d * d - 2.0 * ac().f(f)).abs() < 1e-15);
    }
}

#[test]
fn allen_cahn_heteroclinic_matches_tanh() {
    let p = integrate_profile(0.0, 0.5f64.sqrt(), (-8.0, 8.0), 1e-3, &PhiFamily::linear(), &ac()).unwrap();
    assert_eq!(p.len(), 16001);
    assert!(tanh_error(&p) <= 1e-8, "{}", tanh_error(&p));
    assert!(p.energy_drift() <= 1e-10);
    assert!(p.energy_constant.abs() < 1e-15);
    assert!(p.monotone);
    assert!(!p.truncated);
    let (fl, fr) = p.endpoint_potential();
    // F(tanh(8/√2)) = sech⁴(8/√2)/4 ≈ 6e−10.
    assert!(fl < 1e-9 && fr < 1e-9);
}

#[test]
fn integrator_is_fourth_order() {
    // Pointwise error at s = 1. The sup over [−8, 8] is attained near the
    // wells and shrinks by 32 per halving on this orbit.
    let at_one = |h: f64| {
        let p = integrate_profile(0.0, 0.5f64.sqrt(), (-8.0, 8.0), h, &PhiFamily::linear(), &ac()).unwrap();
        let i = p.s.iter().position(|&s| (s - 1.0).abs() < 1e-12).unwrap();
        (p.phi[i] - (1.0 / 2f64.sqrt()).tanh()).abs()
    };
    for (h1, h2) in [(0.1, 0.05), (0.05, 0.025)] {
        let ratio = at_one(h1) / at_one(h2);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn equilibrium_stays_put() {
    for phi in [PhiFamily::linear(), PhiFamily::mean_curvature()] {
        let p = integrate_profile(1.0, 0.0, (-2.0, 2.0), 1e-2, &phi, &ac()).unwrap();
        assert!(p.phi.iter().all(|&v| v == 1.0));
        assert!(p.dphi.iter().all(|&v| v == 0.0));
        assert!(!p.monotone);
    }
}

#[test]
fn mean_curvature_profile_conserves_first_integral() {
    // F = (1 − u²)²/8, so 2F(0) = 1/4 and Ψ(t) = 2 − 2(1 + t)^{−1/2} = 1/4
    // gives 1 + t = (8/7)², t = 15/49.
    let pot = Potential::allen_cahn(0.5);
    let t0: f64 = 15.0 / 49.0;
    let p = integrate_profile(0.0, t0.sqrt(), (-8.0, 8.0), 1e-3, &PhiFamily::mean_curvature(), &pot).unwrap();
    assert!(p.energy_constant.abs() < 1e-14, "{}", p.energy_constant);
    assert!(p.energy_drift() <= 1e-10, "{}", p.energy_drift());
    assert!(p.monotone);
}

#[test]
fn equality_profile_reduces_to_tanh() {
    let p = equality_profile(&PhiFamily::linear(), &ac(), 0.0, 1.0, (-8.0, 8.0), 1e-3).unwrap();
    assert!(tanh_error(&p) <= 1e-8, "{}", tanh_error(&p));
    assert!(p.monotone);
    let m = equality_profile(&PhiFamily::linear(), &ac(), 0.0, -1.0, (-8.0, 8.0), 1e-3).unwrap();
    assert!(m.phi.iter().zip(&p.phi).all(|(a, b)| (a + b).abs() < 1e-15));
}

#[test]
fn equality_and_second_order_profiles_agree() {
    for case in equality_catalog() {
        let eq = equality_profile(&case.family, &case.potential, case.phi0, 1.0, case.span, 1e-3).unwrap();
        let d0 = equality_speed(&case.family, &case.potential, case.phi0).unwrap();
        let iv = integrate_profile(case.phi0, d0, case.span, 1e-3, &case.family, &case.potential).unwrap();
        let diff = eq.phi.iter().zip(&iv.phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-8, "{}: {diff}", case.name);
        assert!(eq.monotone, "{}", case.name);
        assert!(eq.energy_drift() <= 1e-10, "{}: {}", case.name, eq.energy_drift());
    }
}

#[test]
fn p_laplacian_equality_speed_spot_value() {
    // Ψ(t) = (3/2)t² and 2F(0) = 1/2, so φ′ = (1/3)^{1/4}.
    let v = equality_speed(&PhiFamily::p_laplacian(4.0), &ac(), 0.0).unwrap();
    assert!((v - (1.0f64 / 3.0).powf(0.25)).abs() < 1e-14);
}

#[test]
fn zero_of_potential_gives_constant_profile() {
    let p = equality_profile(&PhiFamily::linear(), &ac(), -1.0, 1.0, (-3.0, 3.0), 1e-2).unwrap();
    assert!(p.phi.iter().all(|&v| v == -1.0));
    assert!(p.dphi.iter().all(|&v| v == 0.0));
}

#[test]
fn p_laplacian_equality_reaches_the_well_in_finite_time() {
    let p = equality_profile(&PhiFamily::p_laplacian(4.0), &ac(), 0.0, 1.0, (0.0, 6.0), 1e-3).unwrap();
    assert_eq!(*p.phi.last().unwrap(), 1.0);
    assert!(p.phi.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn q_transform_straightens_equality_profiles() {
    for case in equality_catalog() {
        let p = equality_profile(&case.family, &case.potential, case.phi0, 1.0, case.span, 1e-3).unwrap();
        let q = q_transform(&p).unwrap();
        assert!(q.unit_gradient_defect() <= 1e-8, "{}: {}", case.name, q.unit_gradient_defect());
        assert!(q.laplacian_defect() <= 1e-6, "{}: {}", case.name, q.laplacian_defect());
    }
    // On the tanh equality profile w(s) = s.
    let p = equality_profile(&PhiFamily::linear(), &ac(), 0.0, 1.0, (-8.0, 8.0), 1e-3).unwrap();
    let q = q_transform(&p).unwrap();
    let err = q.s.iter().zip(&q.w).map(|(s, w)| (s - w).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-8, "{err}");
    // The second-order IVP profile carries RK4 error in φ (~4e−12 at the
    // ends), amplified near the wells by 2/(1 − φ²).
    let p = integrate_profile(0.0, 0.5f64.sqrt(), (-8.0, 8.0), 1e-3, &PhiFamily::linear(), &ac()).unwrap();
    let q = q_transform(&p).unwrap();
    let err = q.s.iter().zip(&q.w).map(|(s, w)| (s - w).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-6, "{err}");
    assert!(q.unit_gradient_defect() <= 1e-6);
}

#[test]
fn q_transform_rejects_off_equality_profiles() {
    let p = integrate_profile(0.0, 0.5, (-1.0, 1.0), 1e-2, &PhiFamily::linear(), &ac()).unwrap();
    assert!(matches!(q_transform(&p), Err(OdeError::NotEquality { .. })));
}

#[test]
fn period_tends_to_linearized_value() {
    let t = period_map(&PhiFamily::linear(), &ac(), -0.25 + 1e-8).unwrap();
    assert!((t - 2.0 * std::f64::consts::PI).abs() < 1e-5, "{t}");
}

#[test]
fn period_matches_quadrature_oracle_and_grows() {
    let mut last = 0.0;
    for e in [-0.2, -0.1, -0.05, -0.01, -1e-3] {
        let t = period_map(&PhiFamily::linear(), &ac(), e).unwrap();
        let a = (1.0 - 2.0 * (-e).sqrt()).sqrt();
        let oracle = common::ac_period(a);
        assert!((t - oracle).abs() < 1e-8 * oracle, "e = {e}: {t} vs {oracle}");
        assert!(t > last);
        last = t;
    }
}

#[test]
fn period_diverges_logarithmically() {
    // Near the heteroclinic limit T ≈ √2·ln(1/|e|) + const.
    let ts: Vec<f64> = [1e-4, 1e-5, 1e-6]
        .iter()
        .map(|&e: &f64| period_map(&PhiFamily::linear(), &ac(), -e).unwrap())
        .collect();
    let slope = (ts[2] - ts[1]) / 10f64.ln();
    assert!((slope - 2f64.sqrt()).abs() < 1e-3, "{slope}");
}

#[test]
fn bisection_finds_circle_energy() {
    let e = energy_for_period(&PhiFamily::linear(), &ac(), 10.0, (-0.2, -1e-4), PERIOD_STEP).unwrap();
    let (_, oracle) = common::ac_orbit(10.0);
    assert!((e - oracle).abs() <= 1e-8 * oracle.abs(), "{e} vs {oracle}");
    let p = periodic_profile(&PhiFamily::linear(), &ac(), e, 1e-3).unwrap();
    assert!((p.s.last().unwrap() - 10.0).abs() < 1e-8);
    assert!(p.energy_drift() <= 1e-10);
    assert!((p.energy_constant - 2.0 * e).abs() < 1e-10);
}

#[test]
fn errors_are_reported() {
    let mc = PhiFamily::mean_curvature();
    let steep = Potential::allen_cahn(40.0);
    assert!(matches!(
        equality_profile(&mc, &steep, 0.0, 1.0, (0.0, 1.0), 1e-2),
        Err(OdeError::Range { .. })
    ));
    assert!(matches!(
        integrate_profile(0.5, 0.0, (0.0, 1.0), 1e-2, &PhiFamily::p_laplacian(4.0), &ac()),
        Err(OdeError::Ellipticity { .. })
    ));
    assert!(matches!(period_map(&PhiFamily::linear(), &ac(), -0.3), Err(OdeError::NoClosedOrbit { .. })));
    assert!(matches!(period_map(&PhiFamily::linear(), &Potential::cosh(), -0.1), Err(OdeError::NoClosedOrbit { .. })));
    assert!(matches!(
        integrate_profile(0.0, 1.0, (1.0, 0.0), 1e-2, &PhiFamily::linear(), &ac()),
        Err(OdeError::Config(_))
    ));
}

#[test]
fn blow_up_truncates() {
    // φ″ = φ³ − φ from (2, 2) escapes in finite s.
    let p = integrate_profile(2.0, 2.0, (0.0, 5.0), 1e-3, &PhiFamily::linear(), &ac()).unwrap();
    assert!(p.truncated);
    assert!(*p.s.last().unwrap() < 5.0);
}

#[test]
fn profile_dump_extends_to_torus() {
    use qlgrad::geometry::{MetricGrid, MetricKind};
    use qlgrad::solver::{initial_field, InitialGuess};
    let p = integrate_profile(0.0, 0.5f64.sqrt(), (0.0, 4.0), 0.5, &PhiFamily::linear(), &ac()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("profile.dat");
    p.to_dump().write(&path).unwrap();
    let g = MetricGrid::build(MetricKind::FlatTorus, &[8, 8], &[4.0, 1.0]).unwrap();
    let u = initial_field(&InitialGuess::ProfileExtension { path, axis: 0 }, &g).unwrap();
    for n in 0..g.len() {
        assert_eq!(u[n], p.phi[g.index(n)[0]]);
    }
}
