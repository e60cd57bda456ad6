mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use qlgrad::convergence::fitted_order;
use qlgrad::geometry::*;
use qlgrad::nonlinearity::{PhiFamily, Potential};
use qlgrad::solver::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn flat(shape: &[usize], lengths: &[f64]) -> Arc<MetricGrid> {
    MetricGrid::build(MetricKind::FlatTorus, shape, lengths).unwrap()
}

fn sphere(nt: usize) -> Arc<MetricGrid> {
    MetricGrid::build(MetricKind::SphereLatLong { r: 1.0 }, &[nt, 2 * nt], &[PI, 2.0 * PI]).unwrap()
}

fn conformal(n: usize) -> Arc<MetricGrid> {
    MetricGrid::build(MetricKind::ConformalTorus { a: 0.5, k: 1.0, l: 1.0 }, &[n, n], &[1.0, 1.0])
        .unwrap()
}

fn families() -> Vec<PhiFamily> {
    vec![
        PhiFamily::linear(),
        PhiFamily::p_laplacian(4.0),
        PhiFamily::p_laplacian(1.5),
        PhiFamily::mean_curvature(),
    ]
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[test]
fn critical_constant_has_zero_residual() {
    let g = flat(&[16, 16], &[1.0, 1.0]);
    for phi in families() {
        let u = ScalarField::constant(&g, 1.0);
        let r = residual(&u, &phi, &Potential::allen_cahn(1.0)).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0), "{}", phi.name());
    }
}

#[test]
fn sine_on_circle_solves_linear_oscillator() {
    // u″ = −u: F′(u) = −u, i.e. F = −u²/2.
    let pot = Potential::polynomial(vec![0.0, 0.0, -0.5], false, false);
    let mut h = Vec::new();
    let mut e = Vec::new();
    for n in [64, 128, 256] {
        let g = flat(&[n], &[2.0 * PI]);
        let u = ScalarField::from_fn(&g, |x| x[0].sin());
        let r = residual(&u, &PhiFamily::linear(), &pot).unwrap();
        h.push(g.h());
        e.push(r.max_abs());
    }
    let p = fitted_order(&h, &e).unwrap();
    assert!((1.9..=2.1).contains(&p), "order {p}");
    // Oracle: the stencil applied to sin x gives −(2 sin(h/2)/h)² sin x.
    let hh = h[0];
    let expect = 1.0 - (2.0 * (hh / 2.0).sin() / hh).powi(2);
    assert!((e[0] - expect).abs() < 1e-12);
}

#[test]
fn manufactured_residual_converges_at_second_order() {
    // p < 2 is left out: every periodic field has critical points, where the
    // continuum operator is singular.
    let smooth = [PhiFamily::linear(), PhiFamily::p_laplacian(4.0), PhiFamily::mean_curvature()];
    let pot = Potential::allen_cahn(1.0);
    type Build = fn(usize) -> Arc<MetricGrid>;
    let cases: Vec<(&str, Build, AnalyticField)> = vec![
        (
            "flat",
            |n| flat(&[n, n], &[1.0, 2.0]),
            AnalyticField::Trig { amp: 0.3, offset: 0.1, k: vec![1.0, 1.0], phase: vec![0.3, 1.1] },
        ),
        (
            "conformal",
            conformal,
            AnalyticField::Trig { amp: 0.1, offset: 0.0, k: vec![1.0, 1.0], phase: vec![0.0, 0.5] },
        ),
        ("sphere", sphere, AnalyticField::CosTheta { amp: 0.4, offset: 0.2 }),
    ];
    for (name, build, field) in cases {
        for phi in smooth.clone() {
            let mut h = Vec::new();
            let mut e = Vec::new();
            for n in [32, 64, 128] {
                let g = build(n);
                let src = manufactured_source(&field, &g, &phi, &pot).unwrap();
                let p = Problem::new(g.clone(), phi.clone(), pot.clone()).with_source(src);
                h.push(g.h());
                e.push(max_abs(&p.residual(&field.sample(&g).values).unwrap()));
            }
            let order = fitted_order(&h, &e).unwrap();
            assert!(
                (1.7..=2.3).contains(&order),
                "{name} {}: order {order}, errors {e:?}",
                phi.name()
            );
        }
    }
}

#[test]
fn linear_residual_is_laplace_beltrami() {
    for g in [flat(&[16, 24], &[1.0, 3.0]), sphere(16), conformal(16)] {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = ScalarField::new(g.clone(), (0..g.len()).map(|_| rng.random::<f64>()).collect());
        let r = residual(&u, &PhiFamily::linear(), &Potential::zero()).unwrap();
        assert_eq!(r.values, laplace_beltrami(&u).values);
    }
}

#[test]
fn linear_jacobian_is_laplacian_minus_curvature_of_potential() {
    let g = flat(&[12, 10], &[1.0, 2.0]);
    let pot = Potential::allen_cahn(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = ScalarField::new(g.clone(), (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect());
    let v = ScalarField::new(g.clone(), (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect());
    let jv = linearize(&u, &PhiFamily::linear(), &pot).unwrap().mul_vec(&v.values);
    let lap = laplace_beltrami(&v);
    for n in 0..g.len() {
        let expect = lap.values[n] - pot.d2f(u.values[n]) * v.values[n];
        assert!((jv[n] - expect).abs() < 1e-10 * (1.0 + expect.abs()));
    }
}

#[test]
fn jacobian_at_constant_scales_laplacian() {
    // At ∇u = 0 the operator is Φ′(0)Δ − F″(c).
    let g = flat(&[16, 16], &[1.0, 1.0]);
    let pot = Potential::allen_cahn(1.0);
    let c = 0.3;
    let u = ScalarField::constant(&g, c);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let v = ScalarField::new(g.clone(), (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect());
    let lap = laplace_beltrami(&v);
    for phi in families() {
        let d0 = phi.dphi(0.0).unwrap();
        let jv = linearize(&u, &phi, &pot).unwrap().mul_vec(&v.values);
        for n in 0..g.len() {
            let expect = d0 * lap.values[n] - pot.d2f(c) * v.values[n];
            assert!((jv[n] - expect).abs() < 1e-9 * (1.0 + expect.abs()), "{}", phi.name());
        }
    }
}

#[test]
fn directional_derivatives_match_jacobian() {
    let pot = Potential::allen_cahn(1.0);
    for g in [flat(&[32, 32], &[1.0, 1.0]), sphere(16), conformal(32)] {
        for phi in families() {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let u: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0) * 0.05).collect();
            let v: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = Problem::new(g.clone(), phi.clone(), pot.clone());
            let chk = check_jacobian(&p, &u, &v, [1e-4, 1e-5]).unwrap();
            assert!(chk.pass, "{} {:?}", phi.name(), chk);
            if chk.errors[1] > 1e3 * JACOBIAN_FLOOR * chk.scale {
                let ratio = chk.errors[0] / chk.errors[1];
                assert!((7.0..=13.0).contains(&ratio), "{}: ratio {ratio}", phi.name());
            }
        }
    }
}

#[test]
fn allen_cahn_circle_reaches_nonconstant_branch() {
    let g = flat(&[1024], &[10.0]);
    let cfg = SolveConfig {
        initial_guess: InitialGuess::Sine { amplitude: 0.5, k: 1.0, axis: 0, offset: 0.0 },
        min_step: 1.0,
        check_jacobian: true,
        ..SolveConfig::default()
    };
    let rep = newton_solve(&cfg, &PhiFamily::linear(), &Potential::allen_cahn(1.0), &g).unwrap();
    assert!(rep.converged, "{}", rep.message);
    assert!(rep.final_residual_maxnorm <= 1e-10);
    assert!(rep.jacobian_checks_pass);
    let (amp, _) = common::ac_orbit(10.0);
    assert!(rep.solution.oscillation() > 1.0);
    assert!((rep.solution.max() - amp).abs() < 1e-4, "{} vs {amp}", rep.solution.max());
    assert!(rep.jacobian_condition_estimate.is_finite());
}

#[test]
fn length_continuation_from_bifurcation_point() {
    let g = flat(&[512], &[10.0]);
    let cfg = SolveConfig {
        initial_guess: InitialGuess::Sine { amplitude: 0.5, k: 1.0, axis: 0, offset: 0.0 },
        continuation: Some(Continuation {
            parameter: ContinuationParameter::Length,
            start: 2.0 * PI * 1.05,
            steps: 8,
            max_bisections: 6,
        }),
        pin: Pin::Phase { axis: 0 },
        ..SolveConfig::default()
    };
    let rep = newton_solve(&cfg, &PhiFamily::linear(), &Potential::allen_cahn(1.0), &g).unwrap();
    assert!(rep.converged, "{}", rep.message);
    assert!(rep.continuation_steps >= 9);
    assert_eq!(rep.solution.grid.lengths[0], 10.0);
    let (amp, _) = common::ac_orbit(10.0);
    assert!((rep.solution.max() - amp).abs() < 1e-4);
    assert!(rep.lagrange_multiplier.abs() < 1e-8);
}

#[test]
fn damped_newton_from_small_sine_lands_on_a_constant() {
    // Backtracking on the max-norm keeps the iterates near the unstable
    // constant u ≡ 0, which is also a solution.
    let g = flat(&[1024], &[10.0]);
    let cfg = SolveConfig {
        initial_guess: InitialGuess::Sine { amplitude: 0.5, k: 1.0, axis: 0, offset: 0.0 },
        ..SolveConfig::default()
    };
    let rep = newton_solve(&cfg, &PhiFamily::linear(), &Potential::allen_cahn(1.0), &g).unwrap();
    assert!(rep.converged);
    assert!(rep.solution.oscillation() <= 1e-10);
}

#[test]
fn damped_newton_from_large_sine_reaches_branch() {
    let g = flat(&[1024], &[10.0]);
    let cfg = SolveConfig {
        initial_guess: InitialGuess::Sine { amplitude: 1.0, k: 1.0, axis: 0, offset: 0.0 },
        ..SolveConfig::default()
    };
    let rep = newton_solve(&cfg, &PhiFamily::linear(), &Potential::allen_cahn(1.0), &g).unwrap();
    let (amp, _) = common::ac_orbit(10.0);
    assert!(rep.converged);
    assert!((rep.solution.max() - amp).abs() < 1e-4);
}

#[test]
fn convex_potential_forces_zero() {
    let g = flat(&[32, 32], &[1.0, 1.0]);
    for seed in 0..3 {
        let cfg = SolveConfig {
            initial_guess: InitialGuess::Random { seed, amplitude: 1.0, offset: 0.0 },
            ..SolveConfig::default()
        };
        let rep = newton_solve(&cfg, &PhiFamily::linear(), &Potential::cosh(), &g).unwrap();
        assert!(rep.converged);
        assert!(rep.solution.max_abs() <= 1e-10);
    }
}

#[test]
fn mean_curvature_recovers_manufactured_solution() {
    let field = AnalyticField::sine(2, 0, 0.1, 1.0, 0.0);
    let phi = PhiFamily::mean_curvature();
    let pot = Potential::zero();
    let mut h = Vec::new();
    let mut e = Vec::new();
    for n in [32, 64, 128] {
        let g = flat(&[n, n], &[1.0, 1.0]);
        let src = manufactured_source(&field, &g, &phi, &pot).unwrap();
        let p = Problem::new(g.clone(), phi.clone(), pot.clone()).with_source(src);
        let cfg = SolveConfig { pin: Pin::Mean { value: Some(0.0) }, ..SolveConfig::default() };
        let rep = solve_problem(&cfg, &p).unwrap();
        assert!(rep.converged, "{}", rep.message);
        let exact = field.sample(&g);
        let err = rep
            .solution
            .values
            .iter()
            .zip(&exact.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        h.push(g.h());
        e.push(err);
    }
    let order = fitted_order(&h, &e).unwrap();
    assert!((1.7..=2.3).contains(&order), "order {order}, errors {e:?}");
}

#[test]
fn manufactured_runs_converge_quadratically() {
    let field = AnalyticField::Trig { amp: 0.3, offset: 0.2, k: vec![1.0, 1.0], phase: vec![0.0, 0.7] };
    let pot = Potential::cosh();
    let mut consts = Vec::new();
    for n in [32, 64] {
        let g = flat(&[n, n], &[1.0, 1.0]);
        let phi = PhiFamily::p_laplacian(4.0);
        let src = manufactured_source(&field, &g, &phi, &pot).unwrap();
        let p = Problem::new(g.clone(), phi, pot.clone()).with_source(src);
        let cfg = SolveConfig {
            newton_tol: 1e-10,
            initial_guess: InitialGuess::Values {
                values: AnalyticField::Trig { amp: 0.2, offset: 0.1, k: vec![1.0, 1.0], phase: vec![0.0, 0.7] }
                    .sample(&g)
                    .values,
            },
            ..SolveConfig::default()
        };
        let rep = solve_problem(&cfg, &p).unwrap();
        assert!(rep.converged, "{}", rep.message);
        let r = rep.residual_history();
        let floor = 1e4 * f64::EPSILON * r[0];
        let tail: Vec<f64> = r.iter().copied().filter(|&x| x > floor).collect();
        assert!(tail.len() >= 3, "{r:?}");
        let k = tail.len();
        let c: Vec<f64> = (k - 3..k - 1).map(|i| tail[i + 1] / (tail[i] * tail[i])).collect();
        assert!(c.iter().all(|&x| x < 1e3), "{r:?}");
        consts.push(c[0]);
    }
    assert!(consts[1] / consts[0] < 2.0 && consts[0] / consts[1] < 2.0, "{consts:?}");
}

#[test]
fn solves_are_bit_identical() {
    let g = flat(&[24, 24], &[1.0, 1.0]);
    let cfg = SolveConfig {
        initial_guess: InitialGuess::Random { seed: 7, amplitude: 0.5, offset: 0.0 },
        check_jacobian: true,
        seed: 42,
        ..SolveConfig::default()
    };
    let phi = PhiFamily::p_laplacian(3.0);
    let a = newton_solve(&cfg, &phi, &Potential::cosh(), &g).unwrap();
    let b = newton_solve(&cfg, &phi, &Potential::cosh(), &g).unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.solution.values, b.solution.values);
    assert_eq!(a.history, b.history);
}

#[test]
fn converged_solutions_integrate_potential_slope_to_zero() {
    let g = flat(&[256], &[10.0]);
    let cfg = SolveConfig {
        initial_guess: InitialGuess::Sine { amplitude: 0.5, k: 1.0, axis: 0, offset: 0.0 },
        ..SolveConfig::default()
    };
    let pot = Potential::allen_cahn(1.0);
    let rep = newton_solve(&cfg, &PhiFamily::linear(), &pot, &g).unwrap();
    let w = g.volume_weights();
    let s: f64 = rep.solution.values.iter().zip(&w).map(|(u, w)| pot.df(*u) * w).sum();
    assert!(s.abs() <= cfg.newton_tol * g.total_volume());
}

#[test]
fn harmonic_case_is_constant_with_mean_pin() {
    let g = flat(&[32, 32], &[1.0, 1.0]);
    let cfg = SolveConfig {
        initial_guess: InitialGuess::Random { seed: 1, amplitude: 1.0, offset: 0.5 },
        ..SolveConfig::default()
    };
    let rep = newton_solve(&cfg, &PhiFamily::linear(), &Potential::zero(), &g).unwrap();
    assert!(rep.converged);
    assert!(rep.solution.oscillation() <= 1e-10);
    assert!(rep.pin.contains("Auto"));
}

#[test]
fn iterative_solver_matches_direct() {
    let g = flat(&[32, 32], &[1.0, 1.0]);
    let base = SolveConfig {
        initial_guess: InitialGuess::Random { seed: 2, amplitude: 0.5, offset: 0.0 },
        ..SolveConfig::default()
    };
    let gcr_cfg = SolveConfig {
        linear_solver: LinearSolver::ConjugateResidual { rtol: None, max_iter: 2000, restart: 60 },
        ..base.clone()
    };
    let phi = PhiFamily::linear();
    let pot = Potential::quadratic(0.0);
    let a = newton_solve(&base, &phi, &pot, &g).unwrap();
    let b = newton_solve(&gcr_cfg, &phi, &pot, &g).unwrap();
    assert!(a.converged && b.converged, "{}", b.message);
    assert!(b.solution.max_abs() <= 1e-10);
}

#[test]
fn non_convergence_is_reported() {
    let g = flat(&[64], &[10.0]);
    let cfg = SolveConfig {
        max_newton_iters: 1,
        initial_guess: InitialGuess::Sine { amplitude: 0.5, k: 1.0, axis: 0, offset: 0.0 },
        ..SolveConfig::default()
    };
    let rep = newton_solve(&cfg, &PhiFamily::linear(), &Potential::allen_cahn(1.0), &g).unwrap();
    assert!(!rep.converged);
    assert!(rep.final_residual_maxnorm > cfg.newton_tol);
}

#[test]
fn invalid_configs_are_rejected() {
    let g = flat(&[16], &[1.0]);
    let phi = PhiFamily::linear();
    let pot = Potential::cosh();
    for cfg in [
        SolveConfig { newton_tol: 0.0, ..SolveConfig::default() },
        SolveConfig { backtrack: 1.0, ..SolveConfig::default() },
        SolveConfig { initial_guess: InitialGuess::Values { values: vec![0.0; 3] }, ..SolveConfig::default() },
    ] {
        assert!(matches!(newton_solve(&cfg, &phi, &pot, &g), Err(SolverError::Config(_))));
    }
}

#[test]
fn singular_family_error_names_node() {
    let g = flat(&[16], &[1.0]);
    let phi = PhiFamily::p_laplacian(1.5).with_epsilon(None);
    let u = ScalarField::constant(&g, 0.0);
    match residual(&u, &phi, &Potential::zero()) {
        Err(SolverError::Domain { node, t, .. }) => {
            assert_eq!(node, 0);
            assert_eq!(t, 0.0);
        }
        other => panic!("expected domain error, got {other:?}"),
    }
}

#[test]
fn profile_extension_copies_rows() {
    let g = flat(&[16, 8], &[2.0, 1.0]);
    let s: Vec<f64> = (0..16).map(|i| i as f64 * 2.0 / 16.0).collect();
    let u: Vec<f64> = s.iter().map(|x| x.sin()).collect();
    let v = extend_profile(&g, 0, &s, &u).unwrap();
    for n in 0..g.len() {
        assert_eq!(v[n], u[g.index(n)[0]]);
    }
}
