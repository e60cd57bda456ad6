use std::path::{Path, PathBuf};
use std::process::Command;

use qlgrad::dump::FieldDump;
use qlgrad::harness::{
    convergence_study, execute, report, ExperimentConfig, HarnessError, Mode, RunManifest, MANIFEST_FILE,
    P_FILE, SOLUTION_FILE,
};
use qlgrad::verifier::{Status, TheoremTag};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run_in(name: &str, mode: Mode, dir: &Path) -> RunManifest {
    let cfg = ExperimentConfig::load(&config(name)).unwrap();
    execute(&cfg, mode, dir, None).unwrap()
}

const TINY: &str = r#"
seed = 3

[grid]
kind = "flat-torus"
shape = [32, 32]
lengths = [1.0, 1.0]

[family]
kind = "linear"

[potential]
kind = "zero"

[study]
kind = "claim"
field = "constant"
"#;

#[test]
fn circle_run_passes_the_bound_and_keeps_going_after_a_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run_in("thm11_circle.toml", Mode::Verify, tmp.path());
    let solve = m.solve.as_ref().unwrap();
    assert!(solve.converged && solve.final_residual_maxnorm <= 1e-10);
    let gb = m.check("gradient-bound").unwrap();
    assert_eq!((gb.theorem, gb.status), (TheoremTag::GradientBound, Status::Pass));
    assert!(gb.value("max_p").unwrap() < 0.0);
    // The second-order scheme leaves std(P)/|mean P| near 1e-4 at N = 1024.
    assert_eq!(m.check("p-constancy").unwrap().status, Status::Fail);
    assert_eq!(m.checks.len(), 8);
    assert!(m.checks[2..].iter().all(|c| c.ok()), "{:#?}", m.checks);
    assert!(!m.ok());

    let d = FieldDump::read(&tmp.path().join(SOLUTION_FILE)).unwrap();
    assert_eq!(d.columns, ["s", "u", "P"]);
    assert_eq!(d.shape, [1024]);
    assert_eq!(d.seed, Some(1));
    let p = d.column("P").unwrap();
    assert!((p.iter().cloned().fold(f64::MIN, f64::max) - gb.value("max_p").unwrap()).abs() < 1e-15);
}

#[test]
fn liouville_config_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run_in("thm12_liouville_torus.toml", Mode::Verify, tmp.path());
    let r = m.check("liouville").unwrap();
    assert_eq!(r.status, Status::Pass);
    assert!(r.value("max_oscillation").unwrap() <= 1e-8);
    assert_eq!(r.value("converged"), Some(5.0));
    assert!(m.ok());
}

#[test]
fn missing_shape_is_a_validation_error() {
    let text = TINY.replace("shape = [32, 32]\n", "");
    let e = ExperimentConfig::parse(&text).unwrap_err();
    assert!(matches!(e, HarnessError::Validation { ref field, .. } if field.contains("shape")), "{e}");
    assert!(e.to_string().contains("shape"));
}

#[test]
fn manifest_records_seed_and_every_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run_in("thm11_circle.toml", Mode::Verify, tmp.path());
    assert_eq!(m.seed, 1);
    assert_eq!(m.config_hash.len(), 64);
    for key in [
        "solve.newton_tol",
        "solver.jacobian_floor",
        "verifier.gradient_floor",
        "verifier.hypothesis_tol",
        "checks[0].gradient-bound.tol_grid",
        "checks[1].p-constancy.tolerance",
        "checks[2].period-energy.tolerance",
    ] {
        assert!(m.tolerances.contains_key(key), "{key}");
    }
    let names: Vec<&str> = m.files.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, [SOLUTION_FILE]);
    let back = RunManifest::read(&tmp.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(back, m);
}

#[test]
fn identical_config_and_seed_reproduce_the_manifest() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = run_in("thm12_liouville_torus.toml", Mode::Verify, a.path());
    let mb = run_in("thm12_liouville_torus.toml", Mode::Verify, b.path());
    assert_eq!(ma.without_timings(), mb.without_timings());
    let ma = run_in("thm11_circle.toml", Mode::Verify, a.path());
    let mb = run_in("thm11_circle.toml", Mode::Verify, b.path());
    assert_eq!(ma.without_timings(), mb.without_timings());
    assert_eq!(
        std::fs::read(a.path().join(SOLUTION_FILE)).unwrap(),
        std::fs::read(b.path().join(SOLUTION_FILE)).unwrap()
    );
}

#[test]
fn claim_study_for_p4_has_second_order() {
    let cfg = ExperimentConfig::load(&config("lem21_claim_study.toml")).unwrap();
    let t = convergence_study(&cfg, None).unwrap();
    assert_eq!(t.rows.iter().map(|r| r.shape[0]).collect::<Vec<_>>(), [64, 128, 256]);
    let o = t.order.unwrap();
    assert!((1.7..=2.3).contains(&o), "{o}");
    assert_eq!(t.status, Status::Pass);
}

#[test]
fn gradient_study_has_second_order() {
    let cfg = ExperimentConfig::load(&config("gradient_study.toml")).unwrap();
    let t = convergence_study(&cfg, Some(4)).unwrap();
    assert_eq!(t.rows.len(), 4);
    assert!((t.order.unwrap() - 2.0).abs() < 0.05);
    assert!(t.pairwise.iter().all(|o| (o.unwrap() - 2.0).abs() < 0.1));
}

#[test]
fn constant_field_study_is_exact() {
    let cfg = ExperimentConfig::parse(TINY).unwrap();
    let t = convergence_study(&cfg, None).unwrap();
    assert!(t.exact);
    assert_eq!(t.order, None);
    assert_eq!(t.order_label(), "exact");
    assert!(t.rows.iter().all(|r| r.error == 0.0));
    assert!(t.to_text().starts_with("# study=claim order=exact"));
}

#[test]
fn study_guards() {
    let cfg = ExperimentConfig::parse(TINY).unwrap();
    assert!(matches!(convergence_study(&cfg, Some(2)), Err(HarnessError::Validation { .. })));
    let capped = ExperimentConfig::parse(&format!("{TINY}node_cap = 4000\n")).unwrap();
    let e = convergence_study(&capped, Some(3)).unwrap_err();
    assert!(matches!(e, HarnessError::NodeCap { nodes: 16384, cap: 4000 }), "{e}");
}

#[test]
fn torus_dumps_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run_in("thm11_torus_quasi1d.toml", Mode::Verify, tmp.path());
    let rm = m.check("row-match").unwrap();
    assert_eq!(rm.status, Status::Pass);
    assert!(rm.value("max_deviation").unwrap() <= 1e-8);

    let d = FieldDump::read(&tmp.path().join(SOLUTION_FILE)).unwrap();
    assert_eq!(d.columns, ["x", "y", "u"]);
    assert_eq!((d.shape.clone(), d.lengths.clone()), (vec![512, 64], vec![10.0, 1.0]));
    // Row-major: y varies fastest.
    assert_eq!(d.rows[1][0], 0.0);
    assert_eq!(d.rows[1][1], 1.0 / 64.0);
    assert!(tmp.path().join(P_FILE).exists());

    std::fs::remove_file(tmp.path().join(P_FILE)).unwrap();
    let s = report(&tmp.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(s.missing, [format!("{P_FILE} (absent)")]);
    assert!(s.text.contains("[thm1.5-diag]"));
    let slice = FieldDump::read(&tmp.path().join("slice_x.txt")).unwrap();
    assert_eq!(slice.columns, ["x", "u"]);
    assert_eq!(slice.rows.len(), 512);
}

#[test]
fn report_marks_failures_with_their_value() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run_in("thm11_circle.toml", Mode::Verify, tmp.path());
    let s = report(&tmp.path().join(MANIFEST_FILE)).unwrap();
    let rel = m.check("p-constancy").unwrap().value("relative_std_p").unwrap();
    let line = s.text.lines().find(|l| l.contains("p-constancy")).unwrap();
    assert!(line.contains("FAIL") && line.contains(&format!("{rel:.6e}")), "{line}");
    assert!(s.text.contains("overall: FAIL"));
    assert!(s.missing.is_empty());
}

#[test]
fn ode_mode_runs_only_ode_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run_in("ode_profiles.toml", Mode::Ode, tmp.path());
    assert!(m.solve.is_none());
    assert_eq!(m.checks.len(), 3);
    assert!(m.ok(), "{:#?}", m.checks);
    let tanh = m.checks[0].report.as_ref().unwrap();
    assert!(tanh.value("tanh_error").unwrap() <= 1e-8);
    assert_eq!(m.files.len(), 2);
}

#[test]
fn cli_exit_codes_and_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_qlgrad");
    let run = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .env("QLAB_OUTPUT_ROOT", tmp.path())
            .output()
            .unwrap()
    };
    let ok = run(&["verify", config("thm13_harmonic.toml").to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let manifest = tmp.path().join("thm13_harmonic").join(MANIFEST_FILE);
    assert!(manifest.exists());
    assert_eq!(run(&["report", manifest.to_str().unwrap()]).status.code(), Some(0));

    let fail = run(&["verify", config("thm11_circle.toml").to_str().unwrap()]);
    assert_eq!(fail.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&fail.stdout).contains("FAIL"));

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, TINY.replace("shape = [32, 32]\n", "")).unwrap();
    let err = run(&["study", bad.to_str().unwrap(), "--levels", "3"]);
    assert_eq!(err.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&err.stderr).contains("shape"));

    let seeded = run(&["study", config("gradient_study.toml").to_str().unwrap(), "--levels", "3", "--seed", "9"]);
    assert_eq!(seeded.status.code(), Some(0));
    let m = RunManifest::read(&tmp.path().join("gradient_study").join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.seed, 9);
}
