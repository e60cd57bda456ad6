//! Human-readable summaries of a run directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::dump::FieldDump;
use crate::verifier::{Status, TheoremTag, VerifyReport};

use super::run::{RunManifest, SOLUTION_FILE};
use super::HarnessError;

pub const SUMMARY_FILE: &str = "summary.txt";

/// Extremal value of each check kind, shown in its summary line.
fn headline_key(r: &VerifyReport) -> Option<&'static str> {
    Some(match (r.theorem, r.check.as_str()) {
        (TheoremTag::GradientBound, "max-p") => "max_p",
        (TheoremTag::GradientBound, "p-constancy") => "relative_std_p",
        (TheoremTag::GradientBound, "period-energy") => "relative_error",
        (TheoremTag::GradientBound, "row-match") => "max_deviation",
        (TheoremTag::Lemma21, "claim") => "order",
        (TheoremTag::Lemma21 | TheoremTag::Lemma31, _) => "min_residual",
        (TheoremTag::Liouville, _) => "max_oscillation",
        (TheoremTag::ZeroPotential, _) => "min_f",
        (TheoremTag::Harnack | TheoremTag::Abp, _) => "c_emp",
        (TheoremTag::Equality, "locus") => "max_ricci",
        (TheoremTag::Equality, "first-integral") => "drift",
        (TheoremTag::Equality, "q-transform") => "unit_gradient_defect_0",
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub text: String,
    /// Inventory files that are absent or whose contents changed.
    pub missing: Vec<String>,
    pub written: Vec<PathBuf>,
}

pub fn headline(r: &VerifyReport) -> Option<(&'static str, f64)> {
    let k = headline_key(r)?;
    r.value(k).map(|v| (k, v))
}

fn status_label(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "FAIL",
        Status::Diagnostic => "diagnostic",
        Status::Measurement => "measurement",
    }
}

/// Reads `manifest`, writes the summary and field slices next to it.
pub fn report(manifest: &Path) -> Result<Summary, HarnessError> {
    let m = RunManifest::read(manifest)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let mut t = String::new();
    let _ = writeln!(t, "run {} (version {}, mode {:?}, seed {})", &m.config_hash[..16], m.version, m.mode, m.seed);
    for (name, s) in [("profile solve", &m.profile_solve), ("solve", &m.solve)] {
        if let Some(s) = s {
            let _ = writeln!(
                t,
                "{name}: {} in {} iterations, residual {:.3e}, jacobian checks {}",
                if s.converged { "converged" } else { "NOT CONVERGED" },
                s.iterations,
                s.final_residual_maxnorm,
                if s.jacobian_checks_pass { "pass" } else { "FAIL" }
            );
        }
    }
    let mut by_theorem: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for c in &m.checks {
        match (&c.report, &c.error) {
            (Some(r), _) => {
                let head = headline(r).map(|(k, v)| format!("{k} = {v:.6e}")).unwrap_or_default();
                let hyp = if r.hypotheses_met { "" } else { " (hypotheses unmet)" };
                by_theorem.entry(r.theorem.as_str()).or_default().push(format!(
                    "  {:<20} {:<12} {:<36} tol {:.1e}{hyp}",
                    c.label,
                    status_label(r.status),
                    head,
                    r.tolerance
                ));
            }
            (None, e) => {
                by_theorem.entry("errors").or_default().push(format!(
                    "  {:<20} ERROR        {}",
                    c.label,
                    e.as_deref().unwrap_or("no report")
                ));
            }
        }
    }
    for (tag, lines) in &by_theorem {
        let _ = writeln!(t, "\n[{tag}]");
        for l in lines {
            let _ = writeln!(t, "{l}");
        }
    }
    if let Some(s) = &m.study {
        let _ = writeln!(t, "\n[study] order {} ({})", s.order_label(), status_label(s.status));
        let _ = writeln!(t, "  {:>5} {:>14} {:>14}", "level", "h", "error");
        for r in &s.rows {
            let _ = writeln!(t, "  {:>5} {:>14.6e} {:>14.6e}", r.level, r.h, r.error);
        }
    }
    let mut missing = Vec::new();
    for f in &m.files {
        match std::fs::read(dir.join(&f.name)) {
            Ok(b) if hex::encode(Sha256::digest(&b)) == f.sha256 => {}
            Ok(_) => missing.push(format!("{} (contents changed)", f.name)),
            Err(_) => missing.push(format!("{} (absent)", f.name)),
        }
    }
    if !missing.is_empty() {
        let _ = writeln!(t, "\nmissing files:");
        for f in &missing {
            let _ = writeln!(t, "  {f}");
        }
    }
    let _ = writeln!(t, "\noverall: {}", if m.ok() { "ok" } else { "FAIL" });

    let mut written = Vec::new();
    if let Ok(d) = FieldDump::read(&dir.join(SOLUTION_FILE)) {
        if d.shape.len() == 2 {
            for (axis, name) in [(0usize, "slice_x.txt"), (1, "slice_y.txt")] {
                let s = slice(&d, axis);
                let p = dir.join(name);
                s.write(&p)?;
                written.push(p);
            }
        }
    }
    let p = dir.join(SUMMARY_FILE);
    std::fs::write(&p, &t).map_err(|e| HarnessError::Io {
        path: p.display().to_string(),
        msg: e.to_string(),
    })?;
    written.push(p);
    Ok(Summary { text: t, missing, written })
}

/// The line through index 0 of the other axis, as (coordinate, value) columns.
fn slice(d: &FieldDump, axis: usize) -> FieldDump {
    let (nx, ny) = (d.shape[0], d.shape[1]);
    let nodes: Vec<usize> = if axis == 0 { (0..nx).map(|i| i * ny).collect() } else { (0..ny).collect() };
    let last = d.columns.len() - 1;
    FieldDump {
        name: format!("{}-slice", d.name),
        shape: vec![nodes.len()],
        lengths: vec![d.lengths[axis]],
        grid_hash: d.grid_hash.clone(),
        seed: d.seed,
        columns: vec![d.columns[axis].clone(), d.columns[last].clone()],
        rows: nodes.iter().map(|&n| vec![d.rows[n][axis], d.rows[n][last]]).collect(),
    }
}
