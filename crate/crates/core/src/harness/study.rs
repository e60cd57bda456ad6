//! Dyadic refinement studies.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::convergence::{fitted_order, pairwise_orders};
use crate::geometry::{covariant_gradient, ScalarField};
use crate::verifier::{self, lemma21_claim_residual, p_function, Status, VerifyReport, CLAIM_EXACT, ORDER_RANGE};

use super::config::{AnalyticField, ExperimentConfig, StudyKind};
use super::run::{solve_pipeline, Problem};
use super::HarnessError;

pub const DEFAULT_LEVELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub level: usize,
    pub shape: Vec<usize>,
    pub h: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub kind: StudyKind,
    pub rows: Vec<StudyRow>,
    /// Least-squares slope of log(error) against log(h); `None` when exact.
    pub order: Option<f64>,
    pub pairwise: Vec<Option<f64>>,
    /// Every error at or below rounding level.
    pub exact: bool,
    pub status: Status,
    /// The claim report, for claim studies.
    pub report: Option<VerifyReport>,
}

impl StudyTable {
    /// "exact", or the fitted order.
    pub fn order_label(&self) -> String {
        match (self.exact, self.order) {
            (true, _) => "exact".into(),
            (false, Some(o)) => format!("{o:.3}"),
            (false, None) => "undefined".into(),
        }
    }

    /// Columns (level, h, error) with a header line.
    pub fn to_text(&self) -> String {
        let kind = serde_json::to_value(self.kind).unwrap();
        let mut s = format!(
            "# study={} order={} columns=level,h,error\n",
            kind.as_str().unwrap_or("?"),
            self.order_label()
        );
        for r in &self.rows {
            let _ = writeln!(s, "{} {:.17e} {:.17e}", r.level, r.h, r.error);
        }
        s
    }
}

/// Value and coordinate gradient of an analytic field.
fn analytic(field: AnalyticField, lengths: &[f64]) -> impl Fn(&[f64]) -> (f64, Vec<f64>) + '_ {
    move |x: &[f64]| match field {
        AnalyticField::Constant => (1.0, vec![0.0; x.len()]),
        AnalyticField::Trig => {
            let kx = 2.0 * PI / lengths[0];
            if x.len() == 1 {
                ((kx * x[0]).sin() + 2.0, vec![kx * (kx * x[0]).cos()])
            } else {
                let ky = 2.0 * PI / lengths[1];
                let (sx, cx) = (kx * x[0]).sin_cos();
                let (sy, cy) = (ky * x[1]).sin_cos();
                let mut g = vec![kx * cx * cy, -ky * sx * sy];
                g.resize(x.len(), 0.0);
                (sx * cy + 2.0, g)
            }
        }
    }
}

/// Runs the `[study]` section over `levels` dyadic refinements.
/// The config's `study.levels` wins over the argument.
pub fn convergence_study(cfg: &ExperimentConfig, levels: Option<usize>) -> Result<StudyTable, HarnessError> {
    let spec = cfg.study.as_ref().ok_or_else(|| HarnessError::Validation {
        field: "study".into(),
        msg: "section missing".into(),
    })?;
    if let (Some(a), Some(b)) = (spec.levels, levels) {
        if a != b {
            eprintln!("warning: study.levels = {a} in the config overrides --levels {b}");
        }
    }
    let levels = spec.levels.or(levels).unwrap_or(DEFAULT_LEVELS);
    if levels < 3 {
        return Err(HarnessError::Validation {
            field: "levels".into(),
            msg: format!("a study needs at least 3 levels, got {levels}"),
        });
    }
    let gs = cfg.grid.as_ref().ok_or_else(|| HarnessError::Validation {
        field: "grid".into(),
        msg: "section missing".into(),
    })?;
    gs.validate()?;
    let dim = gs.shape.as_ref().unwrap().len() as u32;
    let finest = (gs.nodes() as u128) << (dim as usize * (levels - 1));
    if finest > spec.node_cap as u128 {
        return Err(HarnessError::NodeCap {
            nodes: finest,
            cap: spec.node_cap,
        });
    }
    let pr = Problem {
        phi: cfg.build_family()?,
        pot: cfg.build_potential()?,
    };
    let grids = (0..levels)
        .map(|k| gs.build(Some(1 << k)))
        .collect::<Result<Vec<_>, _>>()?;
    let lengths = gs.lengths.clone().unwrap();
    let f = analytic(spec.field, &lengths);
    let mut report = None;
    let errors: Vec<f64> = match spec.kind {
        StudyKind::Claim => {
            let u = |x: &[f64]| f(x).0;
            let (r, lv) = lemma21_claim_residual(&u, &pr.phi, &grids, spec.floor)?;
            report = Some(r);
            lv.iter().map(|l| l.discrepancy).collect()
        }
        StudyKind::Gradient => grids
            .iter()
            .map(|g| {
                let u = ScalarField::from_fn(g, |x| f(x).0);
                let du = covariant_gradient(&u);
                (0..g.len())
                    .flat_map(|n| {
                        let exact = f(&g.coords(n)).1;
                        (0..g.dim).map(move |i| (i, n, exact[i]))
                    })
                    .map(|(i, n, e)| (du.component(n, i) - e).abs())
                    .fold(0.0, f64::max)
            })
            .collect(),
        StudyKind::PVariation => {
            let mut out = Vec::with_capacity(levels);
            for g in &grids {
                let s = solve_pipeline(cfg, &pr, g)?;
                if !s.report.converged {
                    return Err(HarnessError::Check(format!(
                        "solve on {:?} did not converge: {}",
                        g.shape, s.report.message
                    )));
                }
                let b = p_function(&s.report.solution, &pr.phi, &pr.pot)?;
                let (mean, std) = verifier::mean_and_std(&b.p.values);
                out.push(if mean != 0.0 { std / mean.abs() } else { std });
            }
            out
        }
    };
    let h: Vec<f64> = grids.iter().map(|g| g.h()).collect();
    let order = fitted_order(&h, &errors);
    let exact = errors.iter().all(|&e| e <= CLAIM_EXACT);
    let in_range = order.is_some_and(|o| o >= ORDER_RANGE.0 && o <= ORDER_RANGE.1);
    let status = match (&report, spec.kind) {
        (Some(r), _) => r.status,
        (None, StudyKind::Gradient) if exact || in_range => Status::Pass,
        (None, StudyKind::Gradient) => Status::Fail,
        _ => Status::Measurement,
    };
    Ok(StudyTable {
        kind: spec.kind,
        rows: grids
            .iter()
            .zip(&errors)
            .enumerate()
            .map(|(k, (g, &e))| StudyRow {
                level: k,
                shape: g.shape.clone(),
                h: g.h(),
                error: e,
            })
            .collect(),
        order,
        pairwise: pairwise_orders(&h, &errors),
        exact,
        status,
        report,
    })
}
