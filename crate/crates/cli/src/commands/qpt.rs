//! Process-tomography sweeps in the Fock or the Kerr-cat frame.

use super::{point_strategy_pairs, strategy_name, ModelVariant};
use crate::config::{ExperimentConfig, SweepPoint};
use crate::output::{json_text, Artifacts, Csv};
use crate::{CliError, Outcome, QptSpace, Runner};
use kerrcat_core::dynamics::{qubit_channel, Protocol, Tolerance};
use kerrcat_core::schedule::CompensationStrategy;
use kerrcat_core::tomography::{cat_qpt, fock_qpt, QptResult, QubitFrame};
use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::json;

/// One output row: a (point, strategy, model, SPAM) combination.
#[derive(Debug, Clone, Serialize)]
pub struct QptRow {
    pub point: usize,
    pub eps2_kc_mhz: f64,
    pub delta_as_kc_mhz: f64,
    pub delta_over_k: f64,
    pub alpha_sq: f64,
    pub strategy: &'static str,
    pub model: &'static str,
    pub spam: &'static str,
    pub fidelity: f64,
    pub fidelity_aligned: f64,
    pub z_angle: f64,
    pub leakage: f64,
    pub r: [[f64; 4]; 4],
}

impl QptRow {
    fn new(
        pt: &SweepPoint,
        k: f64,
        s: CompensationStrategy,
        m: &ModelVariant,
        spam: &'static str,
        q: &QptResult,
    ) -> Self {
        Self {
            point: pt.index,
            eps2_kc_mhz: pt.eps2_kc_mhz,
            delta_as_kc_mhz: pt.delta_as_kc_mhz,
            delta_over_k: pt.delta_as_kc_mhz / k,
            alpha_sq: pt.alpha_sq,
            strategy: strategy_name(s),
            model: m.name(),
            spam,
            fidelity: q.fidelity,
            fidelity_aligned: q.fidelity_aligned,
            z_angle: q.z_angle,
            leakage: q.leakage,
            r: q.r.rows,
        }
    }
}

/// Runs the tomography sweep and returns its rows in task order.
pub fn sweep(
    config: &ExperimentConfig,
    space_kind: QptSpace,
    runner: &Runner,
) -> Result<Vec<QptRow>, CliError> {
    let k = config.physical.k_mhz;
    let space = config.space();
    let spam = config.spam();
    let tasks: Vec<_> = point_strategy_pairs(config)
        .into_iter()
        .flat_map(|(pt, s)| {
            ModelVariant::all(config)
                .into_iter()
                .map(move |m| (pt, s, m))
        })
        .collect();
    let per_task = runner.map(&tasks, |_, (pt, s, m)| {
        let spec = config.ramp_spec(pt, *s);
        let tol = Tolerance::default();
        let rows = match space_kind {
            QptSpace::Fock => {
                let ch = qubit_channel(&Protocol::RampHoldRamp, &spec, k, space, m.model(), &tol)?;
                vec![QptRow::new(pt, k, *s, m, "none", &fock_qpt(&ch)?)]
            }
            QptSpace::Cat => {
                let ch = qubit_channel(&Protocol::RampOnly, &spec, k, space, m.model(), &tol)?;
                let frame = QubitFrame::kerr_cat(C64::new(pt.alpha_sq.sqrt(), 0.0), space)?;
                let mut rows = vec![QptRow::new(
                    pt,
                    k,
                    *s,
                    m,
                    "none",
                    &cat_qpt(&ch, &frame, None)?,
                )];
                if let Some(table) = &spam {
                    rows.push(QptRow::new(
                        pt,
                        k,
                        *s,
                        m,
                        "table",
                        &cat_qpt(&ch, &frame, Some(table))?,
                    ));
                }
                rows
            }
        };
        Ok::<_, CliError>(rows)
    })?;
    Ok(per_task.into_iter().flatten().collect())
}

pub fn run(
    config: &ExperimentConfig,
    space_kind: QptSpace,
    runner: &Runner,
) -> Result<Outcome, CliError> {
    let rows = sweep(config, space_kind, runner)?;
    let name = match space_kind {
        QptSpace::Fock => "fock",
        QptSpace::Cat => "cat",
    };
    let mut csv = Csv::new(&[
        "point",
        "eps2_kc_mhz",
        "delta_as_kc_mhz",
        "delta_over_k",
        "alpha_sq",
        "strategy",
        "model",
        "spam",
        "fidelity",
        "fidelity_aligned",
        "z_angle",
        "leakage",
    ]);
    for r in &rows {
        csv.row(&[
            &r.point,
            &r.eps2_kc_mhz,
            &r.delta_as_kc_mhz,
            &r.delta_over_k,
            &r.alpha_sq,
            &r.strategy,
            &r.model,
            &r.spam,
            &r.fidelity,
            &r.fidelity_aligned,
            &r.z_angle,
            &r.leakage,
        ]);
    }
    let mut files = Artifacts::default();
    if config.io.csv() {
        files.insert(format!("qpt_{name}.csv"), csv.into_string());
    }
    if config.io.json() {
        files.insert(format!("qpt_{name}_rmatrices.json"), json_text(&rows));
    }

    // fidelity range per (strategy, model, spam) group, in first-seen order
    let mut groups: Vec<((&str, &str, &str), f64, f64)> = Vec::new();
    for r in &rows {
        let key = (r.strategy, r.model, r.spam);
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => {
                g.1 = g.1.min(r.fidelity);
                g.2 = g.2.max(r.fidelity);
            }
            None => groups.push((key, r.fidelity, r.fidelity)),
        }
    }
    let groups: Vec<_> = groups
        .into_iter()
        .map(|((s, m, p), lo, hi)| json!({"strategy": s, "model": m, "spam": p, "min_fidelity": lo, "max_fidelity": hi}))
        .collect();
    Ok(Outcome {
        files,
        results: json!({"space": name, "rows": rows.len(), "groups": groups}),
    })
}
