//! Eigenlevel diagrams: the undriven detuning sweep and squeezing sweeps
//! under each compensation strategy.

use super::{point_strategy_pairs, strategy_name};
use crate::config::ExperimentConfig;
use crate::output::{json_text, Artifacts};
use crate::{CliError, Outcome, Runner};
use kerrcat_core::dynamics::{eigen_trace, KerrCatParams, SpectrumTrace};
use kerrcat_core::schedule::CompensationStrategy;
use serde_json::json;

enum Task {
    Detuning,
    Squeezing(crate::config::SweepPoint, CompensationStrategy),
}

/// Applied detuning `Δ = Δ_as − γ ε₂²` at pump amplitude `eps2` on the way
/// to the plateau `eps2_kc`.
fn detuning(strategy: CompensationStrategy, gamma: f64, eps2: f64, eps2_kc: f64) -> f64 {
    let shift = gamma * eps2 * eps2;
    match strategy {
        CompensationStrategy::None => -shift,
        CompensationStrategy::Static => gamma * eps2_kc * eps2_kc - shift,
        CompensationStrategy::Dynamic => 0.0,
    }
}

/// Rank of the vacuum-continued branch among even-parity branches at the
/// last grid point, highest energy first (0: the cat, 1: first leakage state).
fn vacuum_even_rank(trace: &SpectrumTrace) -> Option<usize> {
    let last = trace.params.len().checked_sub(1)?;
    let vac = trace.branch_of_label(0)?;
    let mut even: Vec<usize> = (0..trace.branch_count())
        .filter(|&b| trace.parity[last][b] > 0.0)
        .collect();
    even.sort_by(|&a, &b| trace.energies[last][b].total_cmp(&trace.energies[last][a]));
    even.iter().position(|&b| b == vac)
}

/// Splitting of the two highest levels (the cat pair) along the sweep:
/// whether it never grows (slack `1e-9` relative to the Kerr scale), its
/// final value, and the final gap from the pair to the next level.
fn top_pair_gap(trace: &SpectrumTrace, k: f64) -> (bool, f64, f64) {
    let sorted: Vec<Vec<f64>> = trace
        .energies
        .iter()
        .map(|e| {
            let mut v = e.clone();
            v.sort_by(|a, b| b.total_cmp(a));
            v
        })
        .collect();
    let gaps: Vec<f64> = sorted.iter().map(|v| v[0] - v[1]).collect();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-9 * k);
    let last = sorted.last().expect("non-empty sweep");
    (monotone, last[0] - last[1], last[1] - last[2])
}

pub fn run(config: &ExperimentConfig, runner: &Runner) -> Result<Outcome, CliError> {
    let p = &config.physical;
    let k = p.k_mhz;
    let gamma = p.gamma_per_mhz;
    let space = config.space();
    let mut tasks = vec![Task::Detuning];
    tasks.extend(
        point_strategy_pairs(config)
            .into_iter()
            .map(|(pt, s)| Task::Squeezing(pt, s)),
    );
    let levels = &config.protocol.levels;
    let traces = runner.map(&tasks, |_, task| {
        let trace = match task {
            Task::Detuning => {
                let grid: Vec<f64> = levels.delta_over_k.values().iter().map(|x| x * k).collect();
                eigen_trace(&grid, space, |d| KerrCatParams::new(k, d, 0.0))?
            }
            Task::Squeezing(pt, s) => {
                let n = levels.eps2_points;
                let grid: Vec<f64> = (0..n)
                    .map(|i| pt.eps2_kc_mhz * i as f64 / (n - 1) as f64)
                    .collect();
                let (s, e_kc) = (*s, pt.eps2_kc_mhz);
                eigen_trace(&grid, space, move |e| {
                    KerrCatParams::new(k, detuning(s, gamma, e, e_kc), e)
                })?
            }
        };
        Ok::<_, CliError>(trace)
    })?;

    let mut files = Artifacts::default();
    let mut squeezing = Vec::new();
    let mut detuning_summary = json!(null);
    for (task, trace) in tasks.iter().zip(&traces) {
        let stem = match task {
            Task::Detuning => "levels_delta".to_string(),
            Task::Squeezing(pt, s) => format!("levels_eps2_p{:02}_{}", pt.index, strategy_name(*s)),
        };
        if config.io.csv() {
            files.insert(format!("{stem}.csv"), trace.to_csv());
        }
        if config.io.json() {
            files.insert(
                format!("{stem}_crossings.json"),
                json_text(&trace.crossings_json()),
            );
        }
        match task {
            Task::Detuning => {
                let same: Vec<_> = trace
                    .crossings
                    .iter()
                    .filter(|c| c.same_parity)
                    .map(|c| json!({"labels": [c.label_a, c.label_b], "delta_over_k": c.location / k}))
                    .collect();
                detuning_summary = json!({
                    "same_parity_crossings": same,
                    "crossings": trace.crossings.len(),
                    "flagged_points": trace.flagged.len(),
                });
            }
            Task::Squeezing(pt, s) => {
                let (monotone, final_gap, well_gap) = top_pair_gap(trace, k);
                squeezing.push(json!({
                    "point": pt.index,
                    "strategy": strategy_name(*s),
                    "top_pair_gap_monotone": monotone,
                    "top_pair_gap_mhz": final_gap,
                    "gap_below_pair_mhz": well_gap,
                    "vacuum_even_rank_at_plateau": vacuum_even_rank(trace),
                    "crossings": trace.crossings.len(),
                    "flagged_points": trace.flagged.len(),
                }));
            }
        }
    }
    Ok(Outcome {
        files,
        results: json!({"detuning_sweep": detuning_summary, "squeezing_sweeps": squeezing}),
    })
}
