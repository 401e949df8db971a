//! Single initializations: observables along the ramp and the final
//! state's overlap with the target cat and the leakage state.

use super::{point_strategy_pairs, strategy_name};
use crate::config::ExperimentConfig;
use crate::output::{Artifacts, Csv};
use crate::{CliError, Outcome, Runner};
use kerrcat_core::dynamics::{hamiltonian_at, run_protocol, KerrCatParams, Protocol, Tolerance};
use kerrcat_core::fock::{
    cat_state, number, parity, state_fidelity, CatPhase, DensityMatrix, HilbertSpace, StateVector,
};
use kerrcat_core::schedule::PumpSchedule;
use kerrcat_core::tomography::{square_grid, wigner};
use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::json;

#[derive(Debug, Clone, Serialize)]
struct RampRow {
    point: usize,
    strategy: &'static str,
    model: &'static str,
    f_cat_plus: f64,
    f_target: f64,
    f_leakage: f64,
    norm_drift: f64,
}

/// The two highest even-parity eigenstates of `params`: the cat and the
/// first leakage state.
fn plateau_even_states(
    params: &KerrCatParams,
    space: HilbertSpace,
) -> Result<(StateVector, StateVector), CliError> {
    let h = hamiltonian_at(params, space)?;
    let p = parity(space);
    let (_, vecs) = h.eigh();
    let mut even = Vec::with_capacity(2);
    for v in vecs.into_iter().rev() {
        if v.expect(&p)?.re > 0.0 {
            even.push(v);
            if even.len() == 2 {
                break;
            }
        }
    }
    let leak = even.pop().expect("two even levels");
    let target = even.pop().expect("two even levels");
    Ok((target, leak))
}

pub fn run(config: &ExperimentConfig, runner: &Runner) -> Result<Outcome, CliError> {
    let k = config.physical.k_mhz;
    let space = config.space();
    let model = config.model();
    let model_name = if model.is_some() {
        "lindblad"
    } else {
        "noiseless"
    };
    let tasks = point_strategy_pairs(config);
    let ramp_cfg = &config.protocol.ramp;
    let n_obs = number(space);
    let p_obs = parity(space);

    let results = runner.map(&tasks, |i, (pt, s)| {
        let spec = config.ramp_spec(pt, *s);
        let schedule = PumpSchedule::from_spec(spec.with_hold(0.0))?;
        let t_up = schedule.duration();
        let samples: Vec<f64> = (0..ramp_cfg.samples)
            .map(|j| t_up * j as f64 / (ramp_cfg.samples - 1) as f64)
            .collect();
        let vacuum = StateVector::basis(space, 0)?;
        let r = run_protocol(
            &Protocol::RampOnly,
            &spec,
            k,
            vacuum,
            model.as_ref(),
            &samples,
            &Tolerance::default(),
        )?;
        let rho: DensityMatrix = r.final_state().expect("samples").to_density();
        let plateau = KerrCatParams::new(k, schedule.delta(t_up), schedule.eps2(t_up));
        let (target, leak) = plateau_even_states(&plateau, space)?;
        let cat = cat_state(C64::new(pt.alpha_sq.sqrt(), 0.0), CatPhase::Plus, space)?;
        let row = RampRow {
            point: pt.index,
            strategy: strategy_name(*s),
            model: model_name,
            f_cat_plus: state_fidelity(&rho, &cat)?,
            f_target: state_fidelity(&rho, &target)?,
            f_leakage: state_fidelity(&rho, &leak)?,
            norm_drift: r.norm_drift(),
        };
        let trace_csv = r.to_csv(&[("n", &n_obs), ("parity", &p_obs)])?;
        let wigner_csv = match &ramp_cfg.wigner {
            Some(w) => {
                let grid = square_grid(w.half_width, w.step)?;
                let mut map = wigner(&rho, &grid);
                if w.noise_sigma > 0.0 {
                    map = map.with_noise(w.noise_sigma, runner.task_seed(i))?;
                }
                Some(map.to_csv())
            }
            None => None,
        };
        Ok::<_, CliError>((row, trace_csv, wigner_csv))
    })?;

    let mut files = Artifacts::default();
    let mut table = Csv::new(&[
        "point",
        "eps2_kc_mhz",
        "delta_as_kc_mhz",
        "alpha_sq",
        "strategy",
        "model",
        "f_cat_plus",
        "f_target",
        "f_leakage",
        "norm_drift",
    ]);
    let mut rows = Vec::new();
    for ((pt, _), (row, trace_csv, wigner_csv)) in tasks.iter().zip(results) {
        let stem = format!("p{:02}_{}", pt.index, row.strategy);
        if config.io.csv() {
            files.insert(format!("ramp_{stem}.csv"), trace_csv);
            if let Some(w) = wigner_csv {
                files.insert(format!("wigner_{stem}.csv"), w);
            }
        }
        table.row(&[
            &pt.index,
            &pt.eps2_kc_mhz,
            &pt.delta_as_kc_mhz,
            &pt.alpha_sq,
            &row.strategy,
            &row.model,
            &row.f_cat_plus,
            &row.f_target,
            &row.f_leakage,
            &row.norm_drift,
        ]);
        rows.push(row);
    }
    if config.io.csv() {
        files.insert("ramp.csv", table.into_string());
    }
    Ok(Outcome {
        files,
        results: json!({ "ramps": rows }),
    })
}
