//! Gate and compensation calibrations at each plateau setting: pump-off
//! Z/2 time, X/2 drive amplitude, Rabi-rate slope and the lifetime scan
//! that locates the pump-induced shift.

use crate::config::{ExperimentConfig, SweepPoint};
use crate::output::{json_text, Artifacts, Csv};
use crate::{CliError, Outcome, Runner};
use kerrcat_core::dynamics::{
    calibrate_x_half, calibrate_z_half, omega_x, plateau_spec, rabi_rate, t1cat_experiment,
    T1catGrid, T1catPoint, T1catSurface, Tolerance, XHalfCalibration, ZHalfCalibration,
};
use num_complex::Complex64 as C64;
use serde_json::json;
use std::f64::consts::PI;

enum Task {
    ZHalf(SweepPoint),
    XHalf(SweepPoint),
    Rabi(SweepPoint, f64),
    Lifetime(SweepPoint, f64),
}

enum Done {
    ZHalf(ZHalfCalibration),
    XHalf(XHalfCalibration),
    Rabi(f64),
    Lifetime(Vec<T1catPoint>),
}

fn lifetime_grid(config: &ExperimentConfig, pt: &SweepPoint, delta_as_kc: Vec<f64>) -> T1catGrid {
    let p = &config.physical;
    let c = &config.protocol.calibrate;
    let n = c.t1cat_theta2_points;
    T1catGrid {
        k_mhz: p.k_mhz,
        eps2_kc: pt.eps2_kc_mhz,
        gamma: p.gamma_per_mhz,
        t_up: p.t_up_ns,
        // a full turn without repeating the endpoint
        theta2: (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect(),
        delta_as_kc,
        holds: c.t1cat_holds_ns.values(),
    }
}

pub fn run(config: &ExperimentConfig, runner: &Runner) -> Result<Outcome, CliError> {
    let p = &config.physical;
    let c = &config.protocol.calibrate;
    let k = p.k_mhz;
    let space = config.space();
    let model = config.model();
    let offsets = c.t1cat_delta_offset_mhz.values();

    let mut tasks = Vec::new();
    for pt in config.sweep() {
        tasks.push(Task::ZHalf(pt));
        tasks.push(Task::XHalf(pt));
        tasks.extend(c.rabi_eps_x_mhz.iter().map(|&e| Task::Rabi(pt, e)));
        tasks.extend(
            offsets
                .iter()
                .map(|&o| Task::Lifetime(pt, pt.delta_as_kc_mhz + o)),
        );
    }
    let done = runner.map(&tasks, |_, task| {
        Ok::<_, CliError>(match task {
            Task::ZHalf(pt) => {
                Done::ZHalf(calibrate_z_half(k, pt.alpha_sq, -k, space, c.z_points)?)
            }
            Task::XHalf(pt) => {
                let spec = plateau_spec(k, pt.alpha_sq, p.gamma_per_mhz, p.t_up_ns);
                Done::XHalf(calibrate_x_half(
                    &spec,
                    k,
                    space,
                    c.x_duration_ns,
                    c.x_max_amplitude_mhz,
                    c.x_points,
                )?)
            }
            Task::Rabi(pt, e) => Done::Rabi(rabi_rate(
                k,
                pt.alpha_sq,
                C64::new(*e, 0.0),
                space,
                2.0,
                160,
            )?),
            Task::Lifetime(pt, das) => {
                let grid = lifetime_grid(config, pt, vec![*das]);
                Done::Lifetime(
                    t1cat_experiment(&grid, space, model.as_ref(), &Tolerance::default())?.points,
                )
            }
        })
    })?;

    let mut files = Artifacts::default();
    let mut reports = Vec::new();
    let mut done = done.into_iter();
    for pt in config.sweep() {
        let Some(Done::ZHalf(z)) = done.next() else {
            unreachable!("task order")
        };
        let Some(Done::XHalf(x)) = done.next() else {
            unreachable!("task order")
        };
        let rates: Vec<f64> = c
            .rabi_eps_x_mhz
            .iter()
            .map(|_| match done.next() {
                Some(Done::Rabi(r)) => r,
                _ => unreachable!("task order"),
            })
            .collect();
        let mut points = Vec::new();
        for _ in &offsets {
            match done.next() {
                Some(Done::Lifetime(ps)) => points.extend(ps),
                _ => unreachable!("task order"),
            }
        }
        let grid = lifetime_grid(
            config,
            &pt,
            offsets.iter().map(|o| pt.delta_as_kc_mhz + o).collect(),
        );
        let cap = grid.lifetime_cap();
        let surface = T1catSurface::assemble(grid, points, cap);

        // least-squares slope through the origin of rate against ε_x
        let (sxy, sxx) = c
            .rabi_eps_x_mhz
            .iter()
            .zip(&rates)
            .fold((0.0, 0.0), |(a, b), (e, r)| (a + e * r, b + e * e));
        let slope = sxy / sxx;
        let formula = omega_x(C64::new(1.0, 0.0), C64::new(pt.alpha_sq.sqrt(), 0.0));
        let best = surface.best();
        reports.push(json!({
            "point": pt.index,
            "eps2_kc_mhz": pt.eps2_kc_mhz,
            "alpha_sq": pt.alpha_sq,
            "z_half": {"t_z_ns": z.t_z, "detuning_mhz": z.detuning_mhz, "min_signal": z.min_signal, "contrast": z.contrast},
            "x_half": {
                "amplitude_mhz": x.amplitude_mhz, "phase": x.phase, "duration_ns": x.duration,
                "sigma_ns": x.sigma, "angle_per_mhz": x.angle_per_mhz,
            },
            "rabi": {
                "eps_x_mhz": c.rabi_eps_x_mhz, "rate_mhz": rates, "slope": slope,
                "formula_slope": formula, "relative_error": slope / formula - 1.0,
            },
            "lifetime": {
                "injected_delta_pi_kc_mhz": pt.delta_as_kc_mhz,
                "delta_as_kc_mhz": surface.delta_pi_kc,
                "grid_step_mhz": (offsets[1] - offsets[0]),
                "best_t1cat_ns": best.and_then(|b| b.t1cat),
                "best_theta2": best.map(|b| b.theta2),
                "no_decay": best.map(|b| b.no_decay),
                "failed_points": surface.points.iter().filter(|q| q.fit_error.is_some()).count(),
                "model": if model.is_some() { "lindblad" } else { "noiseless" },
            },
        }));
        if config.io.csv() {
            let mut zs = Csv::new(&["t_ns", "signal"]);
            for (t, s) in &z.scan {
                zs.row(&[t, s]);
            }
            let mut xs = Csv::new(&["amplitude_mhz", "signal"]);
            for (a, s) in &x.scan {
                xs.row(&[a, s]);
            }
            files.insert(
                format!("z_half_scan_p{:02}.csv", pt.index),
                zs.into_string(),
            );
            files.insert(
                format!("x_half_scan_p{:02}.csv", pt.index),
                xs.into_string(),
            );
            files.insert(format!("t1cat_p{:02}.csv", pt.index), surface.to_csv());
        }
    }
    if config.io.json() {
        files.insert("calibration.json", json_text(&reports));
    }
    Ok(Outcome {
        files,
        results: json!({ "calibrations": reports }),
    })
}
