//! NEMS circuit pipeline: working-point parameters, the pump-induced shift
//! curve and the special-point closed forms.

use crate::config::ExperimentConfig;
use crate::output::{json_text, Artifacts, Csv, Opt};
use crate::{CliError, Outcome, Runner};
use kerrcat_core::circuit::{
    hoa_extract, pifs_curve, special_point_frequency, HoaOptions, NemsPotential, SpecialPoint,
};
use kerrcat_core::fit::linear_regression;
use serde_json::json;

const POINTS: [(SpecialPoint, &str); 3] = [
    (SpecialPoint::Highest, "highest"),
    (SpecialPoint::Working, "working"),
    (SpecialPoint::AtsLike, "ats_like"),
];

pub fn run(config: &ExperimentConfig, runner: &Runner) -> Result<Outcome, CliError> {
    let n = &config.protocol.nems;
    let opts = HoaOptions {
        cubic_correction: n.cubic_correction,
    };
    let junction = n.junction;
    let eps_p = n.eps_p.values();
    let curve = pifs_curve(&junction, n.delta_phi, &eps_p, opts)?;

    // closed form vs generic extraction; points outside the closed form's
    // validity are reported without a closed-form value
    let special = runner.map(&POINTS, |_, (point, _)| {
        let closed = special_point_frequency(&junction, *point).ok();
        let pot = NemsPotential::new(junction, point.flux());
        let hoa = hoa_extract(&pot, &junction, opts)
            .ok()
            .map(|(p, _)| p.omega_a);
        Ok::<_, CliError>((closed, hoa))
    })?;

    let mut files = Artifacts::default();
    let mut pifs = Csv::new(&[
        "eps_p",
        "delta_omega_mhz",
        "delta_k_mhz",
        "eps2_mhz",
        "alpha_sq",
    ]);
    for p in &curve.points {
        pifs.row(&[
            &p.eps_p,
            &p.delta_omega_mhz,
            &p.delta_k_mhz,
            &p.eps2_mhz,
            &p.alpha_sq,
        ]);
    }
    let mut sp = Csv::new(&["point", "closed_form_mhz", "hoa_mhz", "relative_difference"]);
    let mut sp_json = Vec::new();
    for ((_, name), (closed, hoa)) in POINTS.iter().zip(&special) {
        let rel = match (closed, hoa) {
            (Some(c), Some(h)) => Some(h / c - 1.0),
            _ => None,
        };
        sp.row(&[name, &Opt(*closed), &Opt(*hoa), &Opt(rel)]);
        sp_json.push(json!({"point": name, "closed_form_mhz": closed, "hoa_mhz": hoa, "relative_difference": rel}));
    }
    let line = |f: &dyn Fn(&kerrcat_core::circuit::PifsPoint) -> f64| {
        let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.eps_p, f(p))).collect();
        let (slope, _, r2) = linear_regression(&pts);
        (slope, r2)
    };
    let (eps2_slope, eps2_r2) = line(&|p| p.eps2_mhz);
    let (_, alpha_r2) = line(&|p| p.alpha_sq);
    let max_rel_dk = curve
        .points
        .iter()
        .map(|p| (p.delta_k_mhz / curve.base.k).abs())
        .fold(0.0, f64::max);
    let results = json!({
        "working_point": curve.base,
        "gamma_per_mhz": curve.gamma_per_mhz,
        "pifs_exponent": curve.exponent,
        "eps2_per_eps_p_mhz": eps2_slope,
        "eps2_linear_r2": eps2_r2,
        "alpha_sq_linear_r2": alpha_r2,
        "max_relative_kerr_change": max_rel_dk,
        "special_points": sp_json,
    });
    if config.io.csv() {
        files.insert("pifs_curve.csv", pifs.into_string());
        files.insert("special_points.csv", sp.into_string());
    }
    if config.io.json() {
        files.insert("nems_params.json", json_text(&results));
    }
    Ok(Outcome { files, results })
}
