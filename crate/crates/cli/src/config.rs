//! Experiment configuration: a single JSON document, validated in full
//! before any simulation starts.

// `!(x > 0.0)` is used deliberately so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use kerrcat_core::dynamics::integrate::HamiltonianPath;
use kerrcat_core::dynamics::LindbladModel;
use kerrcat_core::fock::{required_dim, HilbertSpace};
use kerrcat_core::schedule::{CompensationStrategy, Envelope, PumpSchedule, RampSpec};
use kerrcat_core::tomography::SpamTable;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Either a single value or a list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![*x],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// `points` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Range {
    pub const fn new(start: f64, stop: f64, points: usize) -> Self {
        Self {
            start,
            stop,
            points,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        kerrcat_core::dynamics::T1catGrid::linspace(self.start, self.stop, self.points)
    }

    fn check(&self, name: &str, errors: &mut Vec<String>) {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            errors.push(format!("{name}: start and stop must be finite"));
        }
        if self.points < 2 {
            errors.push(format!("{name}: points = {} must be >= 2", self.points));
        } else if !(self.stop > self.start) {
            errors.push(format!("{name}: stop must exceed start"));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physical {
    pub k_mhz: f64,
    /// PIFS coefficient γ (1/MHz): `Δ_PI = γ ε₂²`.
    pub gamma_per_mhz: f64,
    /// Plateau pump amplitudes (MHz); exclusive with `delta_as_kc_mhz`.
    #[serde(default)]
    pub eps2_kc_mhz: Option<OneOrMany>,
    /// Plateau compensations `Δ_as,KC = γ ε₂,KC²` (MHz); exclusive with
    /// `eps2_kc_mhz`.
    #[serde(default)]
    pub delta_as_kc_mhz: Option<OneOrMany>,
    pub t_up_ns: f64,
    #[serde(default = "default_sharpness")]
    pub sharpness: f64,
    #[serde(default)]
    pub envelope: Envelope,
    #[serde(default)]
    pub t1_us: Option<f64>,
    #[serde(default)]
    pub t2_us: Option<f64>,
    pub dim: usize,
}

fn default_sharpness() -> f64 {
    RampSpec::DEFAULT_SHARPNESS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelsConfig {
    /// Δ sweep at ε₂ = 0, in units of K.
    pub delta_over_k: Range,
    /// Points of the ε₂ sweep from 0 to each plateau value.
    pub eps2_points: usize,
}

impl Default for LevelsConfig {
    fn default() -> Self {
        Self {
            delta_over_k: Range::new(0.0, 4.0, 401),
            eps2_points: 141,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerConfig {
    pub half_width: f64,
    pub step: f64,
    /// Gaussian noise added to the emitted map; zero for none.
    #[serde(default)]
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RampConfig {
    /// Number of time samples along the ramp.
    pub samples: usize,
    #[serde(default)]
    pub wigner: Option<WignerConfig>,
}

impl Default for RampConfig {
    fn default() -> Self {
        Self {
            samples: 65,
            wigner: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    pub z_points: usize,
    pub x_duration_ns: f64,
    pub x_max_amplitude_mhz: f64,
    pub x_points: usize,
    /// Drive amplitudes (MHz) of the Rabi-rate slope check.
    pub rabi_eps_x_mhz: Vec<f64>,
    pub t1cat_theta2_points: usize,
    /// Assumed plateau compensations relative to the injected `γ ε₂,KC²`.
    pub t1cat_delta_offset_mhz: Range,
    pub t1cat_holds_ns: Range,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self {
            z_points: 200,
            x_duration_ns: 40.0,
            x_max_amplitude_mhz: 10.0,
            x_points: 40,
            rabi_eps_x_mhz: vec![0.1, 0.2, 0.3, 0.4],
            t1cat_theta2_points: 17,
            t1cat_delta_offset_mhz: Range::new(-1.0, 1.0, 5),
            t1cat_holds_ns: Range::new(0.0, 24_000.0, 13),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NemsConfig {
    pub junction: kerrcat_core::circuit::JunctionConfig,
    /// Working-point flux offset Δφ (rad).
    pub delta_phi: f64,
    /// Pump amplitudes ε_p (rad).
    pub eps_p: Range,
    #[serde(default)]
    pub cubic_correction: bool,
}

impl Default for NemsConfig {
    fn default() -> Self {
        Self {
            junction: kerrcat_core::circuit::JunctionConfig::reference_device(),
            delta_phi: 0.08 * std::f64::consts::PI,
            eps_p: Range::new(0.02, 0.2, 10),
            cubic_correction: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    #[serde(default = "default_strategies")]
    pub strategies: Vec<CompensationStrategy>,
    #[serde(default)]
    pub hold_ns: f64,
    /// Z/2 gate fidelity versus `|α|²` as `[alpha_sq, fidelity]` pairs;
    /// used by cat tomography in addition to the SPAM-free result.
    #[serde(default)]
    pub spam_z_half: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub levels: LevelsConfig,
    #[serde(default)]
    pub ramp: RampConfig,
    #[serde(default)]
    pub calibrate: CalibrateConfig,
    #[serde(default)]
    pub nems: NemsConfig,
}

fn default_strategies() -> Vec<CompensationStrategy> {
    vec![CompensationStrategy::Dynamic, CompensationStrategy::Static]
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            strategies: default_strategies(),
            hold_ns: 0.0,
            spam_z_half: None,
            levels: LevelsConfig::default(),
            ramp: RampConfig::default(),
            calibrate: CalibrateConfig::default(),
            nems: NemsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoConfig {
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Any of `csv`, `json`.
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            output_dir: None,
            formats: default_formats(),
            seed: 0,
        }
    }
}

impl IoConfig {
    pub fn csv(&self) -> bool {
        self.formats.iter().any(|f| f == "csv")
    }

    pub fn json(&self) -> bool {
        self.formats.iter().any(|f| f == "json")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub physical: Physical,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub io: IoConfig,
}

/// One plateau setting of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub eps2_kc_mhz: f64,
    pub delta_as_kc_mhz: f64,
    pub alpha_sq: f64,
}

/// Every problem found, one actionable message each.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
pub struct ConfigError(pub Vec<String>);

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(vec![format!("parse error: {e}")]))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::from_json(&text)
    }

    pub fn space(&self) -> HilbertSpace {
        HilbertSpace::new(self.physical.dim.max(2)).expect("dim >= 2")
    }

    pub fn model(&self) -> Option<LindbladModel> {
        match (self.physical.t1_us, self.physical.t2_us) {
            (Some(t1), Some(t2)) => LindbladModel::from_us(t1, t2).ok(),
            _ => None,
        }
    }

    pub fn spam(&self) -> Option<SpamTable> {
        self.protocol.spam_z_half.as_ref().map(|rows| SpamTable {
            z_half_fidelity: rows.iter().map(|r| (r[0], r[1])).collect(),
        })
    }

    /// Plateau settings in configuration order.
    pub fn sweep(&self) -> Vec<SweepPoint> {
        let p = &self.physical;
        let k = p.k_mhz;
        let g = p.gamma_per_mhz;
        let pairs: Vec<(f64, f64)> = match (&p.eps2_kc_mhz, &p.delta_as_kc_mhz) {
            (Some(e), _) => e.values().into_iter().map(|e| (e, g * e * e)).collect(),
            (None, Some(d)) => d
                .values()
                .into_iter()
                .map(|d| ((d / g).sqrt(), d))
                .collect(),
            (None, None) => Vec::new(),
        };
        pairs
            .into_iter()
            .enumerate()
            .map(|(index, (eps2, das))| SweepPoint {
                index,
                eps2_kc_mhz: eps2,
                delta_as_kc_mhz: das,
                alpha_sq: eps2 / k,
            })
            .collect()
    }

    pub fn ramp_spec(&self, point: &SweepPoint, strategy: CompensationStrategy) -> RampSpec {
        let p = &self.physical;
        RampSpec::new(point.eps2_kc_mhz, p.t_up_ns, p.gamma_per_mhz, strategy)
            .with_envelope(p.envelope, p.sharpness)
            .with_hold(self.protocol.hold_ns)
    }

    /// Checks every field against the preconditions of the experiments it
    /// feeds, so that no run starts on an invalid configuration.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut e = Vec::new();
        let p = &self.physical;
        let positive = |name: &str, x: f64, e: &mut Vec<String>| {
            if !(x > 0.0 && x.is_finite()) {
                e.push(format!("physical.{name} = {x} must be a positive number"));
            }
        };
        positive("k_mhz", p.k_mhz, &mut e);
        positive("gamma_per_mhz", p.gamma_per_mhz, &mut e);
        positive("t_up_ns", p.t_up_ns, &mut e);
        positive("sharpness", p.sharpness, &mut e);
        if p.dim < 2 {
            e.push(format!("physical.dim = {} must be >= 2", p.dim));
        }
        match (&p.eps2_kc_mhz, &p.delta_as_kc_mhz) {
            (Some(_), Some(_)) => e.push(
                "give either physical.eps2_kc_mhz or physical.delta_as_kc_mhz, not both".into(),
            ),
            (None, None) => {
                e.push("one of physical.eps2_kc_mhz or physical.delta_as_kc_mhz is required".into())
            }
            (Some(v), None) | (None, Some(v)) => {
                let vals = v.values();
                if vals.is_empty() {
                    e.push("the sweep list is empty".into());
                }
                if vals.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    e.push("sweep values must be positive and finite".into());
                }
            }
        }
        match (p.t1_us, p.t2_us) {
            (Some(t1), Some(t2)) => {
                if let Err(err) = LindbladModel::from_us(t1, t2) {
                    e.push(format!(
                        "physical.t1_us/t2_us: {err} (T2 must not exceed 2·T1)"
                    ));
                }
            }
            (None, None) => {}
            _ => e.push("physical.t1_us and physical.t2_us must be given together".into()),
        }

        let pr = &self.protocol;
        if !(pr.hold_ns >= 0.0 && pr.hold_ns.is_finite()) {
            e.push(format!("protocol.hold_ns = {} must be >= 0", pr.hold_ns));
        }
        if pr.strategies.is_empty() {
            e.push("protocol.strategies is empty".into());
        }
        if let Some(spam) = self.spam() {
            if let Err(err) = spam.validate() {
                e.push(format!("protocol.spam_z_half: {err}"));
            }
        }
        pr.levels
            .delta_over_k
            .check("protocol.levels.delta_over_k", &mut e);
        if pr.levels.eps2_points < 2 {
            e.push("protocol.levels.eps2_points must be >= 2".into());
        }
        if pr.ramp.samples < 2 {
            e.push("protocol.ramp.samples must be >= 2".into());
        }
        if let Some(w) = &pr.ramp.wigner {
            if let Err(err) = kerrcat_core::tomography::square_grid(w.half_width, w.step) {
                e.push(format!("protocol.ramp.wigner: {err}"));
            }
            if !(w.noise_sigma >= 0.0 && w.noise_sigma.is_finite()) {
                e.push("protocol.ramp.wigner.noise_sigma must be >= 0".into());
            }
        }
        let c = &pr.calibrate;
        if c.z_points < 8 || c.x_points < 8 {
            e.push("protocol.calibrate: z_points and x_points must be >= 8".into());
        }
        if !(c.x_duration_ns > 0.0 && c.x_max_amplitude_mhz > 0.0) {
            e.push("protocol.calibrate: x_duration_ns and x_max_amplitude_mhz must be > 0".into());
        }
        if c.rabi_eps_x_mhz.len() < 2 || c.rabi_eps_x_mhz.iter().any(|x| !(*x > 0.0)) {
            e.push("protocol.calibrate.rabi_eps_x_mhz needs >= 2 positive amplitudes".into());
        }
        if c.t1cat_theta2_points == 0 {
            e.push("protocol.calibrate.t1cat_theta2_points must be >= 1".into());
        }
        c.t1cat_delta_offset_mhz
            .check("protocol.calibrate.t1cat_delta_offset_mhz", &mut e);
        c.t1cat_holds_ns
            .check("protocol.calibrate.t1cat_holds_ns", &mut e);
        if c.t1cat_holds_ns.points < 4 || c.t1cat_holds_ns.start < 0.0 {
            e.push("protocol.calibrate.t1cat_holds_ns: need >= 4 non-negative holds".into());
        }
        let n = &pr.nems;
        if let Err(err) = n.junction.validate() {
            e.push(format!("protocol.nems.junction: {err}"));
        }
        n.eps_p.check("protocol.nems.eps_p", &mut e);
        if n.eps_p.start.abs().max(n.eps_p.stop.abs()) >= 0.5 {
            e.push("protocol.nems.eps_p must stay inside |eps_p| < 0.5".into());
        }

        let io = &self.io;
        if io.formats.iter().any(|f| f != "csv" && f != "json") {
            e.push(format!(
                "io.formats {:?}: allowed values are csv, json",
                io.formats
            ));
        }

        // truncation: every schedule that can run must fit in the Fock space
        if e.is_empty() {
            let space = self.space();
            for point in self.sweep() {
                for &s in &pr.strategies {
                    let spec = self.ramp_spec(&point, s).with_ramp_down(true);
                    let alpha = PumpSchedule::from_spec(spec)
                        .and_then(|sch| HamiltonianPath::from_schedule(&sch, p.k_mhz))
                        .map(|path| path.max_alpha());
                    match alpha {
                        Ok(a) if space.require_amplitude(a).is_err() => e.push(format!(
                            "physical.dim = {} too small for |alpha|^2 = {:.3} (point {}): need >= {}",
                            p.dim,
                            a * a,
                            point.index,
                            required_dim(a)
                        )),
                        Ok(_) => {}
                        Err(err) => e.push(format!("point {}: {err}", point.index)),
                    }
                }
            }
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn paper() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{"physical": {"k_mhz": 6.9, "gamma_per_mhz": 0.0542034222, "eps2_kc_mhz": 9.7,
                "t_up_ns": 320, "dim": 20}}"#,
        )
        .unwrap()
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let c = paper();
        c.validate().unwrap();
        assert_eq!(c.protocol.strategies.len(), 2);
        assert_eq!(c.physical.sharpness, RampSpec::DEFAULT_SHARPNESS);
        let s = c.sweep();
        assert_eq!(s.len(), 1);
        assert!((s[0].delta_as_kc_mhz - 5.1).abs() < 1e-6);
    }

    #[test]
    fn compensation_list_maps_to_amplitudes() {
        let mut c = paper();
        c.physical.eps2_kc_mhz = None;
        c.physical.delta_as_kc_mhz = Some(OneOrMany::Many(vec![5.1, 6.9]));
        let s = c.sweep();
        assert!((s[0].eps2_kc_mhz - 9.7).abs() < 1e-6);
        assert!((c.physical.gamma_per_mhz * s[1].eps2_kc_mhz.powi(2) - 6.9).abs() < 1e-12);
    }

    #[test]
    fn rejections_are_specific() {
        let mut c = paper();
        c.physical.t1_us = Some(1.0);
        c.physical.t2_us = Some(3.0);
        c.protocol.hold_ns = -1.0;
        let err = c.validate().unwrap_err();
        assert!(err.0.iter().any(|m| m.contains("T2 must not exceed")));
        assert!(err.0.iter().any(|m| m.contains("hold_ns")));

        let mut c = paper();
        c.physical.dim = 12;
        let err = c.validate().unwrap_err();
        assert!(err.0[0].contains("too small"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_json(
            r#"{"physical": {"k_mhz": 6.9, "gamma_per_mhz": 0.05, "eps2_kc_mhz": 9.7,
                "t_up_ns": 320, "dim": 20, "kerr": 1}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("kerr"));
    }
}
