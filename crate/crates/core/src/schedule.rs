//! Time-dependent pump schedules: amplitude envelopes, detuning
//! compensation, hold and mirrored ramp-down, and gate segments.

use crate::error::{Error, Result};
use crate::linalg::MHZ_TO_RAD_NS;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// How the pump detuning `Δ_as(t)` tracks the pump-induced shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompensationStrategy {
    /// `Δ_as ≡ 0`.
    None,
    /// `Δ_as ≡ γ ε₂,KC²` from the start.
    Static,
    /// `Δ_as(t) = γ ε₂(t)²`, cancelling the shift at every instant.
    Dynamic,
}

/// Shape of the amplitude ramp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Envelope {
    /// `tanh(s t/t_up)/tanh(s)`: steepest at `t = 0`.
    Tanh,
    /// `[tanh(s(2t/t_up - 1)) + tanh(s)]/(2 tanh(s))`: flat at both ends,
    /// steepest mid-ramp.
    #[default]
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    /// Final pump amplitude ε₂,KC (MHz).
    pub eps2_kc: f64,
    /// Ramp duration (ns).
    pub t_up: f64,
    /// Pump-shift coefficient (1/MHz), `Δ_PI = γ ε₂²`.
    pub gamma: f64,
    pub strategy: CompensationStrategy,
    pub sharpness: f64,
    /// Plateau duration (ns).
    pub hold: f64,
    /// Append the time-mirrored ramp after the hold.
    pub ramp_down: bool,
    #[serde(default)]
    pub envelope: Envelope,
    /// Assumed plateau compensation `Δ_as,KC` (MHz) when it differs from the
    /// true shift `γ ε₂,KC²` (calibration scans); `None` compensates exactly.
    #[serde(default)]
    pub compensation_plateau: Option<f64>,
}

impl RampSpec {
    pub const DEFAULT_SHARPNESS: f64 = 3.0;

    pub fn new(eps2_kc: f64, t_up: f64, gamma: f64, strategy: CompensationStrategy) -> Self {
        Self {
            eps2_kc,
            t_up,
            gamma,
            strategy,
            sharpness: Self::DEFAULT_SHARPNESS,
            hold: 0.0,
            ramp_down: false,
            envelope: Envelope::default(),
            compensation_plateau: None,
        }
    }

    pub fn with_compensation_plateau(mut self, delta_as_kc: Option<f64>) -> Self {
        self.compensation_plateau = delta_as_kc;
        self
    }

    pub fn with_hold(mut self, hold: f64) -> Self {
        self.hold = hold;
        self
    }

    pub fn with_ramp_down(mut self, on: bool) -> Self {
        self.ramp_down = on;
        self
    }

    pub fn with_envelope(mut self, envelope: Envelope, sharpness: f64) -> Self {
        self.envelope = envelope;
        self.sharpness = sharpness;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_up > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t_up = {} must be > 0",
                self.t_up
            )));
        }
        if !(self.eps2_kc >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eps2_kc = {} must be >= 0",
                self.eps2_kc
            )));
        }
        if !(self.sharpness > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sharpness = {} must be > 0",
                self.sharpness
            )));
        }
        if !(self.hold >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "hold = {} must be >= 0",
                self.hold
            )));
        }
        if !self.gamma.is_finite() {
            return Err(Error::InvalidParameter("gamma must be finite".into()));
        }
        if let Some(p) = self.compensation_plateau {
            if !p.is_finite() {
                return Err(Error::InvalidParameter(
                    "compensation plateau must be finite".into(),
                ));
            }
        }
        Ok(())
    }

    /// Plateau pump shift `Δ_PI,KC = γ ε₂,KC²` (MHz).
    pub fn plateau_shift(&self) -> f64 {
        self.gamma * self.eps2_kc * self.eps2_kc
    }

    /// Plateau value of the applied compensation `Δ_as,KC` (MHz).
    pub fn compensation_target(&self) -> f64 {
        self.compensation_plateau
            .unwrap_or_else(|| self.plateau_shift())
    }

    /// True when `t_up · 2K < 5` with `K` taken as angular frequency.
    pub fn adiabaticity_at_risk(&self, k_mhz: f64) -> bool {
        self.t_up * 2.0 * k_mhz * MHZ_TO_RAD_NS < 5.0
    }

    /// Normalised envelope on `[0, t_up]`, clamped outside.
    pub fn envelope_fraction(&self, t: f64) -> f64 {
        let u = (t / self.t_up).clamp(0.0, 1.0);
        let s = self.sharpness;
        match self.envelope {
            Envelope::Tanh => (s * u).tanh() / s.tanh(),
            Envelope::Sigmoid => {
                if u == 0.0 {
                    0.0
                } else if u == 1.0 {
                    1.0
                } else {
                    ((s * (2.0 * u - 1.0)).tanh() + s.tanh()) / (2.0 * s.tanh())
                }
            }
        }
    }
}

/// `ε₂(t)` of the ramp-up segment.
pub fn ramp_envelope(spec: &RampSpec, t: f64) -> f64 {
    spec.eps2_kc * spec.envelope_fraction(t)
}

/// `ε₂,KC tanh(s t/t_up)/tanh(s)` regardless of the spec's envelope choice.
pub fn tanh_envelope(spec: &RampSpec, t: f64) -> f64 {
    let s = RampSpec {
        envelope: Envelope::Tanh,
        ..*spec
    };
    ramp_envelope(&s, t)
}

/// Compensation detuning `Δ_as` for a pump amplitude `eps2` under `spec`.
pub fn compensation(spec: &RampSpec, eps2: f64) -> f64 {
    match spec.strategy {
        CompensationStrategy::None => 0.0,
        CompensationStrategy::Static => spec.compensation_target(),
        CompensationStrategy::Dynamic => match spec.compensation_plateau {
            None => spec.gamma * eps2 * eps2,
            Some(p) if spec.eps2_kc > 0.0 => p * (eps2 / spec.eps2_kc).powi(2),
            Some(_) => 0.0,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    RampUp {
        duration: f64,
    },
    Hold {
        duration: f64,
    },
    RampDown {
        duration: f64,
    },
    /// Pump switched off: `ε₂ = 0`, `Δ_as = detuning_mhz`.
    PumpOffZ {
        duration: f64,
        detuning_mhz: f64,
    },
    /// Resonant charge drive with a Gaussian envelope centred in the segment.
    RabiX {
        duration: f64,
        sigma: f64,
        amplitude_mhz: f64,
        phase: f64,
    },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match *self {
            Segment::RampUp { duration }
            | Segment::Hold { duration }
            | Segment::RampDown { duration }
            | Segment::PumpOffZ { duration, .. }
            | Segment::RabiX { duration, .. } => duration,
        }
    }
}

/// Parameters of a gate segment appended after a completed ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GateKind {
    RabiX {
        duration: f64,
        sigma: f64,
        eps_x: C64Ser,
    },
    PumpOffZ {
        duration: f64,
        detuning_mhz: f64,
    },
}

/// Serialisable complex amplitude (MHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C64Ser {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for C64Ser {
    fn from(z: C64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<C64Ser> for C64 {
    fn from(z: C64Ser) -> Self {
        C64::new(z.re, z.im)
    }
}

pub fn gate_segment(kind: GateKind) -> Segment {
    match kind {
        GateKind::RabiX {
            duration,
            sigma,
            eps_x,
        } => {
            let z: C64 = eps_x.into();
            Segment::RabiX {
                duration,
                sigma,
                amplitude_mhz: z.norm(),
                phase: z.arg(),
            }
        }
        GateKind::PumpOffZ {
            duration,
            detuning_mhz,
        } => Segment::PumpOffZ {
            duration,
            detuning_mhz,
        },
    }
}

/// Schedule values at one instant (MHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSample {
    pub t_ns: f64,
    pub eps2_mhz: f64,
    pub delta_as_mhz: f64,
    pub epsx_re_mhz: f64,
    pub epsx_im_mhz: f64,
}

/// Concatenated segments with piecewise-defined `ε₂(t)`, `Δ_as(t)`, `ε_x(t)`.
/// Segments are half-open `[start, end)`; the last one includes its end.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpSchedule {
    spec: RampSpec,
    segments: Vec<(f64, Segment)>,
    total: f64,
}

impl PumpSchedule {
    /// Empty schedule (zero duration) for `spec`.
    pub fn empty(spec: RampSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            segments: Vec::new(),
            total: 0.0,
        })
    }

    /// Ramp-up, hold and (if requested) mirrored ramp-down.
    pub fn from_spec(spec: RampSpec) -> Result<Self> {
        let mut s = Self::empty(spec)?;
        s.push(Segment::RampUp {
            duration: spec.t_up,
        })?;
        s.push(Segment::Hold {
            duration: spec.hold,
        })?;
        if spec.ramp_down {
            s.push(Segment::RampDown {
                duration: spec.t_up,
            })?;
        }
        Ok(s)
    }

    /// Appends a segment; zero-duration segments are dropped.
    pub fn push(&mut self, seg: Segment) -> Result<&mut Self> {
        let d = seg.duration();
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "segment duration {d} must be finite and >= 0"
            )));
        }
        if let Segment::RabiX { sigma, .. } = seg {
            if !(sigma > 0.0) && d > 0.0 {
                return Err(Error::InvalidParameter("Gaussian sigma must be > 0".into()));
            }
        }
        if d > 0.0 {
            self.segments.push((self.total, seg));
            self.total += d;
        }
        Ok(self)
    }

    pub fn push_gate(&mut self, kind: GateKind) -> Result<&mut Self> {
        self.push(gate_segment(kind))
    }

    pub fn spec(&self) -> &RampSpec {
        &self.spec
    }

    pub fn duration(&self) -> f64 {
        self.total
    }

    pub fn segments(&self) -> impl Iterator<Item = &(f64, Segment)> {
        self.segments.iter()
    }

    /// Segment start times plus the end time.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.segments.iter().map(|(s, _)| *s).collect();
        b.push(self.total);
        b
    }

    fn locate(&self, t: f64) -> Option<(usize, f64)> {
        if self.segments.is_empty() {
            return None;
        }
        let idx = self
            .segments
            .partition_point(|(start, _)| *start <= t)
            .saturating_sub(1);
        let (start, seg) = &self.segments[idx];
        Some((idx, (t - start).clamp(0.0, seg.duration())))
    }

    /// Values inside segment `index` at local time `tau`, with both segment
    /// ends included (integrators evaluate the closed interval).
    pub fn sample_in_segment(&self, index: usize, tau: f64) -> ScheduleSample {
        let (start, seg) = self.segments[index];
        let tau = tau.clamp(0.0, seg.duration());
        let eps2 = match seg {
            Segment::RampUp { .. } => ramp_envelope(&self.spec, tau),
            Segment::Hold { .. } | Segment::RabiX { .. } => self.spec.eps2_kc,
            Segment::RampDown { duration } => ramp_envelope(&self.spec, duration - tau),
            Segment::PumpOffZ { .. } => 0.0,
        };
        let delta_as = match seg {
            Segment::PumpOffZ { detuning_mhz, .. } => detuning_mhz,
            _ => compensation(&self.spec, eps2),
        };
        let ex = match seg {
            Segment::RabiX {
                duration,
                sigma,
                amplitude_mhz,
                phase,
            } => {
                let x = (tau - 0.5 * duration) / sigma;
                C64::from_polar(amplitude_mhz * (-0.5 * x * x).exp(), phase)
            }
            _ => C64::new(0.0, 0.0),
        };
        ScheduleSample {
            t_ns: start + tau,
            eps2_mhz: eps2,
            delta_as_mhz: delta_as,
            epsx_re_mhz: ex.re,
            epsx_im_mhz: ex.im,
        }
    }

    pub fn sample_at(&self, t: f64) -> ScheduleSample {
        match self.locate(t) {
            Some((idx, tau)) => ScheduleSample {
                t_ns: t,
                ..self.sample_in_segment(idx, tau)
            },
            None => ScheduleSample {
                t_ns: t,
                eps2_mhz: 0.0,
                delta_as_mhz: compensation(&self.spec, 0.0),
                epsx_re_mhz: 0.0,
                epsx_im_mhz: 0.0,
            },
        }
    }

    /// Pump amplitude ε₂(t) in MHz. Before the first segment the pump is off.
    pub fn eps2(&self, t: f64) -> f64 {
        self.sample_at(t).eps2_mhz
    }

    /// Pump detuning Δ_as(t) in MHz.
    pub fn delta_as(&self, t: f64) -> f64 {
        self.sample_at(t).delta_as_mhz
    }

    /// Effective detuning `Δ = Δ_as - γ ε₂²` (MHz).
    pub fn delta(&self, t: f64) -> f64 {
        let s = self.sample_at(t);
        s.delta_as_mhz - self.spec.gamma * s.eps2_mhz * s.eps2_mhz
    }

    /// Complex charge-drive amplitude ε_x(t) in MHz.
    pub fn eps_x(&self, t: f64) -> C64 {
        let s = self.sample_at(t);
        C64::new(s.epsx_re_mhz, s.epsx_im_mhz)
    }

    /// Uniform samples `0, dt, 2dt, ...` up to and including the end.
    pub fn sample(&self, dt: f64) -> Vec<ScheduleSample> {
        let n = (self.total / dt).round() as usize;
        let mut out: Vec<ScheduleSample> = (0..=n)
            .map(|i| self.sample_at((i as f64 * dt).min(self.total)))
            .collect();
        if let Some(last) = out.last() {
            if last.t_ns < self.total - 1e-9 {
                out.push(self.sample_at(self.total));
            }
        }
        out
    }

    /// Largest `|dΔ_as/dt| / (2K)^2` over the schedule (angular units), a
    /// diagnostic for the frame-derivative term the model omits.
    pub fn frame_derivative_diagnostic(&self, k_mhz: f64, dt: f64) -> f64 {
        let k = 2.0 * k_mhz * MHZ_TO_RAD_NS;
        let b = self.boundaries();
        let n = (self.total / dt).ceil() as usize;
        let mut worst = 0.0f64;
        for i in 0..n {
            let t0 = i as f64 * dt;
            let t1 = (t0 + dt).min(self.total);
            // skip intentional discontinuities
            if b.iter().any(|&x| x > t0 && x <= t1) {
                continue;
            }
            let rate = (self.delta_as(t1) - self.delta_as(t0)) * MHZ_TO_RAD_NS / (t1 - t0);
            worst = worst.max(rate.abs() / (k * k));
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const GAMMA: f64 = 5.1 / (9.7 * 9.7);

    fn paper(strategy: CompensationStrategy) -> RampSpec {
        RampSpec::new(9.7, 320.0, GAMMA, strategy)
    }

    #[test]
    fn tanh_endpoints_and_midpoint() {
        let spec = paper(CompensationStrategy::Dynamic);
        assert_eq!(tanh_envelope(&spec, 0.0), 0.0);
        assert_eq!(tanh_envelope(&spec, 320.0), 9.7);
        let mid = tanh_envelope(&spec, 160.0) / 9.7;
        assert_abs_diff_eq!(mid, 1.5f64.tanh() / 3f64.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(mid, 0.9096, epsilon = 1e-4);
    }

    #[test]
    fn sigmoid_endpoints_and_symmetry() {
        let spec = paper(CompensationStrategy::Dynamic);
        assert_eq!(ramp_envelope(&spec, 0.0), 0.0);
        assert_eq!(ramp_envelope(&spec, 320.0), 9.7);
        assert_abs_diff_eq!(ramp_envelope(&spec, 160.0), 4.85, epsilon = 1e-12);
        for t in [10.0, 50.0, 120.0] {
            let a = ramp_envelope(&spec, t) / 9.7;
            let b = ramp_envelope(&spec, 320.0 - t) / 9.7;
            assert_abs_diff_eq!(a + b, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn compensation_values() {
        let dynamic = PumpSchedule::from_spec(paper(CompensationStrategy::Dynamic)).unwrap();
        assert_eq!(dynamic.delta_as(0.0), 0.0);
        assert_abs_diff_eq!(dynamic.delta_as(320.0), 5.1, epsilon = 1e-12);

        let stat = PumpSchedule::from_spec(paper(CompensationStrategy::Static)).unwrap();
        assert_abs_diff_eq!(stat.delta_as(0.0), 5.1, epsilon = 1e-12);
        assert_abs_diff_eq!(stat.delta(0.0), 5.1, epsilon = 1e-12);
        assert_abs_diff_eq!(stat.delta(320.0), 0.0, epsilon = 1e-12);

        let none = PumpSchedule::from_spec(paper(CompensationStrategy::None)).unwrap();
        assert_eq!(none.delta_as(100.0), 0.0);
        assert_abs_diff_eq!(none.delta(320.0), -5.1, epsilon = 1e-12);
        assert_abs_diff_eq!(
            paper(CompensationStrategy::Static).plateau_shift(),
            5.1,
            epsilon = 1e-12
        );
    }

    #[test]
    fn dynamic_detuning_vanishes() {
        let spec = paper(CompensationStrategy::Dynamic)
            .with_hold(100.0)
            .with_ramp_down(true);
        let s = PumpSchedule::from_spec(spec).unwrap();
        let worst = (0..=740)
            .map(|i| s.delta(i as f64).abs())
            .fold(0.0, f64::max);
        assert_eq!(worst, 0.0);
    }

    #[test]
    fn mis_set_plateau_leaves_proportional_residual() {
        let spec = paper(CompensationStrategy::Dynamic).with_compensation_plateau(Some(4.1));
        let s = PumpSchedule::from_spec(spec).unwrap();
        assert_abs_diff_eq!(s.delta_as(320.0), 4.1, epsilon = 1e-12);
        assert_abs_diff_eq!(s.delta(320.0), -1.0, epsilon = 1e-12);
        let half = s.eps2(160.0) / 9.7;
        assert_abs_diff_eq!(s.delta(160.0), -half * half, epsilon = 1e-12);

        let st = PumpSchedule::from_spec(
            paper(CompensationStrategy::Static).with_compensation_plateau(Some(6.0)),
        )
        .unwrap();
        assert_abs_diff_eq!(st.delta(0.0), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn mirror_symmetry() {
        let spec = paper(CompensationStrategy::Static).with_ramp_down(true);
        let s = PumpSchedule::from_spec(spec).unwrap();
        assert_eq!(s.duration(), 640.0);
        for i in 0..=640 {
            let t = i as f64;
            assert_abs_diff_eq!(s.eps2(640.0 - t), s.eps2(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_duration_gates_are_noops() {
        let spec = paper(CompensationStrategy::Dynamic);
        let base = PumpSchedule::from_spec(spec).unwrap();
        let mut with = base.clone();
        with.push_gate(GateKind::PumpOffZ {
            duration: 0.0,
            detuning_mhz: -6.9,
        })
        .unwrap();
        assert_eq!(with, base);
    }

    #[test]
    fn rabi_zero_amplitude_is_identity_segment() {
        let mut s = PumpSchedule::from_spec(paper(CompensationStrategy::Dynamic)).unwrap();
        s.push_gate(GateKind::RabiX {
            duration: 40.0,
            sigma: 10.0,
            eps_x: C64::new(0.0, 0.0).into(),
        })
        .unwrap();
        for t in [320.0, 330.0, 340.0, 360.0] {
            assert_eq!(s.eps_x(t), C64::new(0.0, 0.0));
            assert_eq!(s.eps2(t), 9.7);
        }
    }

    #[test]
    fn pump_off_segment_values() {
        let mut s = PumpSchedule::from_spec(paper(CompensationStrategy::Dynamic)).unwrap();
        s.push_gate(GateKind::PumpOffZ {
            duration: 36.0,
            detuning_mhz: -6.9,
        })
        .unwrap();
        s.push(Segment::Hold { duration: 10.0 }).unwrap();
        assert_eq!(s.eps2(330.0), 0.0);
        assert_eq!(s.delta(330.0), -6.9);
        // restored instantaneously
        assert_eq!(s.eps2(356.0), 9.7);
        assert_abs_diff_eq!(s.delta_as(356.0), 5.1, epsilon = 1e-12);
        assert_eq!(s.boundaries(), vec![0.0, 320.0, 356.0, 366.0]);
    }

    #[test]
    fn gaussian_drive_peaks_mid_segment() {
        let mut s = PumpSchedule::from_spec(paper(CompensationStrategy::Dynamic)).unwrap();
        let ex = C64::from_polar(0.5, 0.3);
        s.push_gate(GateKind::RabiX {
            duration: 60.0,
            sigma: 12.0,
            eps_x: ex.into(),
        })
        .unwrap();
        assert_abs_diff_eq!((s.eps_x(350.0) - ex).norm(), 0.0, epsilon = 1e-14);
        assert!(s.eps_x(320.0).norm() < 0.5 * (-0.5f64 * 2.5 * 2.5).exp() + 1e-12);
    }

    #[test]
    fn adiabaticity_flag() {
        assert!(!paper(CompensationStrategy::Dynamic).adiabaticity_at_risk(6.9));
        let short = RampSpec {
            t_up: 50.0,
            ..paper(CompensationStrategy::Dynamic)
        };
        assert!(short.adiabaticity_at_risk(6.9));
    }

    #[test]
    fn validation() {
        assert!(RampSpec {
            t_up: 0.0,
            ..paper(CompensationStrategy::Dynamic)
        }
        .validate()
        .is_err());
        assert!(RampSpec {
            eps2_kc: -1.0,
            ..paper(CompensationStrategy::Dynamic)
        }
        .validate()
        .is_err());
        assert!(RampSpec {
            sharpness: 0.0,
            ..paper(CompensationStrategy::Dynamic)
        }
        .validate()
        .is_err());
        assert!(RampSpec {
            hold: -1.0,
            ..paper(CompensationStrategy::Dynamic)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn samples_cover_full_duration() {
        let s = PumpSchedule::from_spec(paper(CompensationStrategy::Dynamic).with_ramp_down(true))
            .unwrap();
        let samples = s.sample(1.0);
        assert_eq!(samples.len(), 641);
        assert_eq!(samples[0].eps2_mhz, 0.0);
        assert_eq!(samples.last().unwrap().t_ns, 640.0);
        assert!(s.frame_derivative_diagnostic(6.9, 1.0) > 0.0);
    }

    proptest! {
        #[test]
        fn envelope_monotone(kc in 0.0f64..20.0, t_up in 50.0f64..800.0, s in 0.5f64..5.0,
                             hold in 0.0f64..200.0, sigmoid in any::<bool>()) {
            let env = if sigmoid { Envelope::Sigmoid } else { Envelope::Tanh };
            let spec = RampSpec::new(kc, t_up, GAMMA, CompensationStrategy::Static)
                .with_envelope(env, s)
                .with_hold(hold)
                .with_ramp_down(true);
            let sched = PumpSchedule::from_spec(spec).unwrap();
            let total = sched.duration();
            let n = total.floor() as usize;
            let vals: Vec<f64> = (0..=n).map(|i| sched.eps2(i as f64)).collect();
            for i in 1..vals.len() {
                let t = i as f64;
                if t <= t_up {
                    prop_assert!(vals[i] >= vals[i - 1]);
                } else if t - 1.0 >= t_up + hold {
                    prop_assert!(vals[i] <= vals[i - 1]);
                }
            }
            if hold == 0.0 {
                for i in 0..=n {
                    let t = i as f64;
                    prop_assert!((sched.eps2(total - t) - sched.eps2(t)).abs() <= 1e-12);
                }
            }
        }
    }
}
