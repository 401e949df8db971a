//! Cat readout, gate calibration and rate measurements at the plateau.

use super::integrate::{propagate, Equation, HamiltonianPath, Tolerance};
use super::KerrCatParams;
use crate::error::{Error, Result};
use crate::fit::{fit_sinusoid, SinusoidFit};
use crate::fock::{HilbertSpace, StateRef, StateVector};
use crate::linalg::{c, CMat};
use crate::schedule::{CompensationStrategy, PumpSchedule, RampSpec, Segment};
use crate::tomography::{p_vector, Axis, QubitFrame};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Projective cat readout: `|α>` reads 1, `|−α>` reads 0 and population
/// outside the cat qubit reads the midpoint 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatReadout {
    pub signal: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub p_leak: f64,
}

pub fn cat_readout<'a>(
    state: impl Into<StateRef<'a>>,
    alpha: C64,
    space: HilbertSpace,
) -> Result<CatReadout> {
    let frame = QubitFrame::kerr_cat(alpha, space)?;
    cat_readout_in(state, &frame)
}

/// Readout against a prebuilt cat frame.
pub fn cat_readout_in<'a>(
    state: impl Into<StateRef<'a>>,
    frame: &QubitFrame,
) -> Result<CatReadout> {
    let p = p_vector(state, frame)?;
    let p_plus = 0.5 * (p.p_i + p.p_x);
    let p_minus = 0.5 * (p.p_i - p.p_x);
    let p_leak = (1.0 - p_plus - p_minus).max(0.0);
    Ok(CatReadout {
        signal: p_plus + 0.5 * p_leak,
        p_plus,
        p_minus,
        p_leak,
    })
}

/// Plateau Hamiltonian of a ramp specification (residual detuning
/// `Δ_as,KC − γ ε₂,KC²`).
pub fn plateau_params(spec: &RampSpec, k_mhz: f64) -> KerrCatParams {
    let mut hold = PumpSchedule::empty(*spec).expect("validated spec");
    let _ = hold.push(Segment::Hold { duration: 1.0 });
    KerrCatParams::new(k_mhz, hold.delta(0.0), spec.eps2_kc)
}

fn evolve_pure(path: &HamiltonianPath, psi: &StateVector, tol: &Tolerance) -> Result<StateVector> {
    let y0 = CMat::from_column_slice(psi.space().dim(), 1, psi.amplitudes().as_slice());
    let (mut ys, _) = propagate(path, Equation::Schrodinger, y0, &[path.duration()], tol)?;
    StateVector::from_amplitudes(
        psi.space(),
        ys.pop().expect("one sample").column(0).into_owned(),
    )
}

/// Pump-off Z/2 calibration result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZHalfCalibration {
    /// Gate time (ns).
    pub t_z: f64,
    /// Detuning during the pump-off window (MHz).
    pub detuning_mhz: f64,
    /// `|α>` signal at `t_z`; zero for a perfect gate.
    pub min_signal: f64,
    /// Largest minus smallest signal over the scan.
    pub contrast: f64,
    /// `(duration, signal)` pairs.
    pub scan: Vec<(f64, f64)>,
}

/// Scans the pump-off duration starting from `|+Y> = |C_α^{−i}>` and returns
/// the duration minimising the `|α>` signal. The window covers one full
/// free-Kerr period `1/K`.
pub fn calibrate_z_half(
    k_mhz: f64,
    alpha_sq: f64,
    detuning_mhz: f64,
    space: HilbertSpace,
    points: usize,
) -> Result<ZHalfCalibration> {
    let alpha = c(alpha_sq.sqrt());
    let frame = QubitFrame::kerr_cat(alpha, space)?;
    let psi0 = frame.axis_state(Axis::Y, true);
    let window = 1e3 / k_mhz;
    let free = KerrCatParams::new(k_mhz, detuning_mhz, 0.0);
    let path = HamiltonianPath::constant(free, window)?;
    let times: Vec<f64> = (0..=points)
        .map(|i| window * i as f64 / points as f64)
        .collect();
    let y0 = CMat::from_column_slice(space.dim(), 1, psi0.amplitudes().as_slice());
    let (ys, _) = propagate(
        &path,
        Equation::Schrodinger,
        y0,
        &times,
        &Tolerance::default(),
    )?;
    let mut scan = Vec::with_capacity(times.len());
    for (t, y) in times.iter().zip(ys) {
        let v = StateVector::from_amplitudes(space, y.column(0).into_owned())?;
        scan.push((*t, cat_readout_in(&v, &frame)?.signal));
    }
    let (imin, _) = scan
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty scan");
    if imin == 0 || imin == scan.len() - 1 {
        return Err(Error::NoMinimumInWindow);
    }
    // parabolic refinement through the three bracketing samples
    let (t0, s0) = scan[imin - 1];
    let (t1, s1) = scan[imin];
    let (_, s2) = scan[imin + 1];
    let denom = s0 - 2.0 * s1 + s2;
    let t_z = if denom > 0.0 {
        t1 + 0.5 * (t1 - t0) * (s0 - s2) / denom
    } else {
        t1
    };
    let at = HamiltonianPath::constant(free, t_z)?;
    let min_signal =
        cat_readout_in(&evolve_pure(&at, &psi0, &Tolerance::default())?, &frame)?.signal;
    let max = scan.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    let min = scan.iter().map(|p| p.1).fold(f64::MAX, f64::min);
    Ok(ZHalfCalibration {
        t_z,
        detuning_mhz,
        min_signal,
        contrast: max - min,
        scan,
    })
}

/// X/2 calibration result for a Gaussian charge-drive pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XHalfCalibration {
    /// Peak drive amplitude producing a quarter turn (MHz).
    pub amplitude_mhz: f64,
    /// Drive phase giving the `+Z → +Y` sense (rad).
    pub phase: f64,
    pub duration: f64,
    pub sigma: f64,
    /// Rotation angle per MHz of peak amplitude (rad/MHz).
    pub angle_per_mhz: f64,
    /// Sign of the initial signal slope for phase 0 (+1: signal rises, the
    /// drive turns `+Z` towards `−Y`).
    pub raw_direction: f64,
    /// `(amplitude, signal)` pairs of the sweep at phase 0.
    pub scan: Vec<(f64, f64)>,
}

/// Sweeps the peak amplitude of a Gaussian drive of fixed `duration` applied
/// to `|+Z> = |C_α^+>` at the plateau, follows it with an ideal Z/2
/// (`+Y → −X`) and reads `|α>`. A sinusoid fit in amplitude yields the
/// quarter-turn amplitude; the slope sign resolves the rotation sense.
pub fn calibrate_x_half(
    spec: &RampSpec,
    k_mhz: f64,
    space: HilbertSpace,
    duration: f64,
    max_amplitude: f64,
    points: usize,
) -> Result<XHalfCalibration> {
    let plateau = plateau_params(spec, k_mhz);
    let alpha = c(plateau.alpha());
    let frame = QubitFrame::kerr_cat(alpha, space)?;
    let psi0 = frame.axis_state(Axis::Z, true);
    let sigma = duration / 6.0;
    let zhalf = ideal_z_half(&frame);
    let tol = Tolerance::default();
    let mut scan = Vec::with_capacity(points + 1);
    for i in 0..=points {
        let amp = max_amplitude * i as f64 / points as f64;
        let psi = drive_pulse(spec, k_mhz, &psi0, duration, sigma, amp, 0.0, &tol)?;
        let after = zhalf(&psi)?;
        scan.push((amp, cat_readout_in(&after, &frame)?.signal));
    }
    let xs: Vec<f64> = scan.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = scan.iter().map(|p| p.1).collect();
    let fit: SinusoidFit = fit_sinusoid(&xs, &ys)?;
    // slope at zero amplitude: d/da [A cos(ω a + φ)] = −A ω sin φ
    let slope = -fit.amplitude * fit.omega * fit.phase.sin();
    let raw_direction = if slope >= 0.0 { 1.0 } else { -1.0 };
    let amplitude_mhz = 0.5 * PI / fit.omega;
    // a sinusoid fitted to a sliver of a period extrapolates badly
    if !(amplitude_mhz.is_finite() && amplitude_mhz <= max_amplitude) {
        return Err(Error::InvalidRegime(format!(
            "X/2 amplitude {amplitude_mhz:.4} MHz lies outside the scanned range [0, {max_amplitude}] MHz"
        )));
    }
    Ok(XHalfCalibration {
        amplitude_mhz,
        phase: if raw_direction > 0.0 { PI } else { 0.0 },
        duration,
        sigma,
        angle_per_mhz: fit.omega,
        raw_direction,
        scan,
    })
}

/// Applies a Gaussian charge-drive pulse on top of the plateau Hamiltonian.
#[allow(clippy::too_many_arguments)]
pub(crate) fn drive_pulse(
    spec: &RampSpec,
    k_mhz: f64,
    psi: &StateVector,
    duration: f64,
    sigma: f64,
    amplitude: f64,
    phase: f64,
    tol: &Tolerance,
) -> Result<StateVector> {
    if amplitude == 0.0 {
        let plateau = plateau_params(spec, k_mhz);
        return evolve_pure(&HamiltonianPath::constant(plateau, duration)?, psi, tol);
    }
    let mut s = PumpSchedule::empty(*spec)?;
    s.push(Segment::RabiX {
        duration,
        sigma,
        amplitude_mhz: amplitude,
        phase,
    })?;
    evolve_pure(&HamiltonianPath::from_schedule(&s, k_mhz)?, psi, tol)
}

/// Ideal frame Z/2 (`+X → +Y → −X`): `diag(1, i)` on the cat basis, identity
/// elsewhere.
pub(crate) fn ideal_z_half(
    frame: &QubitFrame,
) -> impl Fn(&StateVector) -> Result<StateVector> + '_ {
    move |psi: &StateVector| {
        let b = frame.basis();
        let coeff = b.adjoint() * psi.amplitudes();
        // add (i − 1) times the |C−> component
        let shift = b.column(1) * (coeff[1] * C64::new(-1.0, 1.0));
        StateVector::from_amplitudes(psi.space(), psi.amplitudes() + shift)
    }
}

/// Fitted oscillation frequency (MHz) of the cat `⟨Z⟩` under a constant
/// resonant drive `eps_x` at `Δ = 0`, starting from `|C_α^+>`.
pub fn rabi_rate(
    k_mhz: f64,
    alpha_sq: f64,
    eps_x: C64,
    space: HilbertSpace,
    periods: f64,
    points: usize,
) -> Result<f64> {
    let params = KerrCatParams::new(k_mhz, 0.0, alpha_sq * k_mhz).with_drive(eps_x);
    let frame = QubitFrame::kerr_cat(c(params.alpha()), space)?;
    let guess = super::omega_x(eps_x, c(params.alpha())).abs().max(1e-6);
    let t_max = periods * 1e3 / guess;
    Ok(fitted_frequency(
        &params,
        &frame,
        Axis::Z,
        Axis::Z,
        None,
        t_max,
        points,
        space,
    )?
    .0)
}

/// Fitted precession frequency (MHz) of the cat `⟨X⟩` under the constant
/// Hamiltonian `params`, starting from `|+X>`. The frame uses the mean-field
/// amplitude `α² = (ε₂ + Δ/2)/K` of the detuned oscillator. The sign follows
/// the splitting `E(|C⁻>) − E(|C⁺>)`: a positive rate turns `+X` toward `−Y`.
pub fn precession_rate(
    params: &KerrCatParams,
    space: HilbertSpace,
    periods: f64,
    points: usize,
) -> Result<f64> {
    let a2 = (params.eps2 + 0.5 * params.delta) / params.k;
    if !(a2 > 0.0) {
        return Err(Error::InvalidRegime(format!("no cat at alpha^2 = {a2}")));
    }
    let frame = QubitFrame::kerr_cat(c(a2.sqrt()), space)?;
    let guess = super::omega_z(params.delta, a2).abs().max(1e-6);
    let t_max = periods * 1e3 / guess;
    let (rate, y) = fitted_frequency(
        params,
        &frame,
        Axis::X,
        Axis::X,
        Some(Axis::Y),
        t_max,
        points,
        space,
    )?;
    // ⟨X⟩ fixes only the magnitude; the sense of rotation is the sign of
    // ⟨Y⟩ over the first quarter turn
    let quarter = (points as f64 * 0.25 * 1e3 / (rate * t_max))
        .ceil()
        .max(1.0) as usize;
    let sense: f64 = y.iter().skip(1).take(quarter).sum();
    Ok(if sense > 0.0 { -rate } else { rate })
}

/// Frequency (MHz) of `⟨measure⟩` along the evolution from `+start`, plus
/// the samples of `⟨also⟩` if requested.
#[allow(clippy::too_many_arguments)]
fn fitted_frequency(
    params: &KerrCatParams,
    frame: &QubitFrame,
    start: Axis,
    measure: Axis,
    also: Option<Axis>,
    t_max: f64,
    points: usize,
    space: HilbertSpace,
) -> Result<(f64, Vec<f64>)> {
    let path = HamiltonianPath::constant(*params, t_max)?;
    let psi0 = frame.axis_state(start, true);
    let times: Vec<f64> = (0..=points)
        .map(|i| t_max * i as f64 / points as f64)
        .collect();
    let y0 = CMat::from_column_slice(space.dim(), 1, psi0.amplitudes().as_slice());
    let (ys, _) = propagate(
        &path,
        Equation::Schrodinger,
        y0,
        &times,
        &Tolerance::default(),
    )?;
    let op = frame.pauli(measure);
    let other = also.map(|a| frame.pauli(a));
    let mut values = Vec::with_capacity(ys.len());
    let mut extra = Vec::new();
    for y in ys {
        let v = StateVector::from_amplitudes(space, y.column(0).into_owned())?;
        values.push(v.expect(&op)?.re);
        if let Some(o) = &other {
            extra.push(v.expect(o)?.re);
        }
    }
    let fit = fit_sinusoid(&times, &values)?;
    Ok((fit.frequency() * 1e3, extra))
}

/// Convenience: the plateau spec of a compensated ramp with cat size
/// `alpha_sq`, used by gate calibrations.
pub fn plateau_spec(k_mhz: f64, alpha_sq: f64, gamma: f64, t_up: f64) -> RampSpec {
    RampSpec::new(alpha_sq * k_mhz, t_up, gamma, CompensationStrategy::Dynamic)
}
