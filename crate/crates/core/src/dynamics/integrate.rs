//! Adaptive Dormand–Prince 5(4) integration of the Schrödinger and Lindblad
//! equations along a piecewise Hamiltonian path, with exact propagators on
//! constant pieces.

use super::{HCoeffs, KerrCatParams, LindbladModel, Stencil};
use crate::error::{Error, Result};
use crate::fock::{required_dim, DensityMatrix, HilbertSpace, Operator, StateVector};
use crate::linalg::{self, CMat, I};
use crate::schedule::{PumpSchedule, Segment};
use num_complex::Complex64 as C64;
use std::collections::HashMap;
use std::fmt::Write as _;

/// Local error control for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    /// Accepted-step budget before `ToleranceNotMet`.
    pub max_steps: usize,
    /// Propagate constant pieces exactly instead of stepping through them.
    pub exact_constant_pieces: bool,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 5_000_000,
            exact_constant_pieces: true,
        }
    }
}

impl Tolerance {
    pub fn with_rtol(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn adaptive_only(mut self) -> Self {
        self.exact_constant_pieces = false;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Largest accepted local error estimate (max-norm, absolute).
    pub max_local_error: f64,
    /// Number of exactly propagated constant intervals.
    pub exact_intervals: usize,
}

/// Time-dependent Hamiltonian as a sequence of constant or smoothly varying
/// pieces.
#[derive(Debug, Clone)]
pub struct HamiltonianPath {
    k: f64,
    schedule: Option<PumpSchedule>,
    pieces: Vec<Piece>,
    duration: f64,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    start: f64,
    end: f64,
    kind: PieceKind,
}

#[derive(Debug, Clone, Copy)]
enum PieceKind {
    Constant(KerrCatParams),
    Segment(usize),
}

impl HamiltonianPath {
    /// The schedule's segments with Kerr coefficient `k_mhz`.
    pub fn from_schedule(schedule: &PumpSchedule, k_mhz: f64) -> Result<Self> {
        KerrCatParams::new(k_mhz, 0.0, 0.0).validate()?;
        let gamma = schedule.spec().gamma;
        let mut pieces = Vec::new();
        for (idx, (start, seg)) in schedule.segments().enumerate() {
            let end = start + seg.duration();
            let kind = match seg {
                Segment::Hold { .. } | Segment::PumpOffZ { .. } => {
                    let s = schedule.sample_in_segment(idx, 0.0);
                    PieceKind::Constant(KerrCatParams::new(
                        k_mhz,
                        s.delta_as_mhz - gamma * s.eps2_mhz * s.eps2_mhz,
                        s.eps2_mhz,
                    ))
                }
                _ => PieceKind::Segment(idx),
            };
            pieces.push(Piece {
                start: *start,
                end,
                kind,
            });
        }
        Ok(Self {
            k: k_mhz,
            schedule: Some(schedule.clone()),
            pieces,
            duration: schedule.duration(),
        })
    }

    /// A constant Hamiltonian for `duration` ns.
    pub fn constant(params: KerrCatParams, duration: f64) -> Result<Self> {
        params.validate()?;
        if !(duration >= 0.0) {
            return Err(Error::InvalidParameter(format!("duration {duration} < 0")));
        }
        let pieces = if duration > 0.0 {
            vec![Piece {
                start: 0.0,
                end: duration,
                kind: PieceKind::Constant(params),
            }]
        } else {
            Vec::new()
        };
        Ok(Self {
            k: params.k,
            schedule: None,
            pieces,
            duration,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    fn params(&self, piece: &Piece, t: f64) -> KerrCatParams {
        match piece.kind {
            PieceKind::Constant(p) => p,
            PieceKind::Segment(idx) => {
                let sched = self
                    .schedule
                    .as_ref()
                    .expect("segment pieces carry a schedule");
                let s = sched.sample_in_segment(idx, t - piece.start);
                let gamma = sched.spec().gamma;
                KerrCatParams {
                    k: self.k,
                    delta: s.delta_as_mhz - gamma * s.eps2_mhz * s.eps2_mhz,
                    eps2: s.eps2_mhz,
                    eps_x: C64::new(s.epsx_re_mhz, s.epsx_im_mhz),
                }
            }
        }
    }

    /// Hamiltonian parameters at time `t` (closed on the left of each piece).
    pub fn params_at(&self, t: f64) -> KerrCatParams {
        let idx = self
            .pieces
            .partition_point(|p| p.start <= t)
            .saturating_sub(1);
        match self.pieces.get(idx) {
            Some(p) => self.params(p, t),
            None => KerrCatParams::new(self.k, 0.0, 0.0),
        }
    }

    /// Largest cat amplitude `sqrt(ε₂/K)` reached along the path.
    pub fn max_alpha(&self) -> f64 {
        let mut m = 0.0f64;
        for p in &self.pieces {
            let n = 64;
            for i in 0..=n {
                let t = p.start + (p.end - p.start) * i as f64 / n as f64;
                m = m.max(self.params(p, t).alpha());
            }
        }
        m
    }

    fn check_space(&self, space: HilbertSpace) -> Result<()> {
        let alpha = self.max_alpha();
        if space.dim() < required_dim(alpha) {
            return Err(Error::TruncationTooSmall {
                dim: space.dim(),
                required: required_dim(alpha),
                alpha,
            });
        }
        Ok(())
    }
}

/// Which equation of motion to integrate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Equation {
    /// `dψ/dt = −i H ψ` on a `dim × m` block of state vectors.
    Schrodinger,
    /// Lindblad master equation for an arbitrary (not necessarily Hermitian) operator.
    Lindblad { kappa: f64, gamma_d: f64 },
}

impl Equation {
    pub fn lindblad(model: Option<&LindbladModel>) -> Self {
        match model {
            Some(m) => Equation::Lindblad {
                kappa: m.decay_rate(),
                gamma_d: m.dephasing_rate(),
            },
            None => Equation::Lindblad {
                kappa: 0.0,
                gamma_d: 0.0,
            },
        }
    }
}

struct Rhs {
    stencil: Stencil,
    left: CMat,
    right: CMat,
}

impl Rhs {
    fn new(dim: usize) -> Self {
        Self {
            stencil: Stencil::new(dim),
            left: CMat::zeros(dim, dim),
            right: CMat::zeros(dim, dim),
        }
    }

    /// Forward generator (`adjoint = false`) or Heisenberg generator of the
    /// dual map (`adjoint = true`).
    fn eval(&mut self, eq: Equation, adjoint: bool, h: &HCoeffs, y: &CMat, out: &mut CMat) {
        match eq {
            Equation::Schrodinger => {
                self.stencil.apply_left(h, y, out);
                let s = if adjoint { I } else { -I };
                out.iter_mut().for_each(|z| *z *= s);
            }
            Equation::Lindblad { kappa, gamma_d } => {
                let d = self.stencil.dim();
                if self.left.ncols() != y.ncols() {
                    self.left = CMat::zeros(d, y.ncols());
                    self.right = CMat::zeros(y.nrows(), d);
                }
                self.stencil.apply_left(h, y, &mut self.left);
                self.stencil.apply_right(h, y, &mut self.right);
                let s = if adjoint { I } else { -I };
                for j in 0..d {
                    for i in 0..d {
                        let mut v = s * (self.left[(i, j)] - self.right[(i, j)]);
                        let (fi, fj) = (i as f64, j as f64);
                        if kappa > 0.0 {
                            let jump = if adjoint {
                                if i >= 1 && j >= 1 {
                                    y[(i - 1, j - 1)] * (fi * fj).sqrt()
                                } else {
                                    C64::new(0.0, 0.0)
                                }
                            } else if i + 1 < d && j + 1 < d {
                                y[(i + 1, j + 1)] * ((fi + 1.0) * (fj + 1.0)).sqrt()
                            } else {
                                C64::new(0.0, 0.0)
                            };
                            v += (jump - y[(i, j)] * (0.5 * (fi + fj))) * kappa;
                        }
                        if gamma_d > 0.0 {
                            v -= y[(i, j)] * (0.5 * gamma_d * (fi - fj) * (fi - fj));
                        }
                        out[(i, j)] = v;
                    }
                }
            }
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// `y + h Σ c_i k_i` into `out`.
fn combine(out: &mut CMat, y: &CMat, h: f64, terms: &[(f64, &CMat)]) {
    out.copy_from(y);
    for &(c, k) in terms {
        if c != 0.0 {
            out.zip_apply(k, |o, kv| *o += kv * (h * c));
        }
    }
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1`, returning the states at
/// `samples` (sorted, inside `[t0, t1]`) and the final state.
#[allow(clippy::too_many_arguments)]
fn dopri45<F>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: CMat,
    samples: &[f64],
    tol: &Tolerance,
    h_hint: &mut f64,
    stats: &mut IntegratorStats,
) -> Result<(Vec<CMat>, CMat)>
where
    F: FnMut(f64, &CMat, &mut CMat),
{
    let (r, c) = y0.shape();
    let mut out = Vec::with_capacity(samples.len());
    let mut y = y0;
    let mut t = t0;
    let mut k1 = CMat::zeros(r, c);
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut k5 = k1.clone();
    let mut k6 = k1.clone();
    let mut k7 = k1.clone();
    let mut tmp = k1.clone();
    let mut ynew = k1.clone();
    f(t, &y, &mut k1);
    stats.rhs_evals += 1;
    let mut h = if *h_hint > 0.0 { *h_hint } else { 1e-3 };
    let span = t1 - t0;
    let mut si = 0;
    while si < samples.len() && samples[si] <= t0 {
        out.push(y.clone());
        si += 1;
    }
    let mut steps = 0usize;
    while t < t1 {
        let target = if si < samples.len() {
            samples[si].min(t1)
        } else {
            t1
        };
        let remaining = target - t;
        let mut step = h.min(remaining);
        // avoid leaving a sliver before the target
        if remaining - step < 1e-9 * span.max(1.0) {
            step = remaining;
        }
        if step < 1e-12 * span.max(1.0) && remaining > 1e-12 * span.max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h: step });
        }
        let hs = step;
        combine(&mut tmp, &y, hs, &[(A21, &k1)]);
        f(t + C2 * hs, &tmp, &mut k2);
        combine(&mut tmp, &y, hs, &[(A31, &k1), (A32, &k2)]);
        f(t + C3 * hs, &tmp, &mut k3);
        combine(&mut tmp, &y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        f(t + C4 * hs, &tmp, &mut k4);
        combine(
            &mut tmp,
            &y,
            hs,
            &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
        );
        f(t + C5 * hs, &tmp, &mut k5);
        combine(
            &mut tmp,
            &y,
            hs,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        f(t + hs, &tmp, &mut k6);
        combine(
            &mut ynew,
            &y,
            hs,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        );
        f(t + hs, &ynew, &mut k7);
        stats.rhs_evals += 6;

        let mut err_norm = 0.0f64;
        let mut err_abs = 0.0f64;
        for idx in 0..y.len() {
            let e = (k1[idx] * E1
                + k3[idx] * E3
                + k4[idx] * E4
                + k5[idx] * E5
                + k6[idx] * E6
                + k7[idx] * E7)
                * hs;
            let scale = tol.atol + tol.rtol * y[idx].norm().max(ynew[idx].norm());
            let en = e.norm();
            err_abs = err_abs.max(en);
            err_norm = err_norm.max(en / scale);
        }
        if !err_norm.is_finite() {
            h = hs * 0.1;
            stats.rejected += 1;
            continue;
        }
        let factor = if err_norm == 0.0 {
            5.0
        } else {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        if err_norm <= 1.0 {
            t = if step == remaining { target } else { t + hs };
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            stats.steps += 1;
            steps += 1;
            stats.max_local_error = stats.max_local_error.max(err_abs);
            // clamped steps do not shrink the controller's step
            if hs >= h * 0.999 || factor < 1.0 {
                h = hs * factor;
            }
            while si < samples.len() && samples[si] <= t {
                out.push(y.clone());
                si += 1;
            }
            if steps > tol.max_steps {
                return Err(Error::ToleranceNotMet { steps });
            }
        } else {
            stats.rejected += 1;
            h = hs * factor.min(0.9);
        }
    }
    *h_hint = h;
    while si < samples.len() {
        out.push(y.clone());
        si += 1;
    }
    Ok((out, y))
}

/// Exact propagation for a constant generator.
enum ConstantPropagator {
    /// Eigen-decomposition of `H` (rad/ns).
    Unitary {
        vals: Vec<f64>,
        vecs: CMat,
        adjoint: bool,
    },
    /// Column-major vectorised superoperator and its exponentials by step size.
    Super { l: CMat, cache: HashMap<u64, CMat> },
}

impl ConstantPropagator {
    fn new(eq: Equation, adjoint: bool, params: &KerrCatParams, dim: usize) -> Self {
        let h = params.coefficients();
        match eq {
            Equation::Schrodinger => {
                let (vals, vecs) = linalg::herm_eigen(&Stencil::new(dim).dense(&h));
                ConstantPropagator::Unitary {
                    vals,
                    vecs,
                    adjoint,
                }
            }
            Equation::Lindblad { .. } => {
                let mut rhs = Rhs::new(dim);
                let n = dim * dim;
                let mut l = CMat::zeros(n, n);
                let mut basis = CMat::zeros(dim, dim);
                let mut out = CMat::zeros(dim, dim);
                for col in 0..n {
                    basis[col] = C64::new(1.0, 0.0);
                    rhs.eval(eq, adjoint, &h, &basis, &mut out);
                    for (row, v) in out.iter().enumerate() {
                        l[(row, col)] = *v;
                    }
                    basis[col] = C64::new(0.0, 0.0);
                }
                ConstantPropagator::Super {
                    l,
                    cache: HashMap::new(),
                }
            }
        }
    }

    fn apply(&mut self, dt: f64, y: &CMat) -> CMat {
        match self {
            ConstantPropagator::Unitary {
                vals,
                vecs,
                adjoint,
            } => {
                let sign = if *adjoint { 1.0 } else { -1.0 };
                let mut coeffs = vecs.adjoint() * y;
                for (k, &e) in vals.iter().enumerate() {
                    let ph = C64::from_polar(1.0, sign * e * dt);
                    coeffs.row_mut(k).iter_mut().for_each(|z| *z *= ph);
                }
                &*vecs * coeffs
            }
            ConstantPropagator::Super { l, cache } => {
                // sample grids produce step sizes equal up to rounding
                let key = (dt * 1e12).round() as u64;
                let p = cache
                    .entry(key)
                    .or_insert_with(|| linalg::expm(&(&*l * C64::new(dt, 0.0))));
                let v = CMat::from_column_slice(y.len(), 1, y.as_slice());
                let w = &*p * v;
                CMat::from_column_slice(y.nrows(), y.ncols(), w.as_slice())
            }
        }
    }
}

/// Propagates `y0` forward along `path`, returning states at `samples`.
pub(crate) fn propagate(
    path: &HamiltonianPath,
    eq: Equation,
    y0: CMat,
    samples: &[f64],
    tol: &Tolerance,
) -> Result<(Vec<CMat>, IntegratorStats)> {
    let dim = y0.nrows();
    for w in samples.windows(2) {
        if w[1] < w[0] {
            return Err(Error::InvalidParameter(
                "sample times must be sorted".into(),
            ));
        }
    }
    if let (Some(&first), Some(&last)) = (samples.first(), samples.last()) {
        if first < 0.0 || last > path.duration * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "sample times must lie in [0, {}]",
                path.duration
            )));
        }
    }
    let mut stats = IntegratorStats::default();
    let mut out = Vec::with_capacity(samples.len());
    let mut si = 0;
    while si < samples.len() && samples[si] <= 0.0 {
        out.push(y0.clone());
        si += 1;
    }
    let mut y = y0;
    let mut rhs = Rhs::new(dim);
    let mut h_hint = 0.0;
    for piece in &path.pieces {
        let mut local: Vec<f64> = Vec::new();
        while si < samples.len() && samples[si] <= piece.end {
            local.push(samples[si]);
            si += 1;
        }
        match piece.kind {
            PieceKind::Constant(p) if tol.exact_constant_pieces => {
                let mut prop = ConstantPropagator::new(eq, false, &p, dim);
                let mut t = piece.start;
                for &s in &local {
                    if s > t {
                        y = prop.apply(s - t, &y);
                        stats.exact_intervals += 1;
                        t = s;
                    }
                    out.push(y.clone());
                }
                if piece.end > t {
                    y = prop.apply(piece.end - t, &y);
                    stats.exact_intervals += 1;
                }
            }
            _ => {
                let (states, end) = dopri45(
                    |t, yy, o| {
                        let h = path.params(piece, t).coefficients();
                        rhs.eval(eq, false, &h, yy, o)
                    },
                    piece.start,
                    piece.end,
                    y,
                    &local,
                    tol,
                    &mut h_hint,
                    &mut stats,
                )?;
                out.extend(states);
                y = end;
            }
        }
    }
    while si < samples.len() {
        out.push(y.clone());
        si += 1;
    }
    Ok((out, stats))
}

/// Heisenberg picture: applies the dual of the forward map over the whole
/// path to `e_final`, i.e. returns `Φ†(E)` with `Tr(E Φ(ρ)) = Tr(Φ†(E) ρ)`.
pub(crate) fn propagate_adjoint(
    path: &HamiltonianPath,
    eq: Equation,
    e_final: CMat,
    tol: &Tolerance,
) -> Result<(CMat, IntegratorStats)> {
    let dim = e_final.nrows();
    let mut stats = IntegratorStats::default();
    let mut e = e_final;
    let mut rhs = Rhs::new(dim);
    let mut h_hint = 0.0;
    for piece in path.pieces.iter().rev() {
        let len = piece.end - piece.start;
        match piece.kind {
            PieceKind::Constant(p) if tol.exact_constant_pieces => {
                let mut prop = ConstantPropagator::new(eq, true, &p, dim);
                e = prop.apply(len, &e);
                stats.exact_intervals += 1;
            }
            _ => {
                let (_, end) = dopri45(
                    |tau, yy, o| {
                        let h = path.params(piece, piece.end - tau).coefficients();
                        rhs.eval(eq, true, &h, yy, o)
                    },
                    0.0,
                    len,
                    e,
                    &[],
                    tol,
                    &mut h_hint,
                    &mut stats,
                )?;
                e = end;
            }
        }
    }
    Ok((e, stats))
}

/// A sampled state: pure for unitary evolution, mixed for Lindblad.
#[derive(Debug, Clone, PartialEq)]
pub enum EvolvedState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl EvolvedState {
    pub fn to_density(&self) -> DensityMatrix {
        match self {
            EvolvedState::Pure(v) => v.to_density(),
            EvolvedState::Mixed(r) => r.clone(),
        }
    }

    pub fn expect(&self, op: &Operator) -> Result<C64> {
        match self {
            EvolvedState::Pure(v) => v.expect(op),
            EvolvedState::Mixed(r) => r.expect(op),
        }
    }

    /// Norm of the state vector or trace of the density matrix.
    pub fn norm_or_trace(&self) -> f64 {
        match self {
            EvolvedState::Pure(v) => v.norm(),
            EvolvedState::Mixed(r) => r.trace(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub states: Vec<EvolvedState>,
    pub stats: IntegratorStats,
}

impl EvolutionResult {
    pub fn final_state(&self) -> Option<&EvolvedState> {
        self.states.last()
    }

    /// Largest deviation of the norm (pure) or trace (mixed) from one.
    pub fn norm_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (s.norm_or_trace() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Real parts of `<O>(t)` for each named observable, one row per sample.
    pub fn observables(&self, ops: &[(&str, &Operator)]) -> Result<Vec<Vec<f64>>> {
        self.states
            .iter()
            .map(|s| ops.iter().map(|(_, o)| s.expect(o).map(|z| z.re)).collect())
            .collect()
    }

    /// CSV with header `t_ns,<names>`.
    pub fn to_csv(&self, ops: &[(&str, &Operator)]) -> Result<String> {
        let rows = self.observables(ops)?;
        let mut out = String::from("t_ns");
        for (name, _) in ops {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (t, row) in self.times.iter().zip(rows) {
            write!(out, "{t}").expect("write to String");
            for v in row {
                write!(out, ",{v}").expect("write to String");
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// Unitary evolution of `psi0` along `path`, sampled at `samples` (ns).
/// The norm is not renormalised; its drift is a diagnostic.
pub fn evolve_schrodinger(
    path: &HamiltonianPath,
    psi0: &StateVector,
    samples: &[f64],
    tol: &Tolerance,
) -> Result<EvolutionResult> {
    let space = psi0.space();
    path.check_space(space)?;
    if (psi0.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "initial state norm {} != 1",
            psi0.norm()
        )));
    }
    let y0 = CMat::from_column_slice(space.dim(), 1, psi0.amplitudes().as_slice());
    let (ys, stats) = propagate(path, Equation::Schrodinger, y0, samples, tol)?;
    let states = ys
        .into_iter()
        .map(|y| {
            StateVector::from_amplitudes(space, y.column(0).into_owned()).map(EvolvedState::Pure)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvolutionResult {
        times: samples.to_vec(),
        states,
        stats,
    })
}

/// Lindblad evolution with collapse operators `sqrt(1/T1) a` and
/// `sqrt(2 Γ_φ) a†a`.
pub fn evolve_lindblad(
    path: &HamiltonianPath,
    rho0: &DensityMatrix,
    model: &LindbladModel,
    samples: &[f64],
    tol: &Tolerance,
) -> Result<EvolutionResult> {
    model.validate()?;
    let space = rho0.space();
    path.check_space(space)?;
    let (ys, stats) = propagate(
        path,
        Equation::lindblad(Some(model)),
        rho0.matrix().clone(),
        samples,
        tol,
    )?;
    let states = ys
        .into_iter()
        .map(|y| EvolvedState::Mixed(DensityMatrix::from_matrix_unchecked(space, hermitize(y))))
        .collect();
    Ok(EvolutionResult {
        times: samples.to_vec(),
        states,
        stats,
    })
}

pub(crate) fn hermitize(m: CMat) -> CMat {
    (&m + m.adjoint()).scale(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{number, parity};
    use crate::linalg::MHZ_TO_RAD_NS;
    use crate::schedule::{CompensationStrategy, RampSpec};

    const K: f64 = 6.9;
    const GAMMA: f64 = 5.1 / (9.7 * 9.7);

    fn sp(d: usize) -> HilbertSpace {
        HilbertSpace::new(d).unwrap()
    }

    fn ramp(strategy: CompensationStrategy) -> HamiltonianPath {
        let spec = RampSpec::new(9.7, 320.0, GAMMA, strategy);
        HamiltonianPath::from_schedule(&PumpSchedule::from_spec(spec).unwrap(), K).unwrap()
    }

    #[test]
    fn stationary_fock_state_only_gains_phase() {
        let delta = 3.0;
        let t = 1e3 / delta;
        let path = HamiltonianPath::constant(KerrCatParams::new(K, delta, 0.0), t).unwrap();
        let psi = StateVector::basis(sp(12), 1).unwrap();
        for tol in [Tolerance::default(), Tolerance::default().adaptive_only()] {
            let r = evolve_schrodinger(&path, &psi, &[t], &tol).unwrap();
            let EvolvedState::Pure(out) = r.final_state().unwrap() else {
                panic!("unitary run returns a pure state");
            };
            let expected = C64::from_polar(1.0, -delta * MHZ_TO_RAD_NS * t);
            assert!((out.amplitudes()[1] - expected).norm() < 1e-6);
            assert!(r.norm_drift() < 1e-6);
        }
    }

    #[test]
    fn free_decay_rates() {
        let model = LindbladModel::from_us(6.0, 3.0).unwrap();
        let path = HamiltonianPath::constant(KerrCatParams::new(K, 0.0, 0.0), 9000.0).unwrap();
        let times: Vec<f64> = (0..=6).map(|i| 1500.0 * i as f64).collect();
        let one = StateVector::basis(sp(10), 1).unwrap().to_density();
        let plus = StateVector::fock_superposition(sp(10), 0.0).to_density();
        for tol in [Tolerance::default(), Tolerance::default().adaptive_only()] {
            let pop = evolve_lindblad(&path, &one, &model, &times, &tol).unwrap();
            let coh = evolve_lindblad(&path, &plus, &model, &times, &tol).unwrap();
            for (i, &t) in times.iter().enumerate() {
                let rho = pop.states[i].to_density();
                assert!((rho.population(1) - (-t / model.t1_ns).exp()).abs() < 1e-4);
                let rho = coh.states[i].to_density();
                let c01 = 2.0 * rho.matrix()[(0, 1)].norm();
                assert!(
                    (c01 - (-t / model.t2_ns).exp()).abs() < 1e-4,
                    "t={t}: {c01}"
                );
            }
        }
    }

    #[test]
    fn unitary_ramp_conserves_parity() {
        let path = ramp(CompensationStrategy::Static);
        let space = sp(30);
        let p = parity(space);
        let times: Vec<f64> = (0..=16).map(|i| 20.0 * i as f64).collect();
        for (n, sign) in [(0, 1.0), (1, -1.0)] {
            let psi = StateVector::basis(space, n).unwrap();
            let r = evolve_schrodinger(&path, &psi, &times, &Tolerance::default()).unwrap();
            for s in &r.states {
                assert!((s.expect(&p).unwrap().re - sign).abs() < 1e-6);
            }
            assert!(r.norm_drift() < 1e-6);
        }
    }

    #[test]
    fn lindblad_ramp_stays_physical() {
        let model = LindbladModel::from_us(6.0, 3.0).unwrap();
        let path = ramp(CompensationStrategy::Dynamic);
        let space = sp(20);
        let rho = StateVector::fock_superposition(space, 0.3).to_density();
        let times: Vec<f64> = (0..=8).map(|i| 40.0 * i as f64).collect();
        let r = evolve_lindblad(&path, &rho, &model, &times, &Tolerance::default()).unwrap();
        assert!(r.norm_drift() < 1e-6);
        for s in &r.states {
            assert!(s.to_density().min_eigenvalue() >= -1e-7);
        }
    }

    #[test]
    fn zero_duration_is_identity() {
        let path = HamiltonianPath::constant(KerrCatParams::new(K, 1.0, 9.7), 0.0).unwrap();
        let psi = StateVector::fock_superposition(sp(20), 1.1);
        let r = evolve_schrodinger(&path, &psi, &[0.0], &Tolerance::default()).unwrap();
        assert_eq!(r.final_state(), Some(&EvolvedState::Pure(psi)));
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let path = ramp(CompensationStrategy::None);
        let space = sp(20);
        let psi = StateVector::basis(space, 0).unwrap();
        let end = [path.duration()];
        let run = |rtol: f64| {
            let tol = Tolerance::default()
                .adaptive_only()
                .with_rtol(rtol, rtol * 1e-2);
            let r = evolve_schrodinger(&path, &psi, &end, &tol).unwrap();
            match r.final_state().unwrap() {
                EvolvedState::Pure(v) => v.amplitudes().clone(),
                EvolvedState::Mixed(_) => unreachable!(),
            }
        };
        let reference = run(1e-12);
        let errors: Vec<f64> = [1e-4, 1e-6, 1e-8]
            .iter()
            .map(|&r| (run(r) - &reference).norm())
            .collect();
        assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
        let n = number(space);
        assert!(
            StateVector::from_amplitudes(space, reference)
                .unwrap()
                .expect(&n)
                .unwrap()
                .re
                > 0.5
        );
    }
}
