//! Composite experiment protocols and their action on the Fock qubit.

use super::integrate::{
    evolve_lindblad, evolve_schrodinger, hermitize, propagate, Equation, EvolutionResult,
    EvolvedState, HamiltonianPath, Tolerance,
};
use super::LindbladModel;
use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, HilbertSpace, StateVector};
use crate::linalg::CMat;
use crate::schedule::{GateKind, PumpSchedule, RampSpec};
use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Pulse sequence built on a ramp specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Protocol {
    /// Ramp-up only.
    RampOnly,
    /// Ramp-up, hold for `spec.hold`, mirrored ramp-down.
    RampHoldRamp,
    /// Ramp-up, hold, then the listed gates.
    RampHoldGates(Vec<GateKind>),
    /// An explicit schedule; the spec argument is ignored.
    Custom(#[serde(skip)] Option<PumpSchedule>),
}

impl Protocol {
    pub fn schedule(&self, spec: &RampSpec) -> Result<PumpSchedule> {
        match self {
            Protocol::RampOnly => PumpSchedule::from_spec(RampSpec {
                hold: 0.0,
                ramp_down: false,
                ..*spec
            }),
            Protocol::RampHoldRamp => PumpSchedule::from_spec(RampSpec {
                ramp_down: true,
                ..*spec
            }),
            Protocol::RampHoldGates(gates) => {
                let mut s = PumpSchedule::from_spec(RampSpec {
                    ramp_down: false,
                    ..*spec
                })?;
                for g in gates {
                    s.push_gate(*g)?;
                }
                Ok(s)
            }
            Protocol::Custom(Some(s)) => Ok(s.clone()),
            Protocol::Custom(None) => Err(Error::InvalidParameter(
                "custom protocol without a schedule".into(),
            )),
        }
    }
}

/// Initial condition of a protocol run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl From<StateVector> for InitialState {
    fn from(v: StateVector) -> Self {
        InitialState::Pure(v)
    }
}

impl From<DensityMatrix> for InitialState {
    fn from(r: DensityMatrix) -> Self {
        InitialState::Mixed(r)
    }
}

/// Runs `protocol` and samples the state at `samples` (the end time when
/// empty). Unitary integration is used when no decoherence model is given
/// and the initial state is pure.
pub fn run_protocol(
    protocol: &Protocol,
    spec: &RampSpec,
    k_mhz: f64,
    initial: impl Into<InitialState>,
    model: Option<&LindbladModel>,
    samples: &[f64],
    tol: &Tolerance,
) -> Result<EvolutionResult> {
    let schedule = protocol.schedule(spec)?;
    let path = HamiltonianPath::from_schedule(&schedule, k_mhz)?;
    let end = [schedule.duration()];
    let samples = if samples.is_empty() {
        &end[..]
    } else {
        samples
    };
    match (initial.into(), model) {
        (InitialState::Pure(psi), None) => evolve_schrodinger(&path, &psi, samples, tol),
        (InitialState::Pure(psi), Some(m)) => {
            evolve_lindblad(&path, &psi.to_density(), m, samples, tol)
        }
        (InitialState::Mixed(rho), Some(m)) => evolve_lindblad(&path, &rho, m, samples, tol),
        (InitialState::Mixed(rho), None) => {
            let space = rho.space();
            let (ys, stats) = propagate(
                &path,
                Equation::lindblad(None),
                rho.matrix().clone(),
                samples,
                tol,
            )?;
            Ok(EvolutionResult {
                times: samples.to_vec(),
                states: ys
                    .into_iter()
                    .map(|y| {
                        EvolvedState::Mixed(DensityMatrix::from_matrix_unchecked(
                            space,
                            hermitize(y),
                        ))
                    })
                    .collect(),
                stats,
            })
        }
    }
}

/// Images of the Fock-qubit operators `|i><j|` (i, j ∈ {0, 1}) under a
/// protocol; by linearity this fixes the output for every qubit input.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitChannel {
    space: HilbertSpace,
    images: [[CMat; 2]; 2],
}

impl QubitChannel {
    pub fn identity(space: HilbertSpace) -> Self {
        let d = space.dim();
        let e = |i: usize, j: usize| {
            let mut m = CMat::zeros(d, d);
            m[(i, j)] = C64::new(1.0, 0.0);
            m
        };
        Self {
            space,
            images: [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]],
        }
    }

    /// Channel of an isometry given by the images of `|0>` and `|1>` (columns).
    pub fn from_isometry(space: HilbertSpace, cols: &CMat) -> Result<Self> {
        if cols.nrows() != space.dim() || cols.ncols() != 2 {
            return Err(Error::DimensionMismatch(space.dim(), cols.nrows()));
        }
        let u = |i: usize| cols.column(i).into_owned();
        let img = |i: usize, j: usize| &u(i) * u(j).adjoint();
        Ok(Self {
            space,
            images: [[img(0, 0), img(0, 1)], [img(1, 0), img(1, 1)]],
        })
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    /// Output density matrix for a 2×2 qubit input `rho_q`.
    pub fn apply(&self, rho_q: &Matrix2<C64>) -> DensityMatrix {
        let d = self.space.dim();
        let mut out = CMat::zeros(d, d);
        for i in 0..2 {
            for j in 0..2 {
                out += &self.images[i][j] * rho_q[(i, j)];
            }
        }
        DensityMatrix::from_matrix_unchecked(self.space, hermitize(out))
    }

    /// Output for the pure qubit input `c0|0> + c1|1>`.
    pub fn apply_pure(&self, c0: C64, c1: C64) -> DensityMatrix {
        let v = nalgebra::Vector2::new(c0, c1);
        self.apply(&(v * v.adjoint()))
    }

    /// Sequential composition: `self` followed by the linear map `then`
    /// applied to each image.
    pub fn map_images(&self, mut then: impl FnMut(&CMat) -> Result<CMat>) -> Result<Self> {
        let [[a, b], [c, d]] = &self.images;
        Ok(Self {
            space: self.space,
            images: [[then(a)?, then(b)?], [then(c)?, then(d)?]],
        })
    }

    /// Output image of `|i><j|`.
    pub fn image(&self, i: usize, j: usize) -> &CMat {
        &self.images[i][j]
    }
}

/// The action of `protocol` on the Fock qubit. Unitary runs evolve `|0>` and
/// `|1>` together; Lindblad runs evolve `|0><0|`, `|1><1|` and `|0><1|`.
pub fn qubit_channel(
    protocol: &Protocol,
    spec: &RampSpec,
    k_mhz: f64,
    space: HilbertSpace,
    model: Option<&LindbladModel>,
    tol: &Tolerance,
) -> Result<QubitChannel> {
    let schedule = protocol.schedule(spec)?;
    let path = HamiltonianPath::from_schedule(&schedule, k_mhz)?;
    path_channel(&path, space, model, tol)
}

pub(crate) fn path_channel(
    path: &HamiltonianPath,
    space: HilbertSpace,
    model: Option<&LindbladModel>,
    tol: &Tolerance,
) -> Result<QubitChannel> {
    let d = space.dim();
    let alpha = path.max_alpha();
    space.require_amplitude(alpha)?;
    let end = [path.duration()];
    match model {
        None => {
            let mut cols = CMat::zeros(d, 2);
            cols[(0, 0)] = C64::new(1.0, 0.0);
            cols[(1, 1)] = C64::new(1.0, 0.0);
            let (mut ys, _) = propagate(path, Equation::Schrodinger, cols, &end, tol)?;
            QubitChannel::from_isometry(space, &ys.pop().expect("one sample"))
        }
        Some(m) => {
            m.validate()?;
            let eq = Equation::lindblad(Some(m));
            let run = |i: usize, j: usize| -> Result<CMat> {
                let mut e = CMat::zeros(d, d);
                e[(i, j)] = C64::new(1.0, 0.0);
                let (mut ys, _) = propagate(path, eq, e, &end, tol)?;
                Ok(ys.pop().expect("one sample"))
            };
            let e00 = run(0, 0)?;
            let e11 = run(1, 1)?;
            let e01 = run(0, 1)?;
            let e10 = e01.adjoint();
            Ok(QubitChannel {
                space,
                images: [[e00, e01], [e10, e11]],
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::KerrCatParams;
    use crate::fock::{cat_state, state_fidelity, CatPhase};
    use crate::schedule::CompensationStrategy;
    use crate::tomography::fock_qpt;

    const K: f64 = 6.9;
    const GAMMA: f64 = 5.1 / (9.7 * 9.7);

    fn sp(d: usize) -> HilbertSpace {
        HilbertSpace::new(d).unwrap()
    }

    fn final_fidelity(r: &EvolutionResult, target: &StateVector) -> f64 {
        state_fidelity(&r.final_state().unwrap().to_density(), target).unwrap()
    }

    #[test]
    fn compensated_ramp_reaches_even_cat() {
        let space = sp(30);
        let cat = cat_state(C64::new((9.7f64 / K).sqrt(), 0.0), CatPhase::Plus, space).unwrap();
        let vacuum = StateVector::basis(space, 0).unwrap();
        let run = |strategy| {
            let spec = RampSpec::new(9.7, 320.0, GAMMA, strategy);
            let r = run_protocol(
                &Protocol::RampOnly,
                &spec,
                K,
                vacuum.clone(),
                None,
                &[],
                &Tolerance::default(),
            )
            .unwrap();
            final_fidelity(&r, &cat)
        };
        let dynamic = run(CompensationStrategy::Dynamic);
        let uncompensated = run(CompensationStrategy::None);
        assert!(dynamic > 0.99, "{dynamic}");
        assert!(
            uncompensated < dynamic - 0.02,
            "{uncompensated} vs {dynamic}"
        );
    }

    #[test]
    fn compensated_round_trip_is_identity() {
        let space = sp(30);
        let spec = RampSpec::new(9.7, 320.0, GAMMA, CompensationStrategy::Dynamic);
        let vacuum = StateVector::basis(space, 0).unwrap();
        let r = run_protocol(
            &Protocol::RampHoldRamp,
            &spec,
            K,
            vacuum.clone(),
            None,
            &[],
            &Tolerance::default(),
        )
        .unwrap();
        assert!(final_fidelity(&r, &vacuum) > 0.999);
        let ch = qubit_channel(
            &Protocol::RampHoldRamp,
            &spec,
            K,
            space,
            None,
            &Tolerance::default(),
        )
        .unwrap();
        let q = fock_qpt(&ch).unwrap();
        assert!(q.fidelity_aligned > 0.999, "{q:?}");
    }

    #[test]
    fn static_round_trip_interferes_with_hold_time() {
        let space = sp(30);
        let spec = RampSpec::new(
            (K / GAMMA).sqrt(),
            320.0,
            GAMMA,
            CompensationStrategy::Static,
        );
        let vacuum = StateVector::basis(space, 0).unwrap();
        let f: Vec<f64> = (0..8)
            .map(|i| {
                let s = spec.with_hold(20.0 * i as f64);
                let r = run_protocol(
                    &Protocol::RampHoldRamp,
                    &s,
                    K,
                    vacuum.clone(),
                    None,
                    &[],
                    &Tolerance::default(),
                )
                .unwrap();
                final_fidelity(&r, &vacuum)
            })
            .collect();
        let lo = f.iter().cloned().fold(1.0, f64::min);
        let hi = f.iter().cloned().fold(0.0, f64::max);
        assert!(hi - lo > 0.5, "{f:?}");
    }

    #[test]
    fn empty_path_channel_is_identity() {
        let space = sp(12);
        let path = HamiltonianPath::constant(KerrCatParams::new(K, 0.0, 2.0), 0.0).unwrap();
        let model = LindbladModel::from_us(6.0, 3.0).unwrap();
        for m in [None, Some(&model)] {
            let ch = path_channel(&path, space, m, &Tolerance::default()).unwrap();
            assert_eq!(ch, QubitChannel::identity(space));
        }
    }

    #[test]
    fn lindblad_channel_matches_direct_evolution() {
        let space = sp(20);
        let model = LindbladModel::from_us(6.0, 3.0).unwrap();
        let spec = RampSpec::new(9.7, 320.0, GAMMA, CompensationStrategy::Dynamic);
        let tol = Tolerance::default();
        let ch = qubit_channel(&Protocol::RampOnly, &spec, K, space, Some(&model), &tol).unwrap();
        let psi = StateVector::fock_superposition(space, 0.7);
        let direct = run_protocol(
            &Protocol::RampOnly,
            &spec,
            K,
            psi.clone(),
            Some(&model),
            &[],
            &tol,
        )
        .unwrap();
        let a = psi.amplitudes();
        let via = ch.apply_pure(a[0], a[1]);
        let diff = (via.matrix() - direct.final_state().unwrap().to_density().matrix()).norm();
        assert!(diff < 1e-7, "{diff}");
    }
}
