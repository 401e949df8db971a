//! Kerr-cat Hamiltonian, decoherence model, time evolution, eigenlevel
//! tracing, cat readout, gate calibration and lifetime experiments.

pub mod integrate;
pub mod protocol;
pub mod readout;
pub mod spectrum;
pub mod t1cat;

use crate::error::{Error, Result};
use crate::fock::{HilbertSpace, Operator};
use crate::linalg::{CMat, MHZ_TO_RAD_NS};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use integrate::{EvolutionResult, EvolvedState, IntegratorStats, Tolerance};
pub use protocol::{qubit_channel, run_protocol, InitialState, Protocol, QubitChannel};
pub use readout::{
    calibrate_x_half, calibrate_z_half, cat_readout, cat_readout_in, plateau_params, plateau_spec,
    precession_rate, rabi_rate, CatReadout, XHalfCalibration, ZHalfCalibration,
};
pub use spectrum::{eigen_trace, Crossing, SpectrumTrace};
pub use t1cat::{t1cat_experiment, T1catGrid, T1catPoint, T1catSurface};

/// Static Hamiltonian parameters (MHz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KerrCatParams {
    /// Kerr coefficient `K > 0`.
    pub k: f64,
    /// Detuning `Δ`.
    pub delta: f64,
    /// Two-photon pump amplitude `ε₂` (real).
    pub eps2: f64,
    /// Complex charge drive `ε_x`.
    pub eps_x: C64,
}

impl KerrCatParams {
    pub fn new(k: f64, delta: f64, eps2: f64) -> Self {
        Self {
            k,
            delta,
            eps2,
            eps_x: C64::new(0.0, 0.0),
        }
    }

    pub fn with_drive(mut self, eps_x: C64) -> Self {
        self.eps_x = eps_x;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Kerr K = {} must be > 0",
                self.k
            )));
        }
        if !(self.delta.is_finite() && self.eps2.is_finite() && self.eps_x.is_finite()) {
            return Err(Error::InvalidParameter(
                "Hamiltonian parameters must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Cat size `|α|² = ε₂/K`.
    pub fn alpha_sq(&self) -> f64 {
        self.eps2 / self.k
    }

    /// Real cat amplitude `α = sqrt(ε₂/K)` (zero for `ε₂ ≤ 0`).
    pub fn alpha(&self) -> f64 {
        self.alpha_sq().max(0.0).sqrt()
    }

    /// Coefficients in rad/ns.
    pub(crate) fn coefficients(&self) -> HCoeffs {
        self.scaled(MHZ_TO_RAD_NS)
    }

    fn scaled(&self, f: f64) -> HCoeffs {
        HCoeffs {
            delta: self.delta * f,
            k: self.k * f,
            eps2: self.eps2 * f,
            eps_x: self.eps_x * f,
        }
    }
}

/// `H = Δ a†a − K a†a†aa + ε₂(a†² + a²) + ε_x a† + ε_x* a` in MHz.
pub fn hamiltonian_at(params: &KerrCatParams, space: HilbertSpace) -> Result<Operator> {
    params.validate()?;
    space.require_amplitude(params.alpha())?;
    let stencil = Stencil::new(space.dim());
    Operator::hermitian(space, stencil.dense(&params.scaled(1.0)))
}

/// Instantaneous Hamiltonian coefficients in rad/ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct HCoeffs {
    pub delta: f64,
    pub k: f64,
    pub eps2: f64,
    pub eps_x: C64,
}

/// Precomputed ladder factors for applying the pentadiagonal Hamiltonian.
#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    dim: usize,
    /// `sqrt(i + 1)`: `(a†)_{i+1,i}`.
    s1: Vec<f64>,
    /// `sqrt((i + 1)(i + 2))`: `(a†²)_{i+2,i}`.
    s2: Vec<f64>,
}

impl Stencil {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            s1: (0..dim).map(|i| ((i + 1) as f64).sqrt()).collect(),
            s2: (0..dim)
                .map(|i| (((i + 1) * (i + 2)) as f64).sqrt())
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn diag(h: &HCoeffs, i: usize) -> f64 {
        let n = i as f64;
        h.delta * n - h.k * n * (n - 1.0)
    }

    pub fn dense(&self, h: &HCoeffs) -> CMat {
        let d = self.dim;
        let mut m = CMat::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = C64::new(Self::diag(h, i), 0.0);
            if i + 1 < d {
                m[(i + 1, i)] = h.eps_x * self.s1[i];
                m[(i, i + 1)] = h.eps_x.conj() * self.s1[i];
            }
            if i + 2 < d {
                m[(i + 2, i)] = C64::new(h.eps2 * self.s2[i], 0.0);
                m[(i, i + 2)] = C64::new(h.eps2 * self.s2[i], 0.0);
            }
        }
        m
    }

    /// `out = H x` for a `dim × m` block `x`.
    pub fn apply_left(&self, h: &HCoeffs, x: &CMat, out: &mut CMat) {
        let d = self.dim;
        let ex = h.eps_x;
        let exc = h.eps_x.conj();
        let drive = ex.norm_sqr() > 0.0;
        for col in 0..x.ncols() {
            let xc = x.column(col);
            let mut oc = out.column_mut(col);
            for i in 0..d {
                let mut acc = xc[i] * Self::diag(h, i);
                if i >= 2 {
                    acc += xc[i - 2] * (h.eps2 * self.s2[i - 2]);
                }
                if i + 2 < d {
                    acc += xc[i + 2] * (h.eps2 * self.s2[i]);
                }
                if drive {
                    if i >= 1 {
                        acc += xc[i - 1] * ex * self.s1[i - 1];
                    }
                    if i + 1 < d {
                        acc += xc[i + 1] * exc * self.s1[i];
                    }
                }
                oc[i] = acc;
            }
        }
    }

    /// `out = x H` for a `m × dim` block `x`.
    pub fn apply_right(&self, h: &HCoeffs, x: &CMat, out: &mut CMat) {
        let d = self.dim;
        let ex = h.eps_x;
        let exc = h.eps_x.conj();
        let drive = ex.norm_sqr() > 0.0;
        let rows = x.nrows();
        for j in 0..d {
            // column j of x H = sum_k x[:, k] H[k, j]
            let dj = Self::diag(h, j);
            for r in 0..rows {
                let mut acc = x[(r, j)] * dj;
                if j >= 2 {
                    acc += x[(r, j - 2)] * (h.eps2 * self.s2[j - 2]);
                }
                if j + 2 < d {
                    acc += x[(r, j + 2)] * (h.eps2 * self.s2[j]);
                }
                if drive {
                    // H[j-1, j] = eps_x* s1[j-1], H[j+1, j] = eps_x s1[j]
                    if j >= 1 {
                        acc += x[(r, j - 1)] * exc * self.s1[j - 1];
                    }
                    if j + 1 < d {
                        acc += x[(r, j + 1)] * ex * self.s1[j];
                    }
                }
                out[(r, j)] = acc;
            }
        }
    }
}

/// Amplitude damping and number dephasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindbladModel {
    /// Energy relaxation time (ns).
    pub t1_ns: f64,
    /// Transverse coherence time (ns).
    pub t2_ns: f64,
}

impl LindbladModel {
    pub fn new(t1_ns: f64, t2_ns: f64) -> Result<Self> {
        let m = Self { t1_ns, t2_ns };
        m.validate()?;
        Ok(m)
    }

    pub fn from_us(t1_us: f64, t2_us: f64) -> Result<Self> {
        Self::new(t1_us * 1e3, t2_us * 1e3)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1_ns > 0.0 && self.t2_ns > 0.0) {
            return Err(Error::UnphysicalModel(format!(
                "T1 = {} ns and T2 = {} ns must be positive",
                self.t1_ns, self.t2_ns
            )));
        }
        if self.t2_ns > 2.0 * self.t1_ns {
            return Err(Error::UnphysicalModel(format!(
                "T2 = {} ns exceeds 2 T1 = {} ns",
                self.t2_ns,
                2.0 * self.t1_ns
            )));
        }
        Ok(())
    }

    /// Pure-dephasing rate `Γ_φ = 1/T2 − 1/(2 T1)` (1/ns).
    pub fn gamma_phi(&self) -> f64 {
        (1.0 / self.t2_ns - 0.5 / self.t1_ns).max(0.0)
    }

    /// Rate of the `a` collapse operator (1/ns).
    pub fn decay_rate(&self) -> f64 {
        1.0 / self.t1_ns
    }

    /// Rate of the `a†a` collapse operator, `2 Γ_φ` (1/ns).
    pub fn dephasing_rate(&self) -> f64 {
        2.0 * self.gamma_phi()
    }
}

/// Derived cat-qubit quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatObservables {
    pub alpha_sq: f64,
    /// MHz.
    pub omega_z: f64,
    /// MHz.
    pub omega_x: f64,
    /// ns.
    pub t1cat: f64,
}

impl CatObservables {
    pub fn from_params(params: &KerrCatParams, t1cat: f64) -> Self {
        let alpha_sq = params.alpha_sq();
        Self {
            alpha_sq,
            omega_z: omega_z(params.delta, alpha_sq),
            omega_x: omega_x(params.eps_x, C64::new(params.alpha(), 0.0)),
            t1cat,
        }
    }
}

/// Z precession rate `4 Δ |α|² exp(−2|α|²)` (MHz).
pub fn omega_z(delta: f64, alpha_sq: f64) -> f64 {
    4.0 * delta * alpha_sq * (-2.0 * alpha_sq).exp()
}

/// X Rabi rate `Re(4 ε_x α)/sqrt(1 − exp(−4|α|²))` (MHz); the `α → 0`
/// limit along the real axis is `2 Re(ε_x)`.
pub fn omega_x(eps_x: C64, alpha: C64) -> f64 {
    let a2 = alpha.norm_sqr();
    if a2 < 1e-200 {
        return 2.0 * eps_x.re;
    }
    (4.0 * eps_x * alpha).re / (-(-4.0 * a2).exp_m1()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{cat_state, coherent_state, CatPhase, StateVector};
    use crate::linalg::{c, herm_eigen, max_abs};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const K: f64 = 6.9;

    fn sp(d: usize) -> HilbertSpace {
        HilbertSpace::new(d).unwrap()
    }

    #[test]
    fn undriven_spectrum_is_closed_form() {
        let delta = 2.3;
        let h = hamiltonian_at(&KerrCatParams::new(K, delta, 0.0), sp(12)).unwrap();
        let (vals, _) = herm_eigen(h.matrix());
        let mut expected: Vec<f64> = (0..12)
            .map(|n| {
                let n = n as f64;
                delta * n - K * n * (n - 1.0)
            })
            .collect();
        expected.sort_by(f64::total_cmp);
        for (v, e) in vals.iter().zip(&expected) {
            assert_abs_diff_eq!(v, e, epsilon = 1e-9);
        }
        let m = h.matrix();
        assert_abs_diff_eq!(m[(1, 1)].re, delta, epsilon = 1e-12);
        assert_abs_diff_eq!(m[(2, 2)].re, 2.0 * delta - 2.0 * K, epsilon = 1e-12);
        assert_abs_diff_eq!(m[(3, 3)].re, 3.0 * delta - 6.0 * K, epsilon = 1e-12);
    }

    #[test]
    fn top_pair_is_the_cat_pair() {
        let space = sp(30);
        let p = KerrCatParams::new(K, 0.0, 1.41 * K);
        let h = hamiltonian_at(&p, space).unwrap();
        let (vals, vecs) = herm_eigen(h.matrix());
        let alpha = c(1.41f64.sqrt());
        let plus = cat_state(alpha, CatPhase::Plus, space).unwrap();
        let minus = cat_state(alpha, CatPhase::Minus, space).unwrap();
        let top =
            |k: usize| StateVector::from_amplitudes(space, vecs.column(k).into_owned()).unwrap();
        let f = |v: &StateVector, w: &StateVector| v.inner(w).unwrap().norm_sqr();
        let (a, b) = (top(29), top(28));
        let fp = f(&a, &plus).max(f(&b, &plus));
        let fm = f(&a, &minus).max(f(&b, &minus));
        assert!(fp > 0.999 && fm > 0.999, "{fp} {fm}");
        // exact degeneracy of the pair at Δ = 0
        assert_abs_diff_eq!(vals[29], vals[28], epsilon = 1e-9);
    }

    #[test]
    fn coherent_state_is_near_eigenstate() {
        let space = sp(30);
        let p = KerrCatParams::new(K, 0.0, 1.41 * K);
        let h = hamiltonian_at(&p, space).unwrap();
        for sign in [1.0, -1.0] {
            let psi = coherent_state(c(sign * 1.41f64.sqrt()), space).unwrap();
            let hpsi = h.apply(&psi).unwrap();
            let e = psi.expect(&h).unwrap();
            let resid = hpsi.add_scaled(-e, &psi).unwrap();
            assert!(
                resid.norm() / hpsi.norm() < 1e-3,
                "{}",
                resid.norm() / hpsi.norm()
            );
        }
    }

    #[test]
    fn truncation_is_checked() {
        let p = KerrCatParams::new(K, 0.0, 4.0 * K);
        assert!(matches!(
            hamiltonian_at(&p, sp(15)),
            Err(Error::TruncationTooSmall { .. })
        ));
        assert!(hamiltonian_at(&KerrCatParams::new(-1.0, 0.0, 0.0), sp(8)).is_err());
    }

    #[test]
    fn closed_form_rates() {
        assert_eq!(omega_z(0.0, 1.41), 0.0);
        assert_eq!(omega_x(C64::new(0.0, 0.0), c(1.2)), 0.0);
        assert_abs_diff_eq!(
            omega_z(1.0, 1.41),
            4.0 * 1.41 * (-2.82f64).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(omega_z(1.0, 1.41), 0.336, epsilon = 1e-3);
        let a = 1.41f64.sqrt();
        let expected = 4.0 * 0.62 * a / (1.0 - (-4.0 * 1.41f64).exp()).sqrt();
        assert_abs_diff_eq!(omega_x(c(0.62), c(a)), expected, epsilon = 1e-12);
        // phase misalignment reduces the rate as cos(arg)
        let tilted = omega_x(C64::from_polar(0.62, 0.4), c(a));
        assert_abs_diff_eq!(tilted, expected * 0.4f64.cos(), epsilon = 1e-12);
    }

    #[test]
    fn lindblad_model_validation() {
        let m = LindbladModel::from_us(6.0, 3.0).unwrap();
        assert_abs_diff_eq!(m.gamma_phi(), 1.0 / 3000.0 - 1.0 / 12000.0, epsilon = 1e-15);
        assert!(matches!(
            LindbladModel::from_us(6.0, 12.5),
            Err(Error::UnphysicalModel(_))
        ));
        assert!(LindbladModel::new(0.0, 1.0).is_err());
        assert_eq!(LindbladModel::from_us(6.0, 12.0).unwrap().gamma_phi(), 0.0);
    }

    #[test]
    fn stencil_matches_dense_products() {
        let st = Stencil::new(9);
        let h = KerrCatParams::new(K, 1.3, 4.0)
            .with_drive(C64::new(0.4, -0.7))
            .coefficients();
        let dense = st.dense(&h);
        let x = CMat::from_fn(9, 9, |i, j| {
            C64::new((i * 3 + j) as f64 % 5.0, (i + 2 * j) as f64 % 3.0)
        });
        let mut out = CMat::zeros(9, 9);
        st.apply_left(&h, &x, &mut out);
        assert!(max_abs(&(&out - &dense * &x)) < 1e-12);
        st.apply_right(&h, &x, &mut out);
        assert!(max_abs(&(&out - &x * &dense)) < 1e-12);
    }

    proptest! {
        #[test]
        fn hamiltonian_is_hermitian(delta in -20.0..20.0f64, eps2 in 0.0..15.0f64,
                                    re in -2.0..2.0f64, im in -2.0..2.0f64) {
            let p = KerrCatParams::new(K, delta, eps2).with_drive(C64::new(re, im));
            let h = hamiltonian_at(&p, sp(24)).unwrap();
            prop_assert!(max_abs(&(h.matrix() - h.matrix().adjoint())) < 1e-12);
        }
    }
}
