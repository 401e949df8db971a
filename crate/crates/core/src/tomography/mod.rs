//! Qubit frames and Pauli vectors, process tomography, Wigner functions
//! and maximum-likelihood state reconstruction.

pub mod process;
pub mod wigner;

use crate::error::{Error, Result};
use crate::fock::{cat_state, CatPhase, HilbertSpace, Operator, StateRef, StateVector};
use crate::linalg::{c, CMat, CVec, I};
use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

pub use process::{
    cat_qpt, fock_qpt, process_fidelity, process_fidelity_aligned, r_matrix, CatQptInputs,
    QptResult, RMatrix, SpamTable,
};
pub use wigner::{
    distorted_wigner_pipeline, kerr_correct, mle_reconstruct, square_grid, wigner, MleConfig,
    MleResult, PipelineResult, PulseModel, WignerMap,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    /// `{|0>, |1>}`.
    Fock,
    /// `{|C_α^+>, |C_α^->}` with X-axis states `|±α>` (symmetrically orthogonalized).
    KerrCat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Effective qubit embedded in the Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitFrame {
    kind: FrameKind,
    alpha: C64,
    /// Columns: `+Z`, `−Z` basis states.
    basis: CMat,
}

impl QubitFrame {
    pub fn fock(space: HilbertSpace) -> Self {
        let mut basis = CMat::zeros(space.dim(), 2);
        basis[(0, 0)] = c(1.0);
        basis[(1, 1)] = c(1.0);
        Self {
            kind: FrameKind::Fock,
            alpha: c(0.0),
            basis,
        }
    }

    /// Cat frame; fails with `DegenerateBasis` when `1 − exp(−2|α|²)` is too
    /// small for the odd cat to be normalized stably.
    pub fn kerr_cat(alpha: C64, space: HilbertSpace) -> Result<Self> {
        let gap = -(-2.0 * alpha.norm_sqr()).exp_m1();
        if gap < 1e-8 {
            return Err(Error::DegenerateBasis(gap));
        }
        let plus = cat_state(alpha, CatPhase::Plus, space)?;
        let minus = cat_state(alpha, CatPhase::Minus, space)?;
        let mut basis = CMat::zeros(space.dim(), 2);
        basis.set_column(0, plus.amplitudes());
        basis.set_column(1, minus.amplitudes());
        Ok(Self {
            kind: FrameKind::KerrCat,
            alpha,
            basis,
        })
    }

    pub fn kind(&self) -> FrameKind {
        self.kind
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn space(&self) -> HilbertSpace {
        HilbertSpace::new(self.basis.nrows()).expect("frame dimension >= 2")
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    /// Largest deviation of the basis Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.basis.adjoint() * &self.basis;
        (g - CMat::identity(2, 2))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Qubit amplitudes `(c0, c1)` of the `sign` eigenstate of `axis`.
    pub fn axis_amplitudes(axis: Axis, positive: bool) -> (C64, C64) {
        let s = if positive { 1.0 } else { -1.0 };
        let h = FRAC_1_SQRT_2;
        match axis {
            Axis::X => (c(h), c(s * h)),
            Axis::Y => (c(h), I * (s * h)),
            Axis::Z => {
                if positive {
                    (c(1.0), c(0.0))
                } else {
                    (c(0.0), c(1.0))
                }
            }
        }
    }

    /// Embedded state `c0|+Z> + c1|−Z>`.
    pub fn state(&self, c0: C64, c1: C64) -> StateVector {
        let amps: CVec = self.basis.column(0) * c0 + self.basis.column(1) * c1;
        StateVector::from_amplitudes(self.space(), amps).expect("frame dimension")
    }

    pub fn axis_state(&self, axis: Axis, positive: bool) -> StateVector {
        let (c0, c1) = Self::axis_amplitudes(axis, positive);
        self.state(c0, c1)
    }

    /// `B† ρ B` for a `dim × dim` operator.
    pub fn project(&self, rho: &CMat) -> Matrix2<C64> {
        let q = self.basis.adjoint() * rho * &self.basis;
        Matrix2::new(q[(0, 0)], q[(0, 1)], q[(1, 0)], q[(1, 1)])
    }

    /// Embedded Pauli operator `B σ B†`.
    pub fn pauli(&self, axis: Axis) -> Operator {
        let s = pauli2(axis);
        let sm = CMat::from_fn(2, 2, |i, j| s[(i, j)]);
        Operator::from_matrix(self.space(), &self.basis * sm * self.basis.adjoint())
            .expect("frame dimension")
    }
}

pub(crate) fn pauli2(axis: Axis) -> Matrix2<C64> {
    match axis {
        Axis::X => Matrix2::new(c(0.0), c(1.0), c(1.0), c(0.0)),
        Axis::Y => Matrix2::new(c(0.0), -I, I, c(0.0)),
        Axis::Z => Matrix2::new(c(1.0), c(0.0), c(0.0), c(-1.0)),
    }
}

/// Pauli expectations `(P_I, P_X, P_Y, P_Z)` of a state projected on a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PVector {
    pub p_i: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
}

impl PVector {
    pub fn new(p_i: f64, p_x: f64, p_y: f64, p_z: f64) -> Self {
        Self { p_i, p_x, p_y, p_z }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.p_i, self.p_x, self.p_y, self.p_z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Bloch-ball condition scaled by the in-frame population.
    pub fn is_physical(&self) -> bool {
        self.p_i >= -1e-9
            && self.p_i <= 1.0 + 1e-9
            && self.p_x * self.p_x + self.p_y * self.p_y + self.p_z * self.p_z
                <= self.p_i * self.p_i + 1e-9
    }

    /// Ideal p-vector of the pure qubit state `c0|0> + c1|1>`.
    pub fn of_qubit(c0: C64, c1: C64) -> Self {
        let v = nalgebra::Vector2::new(c0, c1);
        Self::of_matrix(&(v * v.adjoint()))
    }

    pub(crate) fn of_matrix(q: &Matrix2<C64>) -> Self {
        let tr = |a: Axis| (q * pauli2(a)).trace().re;
        Self::new(q.trace().re, tr(Axis::X), tr(Axis::Y), tr(Axis::Z))
    }
}

/// Projects a state onto the frame: `P_S = Tr(ρ S)` with embedded Paulis,
/// `P_I = Tr(ρ (Π₀ + Π₁))` (below one when the state leaks out).
pub fn p_vector<'a>(state: impl Into<StateRef<'a>>, frame: &QubitFrame) -> Result<PVector> {
    let q = match state.into() {
        StateRef::Pure(v) => {
            check_dim(frame, v.space())?;
            let a = frame.basis.adjoint() * v.amplitudes();
            let v2 = nalgebra::Vector2::new(a[0], a[1]);
            v2 * v2.adjoint()
        }
        StateRef::Mixed(r) => {
            check_dim(frame, r.space())?;
            frame.project(r.matrix())
        }
    };
    Ok(PVector::of_matrix(&q))
}

fn check_dim(frame: &QubitFrame, space: HilbertSpace) -> Result<()> {
    if frame.basis.nrows() != space.dim() {
        return Err(Error::DimensionMismatch(frame.basis.nrows(), space.dim()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, DensityMatrix};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sp(d: usize) -> HilbertSpace {
        HilbertSpace::new(d).unwrap()
    }

    #[test]
    fn fock_frame_examples() {
        let space = sp(6);
        let f = QubitFrame::fock(space);
        let p0 = p_vector(&StateVector::basis(space, 0).unwrap(), &f).unwrap();
        assert_eq!(p0, PVector::new(1.0, 0.0, 0.0, 1.0));
        let p2 = p_vector(&StateVector::basis(space, 2).unwrap(), &f).unwrap();
        assert_eq!(p2, PVector::new(0.0, 0.0, 0.0, 0.0));
        let plus = p_vector(&StateVector::fock_superposition(space, 0.0), &f).unwrap();
        assert_abs_diff_eq!(plus.p_x, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cat_frame_examples() {
        let space = sp(24);
        let alpha = c(1.41f64.sqrt());
        let f = QubitFrame::kerr_cat(alpha, space).unwrap();
        assert!(f.orthonormality_defect() < 1e-10);
        let coh = coherent_state(alpha, space).unwrap();
        let p = p_vector(&coh, &f).unwrap();
        assert_abs_diff_eq!(
            p.p_x,
            (1.0 - (-4.0 * 1.41f64).exp()).sqrt(),
            epsilon = 1e-10
        );
        let big = c(2.0);
        let p = p_vector(
            &coherent_state(big, sp(30)).unwrap(),
            &QubitFrame::kerr_cat(big, sp(30)).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(p.p_x, 1.0, epsilon = 1e-6);
        let y = f.axis_state(Axis::Y, true);
        let expected = cat_state(alpha, CatPhase::MinusI, space).unwrap();
        assert_abs_diff_eq!(y.inner(&expected).unwrap().norm(), 1.0, epsilon = 1e-3);
        let big = QubitFrame::kerr_cat(c(2.0), sp(30)).unwrap();
        let expected = cat_state(c(2.0), CatPhase::MinusI, sp(30)).unwrap();
        let y = big.axis_state(Axis::Y, true);
        assert_abs_diff_eq!(y.inner(&expected).unwrap().norm(), 1.0, epsilon = 1e-6);
        assert!(matches!(
            QubitFrame::kerr_cat(c(1e-6), space),
            Err(Error::DegenerateBasis(_))
        ));
    }

    #[test]
    fn embedded_paulis_match_projection() {
        let space = sp(20);
        let f = QubitFrame::kerr_cat(c(1.2), space).unwrap();
        let psi = coherent_state(C64::new(0.3, 0.9), space).unwrap();
        let p = p_vector(&psi, &f).unwrap();
        assert_abs_diff_eq!(
            psi.expect(&f.pauli(Axis::Y)).unwrap().re,
            p.p_y,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            psi.expect(&f.pauli(Axis::Z)).unwrap().re,
            p.p_z,
            epsilon = 1e-12
        );
        assert!(p.is_physical());
    }

    proptest! {
        #[test]
        fn p_vector_is_linear(w in 0.0..1.0f64, a in -1.5..1.5f64, b in -1.5..1.5f64) {
            let space = sp(30);
            let f = QubitFrame::kerr_cat(c(1.19), space).unwrap();
            let r1 = coherent_state(C64::new(a, b), space).unwrap().to_density();
            let r2 = coherent_state(C64::new(b, -a), space).unwrap().to_density();
            let mix: DensityMatrix = r1.mix(w, &r2).unwrap();
            let (p1, p2, pm) = (
                p_vector(&r1, &f).unwrap().as_array(),
                p_vector(&r2, &f).unwrap().as_array(),
                p_vector(&mix, &f).unwrap().as_array(),
            );
            for k in 0..4 {
                prop_assert!((pm[k] - (w * p1[k] + (1.0 - w) * p2[k])).abs() < 1e-12);
            }
        }
    }
}
