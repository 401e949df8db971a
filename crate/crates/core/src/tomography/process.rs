//! Pauli-transfer-matrix process tomography in the Fock and cat frames.

use super::{FrameKind, PVector, QubitFrame};
use crate::dynamics::QubitChannel;
use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::linalg::{c, CMat, I};
use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

/// Pauli transfer matrix `p_out = R p_in` with the frame it refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RMatrix {
    pub frame: FrameKind,
    /// Cat amplitude of the frame (`[re, im]`; zero for the Fock frame).
    pub alpha: [f64; 2],
    /// Row-major entries.
    pub rows: [[f64; 4]; 4],
}

impl RMatrix {
    pub fn from_matrix(m: &Matrix4<f64>) -> Self {
        let mut rows = [[0.0; 4]; 4];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[(i, j)];
            }
        }
        Self {
            frame: FrameKind::Fock,
            alpha: [0.0, 0.0],
            rows,
        }
    }

    pub fn identity() -> Self {
        Self::from_matrix(&Matrix4::identity())
    }

    pub fn diagonal(d: [f64; 4]) -> Self {
        Self::from_matrix(&Matrix4::from_diagonal(&d.into()))
    }

    pub fn with_frame(mut self, frame: &QubitFrame) -> Self {
        self.frame = frame.kind();
        self.alpha = [frame.alpha().re, frame.alpha().im];
        self
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.rows[i][j])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serialises")
    }
}

/// Solves `R P_in = P_out` for the columns `P_in`, `P_out` given as
/// p-vectors: exactly for four inputs, by least squares for more.
pub fn r_matrix(inputs: &[PVector], outputs: &[PVector]) -> Result<RMatrix> {
    if inputs.len() != outputs.len() || inputs.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "need matching input/output sets of at least 4 p-vectors (got {} and {})",
            inputs.len(),
            outputs.len()
        )));
    }
    let n = inputs.len();
    let p_in = DMatrix::from_fn(4, n, |i, j| inputs[j].as_array()[i]);
    let p_out = DMatrix::from_fn(4, n, |i, j| outputs[j].as_array()[i]);
    let svd = p_in.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax.max(1.0)) {
        return Err(Error::SingularInputSet);
    }
    // R = P_out P_inᵀ (P_in P_inᵀ)⁻¹, which is P_out P_in⁻¹ for square P_in
    let gram = &p_in * p_in.transpose();
    let inv = gram.try_inverse().ok_or(Error::SingularInputSet)?;
    let r = p_out * p_in.transpose() * inv;
    Ok(RMatrix::from_matrix(&Matrix4::from_fn(|i, j| r[(i, j)])))
}

/// `F = (Tr(R_idealᵀ R_exp) + d)/(d² + d)` with `d = 2`.
pub fn process_fidelity(r_exp: &RMatrix, r_ideal: &RMatrix) -> f64 {
    let (a, b) = (r_exp.matrix(), r_ideal.matrix());
    ((b.transpose() * a).trace() + 2.0) / 6.0
}

/// Fidelity to the identity after the best virtual Z rotation; returns
/// `(F, angle)` where the angle is the residual Z rotation of `R`.
pub fn process_fidelity_aligned(r_exp: &RMatrix) -> (f64, f64) {
    let r = &r_exp.rows;
    let cos_part = r[1][1] + r[2][2];
    let sin_part = r[2][1] - r[1][2];
    let f = (r[0][0] + r[3][3] + cos_part.hypot(sin_part) + 2.0) / 6.0;
    (f, sin_part.atan2(cos_part))
}

/// Result of a tomography run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QptResult {
    pub r: RMatrix,
    pub fidelity: f64,
    /// Fidelity after removing a residual Z rotation.
    pub fidelity_aligned: f64,
    pub z_angle: f64,
    pub p_in: Vec<PVector>,
    pub p_out: Vec<PVector>,
    /// Mean population outside the frame over the inputs.
    pub leakage: f64,
}

fn finish(
    p_in: Vec<PVector>,
    p_out: Vec<PVector>,
    leakage: f64,
    frame: &QubitFrame,
) -> Result<QptResult> {
    let r = r_matrix(&p_in, &p_out)?.with_frame(frame);
    let fidelity = process_fidelity(&r, &RMatrix::identity());
    let (fidelity_aligned, z_angle) = process_fidelity_aligned(&r);
    Ok(QptResult {
        r,
        fidelity,
        fidelity_aligned,
        z_angle,
        p_in,
        p_out,
        leakage,
    })
}

fn qubit_inputs(states: &[(C64, C64)]) -> Vec<PVector> {
    states
        .iter()
        .map(|&(a, b)| PVector::of_qubit(a, b))
        .collect()
}

/// `Σ_k k ρ_kk` after applying the qubit rotation `u` on levels 0/1.
fn mean_photons_after(rho: &CMat, u: &Matrix2<C64>) -> f64 {
    let d = rho.nrows();
    let mut w = CMat::identity(d, d);
    for i in 0..2 {
        for j in 0..2 {
            w[(i, j)] = u[(i, j)];
        }
    }
    let r = &w * rho * w.adjoint();
    (0..d).map(|k| k as f64 * r[(k, k)].re).sum()
}

/// Fock-space tomography of a channel on `{|0>, |1>}`.
///
/// Inputs `|0>, |1>, |+>, |−i>`; each output is read out along `+Z, −Z, +Y,
/// −X` by rotating the target axis onto `|0>` (resp. `|1>` for `−Z`) and
/// recording the mean photon number `P_n`. The leakage offset
/// `[P_n(+Z) + P_n(−Z) − 1]/2` is subtracted and `P_|0> = 1 − P_|1>` assumed.
pub fn fock_qpt(channel: &QubitChannel) -> Result<QptResult> {
    let h = FRAC_1_SQRT_2;
    let states = [
        (c(1.0), c(0.0)),
        (c(0.0), c(1.0)),
        (c(h), c(h)),
        (c(h), -I * h),
    ];
    let frame = QubitFrame::fock(channel.space());
    let rot_pz = Matrix2::identity();
    let rot_mz = Matrix2::new(c(0.0), c(1.0), c(1.0), c(0.0));
    // Rx(π/2) maps +Y onto +Z; Ry(π/2) maps −X onto +Z
    let rot_py = Matrix2::new(c(h), -I * h, -I * h, c(h));
    let rot_mx = Matrix2::new(c(h), c(-h), c(h), c(h));
    let mut p_out = Vec::with_capacity(4);
    let mut leakage = 0.0;
    for &(a, b) in &states {
        let rho: DensityMatrix = channel.apply_pure(a, b);
        let m = rho.matrix();
        let pz = mean_photons_after(m, &rot_pz);
        let mz = mean_photons_after(m, &rot_mz);
        let py = mean_photons_after(m, &rot_py);
        let mx = mean_photons_after(m, &rot_mx);
        let off = (pz + mz - 1.0) / 2.0;
        let p0 = |v: f64| 1.0 - (v - off);
        p_out.push(PVector::new(
            1.0,
            1.0 - 2.0 * p0(mx),
            2.0 * p0(py) - 1.0,
            p0(pz) - p0(mz),
        ));
        leakage += 1.0 - rho.population(0) - rho.population(1);
    }
    finish(qubit_inputs(&states), p_out, leakage / 4.0, &frame)
}

/// State-preparation-and-measurement model: the Y and Z projections pass
/// through a Z/2 gate whose fidelity `f` scales their contrast by `2f − 1`.
/// The table maps cat size `|α|²` to gate fidelity (linear interpolation,
/// clamped at the ends); an empty table is ideal.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpamTable {
    pub z_half_fidelity: Vec<(f64, f64)>,
}

impl SpamTable {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn constant(fidelity: f64) -> Self {
        Self {
            z_half_fidelity: vec![(0.0, fidelity)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.z_half_fidelity.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidParameter(
                    "SPAM table sizes must ascend".into(),
                ));
            }
        }
        if self
            .z_half_fidelity
            .iter()
            .any(|&(a, f)| !a.is_finite() || !(0.5..=1.0).contains(&f))
        {
            return Err(Error::InvalidParameter(
                "SPAM fidelities must lie in [0.5, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn fidelity(&self, alpha_sq: f64) -> f64 {
        let t = &self.z_half_fidelity;
        match t.len() {
            0 => 1.0,
            _ if alpha_sq <= t[0].0 => t[0].1,
            _ if alpha_sq >= t[t.len() - 1].0 => t[t.len() - 1].1,
            _ => {
                let i = t.iter().position(|p| p.0 > alpha_sq).expect("inside table");
                let (x0, y0) = t[i - 1];
                let (x1, y1) = t[i];
                y0 + (y1 - y0) * (alpha_sq - x0) / (x1 - x0)
            }
        }
    }

    pub fn contrast(&self, alpha_sq: f64) -> f64 {
        2.0 * self.fidelity(alpha_sq) - 1.0
    }
}

/// Preparations for cat-frame tomography: Fock `|+>, |−>, |0>, |i>`, which
/// an ideal ramp maps to `+X, −X, +Z, +Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatQptInputs;

impl CatQptInputs {
    pub fn fock_states() -> [(C64, C64); 4] {
        let h = FRAC_1_SQRT_2;
        [(c(h), c(h)), (c(h), c(-h)), (c(1.0), c(0.0)), (c(h), I * h)]
    }
}

/// Cat-frame tomography of a ramp-up channel. Each projection uses the cat
/// readout after ideal in-frame rotations: the signal is `p_S + p_leak/2`,
/// so `2·signal − 1 = Tr(ρ S)` and leaked population reads as the midpoint.
/// The SPAM table scales the Y and Z rows, which need the Z/2 gate.
pub fn cat_qpt(
    channel: &QubitChannel,
    frame: &QubitFrame,
    spam: Option<&SpamTable>,
) -> Result<QptResult> {
    if frame.kind() != FrameKind::KerrCat {
        return Err(Error::InvalidParameter(
            "cat tomography needs a cat frame".into(),
        ));
    }
    if frame.space() != channel.space() {
        return Err(Error::DimensionMismatch(
            frame.space().dim(),
            channel.space().dim(),
        ));
    }
    let contrast = match spam {
        Some(s) => {
            s.validate()?;
            s.contrast(frame.alpha().norm_sqr())
        }
        None => 1.0,
    };
    let states = CatQptInputs::fock_states();
    let mut p_out = Vec::with_capacity(4);
    let mut leakage = 0.0;
    for &(a, b) in &states {
        let rho = channel.apply_pure(a, b);
        let p = super::p_vector(&rho, frame)?;
        leakage += 1.0 - p.p_i;
        p_out.push(PVector::new(1.0, p.p_x, contrast * p.p_y, contrast * p.p_z));
    }
    finish(qubit_inputs(&states), p_out, leakage / 4.0, frame)
}
