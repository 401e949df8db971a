//! Wigner functions from displaced parity, Kerr-rotation correction and
//! maximum-likelihood reconstruction from displaced-parity data.

use crate::dynamics::integrate::hermitize;
use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, HilbertSpace, StateRef};
use crate::linalg::{trace_product, CMat, MHZ_TO_RAD_NS};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_2_PI, PI};
use std::fmt::Write as _;

/// Sampled Wigner function `W(β)` (normalised so that `∫W d²β = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct WignerMap {
    pub grid: Vec<C64>,
    pub values: Vec<f64>,
    /// Dimension of the state the map was computed from.
    pub dim: usize,
    /// Kerr correction time applied to the underlying state (ns), if any.
    pub t_cor: Option<f64>,
}

impl WignerMap {
    /// CSV `re_alpha,im_alpha,w_value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re_alpha,im_alpha,w_value\n");
        for (b, w) in self.grid.iter().zip(&self.values) {
            writeln!(out, "{},{},{}", b.re, b.im, w).expect("write to String");
        }
        out
    }

    /// Riemann sum `Σ W ΔA` for a uniform grid with cell area `cell`.
    pub fn integral(&self, cell: f64) -> f64 {
        self.values.iter().sum::<f64>() * cell
    }

    pub fn value_at(&self, beta: C64) -> Option<f64> {
        self.grid
            .iter()
            .position(|g| (g - beta).norm() < 1e-9)
            .map(|i| self.values[i])
    }

    /// Copy with seeded Gaussian noise of standard deviation `sigma` added.
    pub fn with_noise(&self, sigma: f64, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, sigma)
            .map_err(|e| Error::InvalidParameter(format!("noise sigma {sigma}: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for v in &mut out.values {
            *v += normal.sample(&mut rng);
        }
        Ok(out)
    }
}

/// Square grid `[-L, L]²` with spacing `step`, real part varying slowest.
pub fn square_grid(half_width: f64, step: f64) -> Result<Vec<C64>> {
    if !(half_width >= 0.0 && step > 0.0 && half_width.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "grid half-width {half_width} and step {step} must be >= 0 and > 0"
        )));
    }
    let n = (2.0 * half_width / step).round() as usize + 1;
    let x = |i: usize| -half_width + i as f64 * step;
    Ok((0..n)
        .flat_map(|i| (0..n).map(move |j| C64::new(x(i), x(j))))
        .collect())
}

/// Displaced parity `D(β) P D†(β)` compressed to the first `dim` Fock
/// states, from the closed-form matrix elements of `D(2β)` (no truncated
/// exponential is involved, so every entry is exact).
pub(crate) fn displaced_parity(beta: C64, dim: usize) -> CMat {
    let g = 2.0 * beta;
    let x = g.norm_sqr();
    let unit = if g.norm() > 0.0 {
        g / g.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let damp = (-0.5 * x).exp();
    let mut m = CMat::zeros(dim, dim);
    for k in 0..dim {
        // ⟨m+k|D(γ)|m⟩ = sqrt(m!/(m+k)!) γ^k e^{-|γ|²/2} L_m^(k)(|γ|²)
        let mut pref = {
            let mut p = 1.0;
            for j in 1..=k {
                p *= g.norm() / (j as f64).sqrt();
            }
            p
        };
        let phase = unit.powu(k as u32);
        let (mut l_prev, mut l_cur) = (0.0, 1.0);
        for mm in 0..dim - k {
            let n = mm + k;
            let sign = if mm % 2 == 0 { 1.0 } else { -1.0 };
            let v = phase * (sign * pref * damp * l_cur);
            m[(n, mm)] = v;
            m[(mm, n)] = v.conj();
            // advance Laguerre degree and prefactor
            let kf = k as f64;
            let mf = mm as f64;
            let l_next = ((2.0 * mf + 1.0 + kf - x) * l_cur - (mf + kf) * l_prev) / (mf + 1.0);
            l_prev = l_cur;
            l_cur = l_next;
            pref *= ((mf + 1.0) / (mf + kf + 1.0)).sqrt();
        }
    }
    m
}

fn density_matrix_of(state: StateRef<'_>) -> DensityMatrix {
    match state {
        StateRef::Pure(v) => v.to_density(),
        StateRef::Mixed(r) => r.clone(),
    }
}

/// `W(β) = (2/π) Tr(D†(β) ρ D(β) P)` on every grid point.
pub fn wigner<'a>(state: impl Into<StateRef<'a>>, grid: &[C64]) -> WignerMap {
    let rho = density_matrix_of(state.into());
    let d = rho.space().dim();
    let values = grid
        .iter()
        .map(|&b| FRAC_2_PI * trace_product(rho.matrix(), &displaced_parity(b, d)).re)
        .collect();
    WignerMap {
        grid: grid.to_vec(),
        values,
        dim: d,
        t_cor: None,
    }
}

/// `U_cor ρ U_cor†` with `U_cor = exp(−i (K t_cor/2) a†a†aa)`.
pub fn kerr_correct(rho: &DensityMatrix, k_mhz: f64, t_cor: f64) -> Result<DensityMatrix> {
    if !(t_cor >= 0.0 && t_cor.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "t_cor = {t_cor} must be >= 0"
        )));
    }
    Ok(kerr_phase(rho, -k_mhz * t_cor / 2.0))
}

/// Applies `exp(i φ n(n−1))` with `φ = MHZ_TO_RAD_NS · phase_mhz_ns`.
fn kerr_phase(rho: &DensityMatrix, phase_mhz_ns: f64) -> DensityMatrix {
    let d = rho.space().dim();
    let phi = MHZ_TO_RAD_NS * phase_mhz_ns;
    let ph: Vec<C64> = (0..d)
        .map(|n| C64::from_polar(1.0, phi * (n * n.saturating_sub(1)) as f64))
        .collect();
    let m = CMat::from_fn(d, d, |i, j| ph[i] * rho.matrix()[(i, j)] * ph[j].conj());
    DensityMatrix::from_matrix_unchecked(rho.space(), m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleConfig {
    pub max_iterations: usize,
    /// Stop when the mean log-likelihood gain falls below this value.
    pub tolerance: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub rho: DensityMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Mean log-likelihood per grid point.
    pub log_likelihood: f64,
}

/// Maximum-likelihood density matrix from displaced-parity data.
///
/// Each grid point is a two-outcome measurement with POVM elements
/// `(1 ± D P D†)/2`; the observed outcome frequencies are
/// `(1 ± (π/2) W)/2` (clipped to `[0, 1]`). The `RρR` fixed-point
/// iteration keeps every iterate positive with unit trace.
pub fn mle_reconstruct(map: &WignerMap, dim: usize, config: &MleConfig) -> Result<MleResult> {
    let space = HilbertSpace::new(dim)?;
    if map.grid.len() < 3 * dim * dim {
        return Err(Error::InvalidParameter(format!(
            "{} grid points are too few for dim {dim} (need >= {})",
            map.grid.len(),
            3 * dim * dim
        )));
    }
    if map.values.len() != map.grid.len() || map.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "Wigner values must be finite, one per point".into(),
        ));
    }
    let kernels = KernelStack::new(&map.grid, dim);
    let freq: Vec<f64> = map
        .values
        .iter()
        .map(|w| ((1.0 + 0.5 * PI * w) / 2.0).clamp(0.0, 1.0))
        .collect();
    let n = map.grid.len() as f64;
    let floor = 1e-12;
    let stats = |rho: &CMat| -> (Vec<f64>, f64) {
        let probs: Vec<f64> = kernels
            .expectations(rho)
            .iter()
            .map(|e| ((1.0 + e) / 2.0).clamp(floor, 1.0 - floor))
            .collect();
        let ll = probs
            .iter()
            .zip(&freq)
            .map(|(&p, &f)| {
                let mut s = 0.0;
                if f > 0.0 {
                    s += f * p.ln();
                }
                if f < 1.0 {
                    s += (1.0 - f) * (1.0 - p).ln();
                }
                s
            })
            .sum::<f64>()
            / n;
        (probs, ll)
    };

    let mut rho = seed_estimate(&kernels, &map.values, dim);
    let (mut probs, mut ll) = stats(&rho);
    let mut best = (rho.clone(), ll);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let mut diag = 0.0;
        let weights: Vec<f64> = probs
            .iter()
            .zip(&freq)
            .map(|(&p, &f)| {
                let (wp, wm) = (f / p, (1.0 - f) / (1.0 - p));
                diag += 0.5 * (wp + wm);
                0.5 * (wp - wm)
            })
            .collect();
        let mut r = kernels.combine(&weights);
        for i in 0..dim {
            r[(i, i)] += diag;
        }
        let next = &r * &rho * &r;
        let tr = next.trace().re;
        if !(tr > 0.0 && tr.is_finite()) {
            return Err(Error::NoConvergence(
                "likelihood iteration lost positivity".into(),
            ));
        }
        rho = hermitize(next / C64::new(tr, 0.0));
        let (p2, ll2) = stats(&rho);
        let gain = ll2 - ll;
        probs = p2;
        ll = ll2;
        if ll > best.1 {
            best = (rho.clone(), ll);
        }
        if gain.abs() < config.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("MLE stopped after {iterations} iterations without meeting the tolerance");
    }
    Ok(MleResult {
        rho: DensityMatrix::from_matrix_unchecked(space, best.0),
        iterations,
        converged,
        log_likelihood: best.1,
    })
}

/// Displaced-parity kernels of a grid as the rows of a real matrix holding
/// `[Re vec M, Im vec M]`, so that `Tr(ρ M) = row · [Re vec ρ, Im vec ρ]`
/// for Hermitian `M`.
struct KernelStack {
    dim: usize,
    rows: DMatrix<f64>,
}

impl KernelStack {
    fn new(grid: &[C64], dim: usize) -> Self {
        let d2 = dim * dim;
        let mut rows = DMatrix::zeros(grid.len(), 2 * d2);
        for (i, &b) in grid.iter().enumerate() {
            let m = displaced_parity(b, dim);
            for (k, z) in m.as_slice().iter().enumerate() {
                rows[(i, k)] = z.re;
                rows[(i, d2 + k)] = z.im;
            }
        }
        Self { dim, rows }
    }

    fn expectations(&self, rho: &CMat) -> DVector<f64> {
        let d2 = self.dim * self.dim;
        let mut v = DVector::zeros(2 * d2);
        for (k, z) in rho.as_slice().iter().enumerate() {
            v[k] = z.re;
            v[d2 + k] = z.im;
        }
        &self.rows * v
    }

    /// `Σ_β c_β M_β`.
    fn combine(&self, c: &[f64]) -> CMat {
        let d2 = self.dim * self.dim;
        let v = self.rows.tr_mul(&DVector::from_column_slice(c));
        CMat::from_fn(self.dim, self.dim, |i, j| {
            let k = j * self.dim + i;
            C64::new(v[k], v[d2 + k])
        })
    }
}

/// Starting point of the likelihood iteration: the discretised inversion
/// `ρ ∝ Σ_β W(β) D(β) P D†(β)`, clipped to its positive part and mixed with
/// a little of the maximally mixed state so that every eigenvector can grow.
fn seed_estimate(kernels: &KernelStack, values: &[f64], dim: usize) -> CMat {
    let lin = kernels.combine(values);
    let (vals, vecs) = crate::linalg::herm_eigen(&hermitize(lin));
    let mut pos = CMat::zeros(dim, dim);
    for (k, &v) in vals.iter().enumerate() {
        if v > 0.0 {
            let col = vecs.column(k);
            pos += col * col.adjoint() * C64::new(v, 0.0);
        }
    }
    let tr = pos.trace().re;
    let mixed = CMat::identity(dim, dim) / C64::new(dim as f64, 0.0);
    if !(tr > 0.0 && tr.is_finite()) {
        return mixed;
    }
    let eps = 1e-3;
    pos * C64::new((1.0 - eps) / tr, 0.0) + mixed * C64::new(eps, 0.0)
}

/// Displacement pulse used for parity tomography.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseModel {
    /// Pulse duration (ns).
    pub duration: f64,
    /// Correction time (ns); defaults to the pulse duration.
    pub t_cor: Option<f64>,
}

impl PulseModel {
    pub fn new(duration: f64) -> Self {
        Self {
            duration,
            t_cor: None,
        }
    }

    pub fn correction_time(&self) -> f64 {
        self.t_cor.unwrap_or(self.duration)
    }

    /// Upper duration bound `1/(20K)` in ns for `K` in MHz.
    pub fn duration_limit(k_mhz: f64) -> f64 {
        1e3 / (20.0 * k_mhz)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    /// Wigner map seen through the distorting displacement pulse.
    pub raw: WignerMap,
    /// Reconstruction of the raw map.
    pub uncorrected: MleResult,
    /// Reconstruction after the Kerr correction.
    pub corrected: DensityMatrix,
    /// The pulse is not much shorter than `1/(20K)`.
    pub pulse_too_long: bool,
}

/// Simulates parity tomography with a finite displacement pulse: the Kerr
/// term acts during the pulse, modelled as free Kerr evolution for half the
/// pulse followed by an ideal displacement. The raw map is reconstructed by
/// MLE (with optional seeded noise) and Kerr-corrected with `t_cor`.
pub fn distorted_wigner_pipeline<'a>(
    state: impl Into<StateRef<'a>>,
    k_mhz: f64,
    pulse: &PulseModel,
    grid: &[C64],
    noise: Option<(f64, u64)>,
    config: &MleConfig,
) -> Result<PipelineResult> {
    if !(pulse.duration >= 0.0 && pulse.duration.is_finite()) || !(k_mhz >= 0.0) {
        return Err(Error::InvalidParameter(
            "pulse duration and K must be >= 0".into(),
        ));
    }
    let pulse_too_long = k_mhz > 0.0 && pulse.duration >= PulseModel::duration_limit(k_mhz);
    if pulse_too_long {
        log::warn!(
            "displacement pulse {} ns is not much shorter than 1/(20K) = {:.2} ns",
            pulse.duration,
            PulseModel::duration_limit(k_mhz)
        );
    }
    let rho = density_matrix_of(state.into());
    let dim = rho.space().dim();
    // free evolution under −K a†a†aa for half the pulse
    let distorted = kerr_phase(&rho, k_mhz * pulse.duration / 2.0);
    let mut raw = wigner(&distorted, grid);
    if let Some((sigma, seed)) = noise {
        raw = raw.with_noise(sigma, seed)?;
    }
    let uncorrected = mle_reconstruct(&raw, dim, config)?;
    let t_cor = pulse.correction_time();
    let corrected = kerr_correct(&uncorrected.rho, k_mhz, t_cor)?;
    raw.t_cor = Some(t_cor);
    Ok(PipelineResult {
        raw,
        uncorrected,
        corrected,
        pulse_too_long,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate::HamiltonianPath, KerrCatParams, Tolerance};
    use crate::fock::{
        cat_state, coherent_state, displacement, parity, state_fidelity, CatPhase, StateVector,
    };
    use crate::linalg::c;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sp(d: usize) -> HilbertSpace {
        HilbertSpace::new(d).unwrap()
    }

    #[test]
    fn kernel_matches_truncated_displacement() {
        let small = 8;
        let big = sp(60);
        let beta = C64::new(0.7, -0.4);
        let d = displacement(beta, big).unwrap();
        let full = d.matrix() * parity(big).matrix() * d.matrix().adjoint();
        let k = displaced_parity(beta, small);
        for i in 0..small {
            for j in 0..small {
                assert_abs_diff_eq!(k[(i, j)].re, full[(i, j)].re, epsilon = 1e-10);
                assert_abs_diff_eq!(k[(i, j)].im, full[(i, j)].im, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn vacuum_and_cat_at_origin() {
        let space = sp(20);
        let w = wigner(&StateVector::basis(space, 0).unwrap(), &[c(0.0)]);
        assert_abs_diff_eq!(w.values[0], 2.0 / PI, epsilon = 1e-12);
        let cat = cat_state(c(1.41f64.sqrt()), CatPhase::Plus, space).unwrap();
        let w = wigner(&cat, &[c(0.0)]);
        assert_abs_diff_eq!(w.values[0], 2.0 / PI, epsilon = 1e-12);
    }

    #[test]
    fn coherent_state_is_displaced_gaussian() {
        let space = sp(30);
        let a = C64::new(1.1, 0.5);
        let psi = coherent_state(a, space).unwrap();
        let grid = [C64::new(0.3, -0.2), C64::new(1.0, 0.7), C64::new(-0.8, 1.2)];
        let w = wigner(&psi, &grid);
        for (b, v) in grid.iter().zip(&w.values) {
            assert_abs_diff_eq!(
                *v,
                FRAC_2_PI * (-2.0 * (b - a).norm_sqr()).exp(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn cat_map_is_normalised() {
        let space = sp(24);
        let cat = cat_state(c(1.41f64.sqrt()), CatPhase::Plus, space).unwrap();
        let grid = square_grid(4.0, 0.1).unwrap();
        let w = wigner(&cat, &grid);
        assert_abs_diff_eq!(w.integral(0.01), 1.0, epsilon = 0.01);
        let csv = w.to_csv();
        assert!(csv.starts_with("re_alpha,im_alpha,w_value\n"));
        assert_eq!(csv.lines().count(), grid.len() + 1);
    }

    #[test]
    fn kerr_correction_properties() {
        let space = sp(20);
        let rho = cat_state(c(1.3), CatPhase::Plus, space)
            .unwrap()
            .to_density();
        let same = kerr_correct(&rho, 6.9, 0.0).unwrap();
        assert!((same.matrix() - rho.matrix()).norm() < 1e-15);
        let turned = kerr_correct(&rho, 6.9, 37.0).unwrap();
        assert_abs_diff_eq!(turned.purity(), rho.purity(), epsilon = 1e-10);
        // forward Kerr evolution for t/2, then correction with t_cor = t
        let t = 12.0;
        let path = HamiltonianPath::constant(KerrCatParams::new(6.9, 0.0, 0.0), t / 2.0).unwrap();
        let psi = cat_state(c(1.3), CatPhase::Plus, space).unwrap();
        let evolved = crate::dynamics::integrate::evolve_schrodinger(
            &path,
            &psi,
            &[t / 2.0],
            &Tolerance::default(),
        )
        .unwrap()
        .final_state()
        .unwrap()
        .to_density();
        let back = kerr_correct(&evolved, 6.9, t).unwrap();
        assert_abs_diff_eq!(state_fidelity(&back, &psi).unwrap(), 1.0, epsilon = 1e-8);
        assert!(kerr_correct(&rho, 6.9, -1.0).is_err());
    }

    #[test]
    fn vacuum_round_trip() {
        let space = sp(8);
        let vac = StateVector::basis(space, 0).unwrap();
        let grid = square_grid(3.0, 0.2).unwrap();
        let res = mle_reconstruct(&wigner(&vac, &grid), 8, &MleConfig::default()).unwrap();
        assert!(state_fidelity(&res.rho, &vac).unwrap() > 0.999);
    }

    #[test]
    fn too_few_points_rejected() {
        let space = sp(10);
        let vac = StateVector::basis(space, 0).unwrap();
        let grid = square_grid(1.0, 0.5).unwrap();
        assert!(mle_reconstruct(&wigner(&vac, &grid), 10, &MleConfig::default()).is_err());
    }

    #[test]
    fn pipeline_without_kerr_matches_direct_reconstruction() {
        let space = sp(16);
        let psi = coherent_state(C64::new(0.6, 0.3), space).unwrap();
        let grid = square_grid(3.0, 0.2).unwrap();
        let cfg = MleConfig::default();
        let res =
            distorted_wigner_pipeline(&psi, 0.0, &PulseModel::new(4.8), &grid, None, &cfg).unwrap();
        let direct = mle_reconstruct(&wigner(&psi, &grid), 16, &cfg).unwrap();
        assert!((res.corrected.matrix() - direct.rho.matrix()).norm() < 1e-6);
        assert!(!res.pulse_too_long);
    }

    #[test]
    fn pulse_length_check() {
        assert_abs_diff_eq!(PulseModel::duration_limit(6.9), 7.246, epsilon = 1e-3);
        assert!(4.8 < PulseModel::duration_limit(6.9));
        let space = sp(6);
        let vac = StateVector::basis(space, 0).unwrap();
        let grid = square_grid(2.5, 0.25).unwrap();
        let res = distorted_wigner_pipeline(
            &vac,
            6.9,
            &PulseModel::new(10.0),
            &grid,
            None,
            &MleConfig::default(),
        )
        .unwrap();
        assert!(res.pulse_too_long);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn values_are_bounded(re in -1.5..1.5f64, im in -1.5..1.5f64, w in 0.0..1.0f64) {
            let space = sp(30);
            let r1 = coherent_state(C64::new(re, im), space).unwrap().to_density();
            let r2 = cat_state(C64::new(im, re), CatPhase::Minus, space)
                .map(|s| s.to_density())
                .unwrap_or_else(|_| StateVector::basis(space, 3).unwrap().to_density());
            let mix = r1.mix(w, &r2).unwrap();
            let grid = square_grid(2.0, 0.5).unwrap();
            for v in wigner(&mix, &grid).values {
                prop_assert!(v.abs() <= 2.0 / PI + 1e-9);
            }
        }

        #[test]
        fn reconstruction_is_always_a_density_matrix(seed in 0u64..1000, sigma in 0.0..0.3f64) {
            let space = sp(4);
            let psi = StateVector::fock_superposition(space, seed as f64);
            let grid = square_grid(2.0, 0.4).unwrap();
            let noisy = wigner(&psi, &grid).with_noise(sigma, seed).unwrap();
            let cfg = MleConfig { max_iterations: 200, tolerance: 1e-10 };
            let res = mle_reconstruct(&noisy, 4, &cfg).unwrap();
            prop_assert!(DensityMatrix::new(space, res.rho.matrix().clone()).is_ok());
        }
    }
}
