//! Multi-loop SQUID (NEMS) circuit model: potential, flux control and
//! harmonic-oscillator-approximation parameter extraction.

use crate::error::{Error, Result};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Junction parameters; energies in MHz (`E/h`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionConfig {
    pub ej: f64,
    pub ec: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub n_r: u32,
    pub n_l: u32,
}

impl JunctionConfig {
    /// Device values of the reference sample: 69.5 GHz, 226 MHz, r = 0.16.
    pub fn reference_device() -> Self {
        Self {
            ej: 69_500.0,
            ec: 226.0,
            r1: 0.16,
            r2: 0.16,
            r3: 0.16,
            n_r: 3,
            n_l: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ratio_ok = |r: f64| r > 0.0 && r < 1.0;
        if !(self.ej > 0.0 && self.ec > 0.0) {
            return Err(Error::InvalidParameter("Ej and Ec must be positive".into()));
        }
        if !(ratio_ok(self.r1) && ratio_ok(self.r2) && ratio_ok(self.r3)) {
            return Err(Error::InvalidParameter(
                "junction ratios must lie in (0, 1)".into(),
            ));
        }
        if self.n_r == 0 || self.n_l == 0 {
            return Err(Error::InvalidParameter(
                "junction counts must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// External loop fluxes (rad), stored modulo 2π in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxPoint {
    pub phi_e1: f64,
    pub phi_e2: f64,
    pub phi_e3: f64,
    /// Working-point shift `Δφ` that produced this point (0 for plain points).
    pub delta_phi: f64,
}

impl FluxPoint {
    pub fn new(phi_e1: f64, phi_e2: f64, phi_e3: f64) -> Self {
        Self {
            phi_e1: wrap_angle(phi_e1),
            phi_e2: wrap_angle(phi_e2),
            phi_e3: wrap_angle(phi_e3),
            delta_phi: 0.0,
        }
    }

    /// `(-Δφ, π + Δφ, 0)`: the shifted saddle point used for two-photon pumping.
    pub fn working_point(delta_phi: f64) -> Self {
        let mut p = Self::new(-delta_phi, PI + delta_phi, 0.0);
        p.delta_phi = delta_phi;
        p
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.phi_e1, self.phi_e2, self.phi_e3)
    }
}

/// Five derivatives `U, U', U'', U''', U''''` (MHz / rad^k).
pub type Derivatives = [f64; 5];

/// A one-dimensional potential in the phase variable, energies in MHz.
pub trait Potential {
    fn derivatives(&self, phi: f64) -> Derivatives;

    fn value(&self, phi: f64) -> f64 {
        self.derivatives(phi)[0]
    }

    /// Half-width of the window searched for the minimum.
    fn search_half_width(&self) -> f64 {
        PI
    }

    /// Second derivative of the first-order pump term, per unit pump amplitude.
    fn pump_curvature(&self, _phi: f64) -> Option<f64> {
        None
    }
}

/// `-amp * cos(scale * phi + offset)` and its derivatives.
#[derive(Debug, Clone, Copy)]
struct CosBranch {
    amp: f64,
    scale: f64,
    offset: f64,
}

impl CosBranch {
    fn add_to(&self, phi: f64, d: &mut Derivatives) {
        let x = self.scale * phi + self.offset;
        let (s, c) = x.sin_cos();
        let k = self.scale;
        d[0] -= self.amp * c;
        d[1] += self.amp * k * s;
        d[2] += self.amp * k * k * c;
        d[3] -= self.amp * k.powi(3) * s;
        d[4] -= self.amp * k.powi(4) * c;
    }
}

/// The NEMS potential at fixed external flux, optionally with the static
/// (zeroth-order) pump correction applied to the pumped branches.
#[derive(Debug, Clone, Copy)]
pub struct NemsPotential {
    pub config: JunctionConfig,
    pub flux: FluxPoint,
    /// Factor `1 - (ε_p/2)^2` applied to the r1 and r3 branches.
    pub pumped_scale: f64,
}

impl NemsPotential {
    pub fn new(config: JunctionConfig, flux: FluxPoint) -> Self {
        Self {
            config,
            flux,
            pumped_scale: 1.0,
        }
    }

    fn branches(&self) -> [CosBranch; 4] {
        let c = &self.config;
        let nr = c.n_r as f64;
        let nl = c.n_l as f64;
        [
            CosBranch {
                amp: c.ej * c.r1 * self.pumped_scale,
                scale: 1.0,
                offset: self.flux.phi_e1,
            },
            CosBranch {
                amp: c.ej * c.r2,
                scale: 1.0,
                offset: self.flux.phi_e1 + self.flux.phi_e2,
            },
            CosBranch {
                amp: c.ej * nr * c.r3 * self.pumped_scale,
                scale: 1.0 / nr,
                offset: -self.flux.phi_e3 / nr,
            },
            CosBranch {
                amp: c.ej * nl,
                scale: 1.0 / nl,
                offset: 0.0,
            },
        ]
    }
}

impl Potential for NemsPotential {
    fn derivatives(&self, phi: f64) -> Derivatives {
        let mut d = [0.0; 5];
        for b in self.branches() {
            b.add_to(phi, &mut d);
        }
        d
    }

    fn search_half_width(&self) -> f64 {
        PI * self.config.n_l as f64
    }

    /// The first-order pump term is `Ej [r1 sin(φ - Δφ) - n_r r3 sin(φ/n_r)] ε_p cos(ω_p t)`.
    fn pump_curvature(&self, phi: f64) -> Option<f64> {
        let c = &self.config;
        let nr = c.n_r as f64;
        let dphi = self.flux.delta_phi;
        Some(c.ej * (-c.r1 * (phi - dphi).sin() + (c.r3 / nr) * (phi / nr).sin()))
    }
}

/// Pure quadratic `c2 φ^2 / 2`, a reference potential for the extraction code.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticPotential {
    pub c2: f64,
}

impl Potential for QuadraticPotential {
    fn derivatives(&self, phi: f64) -> Derivatives {
        [0.5 * self.c2 * phi * phi, self.c2 * phi, self.c2, 0.0, 0.0]
    }
}

/// `U_NEMS/h` in MHz.
pub fn potential(config: &JunctionConfig, flux: &FluxPoint, phi: f64) -> f64 {
    NemsPotential::new(*config, *flux).value(phi)
}

/// Working-point potential with the static pump shift: the r1 and r3
/// branches are scaled by `1 - (ε_p/2)^2`.
pub fn pumped_static_potential(
    config: &JunctionConfig,
    delta_phi: f64,
    eps_p: f64,
) -> Result<NemsPotential> {
    if eps_p.abs() >= 0.5 {
        return Err(Error::PumpTooStrong(eps_p));
    }
    Ok(NemsPotential {
        config: *config,
        flux: FluxPoint::working_point(delta_phi),
        pumped_scale: 1.0 - (eps_p / 2.0).powi(2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractedParams {
    #[serde(rename = "omega_a_mhz")]
    pub omega_a: f64,
    #[serde(rename = "k_mhz")]
    pub k: f64,
    #[serde(rename = "g4_mhz")]
    pub g4: f64,
    #[serde(rename = "g2ac_mhz")]
    pub g2_ac: f64,
    /// Filled in by the pump-shift fit; absent for a single extraction.
    #[serde(rename = "gamma_per_mhz")]
    pub gamma: Option<f64>,
    #[serde(rename = "phi_min_rad")]
    pub phi_min: f64,
}

/// Diagnostics reported alongside an extraction (the approximation is not
/// validated against a hard threshold).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoaDiagnostics {
    pub phi_zpf: f64,
    pub g3: f64,
    pub anharmonicity_ratio: f64,
    pub derivatives: Derivatives,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HoaOptions {
    /// Include the second-order cubic contribution `30 g3^2/ω` in the Kerr.
    pub cubic_correction: bool,
}

/// Location of the lowest minimum in the search window (ties toward smallest |φ|).
pub fn find_minimum(pot: &dyn Potential) -> Result<f64> {
    let w = pot.search_half_width();
    let n = 4000usize;
    let grid: Vec<f64> = (0..=n)
        .map(|i| -w + 2.0 * w * i as f64 / n as f64)
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&x| pot.value(x)).collect();
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);

    let mut best: Option<(usize, f64)> = None;
    for i in 1..n {
        if vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1] {
            let take = match best {
                None => true,
                Some((j, v)) => {
                    vals[i] < v - 1e-12 * scale
                        || ((vals[i] - v).abs() <= 1e-12 * scale && grid[i].abs() < grid[j].abs())
                }
            };
            if take {
                best = Some((i, vals[i]));
            }
        }
    }
    let (i, _) = best.ok_or(Error::NoMinimumFound)?;

    // golden-section inside the bracketing cell pair
    let (mut a, mut b) = (grid[i - 1], grid[i + 1]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = pot.value(x1);
    let mut f2 = pot.value(x2);
    for _ in 0..60 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = pot.value(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = pot.value(x2);
        }
    }
    // Newton polish on U' = 0
    let mut x = 0.5 * (a + b);
    for _ in 0..20 {
        let d = pot.derivatives(x);
        if d[2] <= 0.0 {
            break;
        }
        let step = d[1] / d[2];
        x -= step;
        if step.abs() < 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    Ok(x)
}

/// Harmonic-oscillator approximation around the potential minimum.
pub fn hoa_extract(
    pot: &dyn Potential,
    config: &JunctionConfig,
    opts: HoaOptions,
) -> Result<(ExtractedParams, HoaDiagnostics)> {
    let phi_min = find_minimum(pot)?;
    let d = pot.derivatives(phi_min);
    let u2 = d[2];
    if u2 <= 0.0 {
        return Err(Error::NegativeCurvature(u2));
    }
    let ec = config.ec;
    let zpf4 = 2.0 * ec / u2;
    let zpf2 = zpf4.sqrt();
    let zpf = zpf2.sqrt();
    let g3 = d[3] * zpf2 * zpf / 6.0;
    let mut g4 = d[4] * zpf4 / 24.0;
    let omega_lin = (8.0 * ec * u2).sqrt();
    let omega_a = omega_lin + 12.0 * g4;
    if opts.cubic_correction {
        // absorbs the second-order cubic shift into an effective quartic term
        g4 -= 5.0 * g3 * g3 / omega_a;
    }
    let k = -6.0 * g4;
    let g2_ac = pot
        .pump_curvature(phi_min)
        .map(|f2| 0.5 * f2 * zpf2)
        .unwrap_or(0.0);
    Ok((
        ExtractedParams {
            omega_a,
            k,
            g4,
            g2_ac,
            gamma: None,
            phi_min,
        },
        HoaDiagnostics {
            phi_zpf: zpf,
            g3,
            anharmonicity_ratio: k.abs() / omega_a,
            derivatives: d,
        },
    ))
}

/// Symmetric bias points with closed-form frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecialPoint {
    /// Highest-frequency point.
    Highest,
    /// Saddle point where the first-order pump term cancels.
    Working,
    /// Saddle point where the first-order pump term is enhanced.
    AtsLike,
}

impl SpecialPoint {
    /// Signs of (r1, r2) in the curvature at φ = 0.
    fn signs(self) -> (f64, f64) {
        match self {
            SpecialPoint::Highest => (1.0, 1.0),
            SpecialPoint::Working => (1.0, -1.0),
            SpecialPoint::AtsLike => (-1.0, -1.0),
        }
    }

    /// External flux realising the point in the convention of [`potential`],
    /// where the r2 branch sees `φe1 + φe2`.
    pub fn flux(self) -> FluxPoint {
        match self {
            SpecialPoint::Highest => FluxPoint::new(0.0, 0.0, 0.0),
            SpecialPoint::Working => FluxPoint::new(0.0, PI, 0.0),
            SpecialPoint::AtsLike => FluxPoint::new(PI, 0.0, 0.0),
        }
    }
}

/// Dimensionless curvature and quartic coefficients `(c2, c4)` at φ = 0,
/// with `U''/Ej = c2` and `U''''/Ej = -c4`.
pub fn special_point_coefficients(config: &JunctionConfig, point: SpecialPoint) -> (f64, f64) {
    let (s1, s2) = point.signs();
    let nr = config.n_r as f64;
    let nl = config.n_l as f64;
    let c2 = s1 * config.r1 + s2 * config.r2 + config.r3 / nr + 1.0 / nl;
    let c4 = s1 * config.r1 + s2 * config.r2 + config.r3 / nr.powi(3) + 1.0 / nl.powi(3);
    (c2, c4)
}

/// `sqrt(8 Ej Ec c2) - (c4/c2) Ec` for one special point.
pub fn special_point_frequency(config: &JunctionConfig, point: SpecialPoint) -> Result<f64> {
    let (c2, c4) = special_point_coefficients(config, point);
    if c2 <= 0.0 {
        return Err(Error::InvalidRegime(format!(
            "{point:?}: curvature radicand {c2:.4} <= 0"
        )));
    }
    Ok((8.0 * config.ej * config.ec * c2).sqrt() - c4 / c2 * config.ec)
}

/// `(ω_000, ω_0π0, ω_ππ0)` in MHz.
pub fn special_point_frequencies(config: &JunctionConfig) -> Result<(f64, f64, f64)> {
    Ok((
        special_point_frequency(config, SpecialPoint::Highest)?,
        special_point_frequency(config, SpecialPoint::Working)?,
        special_point_frequency(config, SpecialPoint::AtsLike)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JunctionSolution {
    pub ej: f64,
    pub r1: f64,
    pub r2: f64,
    /// Condition number of the relative-sensitivity Jacobian
    /// `d ln f / d ln (Ej, r1, r2)`.
    pub condition: f64,
    /// Largest relative parameter change per unit relative frequency error
    /// (inverse smallest singular value of the same Jacobian).
    pub amplification: f64,
    pub relative_residual: f64,
}

/// Recovers `(Ej, r1, r2)` from the three special-point frequencies,
/// assuming `r3 = (r1 + r2)/2` and the `n_r`, `n_L` of `template`.
///
/// The system can have more than one root; Newton iteration starts from the
/// design values in `template` and only falls back to a multi-start search
/// when that fails, so the root nearest the design is returned.
pub fn solve_junction_params(
    f000: f64,
    f0pi0: f64,
    fpipi0: f64,
    ec: f64,
    template: &JunctionConfig,
) -> Result<JunctionSolution> {
    let target = Vector3::new(f000, f0pi0, fpipi0);
    let model = |x: &Vector3<f64>| -> Option<Vector3<f64>> {
        let cfg = JunctionConfig {
            ej: x[0],
            ec,
            r1: x[1],
            r2: x[2],
            r3: 0.5 * (x[1] + x[2]),
            ..*template
        };
        let (a, b, c) = special_point_frequencies(&cfg).ok()?;
        Some(Vector3::new(a, b, c))
    };
    let residual = |x: &Vector3<f64>| -> Option<Vector3<f64>> {
        model(x).map(|f| (f - target).component_div(&target))
    };
    let jacobian = |x: &Vector3<f64>| -> Option<Matrix3<f64>> {
        let mut j = Matrix3::zeros();
        for k in 0..3 {
            let h = 1e-7 * x[k].abs().max(1e-6);
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h;
            xm[k] -= h;
            let col = (residual(&xp)? - residual(&xm)?) / (2.0 * h);
            j.set_column(k, &col);
        }
        Some(j)
    };

    let mut starts = vec![Vector3::new(template.ej, template.r1, template.r2)];
    for s in [0.5, 1.0, 2.0] {
        let ej0 = s * f000 * f000 / (8.0 * ec * 0.5);
        for (r10, r20) in [(0.1, 0.1), (0.05, 0.07), (0.2, 0.15), (0.3, 0.3)] {
            starts.push(Vector3::new(ej0, r10, r20));
        }
    }
    let mut best: Option<(Vector3<f64>, f64)> = None;
    for start in starts {
        {
            let mut x = start;
            let Some(mut r) = residual(&x) else { continue };
            for _ in 0..200 {
                let Some(j) = jacobian(&x) else { break };
                let Some(step) = j.lu().solve(&(-r)) else {
                    break;
                };
                // backtrack to stay inside the valid region and reduce the residual
                let mut t = 1.0;
                let mut accepted = false;
                while t > 1e-6 {
                    let xn = x + step * t;
                    if xn[0] > 0.0 && xn[1] > 0.0 && xn[2] > 0.0 && xn[1] < 1.0 && xn[2] < 1.0 {
                        if let Some(rn) = residual(&xn) {
                            if rn.norm() < r.norm() {
                                x = xn;
                                r = rn;
                                accepted = true;
                                break;
                            }
                        }
                    }
                    t *= 0.5;
                }
                if !accepted || r.norm() < 1e-15 {
                    break;
                }
            }
            let rn = r.norm();
            if best.is_none_or(|(_, b)| rn < b) {
                best = Some((x, rn));
            }
        }
        if best.is_some_and(|(_, b)| b < 1e-12) {
            break;
        }
    }
    let (x, rn) = best.ok_or_else(|| Error::NoConvergence("no valid starting point".into()))?;
    if rn > 1e-9 {
        return Err(Error::NoConvergence(format!(
            "junction solve residual {rn:.2e}"
        )));
    }
    let j = jacobian(&x).ok_or_else(|| Error::NoConvergence("degenerate solution".into()))?;
    // relative sensitivities: scale columns by the parameter values
    let jrel = j * Matrix3::from_diagonal(&x);
    let sv = jrel.singular_values();
    let condition = sv.max() / sv.min();
    Ok(JunctionSolution {
        ej: x[0],
        r1: x[1],
        r2: x[2],
        condition,
        amplification: 1.0 / sv.min(),
        relative_residual: rn,
    })
}

/// Linear current-to-flux map `φ_e = M (I - I0)`, currents in mA.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiMatrix {
    pub m: Matrix3<f64>,
    pub i0: Vector3<f64>,
}

impl PhiMatrix {
    pub fn new(m: Matrix3<f64>, i0: Vector3<f64>) -> Result<Self> {
        if !(m.determinant().abs() > 1e-14 * m.norm().powi(3)) {
            return Err(Error::SingularMatrix);
        }
        Ok(Self { m, i0 })
    }

    /// The measured matrix of the reference device (rad/mA).
    pub fn reference_device() -> Self {
        let m = Matrix3::new(
            -0.031, 0.041, 0.065, //
            -0.037, -0.083, 0.070, //
            -0.040, 0.200, 0.135,
        ) * PI;
        Self {
            m,
            i0: Vector3::zeros(),
        }
    }

    pub fn condition_number(&self) -> f64 {
        let sv = self.m.singular_values();
        sv.max() / sv.min()
    }
}

pub fn flux_from_currents(pm: &PhiMatrix, currents: &Vector3<f64>) -> FluxPoint {
    let phi = pm.m * (currents - pm.i0);
    FluxPoint::new(phi[0], phi[1], phi[2])
}

/// Currents producing `flux` (principal branch of each loop flux).
pub fn currents_from_flux(pm: &PhiMatrix, flux: &FluxPoint) -> Result<Vector3<f64>> {
    let x =
        pm.m.lu()
            .solve(&flux.as_vector())
            .ok_or(Error::SingularMatrix)?;
    Ok(x + pm.i0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PifsPoint {
    pub eps_p: f64,
    pub delta_omega_mhz: f64,
    pub delta_k_mhz: f64,
    pub eps2_mhz: f64,
    pub alpha_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PifsCurve {
    pub points: Vec<PifsPoint>,
    /// `Δ_PI = -Δω = γ ε₂²` (least squares through the origin), 1/MHz.
    pub gamma_per_mhz: f64,
    /// Slope of `ln|Δω|` against `ln ε₂`.
    pub exponent: f64,
    /// Unpumped extraction at the working point.
    pub base: ExtractedParams,
}

/// Pump-induced frequency shift versus pump amplitude at a working point.
pub fn pifs_curve(
    config: &JunctionConfig,
    delta_phi: f64,
    eps_p: &[f64],
    opts: HoaOptions,
) -> Result<PifsCurve> {
    let base_pot = pumped_static_potential(config, delta_phi, 0.0)?;
    let (base, _) = hoa_extract(&base_pot, config, opts)?;
    let mut points = Vec::with_capacity(eps_p.len());
    for &ep in eps_p {
        let pot = pumped_static_potential(config, delta_phi, ep)?;
        let (p, _) = hoa_extract(&pot, config, opts)?;
        let eps2 = p.g2_ac * ep / 2.0;
        points.push(PifsPoint {
            eps_p: ep,
            delta_omega_mhz: p.omega_a - base.omega_a,
            delta_k_mhz: p.k - base.k,
            eps2_mhz: eps2,
            alpha_sq: eps2.abs() / p.k,
        });
    }

    let (num, den) = points.iter().fold((0.0, 0.0), |(n, d), p| {
        let e2 = p.eps2_mhz * p.eps2_mhz;
        (n - p.delta_omega_mhz * e2, d + e2 * e2)
    });
    let gamma = if den > 0.0 { num / den } else { 0.0 };

    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.eps2_mhz.abs() > 0.0 && p.delta_omega_mhz.abs() > 0.0)
        .map(|p| (p.eps2_mhz.abs().ln(), p.delta_omega_mhz.abs().ln()))
        .collect();
    let exponent = if logs.len() >= 2 {
        crate::fit::linear_regression(&logs).0
    } else {
        f64::NAN
    };

    let mut base = base;
    base.gamma = Some(gamma);
    Ok(PifsCurve {
        points,
        gamma_per_mhz: gamma,
        exponent,
        base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference() -> JunctionConfig {
        JunctionConfig::reference_device()
    }

    #[test]
    fn potential_at_zero_flux_origin() {
        let c = reference();
        let u = potential(&c, &FluxPoint::new(0.0, 0.0, 0.0), 0.0);
        let expected = -c.ej * (c.r1 + c.r2 + c.n_r as f64 * c.r3 + c.n_l as f64);
        assert_relative_eq!(u, expected, max_relative = 1e-14);
    }

    #[test]
    fn zero_flux_origin_is_local_minimum() {
        let pot = NemsPotential::new(reference(), FluxPoint::new(0.0, 0.0, 0.0));
        let d = pot.derivatives(0.0);
        assert!(d[1].abs() < 1e-9);
        assert!(d[2] > 0.0);
    }

    #[test]
    fn working_saddle_curvature_matches_closed_form() {
        let c = reference();
        let pot = NemsPotential::new(c, FluxPoint::new(0.0, PI, 0.0));
        let phi_min = find_minimum(&pot).unwrap();
        assert!(phi_min.abs() < 1e-9);
        let analytic = pot.derivatives(phi_min)[2] / c.ej;
        let expected = c.r1 - c.r2 + c.r3 / 3.0 + 1.0 / 5.0;
        assert_relative_eq!(analytic, expected, max_relative = 1e-12);
        let h = 1e-4;
        let fd = (pot.value(h) - 2.0 * pot.value(0.0) + pot.value(-h)) / (h * h) / c.ej;
        assert_relative_eq!(fd, expected, max_relative = 1e-5);
    }

    #[test]
    fn pump_scaling() {
        let c = reference();
        let p = pumped_static_potential(&c, 0.08 * PI, 0.2).unwrap();
        assert_eq!(p.pumped_scale, 0.99);
        let p0 = pumped_static_potential(&c, 0.08 * PI, 0.0).unwrap();
        let direct = NemsPotential::new(c, FluxPoint::working_point(0.08 * PI));
        for phi in [-1.0, 0.0, 0.3, 2.0] {
            assert_eq!(p0.value(phi), direct.value(phi));
        }
        assert!(matches!(
            pumped_static_potential(&c, 0.08 * PI, 0.5),
            Err(Error::PumpTooStrong(_))
        ));
    }

    #[test]
    fn curvature_decreases_with_pump() {
        let c = reference();
        let mut prev = f64::INFINITY;
        for k in 0..=10 {
            let ep = 0.04 * k as f64;
            let pot = pumped_static_potential(&c, 0.08 * PI, ep).unwrap();
            let x = find_minimum(&pot).unwrap();
            let u2 = pot.derivatives(x)[2];
            assert!(u2 < prev || k == 0, "eps_p {ep}: {u2} !< {prev}");
            prev = u2;
        }
    }

    #[test]
    fn quadratic_potential_exact() {
        let c = JunctionConfig {
            ec: 226.0,
            ..reference()
        };
        let (p, _) = hoa_extract(
            &QuadraticPotential { c2: 5000.0 },
            &c,
            HoaOptions::default(),
        )
        .unwrap();
        assert_eq!(p.g4, 0.0);
        assert!((p.omega_a - (8.0f64 * 226.0 * 5000.0).sqrt()).abs() < 1e-10);
        assert_eq!(p.k, -6.0 * p.g4);
    }

    #[test]
    fn hoa_matches_closed_form_at_highest_point() {
        let c = reference();
        let pot = NemsPotential::new(c, SpecialPoint::Highest.flux());
        let (p, _) = hoa_extract(&pot, &c, HoaOptions::default()).unwrap();
        let closed = special_point_frequency(&c, SpecialPoint::Highest).unwrap();
        assert!((p.omega_a / closed - 1.0).abs() < 1e-3);
    }

    #[test]
    fn working_point_frequency_near_reference() {
        let c = reference();
        let pot = pumped_static_potential(&c, 0.08 * PI, 0.0).unwrap();
        let (p, diag) = hoa_extract(&pot, &c, HoaOptions::default()).unwrap();
        assert!((p.omega_a / 5600.0 - 1.0).abs() < 0.10, "{}", p.omega_a);
        assert!(diag.anharmonicity_ratio < 0.01);
        assert_relative_eq!(p.k, -6.0 * p.g4, max_relative = 1e-9);
    }

    #[test]
    fn working_point_kerr_near_reference() {
        let c = reference();
        let pot = pumped_static_potential(&c, 0.08 * PI, 0.0).unwrap();
        let (p, _) = hoa_extract(&pot, &c, HoaOptions::default()).unwrap();
        assert!((p.k / 6.9 - 1.0).abs() < 0.25, "K = {}", p.k);
    }

    #[test]
    fn cubic_correction_raises_kerr_and_keeps_identity() {
        let c = reference();
        let pot = pumped_static_potential(&c, 0.08 * PI, 0.0).unwrap();
        let (plain, diag) = hoa_extract(&pot, &c, HoaOptions::default()).unwrap();
        let (cubic, _) = hoa_extract(
            &pot,
            &c,
            HoaOptions {
                cubic_correction: true,
            },
        )
        .unwrap();
        let expected = plain.k + 30.0 * diag.g3 * diag.g3 / plain.omega_a;
        assert_relative_eq!(cubic.k, expected, max_relative = 1e-12);
        assert_relative_eq!(cubic.k, -6.0 * cubic.g4, max_relative = 1e-9);
    }

    #[test]
    fn working_saddle_frequency_about_5p63_ghz() {
        let f = special_point_frequency(&reference(), SpecialPoint::Working).unwrap();
        assert!((f - 5630.0).abs() < 10.0, "{f}");
        // with r = 0.16 the ATS-like radicand is negative
        assert!(matches!(
            special_point_frequencies(&reference()),
            Err(Error::InvalidRegime(_))
        ));
    }

    #[test]
    fn working_saddle_independent_of_split_when_equal() {
        let a = JunctionConfig {
            r1: 0.12,
            r2: 0.12,
            ..reference()
        };
        let b = JunctionConfig {
            r1: 0.2,
            r2: 0.2,
            ..reference()
        };
        let fa = special_point_frequency(&a, SpecialPoint::Working).unwrap();
        let fb = special_point_frequency(&b, SpecialPoint::Working).unwrap();
        assert_eq!(fa, fb);
    }

    fn ats_valid() -> JunctionConfig {
        JunctionConfig {
            r1: 0.07,
            r2: 0.09,
            r3: 0.08,
            ..reference()
        }
    }

    #[test]
    fn closed_forms_agree_with_generic_hoa() {
        for c in [
            ats_valid(),
            JunctionConfig {
                r2: 0.14,
                ..reference()
            },
        ] {
            for point in [
                SpecialPoint::Highest,
                SpecialPoint::Working,
                SpecialPoint::AtsLike,
            ] {
                let Ok(closed) = special_point_frequency(&c, point) else {
                    continue;
                };
                let pot = NemsPotential::new(c, point.flux());
                let (p, _) = hoa_extract(&pot, &c, HoaOptions::default()).unwrap();
                assert!(
                    (p.omega_a / closed - 1.0).abs() < 2e-3,
                    "{point:?}: {} vs {closed}",
                    p.omega_a
                );
            }
        }
    }

    #[test]
    fn junction_round_trip() {
        let truth = ats_valid();
        let (a, b, c) = special_point_frequencies(&truth).unwrap();
        let sol = solve_junction_params(a, b, c, truth.ec, &truth).unwrap();
        assert_relative_eq!(sol.ej, truth.ej, max_relative = 1e-6);
        assert_relative_eq!(sol.r1, truth.r1, max_relative = 1e-6);
        assert_relative_eq!(sol.r2, truth.r2, max_relative = 1e-6);
        assert!(sol.relative_residual < 1e-6);
    }

    #[test]
    fn junction_symmetric_case() {
        let truth = JunctionConfig {
            r1: 0.08,
            r2: 0.08,
            r3: 0.08,
            ..reference()
        };
        let (a, b, c) = special_point_frequencies(&truth).unwrap();
        let sol = solve_junction_params(a, b, c, truth.ec, &truth).unwrap();
        assert_relative_eq!(sol.r1, 0.08, max_relative = 1e-8);
        assert_relative_eq!(sol.r2, 0.08, max_relative = 1e-8);
    }

    #[test]
    fn junction_sensitivity_bounded() {
        let truth = ats_valid();
        let (a, b, c) = special_point_frequencies(&truth).unwrap();
        let exact = solve_junction_params(a, b, c, truth.ec, &truth).unwrap();
        let sol = solve_junction_params(a, b, c * 1.001, truth.ec, &truth).unwrap();
        let rel = [
            (sol.ej / truth.ej - 1.0).abs(),
            (sol.r1 / truth.r1 - 1.0).abs(),
            (sol.r2 / truth.r2 - 1.0).abs(),
        ];
        let shift = rel.iter().cloned().fold(0.0, f64::max);
        // linear response: a 0.1% input error moves parameters by at most
        // amplification * 0.1% (with slack for curvature)
        assert!(
            shift <= exact.amplification * 1e-3 * 1.5,
            "{shift} vs amplification {}",
            exact.amplification
        );
        assert!(exact.condition.is_finite() && exact.condition >= 1.0);
    }

    #[test]
    fn phi_matrix_basics() {
        let pm = PhiMatrix::new(
            PhiMatrix::reference_device().m,
            Vector3::new(0.1, -0.2, 0.3),
        )
        .unwrap();
        let f = flux_from_currents(&pm, &pm.i0);
        assert_eq!((f.phi_e1, f.phi_e2, f.phi_e3), (0.0, 0.0, 0.0));

        let i = Vector3::new(0.5, -1.0, 2.0);
        let back = currents_from_flux(&pm, &flux_from_currents(&pm, &i)).unwrap();
        assert!((back - i).norm() < 1e-10);

        let reference = PhiMatrix::reference_device();
        let unit = flux_from_currents(&reference, &Vector3::new(0.0, 1.0, 0.0));
        let col = reference.m.column(1);
        assert_relative_eq!(
            unit.phi_e1 / unit.phi_e2,
            col[0] / col[1],
            max_relative = 1e-12
        );
        assert_relative_eq!(
            unit.phi_e3 / unit.phi_e2,
            col[2] / col[1],
            max_relative = 1e-12
        );

        assert!(matches!(
            PhiMatrix::new(Matrix3::zeros(), Vector3::zeros()),
            Err(Error::SingularMatrix)
        ));
    }

    #[test]
    fn pifs_quadratic_with_positive_gamma() {
        let c = reference();
        let eps: Vec<f64> = (0..=9).map(|k| 0.02 * (k + 1) as f64).collect();
        let curve = pifs_curve(&c, 0.08 * PI, &eps, HoaOptions::default()).unwrap();
        assert!((curve.exponent - 2.0).abs() < 0.1, "{}", curve.exponent);
        assert!(curve.gamma_per_mhz > 0.0);
        let zero = pifs_curve(&c, 0.08 * PI, &[0.0], HoaOptions::default()).unwrap();
        assert_eq!(zero.points[0].delta_omega_mhz, 0.0);
    }

    fn arb_config() -> impl Strategy<Value = JunctionConfig> {
        (
            1e4f64..1e5,
            100f64..400.0,
            0.02f64..0.3,
            0.02f64..0.3,
            0.02f64..0.3,
        )
            .prop_map(|(ej, ec, r1, r2, r3)| JunctionConfig {
                ej,
                ec,
                r1,
                r2,
                r3,
                n_r: 3,
                n_l: 5,
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn analytic_derivatives_match_fd(cfg in arb_config(),
                                         e1 in -PI..PI, e2 in -PI..PI, e3 in -PI..PI,
                                         phi in -6.0f64..6.0) {
            let pot = NemsPotential::new(cfg, FluxPoint::new(e1, e2, e3));
            let h = 1e-5;
            let d = pot.derivatives(phi);
            let dp = pot.derivatives(phi + h);
            let dm = pot.derivatives(phi - h);
            let scale = cfg.ej * (cfg.r1 + cfg.r2 + 3.0 * cfg.r3 + 5.0);
            for k in 0..4 {
                let fd = (dp[k] - dm[k]) / (2.0 * h);
                let err = (fd - d[k + 1]).abs();
                prop_assert!(err <= 1e-6 * d[k + 1].abs() + 1e-9 * scale, "order {}: {} vs {}", k + 1, fd, d[k + 1]);
            }
        }

        // "valid" = the leading charging correction is below 10% of the
        // harmonic term at both points, i.e. the closed forms apply
        #[test]
        fn highest_above_working(cfg in arb_config().prop_filter("closed forms valid", |c| {
            [SpecialPoint::Highest, SpecialPoint::Working].iter().all(|&p| {
                let (c2, c4) = special_point_coefficients(c, p);
                c2 > 0.0 && (c4 / c2 * c.ec).abs() < 0.1 * (8.0 * c.ej * c.ec * c2).sqrt()
            })
        })) {
            if let (Ok(a), Ok(b)) = (special_point_frequency(&cfg, SpecialPoint::Highest),
                                     special_point_frequency(&cfg, SpecialPoint::Working)) {
                prop_assert!(a > b);
            }
        }
    }
}
