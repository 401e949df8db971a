//! Cat-lifetime scans: prepare a Fock superposition, ramp up, hold, ramp
//! down and project back, as a function of the assumed plateau compensation.

use super::integrate::{propagate, propagate_adjoint, Equation, HamiltonianPath, Tolerance};
use super::readout::plateau_params;
use super::LindbladModel;
use crate::error::{Error, Result};
use crate::fit::fit_exponential;
use crate::fock::HilbertSpace;
use crate::linalg::{trace_product, CMat};
use crate::schedule::{CompensationStrategy, PumpSchedule, RampSpec, Segment};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Scan definition. The true pump shift is `gamma · eps2_kc²`; each point
/// assumes the plateau compensation `delta_as_kc` instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T1catGrid {
    pub k_mhz: f64,
    pub eps2_kc: f64,
    pub gamma: f64,
    pub t_up: f64,
    /// Preparation phases `θ₂` of `(|0> + e^{iθ₂}|1>)/√2`.
    pub theta2: Vec<f64>,
    /// Assumed plateau compensations `Δ_as,KC` (MHz).
    pub delta_as_kc: Vec<f64>,
    /// Hold durations (ns), ascending.
    pub holds: Vec<f64>,
}

impl T1catGrid {
    pub fn validate(&self) -> Result<()> {
        let spec = RampSpec::new(
            self.eps2_kc,
            self.t_up,
            self.gamma,
            CompensationStrategy::Dynamic,
        );
        spec.validate()?;
        if self.theta2.is_empty() || self.delta_as_kc.is_empty() {
            return Err(Error::InvalidParameter("empty t1cat grid".into()));
        }
        if self.holds.len() < 4 {
            return Err(Error::InvalidParameter(
                "t1cat needs at least 4 hold times".into(),
            ));
        }
        if self.holds[0] < 0.0 || self.holds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "hold times must be >= 0 and ascending".into(),
            ));
        }
        if self
            .delta_as_kc
            .iter()
            .chain(&self.theta2)
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidParameter(
                "non-finite t1cat grid value".into(),
            ));
        }
        Ok(())
    }

    /// Lifetime reported for points without resolvable decay: a thousand
    /// times the hold span.
    pub fn lifetime_cap(&self) -> f64 {
        let span = self.holds.last().map_or(0.0, |h| h - self.holds[0]);
        1e3 * span.max(1.0)
    }

    /// `n` evenly spaced values in `[lo, hi]`.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T1catPoint {
    pub theta2: f64,
    pub delta_as_kc: f64,
    /// Fitted lifetime (ns); capped when no decay is resolved.
    pub t1cat: Option<f64>,
    pub no_decay: bool,
    pub fit_error: Option<String>,
    /// Readout phase that maximises the zero-hold signal.
    pub readout_phase: f64,
    pub signal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T1catSurface {
    pub grid: T1catGrid,
    pub points: Vec<T1catPoint>,
    /// Index into `points` of the longest fitted lifetime.
    pub argmax: Option<usize>,
    /// Calibrated plateau compensation `Δ_PI,KC` at the argmax.
    pub delta_pi_kc: Option<f64>,
    /// Lifetime cap applied to non-decaying points (ns).
    pub cap: f64,
}

impl T1catSurface {
    pub fn best(&self) -> Option<&T1catPoint> {
        self.argmax.map(|i| &self.points[i])
    }

    /// CSV `theta2,delta_as_kc_mhz,t1cat_ns,no_decay,fit_error`; commas in
    /// error messages are replaced so every row keeps five fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta2,delta_as_kc_mhz,t1cat_ns,no_decay,fit_error\n");
        for p in &self.points {
            let t = p.t1cat.map(|t| t.to_string()).unwrap_or_default();
            let e = p.fit_error.as_deref().unwrap_or_default().replace(',', ";");
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.theta2, p.delta_as_kc, t, p.no_decay, e
            ));
        }
        out
    }
}

fn unit(d: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(d, d);
    m[(i, j)] = C64::new(1.0, 0.0);
    m
}

/// Runs the lifetime scan. Both the preparation and the readout act on the
/// Fock qubit, so the whole scan reduces (by linearity) to three forward
/// ramp-up evolutions, three hold propagations and three adjoint ramp-down
/// evolutions per compensation value.
pub fn t1cat_experiment(
    grid: &T1catGrid,
    space: HilbertSpace,
    model: Option<&LindbladModel>,
    tol: &Tolerance,
) -> Result<T1catSurface> {
    grid.validate()?;
    if let Some(m) = model {
        m.validate()?;
    }
    let d = space.dim();
    let eq = Equation::lindblad(model);
    let cap = grid.lifetime_cap();
    let mut points = Vec::with_capacity(grid.theta2.len() * grid.delta_as_kc.len());

    for &das in &grid.delta_as_kc {
        let spec = RampSpec::new(
            grid.eps2_kc,
            grid.t_up,
            grid.gamma,
            CompensationStrategy::Dynamic,
        )
        .with_compensation_plateau(Some(das));
        let mut up = PumpSchedule::empty(spec)?;
        up.push(Segment::RampUp {
            duration: grid.t_up,
        })?;
        let mut down = PumpSchedule::empty(spec)?;
        down.push(Segment::RampDown {
            duration: grid.t_up,
        })?;
        let up = HamiltonianPath::from_schedule(&up, grid.k_mhz)?;
        let down = HamiltonianPath::from_schedule(&down, grid.k_mhz)?;
        let hold = HamiltonianPath::constant(
            plateau_params(&spec, grid.k_mhz),
            *grid.holds.last().unwrap(),
        )?;
        space.require_amplitude(up.max_alpha())?;

        // images of |i><j| after ramp-up and each hold
        let mut held: Vec<[CMat; 3]> = vec![Default::default(); grid.holds.len()];
        for (slot, (i, j)) in [(0, 0), (1, 1), (0, 1)].into_iter().enumerate() {
            let (mut ys, _) = propagate(&up, eq, unit(d, i, j), &[grid.t_up], tol)?;
            let (hs, _) = propagate(&hold, eq, ys.pop().expect("one sample"), &grid.holds, tol)?;
            for (k, y) in hs.into_iter().enumerate() {
                held[k][slot] = y;
            }
        }
        // Heisenberg images of |i><j| through the ramp-down
        let adj = |i: usize, j: usize| -> Result<CMat> {
            Ok(propagate_adjoint(&down, eq, unit(d, i, j), tol)?.0)
        };
        let (a00, a11, a01) = (adj(0, 0)?, adj(1, 1)?, adj(0, 1)?);

        for &theta in &grid.theta2 {
            // ρ(θ) = ½(E00 + E11 + e^{-iθ} E01 + e^{iθ} E10)
            let ph = C64::from_polar(1.0, -theta);
            let rho = |k: usize| -> CMat {
                let [e00, e11, e01] = &held[k];
                (e00 + e11 + e01 * ph + e01.adjoint() * ph.conj()) * C64::new(0.5, 0.0)
            };
            // signal(φ) = ½Tr((A00+A11)ρ) + Re(e^{-iφ} Tr(A01 ρ))
            let parts: Vec<(f64, C64)> = (0..grid.holds.len())
                .map(|k| {
                    let r = rho(k);
                    let pop = 0.5 * (trace_product(&a00, &r) + trace_product(&a11, &r)).re;
                    (pop, trace_product(&a01, &r))
                })
                .collect();
            let phi = parts[0].1.arg();
            let signal: Vec<f64> = parts
                .iter()
                .map(|(pop, coh)| pop + (C64::from_polar(1.0, -phi) * coh).re)
                .collect();
            let (t1cat, no_decay, fit_error) = lifetime(&grid.holds, &signal, cap);
            points.push(T1catPoint {
                theta2: theta,
                delta_as_kc: das,
                t1cat,
                no_decay,
                fit_error,
                readout_phase: phi,
                signal,
            });
        }
    }

    Ok(T1catSurface::assemble(grid.clone(), points, cap))
}

impl T1catSurface {
    /// Builds a surface from scan points (possibly computed in separate
    /// runs over parts of `grid`), selecting the longest fitted lifetime;
    /// ties keep the earliest point.
    pub fn assemble(grid: T1catGrid, points: Vec<T1catPoint>, cap: f64) -> Self {
        let argmax = points
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.t1cat.map(|t| (i, t)))
            .fold(None, |best: Option<(usize, f64)>, (i, t)| match best {
                Some((_, bt)) if bt >= t => best,
                _ => Some((i, t)),
            })
            .map(|(i, _)| i);
        Self {
            grid,
            delta_pi_kc: argmax.map(|i| points[i].delta_as_kc),
            points,
            argmax,
            cap,
        }
    }
}

/// Fits `A e^{-t/τ} + c`; unresolved decay is capped and flagged.
fn lifetime(holds: &[f64], signal: &[f64], cap: f64) -> (Option<f64>, bool, Option<String>) {
    let lo = signal.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = signal.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-7 {
        return (Some(cap), true, None);
    }
    // everything after the first sample already sits at the floor: the
    // decay is faster than the hold step and no time constant is resolvable
    let tail = &signal[1.min(signal.len())..];
    let tail_lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let tail_hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if holds.len() > 2 && tail_hi - tail_lo < 1e-3 * (hi - lo) {
        let step = holds[1] - holds[0];
        return (
            None,
            false,
            Some(format!("decay faster than the first hold step ({step} ns)")),
        );
    }
    match fit_exponential(holds, signal) {
        Ok(f) if f.tau >= cap => (Some(cap), true, None),
        Ok(f) if f.amplitude > 0.0 => (Some(f.tau), false, None),
        Ok(f) => (
            None,
            false,
            Some(format!("rising signal (amplitude {})", f.amplitude)),
        ),
        Err(e) => (None, false, Some(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: f64 = 6.9;
    const GAMMA: f64 = 5.1 / (9.7 * 9.7);

    fn grid(das: Vec<f64>, holds: Vec<f64>) -> T1catGrid {
        T1catGrid {
            k_mhz: K,
            eps2_kc: 9.7,
            gamma: GAMMA,
            t_up: 320.0,
            theta2: T1catGrid::linspace(0.0, 1.5 * std::f64::consts::PI, 4),
            delta_as_kc: das,
            holds,
        }
    }

    #[test]
    fn noiseless_exact_compensation_does_not_decay() {
        let g = grid(vec![5.1], T1catGrid::linspace(0.0, 2000.0, 6));
        let s = t1cat_experiment(
            &g,
            HilbertSpace::new(20).unwrap(),
            None,
            &Tolerance::default(),
        )
        .unwrap();
        let best = s.best().unwrap();
        assert!(best.no_decay);
        assert_eq!(best.t1cat, Some(s.cap));
    }

    fn scan(model: &LindbladModel, theta_points: usize) -> T1catSurface {
        let mut g = grid(
            T1catGrid::linspace(4.1, 6.1, 5),
            T1catGrid::linspace(0.0, 24000.0, 13),
        );
        g.theta2 = T1catGrid::linspace(0.0, 2.0 * std::f64::consts::PI, theta_points);
        t1cat_experiment(
            &g,
            HilbertSpace::new(20).unwrap(),
            Some(model),
            &Tolerance::default(),
        )
        .unwrap()
    }

    #[test]
    fn loss_only_lifetime_peaks_at_the_true_shift() {
        // single-photon loss alone: the X-axis cat outlives the Fock qubit
        let model = LindbladModel::from_us(6.0, 12.0).unwrap();
        let s = scan(&model, 17);
        let best = s.best().unwrap();
        assert!((s.delta_pi_kc.unwrap() - 9.7 * 9.7 * GAMMA).abs() <= 0.5 + 1e-9);
        assert!(best.t1cat.unwrap() > 1.5 * model.t1_ns, "{:?}", best.t1cat);
        assert!(s
            .to_csv()
            .starts_with("theta2,delta_as_kc_mhz,t1cat_ns,no_decay,fit_error\n"));
    }

    #[test]
    fn dephased_lifetime_still_selects_the_true_shift() {
        let model = LindbladModel::from_us(6.0, 3.0).unwrap();
        let s = scan(&model, 9);
        assert!((s.delta_pi_kc.unwrap() - 9.7 * 9.7 * GAMMA).abs() <= 0.5 + 1e-9);
    }

    /// Markovian number dephasing at T2 = 3 µs drives the plateau cat out
    /// of its well at about 2Γφ|α|² ≈ 1/(1.4 µs), so the peak lifetime is
    /// ≈ 1.4 µs rather than above 1.5·T1.
    #[test]
    #[ignore = "not reproduced by white-noise dephasing; see README"]
    fn paper_coherence_lifetime_exceeds_t1() {
        let model = LindbladModel::from_us(6.0, 3.0).unwrap();
        let s = scan(&model, 17);
        let best = s.best().unwrap();
        assert!(best.t1cat.unwrap() > 1.5 * model.t1_ns, "{:?}", best.t1cat);
    }

    #[test]
    fn rejects_bad_grids() {
        let mut g = grid(vec![5.1], vec![0.0, 1.0, 2.0]);
        assert!(g.validate().is_err());
        g.holds = vec![0.0, 2.0, 1.0, 3.0];
        assert!(g.validate().is_err());
    }
}
