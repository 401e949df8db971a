//! Deterministic least-squares fits used by the calibration experiments.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Ordinary least squares `y = slope x + intercept`; returns
/// `(slope, intercept, r_squared)`.
pub fn linear_regression(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    (slope, intercept, r2)
}

/// Levenberg–Marquardt minimisation of `sum (model(p, x_i) - y_i)^2`.
///
/// Stops when the relative parameter change drops below `1e-9`.
pub fn levenberg_marquardt<F>(model: F, xs: &[f64], ys: &[f64], p0: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64], f64) -> f64,
{
    let np = p0.len();
    let n = xs.len();
    if n < np {
        return Err(Error::FitFailed(format!("{n} points for {np} parameters")));
    }
    let cost = |p: &[f64]| -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| (model(p, x) - y).powi(2))
            .sum()
    };
    let mut p = p0.to_vec();
    let mut c = cost(&p);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut j = DMatrix::<f64>::zeros(n, np);
        let mut r = DVector::<f64>::zeros(n);
        for i in 0..n {
            r[i] = ys[i] - model(&p, xs[i]);
        }
        for k in 0..np {
            let h = 1e-7 * p[k].abs().max(1e-7);
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp[k] += h;
            pm[k] -= h;
            for i in 0..n {
                j[(i, k)] = (model(&pp, xs[i]) - model(&pm, xs[i])) / (2.0 * h);
            }
        }
        let jtj = j.transpose() * &j;
        let jtr = j.transpose() * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..np {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let ct = cost(&trial);
            if ct.is_finite() && ct <= c {
                let rel = step
                    .iter()
                    .zip(&p)
                    .map(|(s, v)| s.abs() / v.abs().max(1e-12))
                    .fold(0.0, f64::max);
                p = trial;
                c = ct;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-9 {
                    return Ok(p);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step left: at a (local) minimum to working precision
            return Ok(p);
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    pub amplitude: f64,
    /// Angular frequency per unit of `x`.
    pub omega: f64,
    pub phase: f64,
    pub offset: f64,
}

impl SinusoidFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * (self.omega * x + self.phase).cos() + self.offset
    }

    /// Ordinary frequency (cycles per unit of `x`).
    pub fn frequency(&self) -> f64 {
        self.omega / (2.0 * PI)
    }
}

/// Periodogram peak over a dense frequency grid; returns angular frequency.
fn periodogram_peak(xs: &[f64], ys: &[f64]) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let span = xs.last().unwrap() - xs[0];
    let dx = span / (xs.len() - 1) as f64;
    let nyquist = PI / dx;
    let steps = 20 * xs.len();
    let mut best = (0.0, 0.0);
    for k in 1..=steps {
        let w = nyquist * k as f64 / steps as f64;
        let (mut c, mut s) = (0.0, 0.0);
        for (&x, &y) in xs.iter().zip(ys) {
            c += (y - mean) * (w * x).cos();
            s += (y - mean) * (w * x).sin();
        }
        let p = c * c + s * s;
        if p > best.1 {
            best = (w, p);
        }
    }
    best.0
}

/// Fit `A cos(ω x + φ) + c`, seeded by a periodogram estimate.
pub fn fit_sinusoid(xs: &[f64], ys: &[f64]) -> Result<SinusoidFit> {
    if xs.len() < 5 {
        return Err(Error::FitFailed("too few samples for a sinusoid".into()));
    }
    let w0 = periodogram_peak(xs, ys);
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    // linear least squares for (a, b, c) at fixed ω gives the seed
    let design = DMatrix::from_fn(xs.len(), 3, |i, k| match k {
        0 => (w0 * xs[i]).cos(),
        1 => (w0 * xs[i]).sin(),
        _ => 1.0,
    });
    let rhs = DVector::from_column_slice(ys);
    let sol = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::FitFailed(e.to_string()))?;
    let amp0 = sol[0].hypot(sol[1]);
    let phase0 = (-sol[1]).atan2(sol[0]);
    let seed = [
        amp0.max(1e-12),
        w0,
        phase0,
        if sol[2].is_finite() { sol[2] } else { mean },
    ];
    let p = levenberg_marquardt(|p, x| p[0] * (p[1] * x + p[2]).cos() + p[3], xs, ys, &seed)?;
    let mut fit = SinusoidFit {
        amplitude: p[0],
        omega: p[1],
        phase: p[2],
        offset: p[3],
    };
    if fit.amplitude < 0.0 {
        fit.amplitude = -fit.amplitude;
        fit.phase += PI;
    }
    if fit.omega < 0.0 {
        fit.omega = -fit.omega;
        fit.phase = -fit.phase;
    }
    fit.phase = fit.phase.rem_euclid(2.0 * PI);
    if !fit.omega.is_finite() || !fit.amplitude.is_finite() {
        return Err(Error::FitFailed("non-finite sinusoid parameters".into()));
    }
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialFit {
    pub amplitude: f64,
    pub tau: f64,
    pub offset: f64,
}

/// Fit `A exp(-x/τ) + c`; the seed comes from a log-linear fit against the
/// last sample as the offset estimate.
pub fn fit_exponential(xs: &[f64], ys: &[f64]) -> Result<ExponentialFit> {
    if xs.len() < 4 {
        return Err(Error::FitFailed(
            "too few samples for an exponential".into(),
        ));
    }
    let first = ys[0];
    let last = *ys.last().unwrap();
    let c0 = if (first - last).abs() > 1e-12 {
        last - 0.05 * (first - last)
    } else {
        last
    };
    let logs: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| (y - c0) * (first - c0) > 0.0)
        .map(|(&x, &y)| (x, ((y - c0) / (first - c0)).ln()))
        .collect();
    let tau0 = if logs.len() >= 2 {
        let (slope, _, _) = linear_regression(&logs);
        if slope < 0.0 {
            -1.0 / slope
        } else {
            10.0 * (xs.last().unwrap() - xs[0])
        }
    } else {
        10.0 * (xs.last().unwrap() - xs[0])
    };
    let x0 = xs[0];
    let p = levenberg_marquardt(
        |p, x| p[0] * (-(x - x0) / p[1]).exp() + p[2],
        xs,
        ys,
        &[first - c0, tau0, c0],
    )?;
    if !(p[1].is_finite() && p[1] > 0.0) {
        return Err(Error::FitFailed(format!(
            "non-physical decay time {}",
            p[1]
        )));
    }
    Ok(ExponentialFit {
        amplitude: p[0] * (x0 / p[1]).exp(),
        tau: p[1],
        offset: p[2],
    })
}
