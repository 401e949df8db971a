//! Truncated Fock-space algebra for a single bosonic mode.

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Fock truncation `|0>, ..., |dim-1>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpace {
    dim: usize,
}

impl HilbertSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!("Fock dimension {dim} < 2")));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, other: &HilbertSpace) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        Ok(())
    }

    /// Fails unless the truncation holds a coherent amplitude of modulus `alpha_abs`.
    pub fn require_amplitude(&self, alpha_abs: f64) -> Result<()> {
        let required = required_dim(alpha_abs);
        if self.dim < required {
            return Err(Error::TruncationTooSmall {
                dim: self.dim,
                required,
                alpha: alpha_abs,
            });
        }
        Ok(())
    }
}

/// Smallest truncation for coherent amplitude `|alpha|`: `|alpha|^2 + 6|alpha| + 10`.
pub fn required_dim(alpha_abs: f64) -> usize {
    (alpha_abs * alpha_abs + 6.0 * alpha_abs + 10.0).ceil() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: HilbertSpace,
    mat: CMat,
}

impl Operator {
    pub fn from_matrix(space: HilbertSpace, mat: CMat) -> Result<Self> {
        if mat.nrows() != space.dim || mat.ncols() != space.dim {
            return Err(Error::DimensionMismatch(space.dim, mat.nrows()));
        }
        Ok(Self { space, mat })
    }

    /// Wraps a matrix that must be Hermitian to `1e-12` relative.
    pub fn hermitian(space: HilbertSpace, mat: CMat) -> Result<Self> {
        let op = Self::from_matrix(space, mat)?;
        let defect = linalg::hermiticity_defect(&op.mat);
        if defect > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "operator is not Hermitian (defect {defect:.2e})"
            )));
        }
        Ok(op)
    }

    pub fn identity(space: HilbertSpace) -> Self {
        Self {
            space,
            mat: CMat::identity(space.dim, space.dim),
        }
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn dagger(&self) -> Self {
        Self {
            space: self.space,
            mat: self.mat.adjoint(),
        }
    }

    pub fn compose(&self, rhs: &Operator) -> Result<Self> {
        self.space.check(&rhs.space)?;
        Ok(Self {
            space: self.space,
            mat: &self.mat * &rhs.mat,
        })
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.space.check(&psi.space)?;
        Ok(StateVector {
            space: self.space,
            amps: &self.mat * &psi.amps,
        })
    }

    /// Eigenvalues and eigenvectors of a Hermitian operator, ascending.
    pub fn eigh(&self) -> (Vec<f64>, Vec<StateVector>) {
        let (vals, vecs) = linalg::herm_eigen(&self.mat);
        let states = (0..self.space.dim)
            .map(|k| StateVector {
                space: self.space,
                amps: vecs.column(k).into_owned(),
            })
            .collect();
        (vals, states)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: HilbertSpace,
    amps: CVec,
}

impl StateVector {
    pub fn from_amplitudes(space: HilbertSpace, amps: CVec) -> Result<Self> {
        if amps.len() != space.dim {
            return Err(Error::DimensionMismatch(space.dim, amps.len()));
        }
        Ok(Self { space, amps })
    }

    pub fn basis(space: HilbertSpace, n: usize) -> Result<Self> {
        if n >= space.dim {
            return Err(Error::InvalidParameter(format!(
                "Fock level {n} outside dim {}",
                space.dim
            )));
        }
        let mut amps = CVec::zeros(space.dim);
        amps[n] = c(1.0);
        Ok(Self { space, amps })
    }

    /// Superposition `(|0> + e^{i phase}|1>)/sqrt(2)` of the two lowest Fock levels.
    pub fn fock_superposition(space: HilbertSpace, phase: f64) -> Self {
        let mut amps = CVec::zeros(space.dim);
        amps[0] = c(std::f64::consts::FRAC_1_SQRT_2);
        amps[1] = C64::from_polar(std::f64::consts::FRAC_1_SQRT_2, phase);
        Self { space, amps }
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.amps.norm();
        if n > 0.0 {
            self.amps.unscale_mut(n);
        }
        self
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.space.check(&other.space)?;
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn expect(&self, op: &Operator) -> Result<C64> {
        self.space.check(&op.space)?;
        Ok(self.amps.dotc(&(&op.mat * &self.amps)))
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            space: self.space,
            mat: &self.amps * self.amps.adjoint(),
            subnormalized: false,
        }
    }

    pub fn add_scaled(&self, k: C64, other: &StateVector) -> Result<StateVector> {
        self.space.check(&other.space)?;
        Ok(StateVector {
            space: self.space,
            amps: &self.amps + &other.amps * k,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: HilbertSpace,
    mat: CMat,
    subnormalized: bool,
}

impl DensityMatrix {
    /// Validated density matrix: Hermitian within `1e-10`, unit trace within
    /// `1e-8`, eigenvalues above `-1e-8`.
    pub fn new(space: HilbertSpace, mat: CMat) -> Result<Self> {
        let rho = Self {
            space,
            mat,
            subnormalized: false,
        };
        rho.validate()?;
        Ok(rho)
    }

    /// Density matrix whose trace may drop below one (leakage accounting).
    pub fn new_subnormalized(space: HilbertSpace, mat: CMat) -> Result<Self> {
        let rho = Self {
            space,
            mat,
            subnormalized: true,
        };
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps a matrix produced by a trusted trace-preserving map without checks.
    pub(crate) fn from_matrix_unchecked(space: HilbertSpace, mat: CMat) -> Self {
        Self {
            space,
            mat,
            subnormalized: false,
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.space.dim;
        if self.mat.nrows() != d || self.mat.ncols() != d {
            return Err(Error::DimensionMismatch(d, self.mat.nrows()));
        }
        let herm = linalg::max_abs(&(&self.mat - self.mat.adjoint()));
        if herm > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "density matrix not Hermitian ({herm:.2e})"
            )));
        }
        let tr = self.trace();
        if self.subnormalized {
            if !(-1e-8..=1.0 + 1e-8).contains(&tr) {
                return Err(Error::InvalidParameter(format!(
                    "trace {tr} outside [0, 1]"
                )));
            }
        } else if (tr - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!("trace {tr} != 1")));
        }
        let min = self.min_eigenvalue();
        if min < -1e-8 {
            return Err(Error::InvalidParameter(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn is_subnormalized(&self) -> bool {
        self.subnormalized
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.mat).re
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.mat, &self.mat).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::herm_eigen(&self.mat).0[0]
    }

    pub fn expect(&self, op: &Operator) -> Result<C64> {
        self.space.check(&op.space)?;
        Ok(linalg::trace_product(&self.mat, &op.mat))
    }

    pub fn population(&self, n: usize) -> f64 {
        self.mat[(n, n)].re
    }

    /// `U rho U†`.
    pub fn conjugate_by(&self, u: &Operator) -> Result<Self> {
        self.space.check(&u.space)?;
        Ok(Self {
            space: self.space,
            mat: &u.mat * &self.mat * u.mat.adjoint(),
            subnormalized: self.subnormalized,
        })
    }

    pub fn mix(&self, w: f64, other: &DensityMatrix) -> Result<Self> {
        self.space.check(&other.space)?;
        Ok(Self {
            space: self.space,
            mat: self.mat.scale(w) + other.mat.scale(1.0 - w),
            subnormalized: self.subnormalized || other.subnormalized,
        })
    }
}

/// Ladder operator `a` with `a[n-1, n] = sqrt(n)`.
pub fn annihilation(space: HilbertSpace) -> Operator {
    let d = space.dim;
    let mut m = CMat::zeros(d, d);
    for n in 1..d {
        m[(n - 1, n)] = c((n as f64).sqrt());
    }
    Operator { space, mat: m }
}

pub fn creation(space: HilbertSpace) -> Operator {
    annihilation(space).dagger()
}

pub fn number(space: HilbertSpace) -> Operator {
    let d = space.dim;
    Operator {
        space,
        mat: CMat::from_diagonal(&CVec::from_iterator(d, (0..d).map(|n| c(n as f64)))),
    }
}

/// Photon-number parity `diag((-1)^n)`.
pub fn parity(space: HilbertSpace) -> Operator {
    let d = space.dim;
    Operator {
        space,
        mat: CMat::from_diagonal(&CVec::from_iterator(
            d,
            (0..d).map(|n| c(if n % 2 == 0 { 1.0 } else { -1.0 })),
        )),
    }
}

/// Unnormalized coherent amplitudes `e^{-|a|^2/2} a^n / sqrt(n!)`.
fn coherent_amplitudes(alpha: C64, dim: usize) -> CVec {
    let mut amps = CVec::zeros(dim);
    let mut cur = c((-alpha.norm_sqr() / 2.0).exp());
    for n in 0..dim {
        amps[n] = cur;
        cur *= alpha / ((n + 1) as f64).sqrt();
    }
    amps
}

/// Norm deficit `sum_{n>=dim} |c_n|^2` of a truncated coherent state.
///
/// The tail is summed from its far end so the result is monotone in `dim`
/// even where it drops below machine epsilon.
pub fn coherent_truncation_error(alpha: C64, dim: usize) -> f64 {
    let mean = alpha.norm_sqr();
    let mut term = (-mean).exp();
    let mut tail_terms = Vec::new();
    let mut n = 0usize;
    loop {
        if n >= dim {
            if term == 0.0 || (n as f64 > mean + 1.0 && term < 1e-300) {
                break;
            }
            tail_terms.push(term);
        }
        n += 1;
        term *= mean / n as f64;
        if n > dim + 10_000 {
            break;
        }
    }
    tail_terms.iter().rev().sum()
}

pub fn coherent_state(alpha: C64, space: HilbertSpace) -> Result<StateVector> {
    space.require_amplitude(alpha.norm())?;
    Ok(StateVector {
        space,
        amps: coherent_amplitudes(alpha, space.dim),
    }
    .normalized())
}

/// Relative phase `k` of the cat superposition `|alpha> + k|-alpha>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CatPhase {
    Plus,
    Minus,
    PlusI,
    MinusI,
}

impl CatPhase {
    pub fn coefficient(self) -> C64 {
        match self {
            CatPhase::Plus => c(1.0),
            CatPhase::Minus => c(-1.0),
            CatPhase::PlusI => C64::new(0.0, 1.0),
            CatPhase::MinusI => C64::new(0.0, -1.0),
        }
    }
}

/// `(|alpha> + k|-alpha>)` normalized numerically (finite-alpha overlap included).
pub fn cat_state(alpha: C64, k: CatPhase, space: HilbertSpace) -> Result<StateVector> {
    let plus = coherent_state(alpha, space)?;
    let minus = coherent_state(-alpha, space)?;
    let psi = plus.add_scaled(k.coefficient(), &minus)?;
    if psi.norm() < 1e-12 {
        return Err(Error::DegenerateBasis(psi.norm()));
    }
    Ok(psi.normalized())
}

fn displacement_generator(beta: C64, space: HilbertSpace) -> CMat {
    let a = annihilation(space).mat;
    a.adjoint() * beta - a * beta.conj()
}

/// `D(beta) = exp(beta a† - beta* a)` by Padé scaling and squaring.
pub fn displacement(beta: C64, space: HilbertSpace) -> Result<Operator> {
    space.require_amplitude(beta.norm())?;
    Ok(Operator {
        space,
        mat: linalg::expm(&displacement_generator(beta, space)),
    })
}

/// Same operator through the eigen-decomposition of the Hermitian `i G`.
pub fn displacement_eig(beta: C64, space: HilbertSpace) -> Result<Operator> {
    space.require_amplitude(beta.norm())?;
    let g = displacement_generator(beta, space) * linalg::I;
    // exp(G) = exp(-i (iG))
    Ok(Operator {
        space,
        mat: linalg::unitary_from_hermitian(&g, 1.0),
    })
}

/// Either a pure or a mixed state, for fidelity evaluation.
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a StateVector),
    Mixed(&'a DensityMatrix),
}

impl<'a> From<&'a StateVector> for StateRef<'a> {
    fn from(v: &'a StateVector) -> Self {
        StateRef::Pure(v)
    }
}

impl<'a> From<&'a DensityMatrix> for StateRef<'a> {
    fn from(r: &'a DensityMatrix) -> Self {
        StateRef::Mixed(r)
    }
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`; `|<x|y>|^2` for pure states.
pub fn state_fidelity<'a, 'b>(
    x: impl Into<StateRef<'a>>,
    y: impl Into<StateRef<'b>>,
) -> Result<f64> {
    let f = match (x.into(), y.into()) {
        (StateRef::Pure(a), StateRef::Pure(b)) => a.inner(b)?.norm_sqr(),
        (StateRef::Pure(a), StateRef::Mixed(r)) | (StateRef::Mixed(r), StateRef::Pure(a)) => {
            a.space.check(&r.space)?;
            a.amps.dotc(&(&r.mat * &a.amps)).re
        }
        (StateRef::Mixed(r), StateRef::Mixed(s)) => {
            r.space.check(&s.space)?;
            let sr = linalg::psd_sqrt(&r.mat);
            let inner = &sr * &s.mat * &sr;
            let (vals, _) = linalg::herm_eigen(&inner);
            // Round-off eigenvalues (~1e-17) would otherwise contribute ~1e-8 each.
            let cut = 1e-13 * vals.last().copied().unwrap_or(0.0).max(0.0);
            let t: f64 = vals.iter().filter(|&&v| v > cut).map(|v| v.sqrt()).sum();
            t * t
        }
    };
    Ok(f.clamp(0.0, 1.0))
}
