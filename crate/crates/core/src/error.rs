use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Fock truncation too small: dim {dim} < {required} required for |alpha| = {alpha}")]
    TruncationTooSmall {
        dim: usize,
        required: usize,
        alpha: f64,
    },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pump amplitude {0} rad outside the small-pump expansion (|eps_p| < 0.5)")]
    PumpTooStrong(f64),

    #[error("no potential minimum found in the search window")]
    NoMinimumFound,

    #[error("negative curvature {0} at the potential minimum")]
    NegativeCurvature(f64),

    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("singular matrix")]
    SingularMatrix,

    #[error("step size underflow at t = {t} ns (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("tolerance not met after {steps} steps")]
    ToleranceNotMet { steps: usize },

    #[error("unphysical decoherence model: {0}")]
    UnphysicalModel(String),

    #[error(
        "eigenbranch continuation ambiguous at grid index {index} (best overlap {overlap:.3})"
    )]
    ContinuationAmbiguous { index: usize, overlap: f64 },

    #[error("no interior minimum in the scan window")]
    NoMinimumInWindow,

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("basis states too close to orthonormalize (overlap {0:.3e} from 1)")]
    DegenerateBasis(f64),

    #[error("input p-vectors are linearly dependent")]
    SingularInputSet,
}
