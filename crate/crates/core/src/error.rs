use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("form is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("kernel of q is not contained in kernel of p (p-norm^2 {0:e} on a q-null vector)")]
    KernelNotContained(f64),

    #[error("form is singular; a quotient must be requested explicitly")]
    SingularForm,

    #[error("direction has zero norm")]
    ZeroNormDirection,

    #[error("hypothesis does not apply: {0}")]
    NotInScope(String),

    #[error("hypothesis could not be certified: {0}")]
    HypothesisUnverifiable(String),

    #[error("hypothesis not certified: {0}")]
    HypothesisNotCertified(String),

    #[error("degree {got} exceeds the truncation degree {max}")]
    DegreeOverflow { got: usize, max: usize },

    #[error("element is not homogeneous")]
    NotHomogeneous,

    #[error("functional is not continuous with respect to the given form")]
    NotContinuous,

    #[error("functional is not positive on squares (moment matrix eigenvalue {0:e})")]
    NotSquarePositive(f64),

    #[error("infinite trace")]
    InfiniteTrace,

    #[error("even moment L(v^{power}) = {value:e} is negative")]
    NegativeEvenMoment { power: usize, value: f64 },

    #[error("{0} is not a subset of {1}")]
    NotSubset(String, String),

    #[error("kernel issue on {subset}: mass {mass:e} along a p-null direction")]
    KernelIssue { subset: String, mass: f64 },

    #[error("rank is not flat: {0}")]
    RankNotFlat(String),

    #[error("ill-conditioned basis extraction (condition number {0:e})")]
    IllConditioned(f64),

    #[error("orthonormal system is incomplete: {0}")]
    IncompleteSystem(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }

    /// True for failures caused by the numbers rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPsd(_)
                | Error::NotSquarePositive(_)
                | Error::RankNotFlat(_)
                | Error::IllConditioned(_)
                | Error::InfiniteTrace
                | Error::KernelNotContained(_)
                | Error::SingularForm
                | Error::NegativeEvenMoment { .. }
                | Error::KernelIssue { .. }
        )
    }
}
