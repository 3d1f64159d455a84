use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
#[non_exhaustive]
pub enum Error {
    NotSymmetric { asymmetry: f64 },
    NotPsd { min_eigenvalue: f64 },
    DimensionMismatch { expected: usize, found: usize },
    EmptySet,
    /// The point set does not span the space it lives in.
    Degenerate { rank: usize, dim: usize },
    NoConvergence { iterations: usize, gap: f64 },
    ResidualTooLarge { residual: f64, tol: f64 },
    HorizonTooSmall { n: usize, required: f64 },
    SingularCovariance,
    /// A learning-rate precondition `eta * |<a, z~>| <= bound` failed.
    RangeViolation { value: f64, bound: f64 },
    DomainEscape { excess: f64 },
    NumericalBlowup { margin: f64 },
    SequenceExhausted { round: usize, len: usize },
    InfeasibleLoss { round: usize, value: f64 },
    InvalidParameter(&'static str),
    /// `feedback` was called without a preceding `select`.
    NoPendingAction,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotSymmetric { asymmetry } => {
                write!(f, "matrix is not symmetric (asymmetry {asymmetry:e})")
            }
            Error::NotPsd { min_eigenvalue } => {
                write!(f, "matrix is not PSD (eigenvalue {min_eigenvalue:e})")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::EmptySet => f.write_str("empty point set"),
            Error::Degenerate { rank, dim } => {
                write!(f, "degenerate point set: rank {rank} in dimension {dim}")
            }
            Error::NoConvergence { iterations, gap } => {
                write!(f, "no convergence after {iterations} iterations (gap {gap:e})")
            }
            Error::ResidualTooLarge { residual, tol } => {
                write!(f, "John decomposition residual {residual:e} exceeds {tol:e}")
            }
            Error::HorizonTooSmall { n, required } => {
                write!(f, "horizon n = {n} too small for theorem parameters (needs n >= {required:.3})")
            }
            Error::SingularCovariance => f.write_str("singular action covariance"),
            Error::RangeViolation { value, bound } => {
                write!(f, "estimate range violated: {value:e} > {bound:e}")
            }
            Error::DomainEscape { excess } => {
                write!(f, "iterate left the action domain by {excess:e}")
            }
            Error::NumericalBlowup { margin } => {
                write!(f, "estimator scale blew up (1 - |a| = {margin:e})")
            }
            Error::SequenceExhausted { round, len } => {
                write!(f, "loss sequence of length {len} exhausted at round {round}")
            }
            Error::InfeasibleLoss { round, value } => {
                write!(f, "loss vector at round {round} outside the loss set (norm {value})")
            }
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::NoPendingAction => f.write_str("feedback without a selected action"),
        }
    }
}

impl core::error::Error for Error {}
