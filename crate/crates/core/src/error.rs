use thiserror::Error;

/// Coarse grouping of errors, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorFamily {
    Usage,
    Parse,
    Precondition,
    Numerical,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("cut site {cut} outside window [{min}, {max})")]
    CutOutsideWindow { cut: i64, min: i64, max: i64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("modulation parameter has modulus {0}, expected 1")]
    NonUnitModulus(f64),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid anti-unitary: {0}")]
    InvalidAntiUnitary(String),
    #[error("inconsistent symmetry data: {0}")]
    InconsistentSymmetryData(String),
    #[error("operator is not self-adjoint (residual {0:.3e})")]
    NotSelfAdjoint(f64),
    #[error("operator is not chiral (residual {0:.3e})")]
    NotChiral(f64),
    #[error("chiral splitting needs an even fiber, got {0}")]
    OddFiber(usize),
    #[error("subspace is not invariant under the anti-unitary (residual {0:.3e})")]
    NotInvariant(f64),
    #[error("quaternionic subspace has odd dimension {0}")]
    OddQuaternionicDimension(usize),
    #[error("kernel dimension {ker} does not match cokernel dimension {coker}")]
    KernelCokernelMismatch { ker: usize, coker: usize },
    #[error("odd kernel dimension {0} obstructs a star-quaternionic extension")]
    OddKernelStarH(usize),
    #[error("symmetry relation violated (residual {0:.3e})")]
    SymmetryViolated(f64),
    #[error("relation violated (residual {0:.3e})")]
    RelationViolated(f64),

    #[error("spectral gap closed: eigenvalue {0:.3e} within tolerance of zero")]
    GapClosed(f64),
    #[error("eigenvalue {0:.6} sits at the spectral cut")]
    EigenvalueAtCut(f64),
    #[error("operator is not a self-adjoint unitary (residual {0:.3e})")]
    NotSau(f64),

    #[error("operator is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("operator is neither unitary nor a self-adjoint unitary")]
    NotUnitaryOrSau,
    #[error("trace {raw:.6} is not close to an integer")]
    NonIntegerTrace { raw: f64 },
    #[error("symbol is singular at momentum {k:.6} (|det| = {det_abs:.3e})")]
    SingularSymbol { k: f64, det_abs: f64 },
    #[error("winding {raw:.6} is not close to an integer")]
    NonIntegerWinding { raw: f64 },
    #[error("perturbation too large: {0}")]
    PerturbationTooLarge(String),
    #[error("edge operator is not essentially gapped: {0}")]
    NotEssentiallyGapped(String),

    #[error("no spectral gap on the unit circle and the operator is not a local perturbation of the identity")]
    NoSpectralGap,
    #[error("index is nonzero ({0})")]
    IndexNonzero(i64),
    #[error("odd Z2 index")]
    OddZ2Index,
    #[error("index mismatch: {left} vs {right}")]
    IndexMismatch { left: i64, right: i64 },
    #[error("class mismatch: {0}")]
    ClassMismatch(String),
    #[error("spectral subspace is trivial: {0}")]
    TrivialEigenspace(String),
    #[error("operator is not Lambda-non-trivial: {0}")]
    NotLambdaNontrivial(String),
    #[error("Z2 invariants differ: {left} vs {right}")]
    Z2Mismatch { left: u8, right: u8 },
    #[error("conjugating operator is numerically singular (min singular value {0:.3e})")]
    GDegenerate(f64),
    #[error("kernel dimensions differ: {0}")]
    KernelDimMismatch(String),
    #[error("no path exists in the finite truncation: {0}")]
    Obstructed(String),

    #[error("pencil not invertible on the unit circle: node {node}, min singular value {sigma:.3e}")]
    CircleNotInvertible { node: usize, sigma: f64 },
    #[error("operator is not invertible (min singular value {0:.3e})")]
    NotInvertible(f64),
    #[error("per-site ranks are not constant: {0:?}")]
    RankNotConstant(Vec<usize>),
    #[error("window size {sites} not divisible by block length {block}")]
    NotDivisible { sites: usize, block: usize },
    #[error("hopping range {range} exceeds block length {block}")]
    HoppingTooLong { range: usize, block: usize },
    #[error("operator is not of the diagonal-plus-shift form: {0}")]
    NotAbrForm(String),

    #[error("unsupported class: {0}")]
    UnsupportedClass(String),
    #[error("perturbation cannot respect the class: {0}")]
    SymmetryUnpreservable(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("malformed entries: {0}")]
    MalformedEntries(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(String),
    #[error("path verification failed: {0}")]
    PathVerificationFailed(String),
}

impl Error {
    pub fn family(&self) -> ErrorFamily {
        use Error::*;
        match self {
            Usage(_) | Io(_) => ErrorFamily::Usage,
            SchemaMismatch(_) | MalformedEntries(_) => ErrorFamily::Parse,
            NonIntegerTrace { .. }
            | NonIntegerWinding { .. }
            | SingularSymbol { .. }
            | GDegenerate(_)
            | CircleNotInvertible { .. }
            | NonFinite { .. }
            | RankNotConstant(_)
            | PathVerificationFailed(_) => ErrorFamily::Numerical,
            _ => ErrorFamily::Precondition,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
