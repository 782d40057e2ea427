//! Crate-wide error type and exit-code mapping.

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("jet order {requested} exceeds cap {cap}")]
    Order { requested: usize, cap: usize },

    #[error("orbit escaped the dynamical domain at step {step} (|z| = {modulus:.3e})")]
    Escape {
        step: usize,
        modulus: f64,
        /// Iterates computed before the escape, including the starting point.
        orbit: Vec<Complex64>,
    },

    #[error("{op}: Newton failed to converge (residual {residual:.3e} after {iters} iterations)")]
    NoConvergence {
        op: &'static str,
        residual: f64,
        iters: usize,
    },

    #[error("cycle system Jacobian is singular (multiplier near 1); use the parabolic-aware solver")]
    SingularJacobian,

    #[error("augmented parabolic system has a degenerate Jacobian (possible transversality failure)")]
    DegenerateJacobian,

    #[error("marked value was not attracted to the cycle within {budget} iterations")]
    NotAttracted { budget: usize },

    #[error("transversality report is undefined for superattracting cycles")]
    SuperattractingUnsupported,

    #[error("fixed point is not hyperbolic attracting (|multiplier| = {modulus:.6})")]
    NotHyperbolic { modulus: f64 },

    #[error("cohomology compatibility condition violated (residual {residual:.3e})")]
    HypcohViolated { residual: f64 },

    #[error("cycle is not parabolic")]
    NotParabolic,

    #[error("degenerate parabolic point: leading coefficient magnitude {magnitude:.3e}")]
    DegenerateParabolic { magnitude: f64 },

    #[error("motions have mismatched supports or parameter grids")]
    ShapeMismatch,

    #[error("lift residual is below the noise floor everywhere; motion is numerically invariant")]
    ResidualUnderflow,

    #[error("lift solution jumped branches at support point {index} (moved {distance:.3e} > {radius:.3e})")]
    BranchJump {
        index: usize,
        distance: f64,
        radius: f64,
    },

    #[error("deformed parameter left the parameter domain")]
    ParameterOutsideW,

    #[error("orbit derivative vanished at step {step}; series undefined")]
    DerivativeVanished { step: usize },

    #[error("family is not flagged odd")]
    NotOdd,

    #[error("orbit census does not match the expected pattern: {detail}")]
    CensusMismatch { detail: String },

    #[error("fixed-point count mismatch: {detail}")]
    CountMismatch { detail: String },

    #[error("degenerate fold: {detail}")]
    DegenerateFold { detail: String },

    #[error("{op}: cross-check failed: {detail}")]
    CrossCheck { op: &'static str, detail: String },

    #[error("unknown family id '{0}'")]
    UnknownFamily(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit code for the CLI: 2 for domain/validation errors,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain { .. }
            | Error::Order { .. }
            | Error::UnknownFamily(_)
            | Error::Config(_)
            | Error::NotOdd
            | Error::ShapeMismatch
            | Error::ParameterOutsideW
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
