use thiserror::Error;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Invalid input parameters or configuration.
    Config,
    /// The physics does not admit the requested quantity (no bound state,
    /// Markov regime violated, ...).
    Physics,
    /// A numerical run produced results that cannot be trusted.
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("wavevector k = {k} lies outside the first Brillouin zone [-pi, pi]")]
    OutsideBrillouinZone { k: f64 },

    #[error("upper band diverges at k = 0")]
    UpperBandDivergence,

    #[error("unsupported band edge: {0}")]
    UnsupportedBandEdge(String),

    #[error("eigen-solver failure: {0}")]
    EigenSolver(String),

    #[error("capacitance matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("{n_modes} modes per band exceeds the configured maximum {max}")]
    DimensionOverflow { n_modes: usize, max: usize },

    #[error("stability guard violated: {quantity} = {value:.3e} > {limit}")]
    StabilityGuard {
        quantity: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("norm drift {drift:.3e} at t = {t:.6e} exceeds tolerance {tolerance:.1e}")]
    NormDrift { t: f64, drift: f64, tolerance: f64 },

    #[error("non-finite amplitude at t = {t:.6e}")]
    NonFinite { t: f64 },

    #[error("decay-fit window [{t0}, {t1}] is not monotonically decreasing")]
    NonMonotonicWindow { t0: f64, t1: f64 },

    #[error("decay-fit window underflow: {0}")]
    FitWindow(String),

    #[error("steady population not converged: tail average {value:.6} drifts by {drift:.2e}")]
    TailNotConverged { value: f64, drift: f64 },

    #[error("population contrast {contrast:.3} too low for a Rabi-frequency estimate")]
    LowContrast { contrast: f64 },

    #[error("Markov approximation invalid: {0}")]
    MarkovInvalid(String),

    #[error("emitter frequency {omega_q} is not on the gap side of the {edge} band edge")]
    NotInGap { omega_q: f64, edge: String },

    #[error("pole of the integrand lies on the integration contour")]
    PoleOnContour,

    #[error("closed-form branch violated: Delta0 - sigma*x = {0:e} <= 0")]
    BranchViolation(f64),

    #[error("no bound state resolved on the search bracket [{lo:e}, {hi:e}]")]
    NoBoundState { lo: f64, hi: f64 },

    #[error("degenerate residue: |1 + dSigma/ds| = {0:e}")]
    DegenerateResidue(f64),

    #[error("quadrature did not converge: estimated error {0:e}")]
    Quadrature(f64),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            InvalidParameter { .. }
            | OutsideBrillouinZone { .. }
            | UnsupportedBandEdge(_)
            | DimensionOverflow { .. }
            | StabilityGuard { .. } => ErrorKind::Config,
            UpperBandDivergence
            | MarkovInvalid(_)
            | NotInGap { .. }
            | PoleOnContour
            | BranchViolation(_)
            | NoBoundState { .. }
            | DegenerateResidue(_)
            | NonMonotonicWindow { .. }
            | LowContrast { .. } => ErrorKind::Physics,
            EigenSolver(_)
            | NotPositiveSemidefinite { .. }
            | NormDrift { .. }
            | NonFinite { .. }
            | FitWindow(_)
            | TailNotConverged { .. }
            | Quadrature(_) => ErrorKind::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
