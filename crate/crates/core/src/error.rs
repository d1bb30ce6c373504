use thiserror::Error;

/// Errors raised by the solvers, auditors and the run driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("tensor dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("invalid potential parameters: {0}")]
    InvalidPotential(String),
    #[error("subgradient requested at a kink of the unmollified profile (radius {0})")]
    NonSmoothPoint(f64),
    #[error("conjugate supremum not attained inside the tabulated range (argument {0})")]
    ConjugateOverflow(f64),
    #[error("invalid boundary specification: {0}")]
    InvalidBoundarySpec(String),
    #[error("net boundary flux {0} is negative")]
    NegativeFlux(f64),
    #[error("mean initial density {0} is not below 1")]
    MassExceedsOne(f64),
    #[error("nonzero initial momentum on vacuum cell {0}")]
    MomentumOnVacuum(usize),
    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),
    #[error("transport operator lost its M-matrix sign pattern at row {0}")]
    NonMonotoneScheme(usize),
    #[error("maximum principle violated: sup rho {sup} exceeds bound {bound}")]
    MaxPrincipleViolated { sup: f64, bound: f64 },
    #[error("density has a vacuum cell, mass matrix is singular")]
    SingularMassMatrix,
    #[error("Newton update for the viscous term diverged")]
    NewtonDivergence,
    #[error("Picard iteration stalled after {iters} iterations (increment {increment})")]
    FixedPointStall { iters: usize, increment: f64 },
    #[error("adiabatic exponent {0} must exceed 1")]
    AlphaTooSmall(f64),
    #[error("negative Reynolds defect {0} on block {1}")]
    NegativeDefect(f64, usize),
    #[error("mass ledger failed to close: {0}")]
    MassLedgerOpen(f64),
    #[error("Fenchel-Young gap {0:e} below the floor")]
    FenchelYoungViolated(f64),
    #[error("config error: {0}")]
    Config(String),
    #[error("artifact error: {0}")]
    Artifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Hard numerical assertion failures, as opposed to solver breakdowns.
    pub fn is_hard_assertion(&self) -> bool {
        matches!(
            self,
            Error::MaxPrincipleViolated { .. }
                | Error::MassLedgerOpen(_)
                | Error::FenchelYoungViolated(_)
                | Error::NegativeDefect(..)
                | Error::NonMonotoneScheme(_)
        )
    }
}
