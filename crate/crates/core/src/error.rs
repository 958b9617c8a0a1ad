use thiserror::Error;

pub type Result<T> = std::result::Result<T, CvError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CvError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("sector with {modes} modes and {photons} photons is too large ({size:.3e} states)")]
    SectorTooLarge { modes: usize, photons: usize, size: f64 },
    #[error("size {size} exceeds the limit {limit} for {what}")]
    SizeLimit { what: &'static str, size: usize, limit: usize },
    #[error("state is not normalized (norm^2 = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },
    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max deviation {deviation:.3e})")]
    NotSymmetric { deviation: f64 },
    #[error("matrix is singular or ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },
    #[error("density evaluated to {value:.3e}, below the rounding allowance")]
    NegativeDensity { value: f64 },
    #[error("contour passes through or near a zero after {retries} retries")]
    ContourHitsZero { retries: usize },
    #[error("argument-principle integral {value} is not close to an integer")]
    NonIntegerResidue { value: f64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("did not converge: {0}")]
    NonConvergence(String),
    #[error("rejection sampler acceptance rate {rate:.3e} is too low")]
    AcceptanceTooLow { rate: f64 },
}
