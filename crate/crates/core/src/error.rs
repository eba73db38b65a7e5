use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("laplacian of |z|^{gamma} is singular at the origin")]
    OriginSingularity { gamma: f64 },
    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },
    #[error("root not bracketed on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("lattice must contain the origin")]
    MissingOrigin,
    #[error("duplicate lattice point at index {0}")]
    DuplicatePoint(usize),
    #[error("lattice is not rho-separated (delta_sep = {0:.3e})")]
    Separation(f64),
    #[error("point {0} lies on the lattice")]
    OnLattice(num_complex::Complex64),
    #[error("tail radius {tail_r} too small for |z| = {z_abs} (need >= 4|z|)")]
    TailTooSmall { tail_r: f64, z_abs: f64 },
    #[error("outside the safe truncation region: {0}")]
    OutsideGuard(String),
    #[error("insufficient sample spread: {0}")]
    SampleSpread(String),
    #[error("sigma' cross-check failed at index {index}: relative gap {rel:.3e}")]
    DerivativeMismatch { index: usize, rel: f64 },
    #[error("multiplier table: {0}")]
    Table(String),
    #[error("power iteration stagnated: {0}")]
    Stagnation(String),
    #[error("derivative estimate unstable: {0}")]
    Unstable(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) | Error::Json(_) | Error::InvalidArgument(_) | Error::MissingOrigin
            | Error::DuplicatePoint(_) | Error::Table(_) => 2,
            Error::Io(_) | Error::Csv(_) => 1,
            _ => 3,
        }
    }
}
