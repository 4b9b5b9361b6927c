use crate::geometry::Point;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid stability index: {0}")]
    InvalidIndex(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {0:?} is not interior to the domain")]
    NotInterior(Point),

    #[error("point {point:?} is not on the boundary (signed distance {distance:e})")]
    NotOnBoundary { point: Point, distance: f64 },

    #[error("recurrent parameters n = {n}, alpha = {alpha}: the whole-space Green function is infinite")]
    Recurrent { n: usize, alpha: f64 },

    #[error("approach sequence leaves the domain at level {level}; shrink t0")]
    ApproachEscapes { level: usize },

    #[error("resolution {got} is too small (minimum {min})")]
    ResolutionTooSmall { got: usize, min: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge: last iterate {last:e}, previous {previous:e}")]
    QuadratureNonConvergence { last: f64, previous: f64 },

    #[error("tail remainder {remainder:e} exceeds tolerance {tolerance:e} at truncation radius {radius}")]
    TailRemainder { remainder: f64, tolerance: f64, radius: f64 },

    #[error("walk-on-spheres exceeded {max_steps} steps (trajectory of {} points recorded)", trajectory.len())]
    MaxStepsExceeded { max_steps: usize, trajectory: Vec<Point> },

    #[error("test function growth exponent {exponent} is not admissible for alpha = {alpha}: {reason}")]
    Inadmissible { exponent: f64, alpha: f64, reason: &'static str },

    #[error("ratio sequence does not contract (observed factor {factor:.3} after {levels} levels)")]
    NonContraction { factor: f64, levels: usize },

    #[error("rejection envelope acceptance {acceptance:e} below 1e-4 (h(p) = {h_at_point:e}, envelope mass = {envelope_mass:e})")]
    EnvelopeFailure { acceptance: f64, h_at_point: f64, envelope_mass: f64 },

    #[error("(D, q) is not gaugeable: spectral radius estimate {spectral_radius:.4}")]
    NotGaugeable { spectral_radius: f64 },

    #[error("Kato integral diverges: singularity exponent {exponent} >= alpha = {alpha}")]
    DivergentKato { exponent: f64, alpha: f64 },

    #[error("input is not harmonic in D: singular part {value:e} at probe {probe:?} is below -3 standard errors ({std_error:e})")]
    NegativeSingularPart { probe: Point, value: f64, std_error: f64 },

    #[error("design matrix is rank deficient: mesh too fine for the probe count")]
    RankDeficient,

    #[error("h-function rejected: {0}")]
    HarmonicityGate(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("operator cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by the input rather than by a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidIndex(_)
                | Error::DimensionMismatch { .. }
                | Error::InvalidDomain(_)
                | Error::InvalidArgument(_)
                | Error::NotInterior(_)
                | Error::NotOnBoundary { .. }
                | Error::Recurrent { .. }
                | Error::ResolutionTooSmall { .. }
                | Error::Unsupported(_)
                | Error::Inadmissible { .. }
                | Error::DivergentKato { .. }
                | Error::Config(_)
                | Error::Json(_)
        )
    }
}
